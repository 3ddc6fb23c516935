// Acceptance suite: end-to-end behavioral checks of the library and CLI.
// Each check prints one PASS/FAIL line; the process exits nonzero if any
// check fails. Run a subset by passing check numbers as arguments.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "hanet/checkpoint.hpp"
#include "hanet/eval.hpp"
#include "hanet/trainer.hpp"

using namespace hanet;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

struct CheckResult {
  bool pass = true;
  std::string detail;
};

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.variant = Variant::Han;
  cfg.direction = Direction::LR;
  cfg.d = 4;
  cfg.d_s = 3;
  cfg.d_d = 3;
  cfg.vocab_size = 12;
  cfg.n_classes = 3;
  cfg.dropout_rate = 0.0;
  return cfg;
}

DocView random_doc(int n_sent, int n_tok, int vocab, int label, SeededRng& rng) {
  Document d;
  d.label = label;
  for (int i = 0; i < n_sent; ++i) {
    std::vector<int> s;
    for (int t = 0; t < n_tok; ++t)
      s.push_back(2 + static_cast<int>(rng.next_below(vocab - 2)));
    d.sentences.push_back(std::move(s));
  }
  return make_view(d);
}

Tensor logits_of(const ModelConfig& cfg, const ModelParams& p, const DocView& d) {
  return forward_document(p, cfg, d).logits;
}

char fmt_buf[512];
template <typename... Args>
std::string strf(const char* fmt, Args... args) {
  std::snprintf(fmt_buf, sizeof fmt_buf, fmt, args...);
  return fmt_buf;
}

// --------------------------------------------------------------------------
// 1. Gradient correctness across all ten variant configurations
// --------------------------------------------------------------------------
CheckResult check_gradients() {
  SeededRng rng(2001);
  DocView doc = random_doc(3, 4, 12, 1, rng);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, cfg] : standard_variants(toy_config())) {
    ModelGradCheck r = model_grad_check(cfg, 7, {doc}, 1e-5);
    if (r.max_error > worst) {
      worst = r.max_error;
      worst_name = name;
    }
  }
  CheckResult res;
  res.pass = worst < 1e-4;
  res.detail = strf("max rel err %.2e (%s) across 10 configs, tol 1e-4",
                    worst, worst_name.c_str());
  return res;
}

// --------------------------------------------------------------------------
// 2. Published multiplication accounting
// --------------------------------------------------------------------------
CheckResult check_matmul_counts() {
  ModelConfig base = toy_config();
  auto cfg = [&](Variant v, Direction d, bool gated) {
    ModelConfig c = base;
    c.variant = v;
    c.direction = d;
    c.gated = gated;
    return c;
  };
  struct Row {
    Variant v;
    Direction d;
    bool gated;
    int want;
  };
  const std::vector<Row> rows = {
      {Variant::Han, Direction::LR, false, 26},
      {Variant::CahanSum, Direction::LR, false, 27},
      {Variant::CahanSum, Direction::BI, false, 28},
      {Variant::CahanSum, Direction::LR, true, 29},
      {Variant::CahanSum, Direction::BI, true, 32},
      {Variant::CahanRnn, Direction::LR, false, 27},
      {Variant::CahanRnn, Direction::BI, false, 28},
      {Variant::CahanRnn, Direction::LR, true, 29},
      {Variant::CahanRnn, Direction::BI, true, 32},
  };
  CheckResult res;
  for (const auto& r : rows) {
    const int got = count_matmuls(cfg(r.v, r.d, r.gated));
    if (got != r.want) {
      res.pass = false;
      res.detail = strf("%s %s gated=%d: got %d, want %d",
                        to_string(r.v).c_str(), to_string(r.d).c_str(),
                        int(r.gated), got, r.want);
      return res;
    }
  }
  // deltas vs HAN: +1 / +2 / +3 / +6
  const int han = count_matmuls(cfg(Variant::Han, Direction::LR, false));
  const bool deltas =
      count_matmuls(cfg(Variant::CahanSum, Direction::LR, false)) - han == 1 &&
      count_matmuls(cfg(Variant::CahanSum, Direction::BI, false)) - han == 2 &&
      count_matmuls(cfg(Variant::CahanSum, Direction::LR, true)) - han == 3 &&
      count_matmuls(cfg(Variant::CahanSum, Direction::BI, true)) - han == 6;
  res.pass = deltas;
  res.detail = "26 / 27 / 28 / 29 / 32 with deltas +1 +2 +3 +6";
  return res;
}

// --------------------------------------------------------------------------
// 3. Degenerate equivalence on single-sentence documents
// --------------------------------------------------------------------------
CheckResult check_degenerate_equivalence() {
  ModelConfig han = toy_config();
  ModelParams phan = init_params(han, 31);
  SeededRng rng(2003);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    DocView doc =
        random_doc(1, 1 + static_cast<int>(rng.next_below(6)), 12, 0, rng);
    Tensor base = logits_of(han, phan, doc);
    for (Variant v : {Variant::CahanSum, Variant::CahanRnn}) {
      for (Direction dir : {Direction::LR, Direction::BI}) {
        for (Aggregation agg : {Aggregation::Sigma, Aggregation::Mu}) {
          if (v == Variant::CahanRnn && agg == Aggregation::Mu) continue;
          ModelConfig c = toy_config();
          c.variant = v;
          c.direction = dir;
          c.aggregation = agg;
          ModelParams p = init_params(c, 31);
          if (c.bi_streams()) p.sent_att_bwd = p.sent_att_fwd;  // shared weights
          worst = std::max(worst, max_abs_diff(base, logits_of(c, p, doc)));
        }
      }
    }
  }
  CheckResult res;
  res.pass = worst <= 1e-12;
  res.detail = strf("100 docs x 6 ungated context variants, max |dlogit| %.2e "
                    "(tol 1e-12)", worst);
  return res;
}

// --------------------------------------------------------------------------
// 4. Repetition dichotomy: HAN collapses, CAHAN-SUM-LR-Sigma separates
// --------------------------------------------------------------------------
CheckResult check_repetition_dichotomy() {
  ModelConfig han = toy_config();
  ModelConfig sum = toy_config();
  sum.variant = Variant::CahanSum;
  CheckResult res;
  double min_sep = 1e300;
  for (int n = 2; n <= 6; ++n) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SeededRng rng(seed * 101 + n);
      std::vector<int> sentence;
      for (int t = 0; t < 4; ++t)
        sentence.push_back(2 + static_cast<int>(rng.next_below(10)));
      Document d;
      d.label = 0;
      for (int i = 0; i < n; ++i) d.sentences.push_back(sentence);
      DocView doc = make_view(d);

      ForwardTrace th = forward_document(init_params(han, seed), han, doc);
      for (int i = 1; i < n; ++i) {
        if (!th.sentence_vectors_fwd[i].bit_equal(th.sentence_vectors_fwd[0])) {
          res.pass = false;
          res.detail = strf("HAN sentence vectors differ at N=%d seed=%llu", n,
                            static_cast<unsigned long long>(seed));
          return res;
        }
      }
      ForwardTrace ts = forward_document(init_params(sum, seed), sum, doc);
      for (int i = 1; i < n; ++i) {
        double l2 = 0.0;
        for (int j = 0; j < ts.sentence_vectors_fwd[i].rows(); ++j) {
          const double dd = ts.sentence_vectors_fwd[i].at(j, 0) -
                            ts.sentence_vectors_fwd[0].at(j, 0);
          l2 += dd * dd;
        }
        l2 = std::sqrt(l2);
        min_sep = std::min(min_sep, l2);
        if (!(l2 > 1e-6)) {
          res.pass = false;
          res.detail = strf("CAHAN-SUM L2 %.2e at N=%d seed=%llu pos=%d", l2, n,
                            static_cast<unsigned long long>(seed), i);
          return res;
        }
      }
    }
  }
  res.detail = strf("HAN bit-identical on N=2..6; CAHAN-SUM min L2 %.2e > 1e-6 "
                    "in 5/5 seeds", min_sep);
  return res;
}

// --------------------------------------------------------------------------
// 5. Padding invariance in evaluation mode
// --------------------------------------------------------------------------
CheckResult check_padding_invariance() {
  SeededRng rng(2005);
  double worst = 0.0;
  for (const auto& [name, cfg] : standard_variants(toy_config())) {
    ModelParams p = init_params(cfg, 13);
    for (int trial = 0; trial < 10; ++trial) {
      Document d;
      d.label = 0;
      const int n_sent = 1 + static_cast<int>(rng.next_below(4));
      int max_tok = 0;
      for (int i = 0; i < n_sent; ++i) {
        std::vector<int> s;
        const int T = 1 + static_cast<int>(rng.next_below(5));
        max_tok = std::max(max_tok, T);
        for (int t = 0; t < T; ++t)
          s.push_back(2 + static_cast<int>(rng.next_below(10)));
        d.sentences.push_back(std::move(s));
      }
      Tensor base = logits_of(cfg, p, make_view(d));
      Tensor padded =
          logits_of(cfg, p, make_padded_view(d, n_sent + 3, max_tok + 5));
      worst = std::max(worst, max_abs_diff(base, padded));
    }
  }
  CheckResult res;
  res.pass = worst <= 1e-10;
  res.detail = strf("10 variants x 10 docs, +3 PAD sentences +5 PAD tokens, "
                    "max |dlogit| %.2e (tol 1e-10)", worst);
  return res;
}

// --------------------------------------------------------------------------
// 6. Schedule exactness and momentum anticorrelation
// --------------------------------------------------------------------------
CheckResult check_schedule() {
  CyclicalSchedule s{0.1, 1.0, 0.85, 0.95, 60};
  CheckResult res;
  auto at0 = schedule_at(s, 0), at60 = schedule_at(s, 60), at120 = schedule_at(s, 120);
  if (at0.lr != 0.1 || at0.momentum != 0.95 || at60.lr != 1.0 ||
      at60.momentum != 0.85 || at120.lr != 0.1 || at120.momentum != 0.95) {
    res.pass = false;
    res.detail = "trough/peak/period values are not exact";
    return res;
  }
  double worst = 0.0;
  for (long i = 0; i < 240; ++i) {  // two full cycles
    auto lm = schedule_at(s, i);
    const double lr_frac = (lm.lr - s.lr_min) / (s.lr_max - s.lr_min);
    const double mom_frac =
        (lm.momentum - s.momentum_min) / (s.momentum_max - s.momentum_min);
    worst = std::max(worst, std::abs(lr_frac + mom_frac - 1.0));
  }
  res.pass = worst <= 1e-15;
  res.detail = strf("endpoints 0.85/0.95 exact; anticorrelation residual %.2e "
                    "over 2 cycles (tol 1e-15)", worst);
  return res;
}

// --------------------------------------------------------------------------
// 7. Desk-scale learning on the synthetic redundancy corpus
// --------------------------------------------------------------------------
std::vector<Document> numericalize_generated(const std::vector<LabeledText>& raw,
                                             const Vocab& vocab) {
  std::vector<Document> docs;
  docs.reserve(raw.size());
  for (const auto& r : raw) {
    Document d = numericalize(split_and_tokenize(r.text), vocab);
    d.label = r.label;
    docs.push_back(std::move(d));
  }
  return docs;
}

CheckResult check_desk_scale_learning() {
  GeneratorConfig gen;
  gen.n_classes = 4;
  gen.sentences_min = 4;
  gen.sentences_max = 8;
  gen.n_topics = 4;
  gen.filler_min = 1;
  gen.filler_max = 2;

  // Disjoint seeded streams per split.
  gen.seed = 901;
  gen.n_docs = 2000;
  auto raw_train = gen_redundancy_corpus(gen);
  gen.seed = 902;
  gen.n_docs = 250;
  auto raw_val = gen_redundancy_corpus(gen);
  gen.seed = 903;
  auto raw_test = gen_redundancy_corpus(gen);

  std::vector<std::vector<std::vector<std::string>>> train_tokens;
  for (const auto& r : raw_train) train_tokens.push_back(split_and_tokenize(r.text));
  Vocab vocab = build_vocab(train_tokens, 5);

  auto train_docs = numericalize_generated(raw_train, vocab);
  auto val_docs = numericalize_generated(raw_val, vocab);
  auto test_docs = numericalize_generated(raw_test, vocab);

  ModelConfig base;
  base.d = 32;
  base.d_s = 16;
  base.d_d = 16;
  base.vocab_size = vocab.size();
  base.n_classes = 4;
  base.dropout_rate = 0.2;

  TrainOptions opts;
  opts.batch_size = 32;
  opts.max_epochs = 50;
  opts.patience = 13;
  opts.half_cycle_epochs = 6;  // 12-epoch cycles
  opts.lr_min = 0.06;
  opts.lr_max = 0.6;

  auto run_model = [&](const ModelConfig& cfg, std::uint64_t seed) {
    TrainOptions o = opts;
    o.seed = seed;
    TrainState st = train(cfg, train_docs, val_docs, o);
    return evaluate_corpus(st.best_params, cfg, test_docs).accuracy;
  };

  ModelConfig han = base;
  han.variant = Variant::Han;
  ModelConfig cahan = base;
  cahan.variant = Variant::CahanSum;
  cahan.direction = Direction::BI;
  cahan.aggregation = Aggregation::Sigma;

  double han_sum = 0.0, cahan_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double ha = run_model(han, seed);
    const double ca = run_model(cahan, seed);
    han_sum += ha;
    cahan_sum += ca;
    per_seed += strf(" s%llu %.3f/%.3f", static_cast<unsigned long long>(seed),
                     ha, ca);
  }
  const double han_mean = han_sum / 5.0, cahan_mean = cahan_sum / 5.0;

  CheckResult res;
  res.pass = han_mean >= 0.90 && cahan_mean >= 0.90 &&
             cahan_mean >= han_mean - 0.02;
  res.detail =
      strf("mean test acc over 5 seeds: HAN %.3f, CAHAN-SUM-BI-sigma %.3f "
           "(needs both >= 0.90 and CAHAN >= HAN - 0.02); per-seed HAN/CAHAN:%s",
           han_mean, cahan_mean, per_seed.c_str());
  return res;
}

// --------------------------------------------------------------------------
// 8. Centroid boundedness (plus the sum-vs-centroid magnitude diagnostic)
// --------------------------------------------------------------------------
CheckResult check_centroid_bound() {
  SeededRng rng(2008);
  double sigma_norm_total = 0.0, mu_norm_total = 0.0;
  long samples = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(10));
    const int dim = 2 + static_cast<int>(rng.next_below(8));
    std::vector<Tensor> s;
    double max_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      Tensor v(dim, 1);
      for (int j = 0; j < dim; ++j) v.at(j, 0) = rng.uniform(-4, 4);
      max_norm = std::max(max_norm, l2_norm(v));
      s.push_back(std::move(v));
    }
    for (int i = 0; i < n; ++i) {
      const double mu = l2_norm(compute_context_sum(s, i, true, Aggregation::Mu));
      if (mu > max_norm + 1e-12) {
        CheckResult res;
        res.pass = false;
        res.detail = strf("centroid norm %.6f exceeds max vector norm %.6f", mu,
                          max_norm);
        return res;
      }
      sigma_norm_total +=
          l2_norm(compute_context_sum(s, i, true, Aggregation::Sigma));
      mu_norm_total += mu;
      ++samples;
    }
  }
  CheckResult res;
  res.detail = strf("1000 sequences: ||c_i(mu)|| <= max_j ||s_j|| everywhere; "
                    "diagnostic mean ||sigma||/||mu|| ratio %.2f",
                    sigma_norm_total / std::max(1e-12, mu_norm_total));
  return res;
}

// --------------------------------------------------------------------------
// 9. Byte-identical reruns of cmd_train
// --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing:" + p.string() + ">";
  return std::string(std::istreambuf_iterator<char>(in), {});
}

CheckResult check_reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "hanet_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string gen_cfg = R"({"n_docs": 250, "n_classes": 3,
    "sentences_min": 3, "sentences_max": 5, "n_topics": 3, "seed": 21,
    "split_train": 0.8, "split_val": 0.2, "split_test": 0.0})";
  std::ofstream(dir / "gen.json") << gen_cfg;

  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(HANET_CLI_PATH) + " " + args + " > " +
                            (dir / "cmd.log").string() + " 2>&1";
    return std::system(cmd.c_str());
  };
  CheckResult res;
  if (run("gen-data --config " + (dir / "gen.json").string() + " --out-dir " +
          (dir / "data").string()) != 0) {
    res.pass = false;
    res.detail = "gen-data failed: " + slurp(dir / "cmd.log");
    return res;
  }

  char cfg_buf[1024];
  std::snprintf(cfg_buf, sizeof cfg_buf,
                R"({"variant": "cahan-sum", "direction": "bi", "n_classes": 3,
    "d": 12, "d_s": 6, "d_d": 6, "dropout": 0.2, "batch_size": 16,
    "max_epochs": 8, "patience": 13, "lr_min": 0.05, "lr_max": 0.5, "seed": 5,
    "train_corpus": "%s", "val_corpus": "%s"})",
                (dir / "data/train.jsonl").string().c_str(),
                (dir / "data/val.jsonl").string().c_str());
  std::ofstream(dir / "train.json") << cfg_buf;

  for (const char* run_dir : {"a", "b"}) {
    if (run("train --config " + (dir / "train.json").string() + " --out-dir " +
            (dir / run_dir).string()) != 0) {
      res.pass = false;
      res.detail = "train failed: " + slurp(dir / "cmd.log");
      return res;
    }
  }
  const bool hist_same = slurp(dir / "a/history.tsv") == slurp(dir / "b/history.tsv");
  const bool ckpt_same =
      slurp(dir / "a/checkpoint.json") == slurp(dir / "b/checkpoint.json");
  res.pass = hist_same && ckpt_same;
  res.detail = strf("two cmd_train runs: history.tsv %s, checkpoint.json %s",
                    hist_same ? "byte-identical" : "DIFFER",
                    ckpt_same ? "byte-identical" : "DIFFER");
  fs::remove_all(dir);
  return res;
}

// --------------------------------------------------------------------------
// 10. Sequential-cost ordering of forward evaluation
// --------------------------------------------------------------------------
CheckResult check_runtime_ordering() {
  ModelConfig base;
  base.d = 64;
  base.d_s = 32;
  base.d_d = 32;
  base.vocab_size = 64;
  base.n_classes = 4;
  base.dropout_rate = 0.0;

  SeededRng rng(2010);
  DocView doc = random_doc(12, 8, base.vocab_size, 0, rng);
  const EvalOptions opts{2};
  const int iters = 100;

  auto time_variant = [&](Variant v, Direction dir) {
    ModelConfig cfg = base;
    cfg.variant = v;
    cfg.direction = dir;
    ModelParams p = init_params(cfg, 3);
    return median_forward_ms(p, cfg, doc, iters, opts);
  };

  const double han = time_variant(Variant::Han, Direction::LR);
  const double sum_lr = time_variant(Variant::CahanSum, Direction::LR);
  const double sum_bi = time_variant(Variant::CahanSum, Direction::BI);
  const double rnn_lr = time_variant(Variant::CahanRnn, Direction::LR);

  const bool ok = sum_lr >= han * 1.03 && sum_bi >= sum_lr * 1.03 &&
                  rnn_lr >= sum_lr * 1.03;
  CheckResult res;
  res.pass = ok;
  res.detail = strf("100-iter medians (ms): HAN %.3f <= SUM-LR %.3f <= SUM-BI "
                    "%.3f, SUM-LR <= RNN-LR %.3f (each with >= 3%% separation)",
                    han, sum_lr, sum_bi, rnn_lr);
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  struct Check {
    const char* name;
    CheckResult (*fn)();
  };
  const std::vector<Check> checks = {
      {"gradient-correctness", check_gradients},
      {"complexity-accounting", check_matmul_counts},
      {"degenerate-equivalence", check_degenerate_equivalence},
      {"repetition-dichotomy", check_repetition_dichotomy},
      {"padding-invariance", check_padding_invariance},
      {"schedule-exactness", check_schedule},
      {"desk-scale-learning", check_desk_scale_learning},
      {"centroid-boundedness", check_centroid_bound},
      {"train-reproducibility", check_reproducibility},
      {"sequential-cost-ordering", check_runtime_ordering},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int num = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(num)) continue;
    const auto start = clock_type::now();
    CheckResult r;
    try {
      r = checks[i].fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(clock_type::now() - start).count();
    std::printf("[%2d/10] %s %-26s %s (%.1fs)\n", num, r.pass ? "PASS" : "FAIL",
                checks[i].name, r.detail.c_str(), secs);
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  if (failures) std::printf("%d check(s) failed\n", failures);
  else std::printf("all checks passed\n");
  return failures == 0 ? 0 : 1;
}
