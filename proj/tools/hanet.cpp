// hanet: train, evaluate, and inspect hierarchical attention document
// classifiers (HAN and the context-aware CAHAN variants).
//
// Subcommands: train, eval, inspect, range-test, gen-data, count-matmuls,
// grad-check. Experiment settings live in a flat JSON config file; command
// line flags carry only paths. Exit codes: 0 ok, 2 config error, 3 data
// error, 4 check failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hanet/checkpoint.hpp"
#include "hanet/eval.hpp"
#include "hanet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hanet;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run configuration: one flat JSON object per experiment.
// ---------------------------------------------------------------------------

struct RunConfig {
  ModelConfig model;
  TrainOptions opts;
  int min_count = 5;
  std::string corpus;        // single file, split by val_fraction
  std::string train_corpus;  // or explicit files
  std::string val_corpus;
  double val_fraction = 0.1;
  std::string out_dir;
  int range_test_iters = 60;
  double lr_range_lo = 0.001;
  double lr_range_hi = 3.0;
};

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key \"" + key + "\": " + e.what());
  }
}

RunConfig parse_run_config(const json& j) {
  static const std::set<std::string> known = {
      "variant",      "direction",    "aggregation",     "gated",
      "d",            "d_s",          "d_d",             "vocab_size",
      "n_classes",    "dropout",      "trainable_embeddings",
      "min_count",    "batch_size",   "max_epochs",      "patience",
      "half_cycle_epochs", "lr_min",  "lr_max",          "momentum_min",
      "momentum_max", "monitor",      "seed",            "corpus",
      "train_corpus", "val_corpus",   "val_fraction",    "out_dir",
      "range_test_iters", "lr_range_lo", "lr_range_hi"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown config key \"" + it.key() + "\"");

  RunConfig rc;
  if (!j.contains("variant")) throw ConfigError("config needs \"variant\"");
  if (!j.contains("n_classes")) throw ConfigError("config needs \"n_classes\"");
  rc.model.variant = variant_from_string(j.at("variant").get<std::string>());
  rc.model.direction =
      direction_from_string(get_or<std::string>(j, "direction", "lr"));
  rc.model.aggregation =
      aggregation_from_string(get_or<std::string>(j, "aggregation", "sigma"));
  rc.model.gated = get_or(j, "gated", false);
  rc.model.d = get_or(j, "d", 100);
  rc.model.d_s = get_or(j, "d_s", 50);
  rc.model.d_d = get_or(j, "d_d", 50);
  rc.model.vocab_size = get_or(j, "vocab_size", 0);
  rc.model.n_classes = j.at("n_classes").get<int>();
  rc.model.dropout_rate = get_or(j, "dropout", 0.5);
  rc.model.trainable_embeddings = get_or(j, "trainable_embeddings", true);

  rc.opts.batch_size = get_or(j, "batch_size", 64);
  rc.opts.max_epochs = get_or(j, "max_epochs", 50);
  rc.opts.patience = get_or(j, "patience", 13);
  rc.opts.half_cycle_epochs = get_or(j, "half_cycle_epochs", 6);
  rc.opts.lr_min = get_or(j, "lr_min", 0.0);
  rc.opts.lr_max = get_or(j, "lr_max", 0.0);
  rc.opts.momentum_min = get_or(j, "momentum_min", 0.85);
  rc.opts.momentum_max = get_or(j, "momentum_max", 0.95);
  rc.opts.monitor = get_or<std::string>(j, "monitor", "val");
  rc.opts.seed = get_or<std::uint64_t>(j, "seed", 0);

  rc.min_count = get_or(j, "min_count", 5);
  rc.corpus = get_or<std::string>(j, "corpus", "");
  rc.train_corpus = get_or<std::string>(j, "train_corpus", "");
  rc.val_corpus = get_or<std::string>(j, "val_corpus", "");
  rc.val_fraction = get_or(j, "val_fraction", 0.1);
  rc.out_dir = get_or<std::string>(j, "out_dir", "");
  rc.range_test_iters = get_or(j, "range_test_iters", 60);
  rc.lr_range_lo = get_or(j, "lr_range_lo", 0.001);
  rc.lr_range_hi = get_or(j, "lr_range_hi", 3.0);
  return rc;
}

// Effective settings (defaults applied) for provenance.
json run_config_to_json(const RunConfig& rc) {
  json j = model_config_to_json(rc.model);
  j["min_count"] = rc.min_count;
  j["batch_size"] = rc.opts.batch_size;
  j["max_epochs"] = rc.opts.max_epochs;
  j["patience"] = rc.opts.patience;
  j["half_cycle_epochs"] = rc.opts.half_cycle_epochs;
  j["lr_min"] = rc.opts.lr_min;
  j["lr_max"] = rc.opts.lr_max;
  j["momentum_min"] = rc.opts.momentum_min;
  j["momentum_max"] = rc.opts.momentum_max;
  j["monitor"] = rc.opts.monitor;
  j["seed"] = rc.opts.seed;
  j["corpus"] = rc.corpus;
  j["train_corpus"] = rc.train_corpus;
  j["val_corpus"] = rc.val_corpus;
  j["val_fraction"] = rc.val_fraction;
  j["out_dir"] = rc.out_dir;
  j["range_test_iters"] = rc.range_test_iters;
  j["lr_range_lo"] = rc.lr_range_lo;
  j["lr_range_hi"] = rc.lr_range_hi;
  return j;
}

// --out-dir flag > config out_dir > $OUT_DIR > current directory.
fs::path resolve_out_dir(const std::string& flag, const RunConfig* rc) {
  if (!flag.empty()) return flag;
  if (rc && !rc->out_dir.empty()) return rc->out_dir;
  if (const char* env = std::getenv("OUT_DIR"); env && *env) return env;
  return ".";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::is_directory(dir))
    throw DataError("cannot create output directory: " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Corpus loading
// ---------------------------------------------------------------------------

using TokenizedDoc = std::vector<std::vector<std::string>>;

struct LoadedCorpus {
  Vocab vocab;
  std::vector<Document> train, val;
};

std::vector<std::pair<int, TokenizedDoc>> tokenize_file(const std::string& path,
                                                        int n_classes) {
  std::vector<std::pair<int, TokenizedDoc>> out;
  auto raw = read_jsonl(path);
  if (raw.empty()) throw DataError("corpus is empty: " + path);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].label < 0 || raw[i].label >= n_classes)
      throw DataError(path + ": document " + std::to_string(i) + " has label " +
                      std::to_string(raw[i].label) + ", expected [0, " +
                      std::to_string(n_classes) + ")");
    out.emplace_back(raw[i].label, split_and_tokenize(raw[i].text));
  }
  return out;
}

std::vector<Document> numericalize_tokenized(
    const std::vector<std::pair<int, TokenizedDoc>>& docs, const Vocab& vocab) {
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const auto& [label, toks] : docs) {
    Document d = numericalize(toks, vocab);
    d.label = label;
    out.push_back(std::move(d));
  }
  return out;
}

// Vocabulary is always built on the training split only.
LoadedCorpus load_training_corpus(const RunConfig& rc) {
  std::vector<std::pair<int, TokenizedDoc>> train_tok, val_tok;
  if (!rc.corpus.empty()) {
    if (!rc.train_corpus.empty() || !rc.val_corpus.empty())
      throw ConfigError(
          "give either \"corpus\" or train_corpus/val_corpus, not both");
    auto all = tokenize_file(rc.corpus, rc.model.n_classes);
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SeededRng rng = SeededRng::forked(rc.opts.seed, "train-val-split");
    rng.shuffle(order);
    const std::size_t n_val =
        static_cast<std::size_t>(all.size() * rc.val_fraction);
    if (n_val == 0 || n_val >= all.size())
      throw DataError("corpus too small for a " +
                      std::to_string(rc.val_fraction) + " validation fraction");
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < order.size() - n_val) train_tok.push_back(std::move(all[order[i]]));
      else val_tok.push_back(std::move(all[order[i]]));
    }
  } else {
    if (rc.train_corpus.empty() || rc.val_corpus.empty())
      throw ConfigError(
          "config needs \"corpus\" or both train_corpus and val_corpus");
    train_tok = tokenize_file(rc.train_corpus, rc.model.n_classes);
    val_tok = tokenize_file(rc.val_corpus, rc.model.n_classes);
  }

  std::vector<TokenizedDoc> train_tokens;
  train_tokens.reserve(train_tok.size());
  for (const auto& [label, toks] : train_tok) train_tokens.push_back(toks);

  LoadedCorpus lc;
  lc.vocab = build_vocab(train_tokens, rc.min_count);
  lc.train = numericalize_tokenized(train_tok, lc.vocab);
  lc.val = numericalize_tokenized(val_tok, lc.vocab);
  return lc;
}

std::string format_history_tsv(const std::vector<TrainHistoryRow>& history) {
  std::string out = "epoch\ttrain_loss\tval_loss\tval_acc\tlr\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\t%.17g\n", r.epoch,
                  r.train_loss, r.val_loss, r.val_accuracy, r.lr);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_flag) {
  RunConfig rc = parse_run_config(read_json_file(config_path));
  if (!(rc.opts.lr_max > 0.0) && !(rc.opts.lr_min == 0.0 && rc.opts.lr_max == 0.0))
    throw ConfigError("train: lr_max must be positive (or both bounds 0)");
  LoadedCorpus lc = load_training_corpus(rc);
  rc.model.vocab_size = lc.vocab.size();
  rc.model.validate();

  const fs::path out_dir = resolve_out_dir(out_flag, &rc);
  ensure_dir(out_dir);
  write_text(out_dir / "config.json", run_config_to_json(rc).dump(1) + "\n");

  TrainState st = train(rc.model, lc.train, lc.val, rc.opts);

  write_text(out_dir / "history.tsv", format_history_tsv(st.history));
  dump_vocab_tsv((out_dir / "vocab.tsv").string(), lc.vocab);
  save_checkpoint((out_dir / "checkpoint.json").string(), rc.model,
                  st.best_params, lc.vocab);
  std::printf("trained %s for %d epochs (best epoch %d, %s loss %.6f)\n",
              to_string(rc.model.variant).c_str(), st.epoch, st.best_epoch,
              rc.opts.monitor.c_str(), st.best_monitor);
  std::printf("artifacts in %s: history.tsv checkpoint.json vocab.tsv config.json\n",
              out_dir.string().c_str());
  return 0;
}

int cmd_range_test(const std::string& config_path, const std::string& out_flag) {
  RunConfig rc = parse_run_config(read_json_file(config_path));
  LoadedCorpus lc = load_training_corpus(rc);
  rc.model.vocab_size = lc.vocab.size();
  rc.model.validate();

  const fs::path out_dir = resolve_out_dir(out_flag, &rc);
  ensure_dir(out_dir);
  write_text(out_dir / "config.json", run_config_to_json(rc).dump(1) + "\n");

  RangeTestResult r =
      lr_range_test(rc.model, lc.train, lc.val, rc.range_test_iters,
                    rc.lr_range_lo, rc.lr_range_hi, rc.opts.seed,
                    rc.opts.batch_size);

  std::string tsv = "iter\tlr\tval_loss\tsmoothed_loss\n";
  char buf[256];
  for (const auto& pt : r.curve) {
    std::snprintf(buf, sizeof buf, "%ld\t%.17g\t%.17g\t%.17g\n", pt.iter, pt.lr,
                  pt.loss, pt.smoothed);
    tsv += buf;
  }
  write_text(out_dir / "range_test.tsv", tsv);

  if (r.diverged)
    std::printf("loss diverged after %zu points; curve prefix written\n",
                r.curve.size());
  std::printf("suggested_lr_max\t%.17g\n", r.suggested_lr_max);
  std::printf("suggested_lr_min\t%.17g\n", r.suggested_lr_min);
  std::printf("curve in %s\n", (out_dir / "range_test.tsv").string().c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& out_flag) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  auto tok = tokenize_file(corpus_path, ck.config.n_classes);
  std::vector<Document> docs = numericalize_tokenized(tok, ck.vocab);
  EvalMetrics m = evaluate_corpus(ck.params, ck.config, docs);

  const fs::path out_dir = resolve_out_dir(out_flag, nullptr);
  ensure_dir(out_dir);
  std::string tsv;
  for (int i = 0; i < ck.config.n_classes; ++i) {
    for (int j = 0; j < ck.config.n_classes; ++j) {
      tsv += std::to_string(m.confusion[i][j]);
      tsv += j + 1 == ck.config.n_classes ? '\n' : '\t';
    }
  }
  write_text(out_dir / "confusion.tsv", tsv);
  std::printf("accuracy\t%.6f\n", m.accuracy);
  std::printf("loss\t%.6f\n", m.loss);
  std::printf("confusion matrix in %s\n",
              (out_dir / "confusion.tsv").string().c_str());
  return 0;
}

char bucket_char(double weight) {
  // quintiles of [0,1] mapped to " .:#@"
  static const char kBuckets[] = " .:#@";
  int b = static_cast<int>(weight * 5.0);
  if (b > 4) b = 4;
  if (b < 0) b = 0;
  return kBuckets[b];
}

int cmd_inspect(const std::string& ckpt_path, std::string text,
                const std::string& input_path, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  if (text.empty() && !input_path.empty()) {
    std::ifstream in(input_path);
    if (!in) throw DataError("cannot open document file: " + input_path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  if (text.empty()) throw DegenerateInputError("inspect: empty document");

  auto sentences = split_and_tokenize(text);
  Document doc = numericalize(sentences, ck.vocab);
  doc.label = 0;
  ForwardTrace trace = forward_document(ck.params, ck.config, make_view(doc));

  const bool bi = ck.config.bi_streams();
  const bool gated = ck.config.gated;
  const bool has_ctx = ck.config.uses_context();

  json j;
  j["variant"] = to_string(ck.config.variant);
  j["direction"] = to_string(ck.config.direction);
  j["aggregation"] = to_string(ck.config.aggregation);
  j["gated"] = gated;
  j["prediction"] = predict_label(trace.probabilities);
  std::vector<double> probs(
      trace.probabilities.data(),
      trace.probabilities.data() + trace.probabilities.size());
  j["probabilities"] = probs;
  std::vector<double> salpha(
      trace.sentence_alpha.data(),
      trace.sentence_alpha.data() + trace.sentence_alpha.size());
  j["sentence_alpha"] = salpha;

  json jsents = json::array();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    json js;
    js["tokens"] = sentences[i];
    auto row_of = [](const Tensor& t) {
      return std::vector<double>(t.data(), t.data() + t.size());
    };
    js["word_alpha_fwd"] = row_of(trace.word_alpha_fwd[i]);
    if (bi) js["word_alpha_bwd"] = row_of(trace.word_alpha_bwd[i]);
    if (gated) {
      auto mean_rows = [](const Tensor& g) {
        std::vector<double> m(g.rows(), 0.0);
        for (int r = 0; r < g.rows(); ++r) {
          for (int c = 0; c < g.cols(); ++c) m[r] += g.at(r, c);
          m[r] /= g.cols();
        }
        return m;
      };
      js["gate_mean_fwd"] = mean_rows(trace.gates_fwd[i]);
      if (bi) js["gate_mean_bwd"] = mean_rows(trace.gates_bwd[i]);
    }
    if (has_ctx) {
      js["context_norm_fwd"] = l2_norm(trace.context_fwd[i]);
      if (bi) js["context_norm_bwd"] = l2_norm(trace.context_bwd[i]);
    }
    jsents.push_back(std::move(js));
  }
  j["sentences"] = std::move(jsents);

  // ASCII heatmap: sentence weight bucket, then one bucket char per token.
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::string line = "[";
    line += bucket_char(trace.sentence_alpha.at(0, static_cast<int>(i)));
    line += "] ";
    for (std::size_t tk = 0; tk < sentences[i].size(); ++tk) {
      line += sentences[i][tk];
      line += '(';
      line += bucket_char(trace.word_alpha_fwd[i].at(0, static_cast<int>(tk)));
      line += ") ";
    }
    std::printf("%s\n", line.c_str());
  }
  std::printf("prediction\t%d\n", predict_label(trace.probabilities));

  const std::string dumped = j.dump(1) + "\n";
  if (out_path.empty() || out_path == "-") std::printf("%s", dumped.c_str());
  else write_text(out_path, dumped);
  return 0;
}

int cmd_count_matmuls() {
  ModelConfig base;
  base.d = 4;
  base.d_s = 2;
  base.d_d = 2;
  base.vocab_size = 2;
  base.n_classes = 2;
  base.dropout_rate = 0.0;
  const int han = 26;
  std::printf("%-26s %9s %6s %8s\n", "variant", "published", "delta", "audited");
  for (const auto& [name, cfg] : standard_variants(base)) {
    const int n = count_matmuls(cfg);
    std::printf("%-26s %9d %+6d %8d\n", name.c_str(), n, n - han,
                audit_matmuls(cfg));
  }
  return 0;
}

int cmd_grad_check(const std::string& config_path) {
  RunConfig rc = parse_run_config(read_json_file(config_path));
  if (rc.model.vocab_size == 0) rc.model.vocab_size = 12;
  rc.model.dropout_rate = 0.0;
  rc.model.validate();

  ModelParams probe = allocate_params(rc.model);
  const std::size_t total = param_count(probe, rc.model);
  if (total >= 10000)
    throw ContractError("grad-check: " + std::to_string(total) +
                        " parameters; keep toy dimensions below 10000");

  SeededRng rng = SeededRng::forked(rc.opts.seed, "grad-check-doc");
  Document d;
  d.label = static_cast<int>(rng.next_below(rc.model.n_classes));
  for (int i = 0; i < 3; ++i) {
    std::vector<int> sent;
    for (int t = 0; t < 4; ++t)
      sent.push_back(2 + static_cast<int>(rng.next_below(rc.model.vocab_size - 2)));
    d.sentences.push_back(std::move(sent));
  }
  std::vector<DocView> docs = {make_view(d)};

  ModelGradCheck r = model_grad_check(rc.model, rc.opts.seed, docs);
  std::printf("%-24s %s\n", "parameter", "max_rel_error");
  for (std::size_t i = 0; i < r.names.size(); ++i)
    std::printf("%-24s %.3e\n", r.names[i].c_str(), r.errors[i]);
  std::printf("%-24s %.3e\n", "max", r.max_error);
  if (!(r.max_error < 1e-4)) {
    std::printf("FAIL: max relative error %.3e exceeds 1e-4\n", r.max_error);
    return 4;
  }
  std::printf("OK: all gradients within 1e-4 of central differences\n");
  return 0;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_flag) {
  json j = read_json_file(config_path);
  static const std::set<std::string> known = {
      "n_docs",   "n_classes",   "sentences_min", "sentences_max",
      "n_topics", "filler_min",  "filler_max",    "n_fillers",
      "seed",     "split_train", "split_val",     "split_test",
      "out_dir"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown gen-data key \"" + it.key() + "\"");

  GeneratorConfig gc;
  gc.n_docs = get_or(j, "n_docs", 0);
  gc.n_classes = get_or(j, "n_classes", 0);
  gc.sentences_min = get_or(j, "sentences_min", 1);
  gc.sentences_max = get_or(j, "sentences_max", 0);
  gc.n_topics = get_or(j, "n_topics", 8);
  gc.filler_min = get_or(j, "filler_min", 1);
  gc.filler_max = get_or(j, "filler_max", 3);
  gc.n_fillers = get_or(j, "n_fillers", 16);
  gc.seed = get_or<std::uint64_t>(j, "seed", 0);
  const double f_train = get_or(j, "split_train", 0.8);
  const double f_val = get_or(j, "split_val", 0.1);
  const double f_test = get_or(j, "split_test", 0.1);
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw ConfigError("gen-data: split fractions must sum to 1");

  RunConfig shim;
  shim.out_dir = get_or<std::string>(j, "out_dir", "");
  const fs::path out_dir = resolve_out_dir(out_flag, &shim);
  ensure_dir(out_dir);

  const int n_train = static_cast<int>(gc.n_docs * f_train + 0.5);
  const int n_val = static_cast<int>(gc.n_docs * f_val + 0.5);
  const int n_test = gc.n_docs - n_train - n_val;
  if (n_test < 0) throw ConfigError("gen-data: splits exceed n_docs");

  // Disjoint seeded streams per split.
  auto emit = [&](const char* name, int n, std::uint64_t salt) {
    GeneratorConfig g = gc;
    g.n_docs = n;
    g.seed = gc.seed + salt;
    write_jsonl((out_dir / name).string(), gen_redundancy_corpus(g));
  };
  emit("train.jsonl", n_train, 0);
  emit("val.jsonl", n_val, 1);
  emit("test.jsonl", n_test, 2);

  json manifest = j;
  manifest["n_train"] = n_train;
  manifest["n_val"] = n_val;
  manifest["n_test"] = n_test;
  manifest["out_dir"] = out_dir.string();
  write_text(out_dir / "manifest.json", manifest.dump(1) + "\n");
  std::printf("wrote %d/%d/%d documents to %s\n", n_train, n_val, n_test,
              out_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical attention document classification (HAN and CAHAN)"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, corpus_path, out_dir, text, input_path,
      out_path;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  train_cmd->add_option("--config", config_path, "JSON run config")->required();
  train_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", corpus_path, "JSON-lines corpus")->required();
  eval_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* inspect_cmd =
      app.add_subcommand("inspect", "attention heatmap and JSON export");
  inspect_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inspect_cmd->add_option("--text", text, "document text");
  inspect_cmd->add_option("--input", input_path, "file with document text");
  inspect_cmd->add_option("--out", out_path, "JSON output path ('-' = stdout)");

  auto* range_cmd = app.add_subcommand("range-test", "learning-rate range test");
  range_cmd->add_option("--config", config_path, "JSON run config")->required();
  range_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* gen_cmd = app.add_subcommand("gen-data", "synthetic corpus generator");
  gen_cmd->add_option("--config", config_path, "JSON generator config")->required();
  gen_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* count_cmd =
      app.add_subcommand("count-matmuls", "per-variant multiplication accounting");

  auto* grad_cmd =
      app.add_subcommand("grad-check", "finite-difference gradient check");
  grad_cmd->add_option("--config", config_path, "JSON run config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, corpus_path, out_dir);
    if (inspect_cmd->parsed())
      return cmd_inspect(ckpt_path, text, input_path, out_path);
    if (range_cmd->parsed()) return cmd_range_test(config_path, out_dir);
    if (gen_cmd->parsed()) return cmd_gen_data(config_path, out_dir);
    if (count_cmd->parsed()) return cmd_count_matmuls();
    if (grad_cmd->parsed()) return cmd_grad_check(config_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const DegenerateInputError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
