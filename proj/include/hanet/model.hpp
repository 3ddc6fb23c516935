#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hanet/attention.hpp"
#include "hanet/corpus.hpp"
#include "hanet/gradcheck.hpp"
#include "hanet/gru.hpp"
#include "hanet/rng.hpp"
#include "hanet/tape.hpp"

namespace hanet {

enum class Variant { Han, CahanSum, CahanRnn };
enum class Direction { LR, BI };
enum class Aggregation { Sigma, Mu };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Han: return "han";
    case Variant::CahanSum: return "cahan-sum";
    case Variant::CahanRnn: return "cahan-rnn";
  }
  return "?";
}
inline std::string to_string(Direction d) {
  return d == Direction::LR ? "lr" : "bi";
}
inline std::string to_string(Aggregation a) {
  return a == Aggregation::Sigma ? "sigma" : "mu";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "han") return Variant::Han;
  if (s == "cahan-sum") return Variant::CahanSum;
  if (s == "cahan-rnn") return Variant::CahanRnn;
  throw ConfigError("unknown variant: " + s);
}
inline Direction direction_from_string(const std::string& s) {
  if (s == "lr") return Direction::LR;
  if (s == "bi") return Direction::BI;
  throw ConfigError("unknown direction: " + s);
}
inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "sigma") return Aggregation::Sigma;
  if (s == "mu") return Aggregation::Mu;
  throw ConfigError("unknown aggregation: " + s);
}

// Variant selector plus all dimensions for one model instance. The defaults
// d_s = d_d = 50 give 100-dimensional annotations at both levels.
struct ModelConfig {
  Variant variant = Variant::Han;
  Direction direction = Direction::LR;
  Aggregation aggregation = Aggregation::Sigma;  // meaningful for CahanSum only
  bool gated = false;
  int d = 100;   // word embedding dim
  int d_s = 50;  // sentence-level RNN hidden dim (annotations are 2*d_s)
  int d_d = 50;  // document-level RNN hidden dim (annotations are 2*d_d)
  int vocab_size = 0;
  int n_classes = 0;
  double dropout_rate = 0.5;
  bool trainable_embeddings = true;

  bool uses_context() const { return variant != Variant::Han; }
  // Two sentence-attention parameter sets exist only for bidirectional CAHAN.
  bool bi_streams() const { return uses_context() && direction == Direction::BI; }
  int sent_att_dim() const { return 2 * d_s; }
  int doc_att_dim() const { return 2 * d_d; }
  int context_dim() const {
    switch (variant) {
      case Variant::Han: return 0;
      case Variant::CahanSum: return 2 * d_s;
      case Variant::CahanRnn: return d_d;  // one direction of the doc encoder
    }
    return 0;
  }

  void validate() const {
    if (d <= 0 || d_s <= 0 || d_d <= 0)
      throw ConfigError("ModelConfig: dimensions must be positive");
    if (vocab_size < 2)
      throw ConfigError("ModelConfig: vocab_size must be >= 2 (PAD and UNK)");
    if (n_classes < 2) throw ConfigError("ModelConfig: n_classes must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ConfigError("ModelConfig: dropout_rate must lie in [0, 1)");
    if (variant == Variant::Han && gated)
      throw ConfigError("ModelConfig: HAN cannot be gated");
  }
};

// Every parameter tensor of one model instance.
struct ModelParams {
  Tensor embeddings;  // vocab_size x d
  GruParams sent_fwd, sent_bwd;          // input d, hidden d_s
  AttentionParams sent_att_fwd;          // att 2*d_s (+ W_c for context variants)
  AttentionParams sent_att_bwd;          // only for bidirectional CAHAN
  GateParams sent_gate_fwd, sent_gate_bwd;  // only when gated
  GruParams doc_fwd, doc_bwd;            // input 2*d_s, hidden d_d
  AttentionParams doc_att;               // att 2*d_d, never a context
  Tensor cls_W;  // n_classes x 2*d_d
  Tensor cls_b;  // n_classes x 1
};

namespace detail {

template <typename Params, typename Fn>
void visit_gru(Params& g, const std::string& prefix, Fn&& f) {
  f(prefix + ".W_z", g.W_z);
  f(prefix + ".W_r", g.W_r);
  f(prefix + ".W_h", g.W_h);
  f(prefix + ".U_z", g.U_z);
  f(prefix + ".U_r", g.U_r);
  f(prefix + ".U_h", g.U_h);
  f(prefix + ".b_z", g.b_z);
  f(prefix + ".b_r", g.b_r);
  f(prefix + ".b_h", g.b_h);
}

}  // namespace detail

// Canonical enumeration of the parameter set; single source of the ordering
// used for gradients, updates, checkpoints, and tape binding.
template <typename Params, typename Fn>
void visit_params(Params& p, const ModelConfig& cfg, Fn&& f) {
  f("embeddings", p.embeddings);
  detail::visit_gru(p.sent_fwd, "sent_gru_fwd", f);
  detail::visit_gru(p.sent_bwd, "sent_gru_bwd", f);
  f("sent_att_fwd.W_s", p.sent_att_fwd.W_s);
  f("sent_att_fwd.b_s", p.sent_att_fwd.b_s);
  f("sent_att_fwd.u_s", p.sent_att_fwd.u_s);
  if (cfg.uses_context()) f("sent_att_fwd.W_c", p.sent_att_fwd.W_c);
  if (cfg.gated) {
    f("sent_gate_fwd.W_l1", p.sent_gate_fwd.W_l1);
    f("sent_gate_fwd.W_l2", p.sent_gate_fwd.W_l2);
    f("sent_gate_fwd.b_l", p.sent_gate_fwd.b_l);
  }
  if (cfg.bi_streams()) {
    f("sent_att_bwd.W_s", p.sent_att_bwd.W_s);
    f("sent_att_bwd.b_s", p.sent_att_bwd.b_s);
    f("sent_att_bwd.u_s", p.sent_att_bwd.u_s);
    f("sent_att_bwd.W_c", p.sent_att_bwd.W_c);
    if (cfg.gated) {
      f("sent_gate_bwd.W_l1", p.sent_gate_bwd.W_l1);
      f("sent_gate_bwd.W_l2", p.sent_gate_bwd.W_l2);
      f("sent_gate_bwd.b_l", p.sent_gate_bwd.b_l);
    }
  }
  detail::visit_gru(p.doc_fwd, "doc_gru_fwd", f);
  detail::visit_gru(p.doc_bwd, "doc_gru_bwd", f);
  f("doc_att.W_s", p.doc_att.W_s);
  f("doc_att.b_s", p.doc_att.b_s);
  f("doc_att.u_s", p.doc_att.u_s);
  f("classifier.W", p.cls_W);
  f("classifier.b", p.cls_b);
}

inline std::vector<std::string> param_names(const ModelConfig& cfg) {
  std::vector<std::string> names;
  ModelParams dummy;
  visit_params(dummy, cfg, [&](const std::string& n, Tensor&) { names.push_back(n); });
  return names;
}

inline std::size_t param_count(const ModelParams& p, const ModelConfig& cfg) {
  std::size_t n = 0;
  visit_params(const_cast<ModelParams&>(p), cfg,
               [&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

namespace detail {

inline GruParams allocate_gru(int hidden, int input) {
  GruParams g;
  g.W_z = Tensor(hidden, input);
  g.W_r = Tensor(hidden, input);
  g.W_h = Tensor(hidden, input);
  g.U_z = Tensor(hidden, hidden);
  g.U_r = Tensor(hidden, hidden);
  g.U_h = Tensor(hidden, hidden);
  g.b_z = Tensor(hidden, 1);
  g.b_r = Tensor(hidden, 1);
  g.b_h = Tensor(hidden, 1);
  return g;
}

inline AttentionParams allocate_attention(int att, int ctx) {
  AttentionParams a;
  a.W_s = Tensor(att, att);
  a.b_s = Tensor(att, 1);
  a.u_s = Tensor(att, 1);
  if (ctx > 0) a.W_c = Tensor(att, ctx);
  return a;
}

inline GateParams allocate_gate(int att, int ctx) {
  GateParams g;
  g.W_l1 = Tensor(att, att);
  g.W_l2 = Tensor(att, ctx);
  g.b_l = Tensor(att, 1);
  return g;
}

}  // namespace detail

inline ModelParams allocate_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.embeddings = Tensor(cfg.vocab_size, cfg.d);
  p.sent_fwd = detail::allocate_gru(cfg.d_s, cfg.d);
  p.sent_bwd = detail::allocate_gru(cfg.d_s, cfg.d);
  p.sent_att_fwd = detail::allocate_attention(cfg.sent_att_dim(), cfg.context_dim());
  if (cfg.bi_streams())
    p.sent_att_bwd = detail::allocate_attention(cfg.sent_att_dim(), cfg.context_dim());
  if (cfg.gated) {
    p.sent_gate_fwd = detail::allocate_gate(cfg.sent_att_dim(), cfg.context_dim());
    if (cfg.bi_streams())
      p.sent_gate_bwd = detail::allocate_gate(cfg.sent_att_dim(), cfg.context_dim());
  }
  p.doc_fwd = detail::allocate_gru(cfg.d_d, 2 * cfg.d_s);
  p.doc_bwd = detail::allocate_gru(cfg.d_d, 2 * cfg.d_s);
  p.doc_att = detail::allocate_attention(cfg.doc_att_dim(), 0);
  p.cls_W = Tensor(cfg.n_classes, cfg.doc_att_dim());
  p.cls_b = Tensor(cfg.n_classes, 1);
  return p;
}

// Deterministic initialization. Every tensor draws from its own substream
// keyed by (seed, tensor name), so the subsets shared between variants come
// out bit-identical for the same seed regardless of which variant-only
// tensors exist. Matrices are U(-r, r), r = sqrt(6 / (fan_in + fan_out));
// u_s is U(-0.1, 0.1); biases start at zero.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = allocate_params(cfg);
  visit_params(p, cfg, [&](const std::string& name, Tensor& x) {
    const auto dot = name.rfind('.');
    const std::string leafname = dot == std::string::npos ? name : name.substr(dot + 1);
    if (!leafname.empty() && leafname[0] == 'b') return;  // biases stay zero
    SeededRng rng = SeededRng::forked(seed, name);
    if (leafname == "u_s") {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-0.1, 0.1);
      return;
    }
    const double r = std::sqrt(6.0 / (x.rows() + x.cols()));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-r, r);
  });
  return p;
}

// ---------------------------------------------------------------------------
// Complexity accounting
// ---------------------------------------------------------------------------

// The published accounting: 26 multiplications for HAN (13 per level: 12 GRU
// plus the attention projection), +1/+2 for the context projection in the
// LR/BI case, a further +2/+4 for the gate. Identical for the SUM and RNN
// context flavors.
inline int count_matmuls(const ModelConfig& cfg) {
  int n = 26;
  if (cfg.uses_context()) {
    const bool bi = cfg.direction == Direction::BI;
    n += bi ? 2 : 1;
    if (cfg.gated) n += bi ? 4 : 2;
  }
  return n;
}

// Independent audit of the weight matrices the implementation actually
// applies (per token/sentence position, classifier excluded). Differs from
// the published count for BI variants, which duplicate W_s in the second
// attention mechanism without counting it.
inline int audit_matmuls(const ModelConfig& cfg) {
  const int gru = 24;  // 6 per direction, 2 directions, 2 levels
  const int streams = cfg.bi_streams() ? 2 : 1;
  int per_stream = 1;                       // W_s
  if (cfg.uses_context()) per_stream += 1;  // W_c
  if (cfg.gated) per_stream += 2;           // W_l1, W_l2
  return gru + streams * per_stream + 1;    // + document-level W_s
}

// The ten model configurations of the headline experiments, derived from a
// base config (dimensions, vocab, classes are taken from it).
inline std::vector<std::pair<std::string, ModelConfig>> standard_variants(
    ModelConfig base) {
  std::vector<std::pair<std::string, ModelConfig>> out;
  auto push = [&](const std::string& name, Variant v, Direction dir,
                  Aggregation agg, bool gated) {
    ModelConfig c = base;
    c.variant = v;
    c.direction = dir;
    c.aggregation = agg;
    c.gated = gated;
    out.emplace_back(name, c);
  };
  push("CAHAN-SUM-BI-sigma", Variant::CahanSum, Direction::BI, Aggregation::Sigma, false);
  push("CAHAN-SUM-BI-sigma+gate", Variant::CahanSum, Direction::BI, Aggregation::Sigma, true);
  push("CAHAN-SUM-BI-mu", Variant::CahanSum, Direction::BI, Aggregation::Mu, false);
  push("CAHAN-SUM-BI-mu+gate", Variant::CahanSum, Direction::BI, Aggregation::Mu, true);
  push("CAHAN-SUM-LR-sigma", Variant::CahanSum, Direction::LR, Aggregation::Sigma, false);
  push("CAHAN-SUM-LR-sigma+gate", Variant::CahanSum, Direction::LR, Aggregation::Sigma, true);
  push("CAHAN-SUM-LR-mu", Variant::CahanSum, Direction::LR, Aggregation::Mu, false);
  push("CAHAN-SUM-LR-mu+gate", Variant::CahanSum, Direction::LR, Aggregation::Mu, true);
  push("CAHAN-RNN-BI", Variant::CahanRnn, Direction::BI, Aggregation::Sigma, false);
  push("HAN", Variant::Han, Direction::LR, Aggregation::Sigma, false);
  return out;
}

// ---------------------------------------------------------------------------
// Context vectors
// ---------------------------------------------------------------------------

// Sum (Sigma) or centroid (Mu) of the sentence vectors before position i
// (preceding = true) or after it. No available terms gives the zero vector.
// i is a 0-based position into sent_vectors.
inline Tensor compute_context_sum(const std::vector<Tensor>& sent_vectors, int i,
                                  bool preceding, Aggregation agg) {
  if (sent_vectors.empty())
    throw DegenerateInputError("compute_context_sum: no sentence vectors");
  const int n = static_cast<int>(sent_vectors.size());
  if (i < 0 || i >= n)
    throw ContractError("compute_context_sum: index " + std::to_string(i) +
                        " out of [0, " + std::to_string(n) + ")");
  Tensor acc(sent_vectors[0].rows(), 1);
  int terms = 0;
  if (preceding) {
    for (int j = 0; j < i; ++j) {
      acc = add(acc, sent_vectors[j]);
      ++terms;
    }
  } else {
    for (int j = i + 1; j < n; ++j) {
      acc = add(acc, sent_vectors[j]);
      ++terms;
    }
  }
  if (agg == Aggregation::Mu && terms > 0) acc = scale(acc, 1.0 / terms);
  return acc;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

struct DropoutPlan {
  bool training = false;
  double rate = 0.0;
  SeededRng* rng = nullptr;

  bool active() const { return training && rate > 0.0; }
};

// Inverted-dropout mask: entries are 0 with probability rate, else 1/(1-rate).
inline Tensor dropout_mask(int rows, int cols, double rate, SeededRng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ContractError("dropout: rate must lie in [0, 1)");
  Tensor m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = rng.next_double() >= rate ? keep_scale : 0.0;
  return m;
}

inline Var apply_dropout(Tape& t, Var x, const DropoutPlan& dp) {
  if (dp.rate < 0.0 || dp.rate >= 1.0)
    throw ContractError("dropout: rate must lie in [0, 1)");
  if (!dp.active()) return x;
  const Tensor& v = t.value(x);
  return t.mul_const(x, dropout_mask(v.rows(), v.cols(), dp.rate, *dp.rng));
}

// ---------------------------------------------------------------------------
// Tape binding and the forward pass
// ---------------------------------------------------------------------------

struct BoundParams {
  Var embeddings;
  GruVars sent_fwd, sent_bwd, doc_fwd, doc_bwd;
  AttentionVars sent_att_fwd, sent_att_bwd, doc_att;
  GateVars sent_gate_fwd, sent_gate_bwd;
  Var cls_W, cls_b;
  std::vector<Var> ordered;  // leaf per parameter, visit_params order
};

inline BoundParams bind(Tape& t, const ModelParams& p, const ModelConfig& cfg) {
  std::unordered_map<std::string, Var> by_name;
  BoundParams b;
  visit_params(const_cast<ModelParams&>(p), cfg,
               [&](const std::string& name, Tensor& x) {
                 Var v = t.leaf(x);
                 by_name[name] = v;
                 b.ordered.push_back(v);
               });
  auto get = [&](const std::string& n) { return by_name.at(n); };
  auto get_gru = [&](const std::string& prefix) {
    return GruVars{get(prefix + ".W_z"), get(prefix + ".W_r"), get(prefix + ".W_h"),
                   get(prefix + ".U_z"), get(prefix + ".U_r"), get(prefix + ".U_h"),
                   get(prefix + ".b_z"), get(prefix + ".b_r"), get(prefix + ".b_h")};
  };
  b.embeddings = get("embeddings");
  b.sent_fwd = get_gru("sent_gru_fwd");
  b.sent_bwd = get_gru("sent_gru_bwd");
  b.sent_att_fwd = AttentionVars{get("sent_att_fwd.W_s"), get("sent_att_fwd.b_s"),
                                 get("sent_att_fwd.u_s"), Var{}};
  if (cfg.uses_context()) b.sent_att_fwd.W_c = get("sent_att_fwd.W_c");
  if (cfg.gated)
    b.sent_gate_fwd = GateVars{get("sent_gate_fwd.W_l1"), get("sent_gate_fwd.W_l2"),
                               get("sent_gate_fwd.b_l")};
  if (cfg.bi_streams()) {
    b.sent_att_bwd = AttentionVars{get("sent_att_bwd.W_s"), get("sent_att_bwd.b_s"),
                                   get("sent_att_bwd.u_s"), get("sent_att_bwd.W_c")};
    if (cfg.gated)
      b.sent_gate_bwd = GateVars{get("sent_gate_bwd.W_l1"),
                                 get("sent_gate_bwd.W_l2"), get("sent_gate_bwd.b_l")};
  }
  b.doc_fwd = get_gru("doc_gru_fwd");
  b.doc_bwd = get_gru("doc_gru_bwd");
  b.doc_att = AttentionVars{get("doc_att.W_s"), get("doc_att.b_s"),
                            get("doc_att.u_s"), Var{}};
  b.cls_W = get("classifier.W");
  b.cls_b = get("classifier.b");
  return b;
}

// Everything cmd_inspect and the figures need from one forward pass. Entries
// for padded sentences stay empty.
struct ForwardTrace {
  std::vector<Tensor> word_alpha_fwd, word_alpha_bwd;  // 1 x T per sentence
  std::vector<Tensor> gates_fwd, gates_bwd;            // T x att per sentence
  std::vector<Tensor> sentence_vectors_fwd, sentence_vectors_bwd;  // 2d_s x 1
  std::vector<Tensor> context_fwd, context_bwd;        // ctx x 1 per sentence
  Tensor sentence_alpha;                               // 1 x N
  Tensor logits, probabilities;                        // 1 x n_classes
};

namespace detail {

inline Tensor mask_row(const std::vector<int>& mask) {
  Tensor m(1, static_cast<int>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) m.at(0, i) = mask[i] ? 1.0 : 0.0;
  return m;
}

inline int mask_total(const std::vector<int>& mask) {
  int n = 0;
  for (int x : mask) n += x ? 1 : 0;
  return n;
}

}  // namespace detail

// Embedding rows + word-level bi-GRU for one sentence; T x 2d_s annotations.
inline Var sentence_annotations(Tape& t, const BoundParams& P,
                                const ModelConfig& cfg,
                                const std::vector<int>& tokens,
                                const std::vector<int>& word_mask,
                                const DropoutPlan& dp) {
  if (tokens.empty() || detail::mask_total(word_mask) == 0)
    throw DegenerateInputError("encode_sentence: sentence empty after masking");
  Var x = t.rows(P.embeddings, tokens);
  x = apply_dropout(t, x, dp);
  Var h = run_bigru(t, x, P.sent_fwd, P.sent_bwd, word_mask, cfg.d_s);
  return apply_dropout(t, h, dp);
}

// Variant attention over precomputed annotations; returns the sentence vector
// as a 2d_s x 1 column (dropout applied). backward_stream selects the second
// parameter set of bidirectional CAHAN.
inline Var attend_sentence(Tape& t, const BoundParams& P, const ModelConfig& cfg,
                           Var annotations, const std::vector<int>& word_mask,
                           bool backward_stream, Var context,
                           const DropoutPlan& dp, ForwardTrace* trace,
                           int sentence_index) {
  const Tensor mrow = detail::mask_row(word_mask);
  const AttentionVars& av = backward_stream ? P.sent_att_bwd : P.sent_att_fwd;
  AttentionOutput ao;
  if (!cfg.uses_context()) {
    ao = attend_plain(t, annotations, av, mrow);
  } else if (cfg.gated) {
    const GateVars& gv = backward_stream ? P.sent_gate_bwd : P.sent_gate_fwd;
    ao = attend_gated(t, annotations, context, av, gv, mrow);
  } else {
    ao = attend_context(t, annotations, context, av, mrow);
  }
  if (trace) {
    auto& alpha = backward_stream ? trace->word_alpha_bwd : trace->word_alpha_fwd;
    alpha[sentence_index] = t.value(ao.weights);
    if (ao.gates.valid()) {
      auto& gates = backward_stream ? trace->gates_bwd : trace->gates_fwd;
      gates[sentence_index] = t.value(ao.gates);
    }
    if (context.valid()) {
      auto& ctx = backward_stream ? trace->context_bwd : trace->context_fwd;
      ctx[sentence_index] = t.value(context);
    }
  }
  Var s = t.transpose(ao.pooled);
  s = apply_dropout(t, s, dp);
  if (trace) {
    auto& sv = backward_stream ? trace->sentence_vectors_bwd
                               : trace->sentence_vectors_fwd;
    sv[sentence_index] = t.value(s);
  }
  return s;
}

// One sentence end to end (embed, bi-GRU, variant attention). The document
// encoder below shares the annotations between the two streams instead of
// calling this twice.
inline Var encode_sentence(Tape& t, const BoundParams& P, const ModelConfig& cfg,
                           const std::vector<int>& tokens,
                           const std::vector<int>& word_mask, bool backward_stream,
                           Var context, const DropoutPlan& dp = {},
                           ForwardTrace* trace = nullptr, int sentence_index = 0) {
  Var h = sentence_annotations(t, P, cfg, tokens, word_mask, dp);
  return attend_sentence(t, P, cfg, h, word_mask, backward_stream, context, dp,
                         trace, sentence_index);
}

struct ForwardResult {
  Var logits;         // 1 x n_classes
  Var probabilities;  // 1 x n_classes
  ForwardTrace trace;
};

namespace detail {

// Document-level GRU over per-sentence columns; masked positions carry state.
inline std::vector<Var> run_doc_direction(Tape& t, const std::vector<Var>& s,
                                          const GruVars& p,
                                          const std::vector<int>& mask, int hidden,
                                          bool reversed) {
  const int n = static_cast<int>(s.size());
  std::vector<Var> states(n);
  Var h = t.constant(Tensor(hidden, 1));
  for (int k = 0; k < n; ++k) {
    const int i = reversed ? n - 1 - k : k;
    if (mask[i] != 0) h = gru_step(t, s[i], h, p);
    states[i] = h;
  }
  return states;
}

}  // namespace detail

// Full forward pass of any variant over one (possibly padded) document.
inline ForwardResult encode_document(Tape& t, const BoundParams& P,
                                     const ModelConfig& cfg, const DocView& doc,
                                     const DropoutPlan& dp = {}) {
  const int N = doc.n_sentences();
  if (N == 0 || detail::mask_total(doc.sent_mask) == 0)
    throw DegenerateInputError("encode_document: document has no sentences");

  ForwardResult out;
  ForwardTrace& trace = out.trace;
  trace.word_alpha_fwd.resize(N);
  trace.word_alpha_bwd.resize(N);
  trace.gates_fwd.resize(N);
  trace.gates_bwd.resize(N);
  trace.sentence_vectors_fwd.resize(N);
  trace.sentence_vectors_bwd.resize(N);
  trace.context_fwd.resize(N);
  trace.context_bwd.resize(N);

  // Word level: annotations once per sentence, shared by both streams.
  std::vector<Var> H(N);
  for (int i = 0; i < N; ++i)
    if (doc.sent_mask[i])
      H[i] = sentence_annotations(t, P, cfg, doc.tokens[i], doc.word_mask[i], dp);

  auto zero_col = [&](int dim) { return t.constant(Tensor(dim, 1)); };
  auto attend_at = [&](int i, bool bwd_stream, Var ctx) {
    return attend_sentence(t, P, cfg, H[i], doc.word_mask[i], bwd_stream, ctx, dp,
                           &trace, i);
  };

  std::vector<Var> s_fwd(N), s_bwd(N);
  std::vector<Var> docF, docB;

  switch (cfg.variant) {
    case Variant::Han: {
      for (int i = 0; i < N; ++i)
        if (doc.sent_mask[i]) s_fwd[i] = attend_at(i, false, Var{});
      break;
    }
    case Variant::CahanSum: {
      // Forward stream: context accumulates this stream's own previously
      // produced sentence vectors; zero when none exist yet.
      Var running;
      int terms = 0;
      for (int i = 0; i < N; ++i) {
        if (!doc.sent_mask[i]) continue;
        Var ctx = terms == 0 ? zero_col(cfg.context_dim())
                 : cfg.aggregation == Aggregation::Mu ? t.scale(running, 1.0 / terms)
                                                      : running;
        s_fwd[i] = attend_at(i, false, ctx);
        running = terms == 0 ? s_fwd[i] : t.add(running, s_fwd[i]);
        ++terms;
      }
      if (cfg.bi_streams()) {
        Var running_b;
        int terms_b = 0;
        for (int i = N - 1; i >= 0; --i) {
          if (!doc.sent_mask[i]) continue;
          Var ctx = terms_b == 0 ? zero_col(cfg.context_dim())
                   : cfg.aggregation == Aggregation::Mu
                       ? t.scale(running_b, 1.0 / terms_b)
                       : running_b;
          s_bwd[i] = attend_at(i, true, ctx);
          running_b = terms_b == 0 ? s_bwd[i] : t.add(running_b, s_bwd[i]);
          ++terms_b;
        }
      }
      break;
    }
    case Variant::CahanRnn: {
      // Interleaved: the context for sentence i is the document-encoder state
      // after sentence i-1 (forward) / i+1 (backward), zero at the boundary.
      docF.resize(N);
      Var h = zero_col(cfg.d_d);
      for (int i = 0; i < N; ++i) {
        if (doc.sent_mask[i]) {
          s_fwd[i] = attend_at(i, false, h);
          h = gru_step(t, s_fwd[i], h, P.doc_fwd);
        }
        docF[i] = h;
      }
      if (cfg.bi_streams()) {
        docB.resize(N);
        Var hb = zero_col(cfg.d_d);
        for (int i = N - 1; i >= 0; --i) {
          if (doc.sent_mask[i]) {
            s_bwd[i] = attend_at(i, true, hb);
            hb = gru_step(t, s_bwd[i], hb, P.doc_bwd);
          }
          docB[i] = hb;
        }
      }
      break;
    }
  }

  // Document level. Forward RNN reads the forward stream, backward RNN reads
  // the backward stream (the single stream twice for HAN/LR variants).
  const std::vector<Var>& fwd_in = s_fwd;
  const std::vector<Var>& bwd_in = cfg.bi_streams() ? s_bwd : s_fwd;
  if (docF.empty())
    docF = detail::run_doc_direction(t, fwd_in, P.doc_fwd, doc.sent_mask, cfg.d_d,
                                     false);
  if (docB.empty())
    docB = detail::run_doc_direction(t, bwd_in, P.doc_bwd, doc.sent_mask, cfg.d_d,
                                     true);

  Var ann = t.concat_cols(rows_from_cols(t, docF), rows_from_cols(t, docB));
  ann = apply_dropout(t, ann, dp);
  AttentionOutput ao = attend_plain(t, ann, P.doc_att, detail::mask_row(doc.sent_mask));
  trace.sentence_alpha = t.value(ao.weights);
  Var docvec = apply_dropout(t, ao.pooled, dp);

  Var logits_col = t.add(t.matmul(P.cls_W, t.transpose(docvec)), P.cls_b);
  out.logits = t.transpose(logits_col);
  out.probabilities = t.softmax_masked(out.logits, Tensor::ones(1, cfg.n_classes));
  trace.logits = t.value(out.logits);
  trace.probabilities = t.value(out.probabilities);
  return out;
}

// -ln(probabilities[label]), floored at kProbFloor.
inline Var nll_loss(Tape& t, Var probabilities, int label) {
  const Tensor& p = t.value(probabilities);
  if (label < 0 || label >= p.cols())
    throw ContractError("nll_loss: label " + std::to_string(label) + " out of " +
                        p.shape_str());
  return t.scale(t.log_clamped(t.pick_entry(probabilities, 0, label)), -1.0);
}

inline std::vector<Tensor> extract_gradients(const Tape& t, const BoundParams& P) {
  std::vector<Tensor> grads;
  grads.reserve(P.ordered.size());
  for (Var v : P.ordered) grads.push_back(t.adjoint(v));
  return grads;
}

// ---------------------------------------------------------------------------
// Whole-model gradient check
// ---------------------------------------------------------------------------

struct ModelGradCheck {
  std::vector<std::string> names;
  std::vector<double> errors;  // max relative error per tensor
  double max_error = 0.0;
};

// Central-difference check of d(loss)/d(params) on the given documents,
// dropout off. Intended for toy dimensions only.
inline ModelGradCheck model_grad_check(const ModelConfig& cfg, std::uint64_t seed,
                                       const std::vector<DocView>& docs,
                                       double eps = 1e-5) {
  ModelParams params = init_params(cfg, seed);
  const std::vector<std::string> names = param_names(cfg);

  std::vector<Tensor> flat;
  visit_params(params, cfg,
               [&](const std::string&, Tensor& x) { flat.push_back(x); });

  GradFn f = [&](const std::vector<Tensor>& vec, std::vector<Tensor>* grads_out) {
    ModelParams p = allocate_params(cfg);
    std::size_t k = 0;
    visit_params(p, cfg, [&](const std::string&, Tensor& x) { x = vec[k++]; });

    double total = 0.0;
    if (grads_out)
      for (auto& g : *grads_out) g.fill(0.0);
    for (const auto& doc : docs) {
      Tape t;
      t.reserve(4096);
      BoundParams bound = bind(t, p, cfg);
      ForwardResult fr = encode_document(t, bound, cfg, doc);
      Var loss = nll_loss(t, fr.probabilities, doc.label);
      total += t.value(loss).at(0, 0);
      if (grads_out) {
        t.backward(loss);
        for (std::size_t j = 0; j < bound.ordered.size(); ++j)
          acc_scaled((*grads_out)[j], t.adjoint(bound.ordered[j]), 1.0);
      }
    }
    return total;
  };

  GradCheckReport report = grad_check_report(f, flat, eps, &names);
  ModelGradCheck out;
  out.names = names;
  out.errors = report.per_param;
  out.max_error = report.max_rel_error;
  return out;
}

}  // namespace hanet
