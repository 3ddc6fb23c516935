#pragma once

#include <algorithm>
#include <chrono>
#include <future>
#include <vector>

#include "hanet/model.hpp"

namespace hanet {

// Plain-tensor forward pass (no tape, no dropout): the path used for
// validation metrics, cmd_eval, cmd_inspect, and the runtime comparison.
//
// threads > 1 enables the dependency structure the variants actually allow:
// HAN fans whole-sentence encoding out across sentences; the CAHAN variants
// fan out only the context-independent word bi-GRUs and then run their
// attention chains serially; the two document-encoder directions run
// concurrently wherever neither is interleaved into a chain. CAHAN-RNN keeps
// its interleaved direction(s) on the serial path, which is what makes it
// measurably slower than CAHAN-SUM at equal op counts.
struct EvalOptions {
  int threads = 1;
};

namespace detail {

template <typename Fn>
void parallel_chunks(int n, int threads, Fn&& fn) {  // fn(begin, end)
  if (threads <= 1 || n <= 1) {
    fn(0, n);
    return;
  }
  const int workers = std::min(threads, n);
  const int chunk = (n + workers - 1) / workers;
  std::vector<std::future<void>> futs;
  for (int c = 1; c < workers; ++c) {
    const int b = c * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    futs.push_back(std::async(std::launch::async, [b, e, &fn] { fn(b, e); }));
  }
  fn(0, std::min(chunk, n));
  for (auto& f : futs) f.get();
}

inline Tensor embed_rows(const Tensor& emb, const std::vector<int>& ids) {
  Tensor out(static_cast<int>(ids.size()), emb.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= emb.rows())
      throw ContractError("embed: id " + std::to_string(ids[i]) + " out of " +
                          emb.shape_str());
    for (int j = 0; j < emb.cols(); ++j)
      out.at(static_cast<int>(i), j) = emb.at(ids[i], j);
  }
  return out;
}

inline std::vector<Tensor> run_doc_direction_eval(const std::vector<Tensor>& s,
                                                  const GruParams& p,
                                                  const std::vector<int>& mask,
                                                  bool reversed) {
  const int n = static_cast<int>(s.size());
  std::vector<Tensor> states(n);
  Tensor h(p.hidden_dim(), 1);
  for (int k = 0; k < n; ++k) {
    const int i = reversed ? n - 1 - k : k;
    if (mask[i] != 0) h = gru_step(s[i], h, p);
    states[i] = h;
  }
  return states;
}

}  // namespace detail

inline Tensor sentence_annotations_eval(const ModelParams& p,
                                        const ModelConfig& cfg,
                                        const std::vector<int>& tokens,
                                        const std::vector<int>& word_mask) {
  if (tokens.empty() || detail::mask_total(word_mask) == 0)
    throw DegenerateInputError("encode_sentence: sentence empty after masking");
  (void)cfg;
  return run_bigru(detail::embed_rows(p.embeddings, tokens), p.sent_fwd,
                   p.sent_bwd, word_mask);
}

inline Tensor attend_sentence_eval(const ModelParams& p, const ModelConfig& cfg,
                                   const Tensor& annotations,
                                   const std::vector<int>& word_mask,
                                   bool backward_stream, const Tensor& context,
                                   ForwardTrace* trace, int sentence_index) {
  const Tensor mrow = detail::mask_row(word_mask);
  const AttentionParams& av = backward_stream ? p.sent_att_bwd : p.sent_att_fwd;
  AttentionOutputEval ao;
  if (!cfg.uses_context()) {
    ao = attend_plain(annotations, av, mrow);
  } else if (cfg.gated) {
    const GateParams& gv = backward_stream ? p.sent_gate_bwd : p.sent_gate_fwd;
    ao = attend_gated(annotations, context, av, gv, mrow);
  } else {
    ao = attend_context(annotations, context, av, mrow);
  }
  if (trace) {
    auto& alpha = backward_stream ? trace->word_alpha_bwd : trace->word_alpha_fwd;
    alpha[sentence_index] = ao.weights;
    if (!ao.gates.empty()) {
      auto& gates = backward_stream ? trace->gates_bwd : trace->gates_fwd;
      gates[sentence_index] = ao.gates;
    }
    if (!context.empty()) {
      auto& ctx = backward_stream ? trace->context_bwd : trace->context_fwd;
      ctx[sentence_index] = context;
    }
  }
  Tensor s = transpose(ao.pooled);
  if (trace) {
    auto& sv = backward_stream ? trace->sentence_vectors_bwd
                               : trace->sentence_vectors_fwd;
    sv[sentence_index] = s;
  }
  return s;
}

inline ForwardTrace forward_document(const ModelParams& p, const ModelConfig& cfg,
                                     const DocView& doc,
                                     const EvalOptions& opts = {}) {
  const int N = doc.n_sentences();
  if (N == 0 || detail::mask_total(doc.sent_mask) == 0)
    throw DegenerateInputError("encode_document: document has no sentences");

  ForwardTrace trace;
  trace.word_alpha_fwd.resize(N);
  trace.word_alpha_bwd.resize(N);
  trace.gates_fwd.resize(N);
  trace.gates_bwd.resize(N);
  trace.sentence_vectors_fwd.resize(N);
  trace.sentence_vectors_bwd.resize(N);
  trace.context_fwd.resize(N);
  trace.context_bwd.resize(N);

  std::vector<int> real;
  for (int i = 0; i < N; ++i)
    if (doc.sent_mask[i]) real.push_back(i);

  std::vector<Tensor> s_fwd(N), s_bwd(N);
  std::vector<Tensor> H(N);
  std::vector<Tensor> docF, docB;

  if (cfg.variant == Variant::Han) {
    // Sentences are independent: whole-sentence encode fans out.
    detail::parallel_chunks(
        static_cast<int>(real.size()), opts.threads, [&](int b, int e) {
          for (int k = b; k < e; ++k) {
            const int i = real[k];
            Tensor h = sentence_annotations_eval(p, cfg, doc.tokens[i],
                                                 doc.word_mask[i]);
            s_fwd[i] = attend_sentence_eval(p, cfg, h, doc.word_mask[i], false,
                                            Tensor{}, &trace, i);
          }
        });
  } else {
    // Word annotations are context-free in every variant, so they fan out;
    // the attention chains below are the sequential part.
    detail::parallel_chunks(
        static_cast<int>(real.size()), opts.threads, [&](int b, int e) {
          for (int k = b; k < e; ++k) {
            const int i = real[k];
            H[i] = sentence_annotations_eval(p, cfg, doc.tokens[i],
                                             doc.word_mask[i]);
          }
        });

    if (cfg.variant == Variant::CahanSum) {
      Tensor running(cfg.context_dim(), 1);
      int terms = 0;
      for (int i : real) {
        Tensor ctx = terms == 0 ? Tensor(cfg.context_dim(), 1)
                     : cfg.aggregation == Aggregation::Mu
                         ? scale(running, 1.0 / terms)
                         : running;
        s_fwd[i] = attend_sentence_eval(p, cfg, H[i], doc.word_mask[i], false,
                                        ctx, &trace, i);
        running = add(running, s_fwd[i]);
        ++terms;
      }
      if (cfg.bi_streams()) {
        Tensor running_b(cfg.context_dim(), 1);
        int terms_b = 0;
        for (auto it = real.rbegin(); it != real.rend(); ++it) {
          const int i = *it;
          Tensor ctx = terms_b == 0 ? Tensor(cfg.context_dim(), 1)
                       : cfg.aggregation == Aggregation::Mu
                           ? scale(running_b, 1.0 / terms_b)
                           : running_b;
          s_bwd[i] = attend_sentence_eval(p, cfg, H[i], doc.word_mask[i], true,
                                          ctx, &trace, i);
          running_b = add(running_b, s_bwd[i]);
          ++terms_b;
        }
      }
    } else {  // CahanRnn: attention waits on the document encoder each step
      docF.resize(N);
      Tensor h(cfg.d_d, 1);
      for (int i = 0; i < N; ++i) {
        if (doc.sent_mask[i]) {
          s_fwd[i] = attend_sentence_eval(p, cfg, H[i], doc.word_mask[i], false,
                                          h, &trace, i);
          h = gru_step(s_fwd[i], h, p.doc_fwd);
        }
        docF[i] = h;
      }
      if (cfg.bi_streams()) {
        docB.resize(N);
        Tensor hb(cfg.d_d, 1);
        for (int i = N - 1; i >= 0; --i) {
          if (doc.sent_mask[i]) {
            s_bwd[i] = attend_sentence_eval(p, cfg, H[i], doc.word_mask[i], true,
                                            hb, &trace, i);
            hb = gru_step(s_bwd[i], hb, p.doc_bwd);
          }
          docB[i] = hb;
        }
      }
    }
  }

  // Document level; the two directions are independent given the streams, so
  // whichever ones were not interleaved above may run concurrently.
  const std::vector<Tensor>& fwd_in = s_fwd;
  const std::vector<Tensor>& bwd_in = cfg.bi_streams() ? s_bwd : s_fwd;
  const bool need_f = docF.empty(), need_b = docB.empty();
  if (need_f && need_b && opts.threads > 1) {
    auto fut = std::async(std::launch::async, [&] {
      return detail::run_doc_direction_eval(bwd_in, p.doc_bwd, doc.sent_mask, true);
    });
    docF = detail::run_doc_direction_eval(fwd_in, p.doc_fwd, doc.sent_mask, false);
    docB = fut.get();
  } else {
    if (need_f)
      docF = detail::run_doc_direction_eval(fwd_in, p.doc_fwd, doc.sent_mask, false);
    if (need_b)
      docB = detail::run_doc_direction_eval(bwd_in, p.doc_bwd, doc.sent_mask, true);
  }

  Tensor fm = rows_from_cols(docF), bm = rows_from_cols(docB);
  Tensor ann(fm.rows(), fm.cols() + bm.cols());
  for (int i = 0; i < ann.rows(); ++i) {
    for (int j = 0; j < fm.cols(); ++j) ann.at(i, j) = fm.at(i, j);
    for (int j = 0; j < bm.cols(); ++j) ann.at(i, fm.cols() + j) = bm.at(i, j);
  }
  AttentionOutputEval ao =
      attend_plain(ann, p.doc_att, detail::mask_row(doc.sent_mask));
  trace.sentence_alpha = ao.weights;

  Tensor logits_col = add(matmul(p.cls_W, transpose(ao.pooled)), p.cls_b);
  trace.logits = transpose(logits_col);
  trace.probabilities =
      softmax_masked(trace.logits, Tensor::ones(1, cfg.n_classes));
  return trace;
}

// Smallest index of the largest probability.
inline int predict_label(const Tensor& probabilities) {
  int best = 0;
  for (int j = 1; j < probabilities.cols(); ++j)
    if (probabilities.at(0, j) > probabilities.at(0, best)) best = j;
  return best;
}

// Median wall-clock milliseconds of `iters` forward evaluations.
inline double median_forward_ms(const ModelParams& p, const ModelConfig& cfg,
                                const DocView& doc, int iters,
                                const EvalOptions& opts) {
  using clock = std::chrono::steady_clock;
  std::vector<double> ms;
  ms.reserve(iters);
  forward_document(p, cfg, doc, opts);  // warm-up
  for (int i = 0; i < iters; ++i) {
    const auto t0 = clock::now();
    forward_document(p, cfg, doc, opts);
    const auto t1 = clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
  return ms[ms.size() / 2];
}

}  // namespace hanet
