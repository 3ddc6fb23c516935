#pragma once

#include <string>
#include <vector>

#include "hanet/tape.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

// Alignment parameters. W_c is present only for the context-aware mechanisms
// and projects the context vector into the annotation space.
struct AttentionParams {
  Tensor W_s;  // att_dim x att_dim
  Tensor b_s;  // att_dim x 1
  Tensor u_s;  // att_dim x 1
  Tensor W_c;  // att_dim x context_dim, empty for plain attention

  bool has_context() const { return !W_c.empty(); }
  int att_dim() const { return W_s.rows(); }
  int context_dim() const { return W_c.cols(); }
};

// Context gate parameters; the gate is a per-step vector of size att_dim.
struct GateParams {
  Tensor W_l1;  // att_dim x att_dim
  Tensor W_l2;  // att_dim x context_dim
  Tensor b_l;   // att_dim x 1
  bool empty() const { return W_l1.empty(); }
};

struct AttentionVars {
  Var W_s, b_s, u_s, W_c;
};

struct GateVars {
  Var W_l1, W_l2, b_l;
};

inline AttentionVars bind(Tape& t, const AttentionParams& p) {
  AttentionVars v{t.leaf(p.W_s), t.leaf(p.b_s), t.leaf(p.u_s), Var{}};
  if (p.has_context()) v.W_c = t.leaf(p.W_c);
  return v;
}

inline GateVars bind(Tape& t, const GateParams& p) {
  return GateVars{t.leaf(p.W_l1), t.leaf(p.W_l2), t.leaf(p.b_l)};
}

// weights: 1 x T attention coefficients (masked entries exactly 0, unmasked
// sum to 1); pooled: 1 x att_dim weighted sum of annotation rows; alignments:
// the raw pre-softmax scores; gates: T x att_dim, only for the gated variant.
struct AttentionOutput {
  Var weights, pooled, alignments, gates;
};

struct AttentionOutputEval {
  Tensor weights, pooled, alignments, gates;
};

namespace detail {

inline void check_attend(const Tensor& annotations, const Tensor& mask, int att_dim) {
  if (annotations.cols() != att_dim)
    throw DimensionError("attend: annotations " + annotations.shape_str() +
                         " vs att_dim " + std::to_string(att_dim));
  if (mask.rows() != 1 || mask.cols() != annotations.rows())
    throw DimensionError("attend: mask " + mask.shape_str() + " vs annotations " +
                         annotations.shape_str());
}

inline void check_context(const Tensor& context, const Tensor& W_c) {
  if (W_c.empty()) throw ContractError("attend_context: params carry no W_c");
  if (context.rows() != W_c.cols() || context.cols() != 1)
    throw DimensionError("attend: context " + context.shape_str() +
                         " vs context_dim " + std::to_string(W_c.cols()));
}

// Shared tail: scores (T x att) -> alignments -> softmax -> pooled.
inline AttentionOutput finish(Tape& t, Var annotations, Var scores,
                              const AttentionVars& p, const Tensor& mask) {
  AttentionOutput out;
  out.alignments = t.transpose(t.matmul(scores, p.u_s));  // 1 x T
  out.weights = t.softmax_masked(out.alignments, mask);
  out.pooled = t.matmul(out.weights, annotations);  // 1 x att
  return out;
}

}  // namespace detail

// e_t = u_s^T tanh(W_s h_t + b_s)
inline AttentionOutput attend_plain(Tape& t, Var annotations,
                                    const AttentionVars& p, const Tensor& mask) {
  detail::check_attend(t.value(annotations), mask, t.value(p.W_s).rows());
  Var proj = t.matmul(annotations, t.transpose(p.W_s));
  Var scores = t.tanh(t.add_rowvec(proj, t.transpose(p.b_s)));
  return detail::finish(t, annotations, scores, p, mask);
}

// e_t = u_s^T tanh(W_s h_t + W_c c + b_s)
inline AttentionOutput attend_context(Tape& t, Var annotations, Var context,
                                      const AttentionVars& p, const Tensor& mask) {
  detail::check_attend(t.value(annotations), mask, t.value(p.W_s).rows());
  if (!p.W_c.valid()) throw ContractError("attend_context: params carry no W_c");
  detail::check_context(t.value(context), t.value(p.W_c));
  Var proj = t.matmul(annotations, t.transpose(p.W_s));
  Var shift = t.add(t.matmul(p.W_c, context), p.b_s);  // att x 1
  Var scores = t.tanh(t.add_rowvec(proj, t.transpose(shift)));
  return detail::finish(t, annotations, scores, p, mask);
}

// lambda_t = sigmoid(W_l1 h_t + W_l2 c + b_l)        (per step, size att_dim)
// e_t = u_s^T tanh((1 - lambda_t) o (W_s h_t) + lambda_t o (W_c c) + b_s)
inline AttentionOutput attend_gated(Tape& t, Var annotations, Var context,
                                    const AttentionVars& p, const GateVars& g,
                                    const Tensor& mask) {
  detail::check_attend(t.value(annotations), mask, t.value(p.W_s).rows());
  if (!p.W_c.valid()) throw ContractError("attend_gated: params carry no W_c");
  detail::check_context(t.value(context), t.value(p.W_c));
  Var gate_shift = t.add(t.matmul(g.W_l2, context), g.b_l);  // att x 1
  Var gates = t.sigmoid(t.add_rowvec(t.matmul(annotations, t.transpose(g.W_l1)),
                                     t.transpose(gate_shift)));  // T x att
  Var proj = t.matmul(annotations, t.transpose(p.W_s));
  Var ctx_proj = t.transpose(t.matmul(p.W_c, context));  // 1 x att
  Var mixed = t.add(t.mul(t.one_minus(gates), proj), t.mul_rowvec(gates, ctx_proj));
  Var scores = t.tanh(t.add_rowvec(mixed, t.transpose(p.b_s)));
  AttentionOutput out = detail::finish(t, annotations, scores, p, mask);
  out.gates = gates;
  return out;
}

// --- plain-tensor twins for the no-tape evaluation path ---

namespace detail {

inline AttentionOutputEval finish(const Tensor& annotations, const Tensor& scores,
                                  const AttentionParams& p, const Tensor& mask) {
  AttentionOutputEval out;
  out.alignments = transpose(matmul(scores, p.u_s));
  out.weights = softmax_masked(out.alignments, mask);
  out.pooled = matmul(out.weights, annotations);
  return out;
}

inline Tensor add_row_broadcast(Tensor m, const Tensor& col) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m.at(i, j) += col.at(j, 0);
  return m;
}

}  // namespace detail

inline AttentionOutputEval attend_plain(const Tensor& annotations,
                                        const AttentionParams& p,
                                        const Tensor& mask) {
  detail::check_attend(annotations, mask, p.att_dim());
  Tensor proj = matmul(annotations, transpose(p.W_s));
  Tensor scores = tanh(detail::add_row_broadcast(std::move(proj), p.b_s));
  return detail::finish(annotations, scores, p, mask);
}

inline AttentionOutputEval attend_context(const Tensor& annotations,
                                          const Tensor& context,
                                          const AttentionParams& p,
                                          const Tensor& mask) {
  detail::check_attend(annotations, mask, p.att_dim());
  detail::check_context(context, p.W_c);
  Tensor proj = matmul(annotations, transpose(p.W_s));
  Tensor shift = add(matmul(p.W_c, context), p.b_s);
  Tensor scores = tanh(detail::add_row_broadcast(std::move(proj), shift));
  return detail::finish(annotations, scores, p, mask);
}

inline AttentionOutputEval attend_gated(const Tensor& annotations,
                                        const Tensor& context,
                                        const AttentionParams& p,
                                        const GateParams& g, const Tensor& mask) {
  detail::check_attend(annotations, mask, p.att_dim());
  detail::check_context(context, p.W_c);
  Tensor gate_shift = add(matmul(g.W_l2, context), g.b_l);
  Tensor gates = sigmoid(detail::add_row_broadcast(
      matmul(annotations, transpose(g.W_l1)), gate_shift));
  Tensor proj = matmul(annotations, transpose(p.W_s));
  Tensor ctx_proj = matmul(p.W_c, context);  // att x 1
  Tensor mixed(proj.rows(), proj.cols());
  for (int i = 0; i < proj.rows(); ++i)
    for (int j = 0; j < proj.cols(); ++j) {
      const double lam = gates.at(i, j);
      mixed.at(i, j) = (1.0 - lam) * proj.at(i, j) + lam * ctx_proj.at(j, 0) +
                       p.b_s.at(j, 0);
    }
  AttentionOutputEval out = detail::finish(annotations, tanh(mixed), p, mask);
  out.gates = gates;
  return out;
}

}  // namespace hanet
