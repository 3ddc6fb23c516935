#pragma once

#include <string>
#include <vector>

#include "hanet/tape.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

// One direction of a GRU encoder: six weight matrices and three biases.
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   hcand = tanh(W_h x + U_h (r o h) + b_h)
//   h' = (1 - z) o h + z o hcand
struct GruParams {
  Tensor W_z, W_r, W_h;  // hidden x input
  Tensor U_z, U_r, U_h;  // hidden x hidden
  Tensor b_z, b_r, b_h;  // hidden x 1

  int input_dim() const { return W_z.cols(); }
  int hidden_dim() const { return W_z.rows(); }

  void validate() const {
    const int h = hidden_dim(), in = input_dim();
    auto want = [&](const Tensor& t, int r, int c, const char* n) {
      if (t.rows() != r || t.cols() != c)
        throw DimensionError(std::string("GruParams.") + n + ": got " +
                             t.shape_str() + ", want " + std::to_string(r) +
                             "x" + std::to_string(c));
    };
    want(W_r, h, in, "W_r");
    want(W_h, h, in, "W_h");
    want(U_z, h, h, "U_z");
    want(U_r, h, h, "U_r");
    want(U_h, h, h, "U_h");
    want(b_z, h, 1, "b_z");
    want(b_r, h, 1, "b_r");
    want(b_h, h, 1, "b_h");
  }
};

// Tape handles for one direction's parameters.
struct GruVars {
  Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
};

inline GruVars bind(Tape& t, const GruParams& p) {
  return GruVars{t.leaf(p.W_z), t.leaf(p.W_r), t.leaf(p.W_h),
                 t.leaf(p.U_z), t.leaf(p.U_r), t.leaf(p.U_h),
                 t.leaf(p.b_z), t.leaf(p.b_r), t.leaf(p.b_h)};
}

// One recurrence step; x is input_dim x 1, h_prev is hidden_dim x 1.
inline Var gru_step(Tape& t, Var x, Var h_prev, const GruVars& p) {
  Var z = t.sigmoid(t.add(t.add(t.matmul(p.W_z, x), t.matmul(p.U_z, h_prev)), p.b_z));
  Var r = t.sigmoid(t.add(t.add(t.matmul(p.W_r, x), t.matmul(p.U_r, h_prev)), p.b_r));
  Var hcand = t.tanh(
      t.add(t.add(t.matmul(p.W_h, x), t.matmul(p.U_h, t.mul(r, h_prev))), p.b_h));
  return t.add(t.mul(t.one_minus(z), h_prev), t.mul(z, hcand));
}

// Plain-tensor twin of gru_step for the no-tape evaluation path.
inline Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  Tensor z = sigmoid(add(add(matmul(p.W_z, x), matmul(p.U_z, h_prev)), p.b_z));
  Tensor r = sigmoid(add(add(matmul(p.W_r, x), matmul(p.U_r, h_prev)), p.b_r));
  Tensor hcand =
      tanh(add(add(matmul(p.W_h, x), matmul(p.U_h, hadamard(r, h_prev))), p.b_h));
  Tensor out = hcand;  // (1-z) o h + z o hcand
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hcand[i];
  return out;
}

// One direction over the rows of seq (T x input_dim). Masked steps carry the
// hidden state through unchanged, so appending padded rows never perturbs the
// states at real steps. Returns the per-step states as hidden x 1 columns.
inline std::vector<Var> run_gru_direction(Tape& t, Var seq, const GruVars& p,
                                          const std::vector<int>& mask,
                                          int hidden_dim, bool reversed) {
  const int steps = t.value(seq).rows();
  std::vector<Var> states(steps);
  Var h = t.constant(Tensor(hidden_dim, 1));
  for (int k = 0; k < steps; ++k) {
    const int step = reversed ? steps - 1 - k : k;
    if (mask[step] != 0) {
      Var x = t.transpose(t.pick_row(seq, step));
      h = gru_step(t, x, h, p);
    }
    states[step] = h;
  }
  return states;
}

inline std::vector<Tensor> run_gru_direction(const Tensor& seq, const GruParams& p,
                                             const std::vector<int>& mask,
                                             bool reversed) {
  const int steps = seq.rows();
  std::vector<Tensor> states(steps);
  Tensor h(p.hidden_dim(), 1);
  for (int k = 0; k < steps; ++k) {
    const int step = reversed ? steps - 1 - k : k;
    if (mask[step] != 0) {
      Tensor x(seq.cols(), 1);
      for (int j = 0; j < seq.cols(); ++j) x.at(j, 0) = seq.at(step, j);
      h = gru_step(x, h, p);
    }
    states[step] = h;
  }
  return states;
}

// Columns (hidden x 1 each) to a T x hidden matrix of row annotations.
inline Var rows_from_cols(Tape& t, const std::vector<Var>& cols) {
  return t.transpose(t.stack_cols(cols));
}

inline Tensor rows_from_cols(const std::vector<Tensor>& cols) {
  Tensor out(static_cast<int>(cols.size()), cols.empty() ? 0 : cols[0].rows());
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (int j = 0; j < cols[i].rows(); ++j)
      out.at(static_cast<int>(i), j) = cols[i].at(j, 0);
  return out;
}

// Bidirectional run: row t of the result is [forward state at t ; backward
// state at t], a (T x 2*hidden) annotation matrix.
inline Var run_bigru(Tape& t, Var seq, const GruVars& fwd, const GruVars& bwd,
                     const std::vector<int>& mask, int hidden_dim) {
  if (t.value(seq).rows() == 0)
    throw DegenerateInputError("run_bigru: empty sequence");
  if (static_cast<int>(mask.size()) != t.value(seq).rows())
    throw DimensionError("run_bigru: mask length " + std::to_string(mask.size()) +
                         " vs " + t.value(seq).shape_str());
  auto f = run_gru_direction(t, seq, fwd, mask, hidden_dim, false);
  auto b = run_gru_direction(t, seq, bwd, mask, hidden_dim, true);
  return t.concat_cols(rows_from_cols(t, f), rows_from_cols(t, b));
}

inline Tensor run_bigru(const Tensor& seq, const GruParams& fwd,
                        const GruParams& bwd, const std::vector<int>& mask) {
  if (seq.rows() == 0) throw DegenerateInputError("run_bigru: empty sequence");
  if (static_cast<int>(mask.size()) != seq.rows())
    throw DimensionError("run_bigru: mask length " + std::to_string(mask.size()) +
                         " vs " + seq.shape_str());
  auto f = run_gru_direction(seq, fwd, mask, false);
  auto b = run_gru_direction(seq, bwd, mask, true);
  Tensor fm = rows_from_cols(f), bm = rows_from_cols(b);
  Tensor out(fm.rows(), fm.cols() + bm.cols());
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < fm.cols(); ++j) out.at(i, j) = fm.at(i, j);
    for (int j = 0; j < bm.cols(); ++j) out.at(i, fm.cols() + j) = bm.at(i, j);
  }
  return out;
}

}  // namespace hanet
