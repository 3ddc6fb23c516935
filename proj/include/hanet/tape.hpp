#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "hanet/tensor.hpp"

namespace hanet {

// Handle into a Tape. Only valid for the tape that produced it.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode differentiation record. The graph is define-by-run: every forward
// pass rebuilds a fresh tape, so variant-specific topology (document length,
// masking, context wiring) never needs a static graph. Node order is the
// topological order; backward() is one reverse sweep.
//
// Single-owner, single-threaded by contract.
class Tape {
 public:
  static constexpr double kProbFloor = 1e-12;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void reserve(std::size_t n) { nodes_.reserve(n); }
  int size() const { return static_cast<int>(nodes_.size()); }

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& adjoint(Var v) const { return nodes_[check(v)].adjoint; }

  // Differentiable input (parameters, embedded data).
  Var leaf(Tensor value) { return push(std::move(value), nullptr); }

  // Non-differentiable input: no parents, nothing propagates out of it.
  Var constant(Tensor value) { return push(std::move(value), nullptr); }

  Var matmul(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.cols() != B.rows())
      throw DimensionError("matmul: " + A.shape_str() + " x " + B.shape_str());
    Tensor out = hanet::matmul(A, B);
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      acc_matmul_nt(t.nodes_[ai].adjoint, adj, t.nodes_[bi].value);
      acc_matmul_tn(t.nodes_[bi].adjoint, t.nodes_[ai].value, adj);
    });
  }

  Var add(Var a, Var b) {
    const int ai = a.idx, bi = b.idx;
    Tensor out = hanet::add(value(a), value(b));
    return push(std::move(out), [ai, bi](Tape& t, int self) {
      acc_scaled(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, 1.0);
      acc_scaled(t.nodes_[bi].adjoint, t.nodes_[self].adjoint, 1.0);
    });
  }

  Var sub(Var a, Var b) {
    const int ai = a.idx, bi = b.idx;
    Tensor out = hanet::sub(value(a), value(b));
    return push(std::move(out), [ai, bi](Tape& t, int self) {
      acc_scaled(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, 1.0);
      acc_scaled(t.nodes_[bi].adjoint, t.nodes_[self].adjoint, -1.0);
    });
  }

  // Elementwise (Hadamard) product.
  Var mul(Var a, Var b) {
    const int ai = a.idx, bi = b.idx;
    Tensor out = hadamard(value(a), value(b));
    return push(std::move(out), [ai, bi](Tape& t, int self) {
      acc_hadamard(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, t.nodes_[bi].value);
      acc_hadamard(t.nodes_[bi].adjoint, t.nodes_[self].adjoint, t.nodes_[ai].value);
    });
  }

  Var scale(Var a, double s) {
    const int ai = a.idx;
    Tensor out = hanet::scale(value(a), s);
    return push(std::move(out), [ai, s](Tape& t, int self) {
      acc_scaled(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, s);
    });
  }

  Var tanh(Var a) {
    const int ai = a.idx;
    Tensor out = hanet::tanh(value(a));
    return push(std::move(out), [ai](Tape& t, int self) {
      const Tensor& y = t.nodes_[self].value;
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& da = t.nodes_[ai].adjoint;
      for (std::size_t i = 0; i < y.size(); ++i)
        da[i] += adj[i] * (1.0 - y[i] * y[i]);
    });
  }

  Var sigmoid(Var a) {
    const int ai = a.idx;
    Tensor out = hanet::sigmoid(value(a));
    return push(std::move(out), [ai](Tape& t, int self) {
      const Tensor& y = t.nodes_[self].value;
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& da = t.nodes_[ai].adjoint;
      for (std::size_t i = 0; i < y.size(); ++i)
        da[i] += adj[i] * y[i] * (1.0 - y[i]);
    });
  }

  Var one_minus(Var a) {
    const int ai = a.idx;
    const Tensor& A = value(a);
    Tensor out(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = 1.0 - A[i];
    return push(std::move(out), [ai](Tape& t, int self) {
      acc_scaled(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, -1.0);
    });
  }

  Var transpose(Var a) {
    const int ai = a.idx;
    Tensor out = hanet::transpose(value(a));
    return push(std::move(out), [ai](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& da = t.nodes_[ai].adjoint;
      for (int i = 0; i < adj.rows(); ++i)
        for (int j = 0; j < adj.cols(); ++j) da.at(j, i) += adj.at(i, j);
    });
  }

  // m (R x C) + row (1 x C) broadcast over rows.
  Var add_rowvec(Var m, Var row) {
    const Tensor &M = value(m), &R = value(row);
    if (R.rows() != 1 || R.cols() != M.cols())
      throw DimensionError("add_rowvec: " + M.shape_str() + " + " + R.shape_str());
    Tensor out = M;
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out.at(i, j) += R.at(0, j);
    const int mi = m.idx, ri = row.idx;
    return push(std::move(out), [mi, ri](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      acc_scaled(t.nodes_[mi].adjoint, adj, 1.0);
      Tensor& dr = t.nodes_[ri].adjoint;
      for (int i = 0; i < adj.rows(); ++i)
        for (int j = 0; j < adj.cols(); ++j) dr.at(0, j) += adj.at(i, j);
    });
  }

  // m (R x C) * row (1 x C) broadcast over rows, elementwise.
  Var mul_rowvec(Var m, Var row) {
    const Tensor &M = value(m), &R = value(row);
    if (R.rows() != 1 || R.cols() != M.cols())
      throw DimensionError("mul_rowvec: " + M.shape_str() + " * " + R.shape_str());
    Tensor out = M;
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out.at(i, j) *= R.at(0, j);
    const int mi = m.idx, ri = row.idx;
    return push(std::move(out), [mi, ri](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      const Tensor& M2 = t.nodes_[mi].value;
      const Tensor& R2 = t.nodes_[ri].value;
      Tensor& dm = t.nodes_[mi].adjoint;
      Tensor& dr = t.nodes_[ri].adjoint;
      for (int i = 0; i < adj.rows(); ++i)
        for (int j = 0; j < adj.cols(); ++j) {
          dm.at(i, j) += adj.at(i, j) * R2.at(0, j);
          dr.at(0, j) += adj.at(i, j) * M2.at(i, j);
        }
    });
  }

  // [a b] side by side; rows must agree.
  Var concat_cols(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.rows() != B.rows())
      throw DimensionError("concat_cols: " + A.shape_str() + " | " + B.shape_str());
    Tensor out(A.rows(), A.cols() + B.cols());
    for (int i = 0; i < A.rows(); ++i) {
      for (int j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j);
      for (int j = 0; j < B.cols(); ++j) out.at(i, A.cols() + j) = B.at(i, j);
    }
    const int ai = a.idx, bi = b.idx, ca = A.cols();
    return push(std::move(out), [ai, bi, ca](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& da = t.nodes_[ai].adjoint;
      Tensor& db = t.nodes_[bi].adjoint;
      for (int i = 0; i < adj.rows(); ++i) {
        for (int j = 0; j < ca; ++j) da.at(i, j) += adj.at(i, j);
        for (int j = ca; j < adj.cols(); ++j) db.at(i, j - ca) += adj.at(i, j);
      }
    });
  }

  // Columns (each C x 1) assembled into a C x n matrix.
  Var stack_cols(const std::vector<Var>& cols) {
    if (cols.empty()) throw DegenerateInputError("stack_cols: no columns");
    const int r = value(cols[0]).rows();
    Tensor out(r, static_cast<int>(cols.size()));
    std::vector<int> idx(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const Tensor& c = value(cols[j]);
      if (c.cols() != 1 || c.rows() != r)
        throw DimensionError("stack_cols: column " + std::to_string(j) + " is " +
                             c.shape_str());
      for (int i = 0; i < r; ++i) out.at(i, static_cast<int>(j)) = c.at(i, 0);
      idx[j] = cols[j].idx;
    }
    return push(std::move(out), [idx](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        Tensor& dc = t.nodes_[idx[j]].adjoint;
        for (int i = 0; i < adj.rows(); ++i)
          dc.at(i, 0) += adj.at(i, static_cast<int>(j));
      }
    });
  }

  // Single row r of m as a 1 x C vector.
  Var pick_row(Var m, int r) {
    const Tensor& M = value(m);
    if (r < 0 || r >= M.rows())
      throw ContractError("pick_row: row " + std::to_string(r) + " of " + M.shape_str());
    Tensor out(1, M.cols());
    for (int j = 0; j < M.cols(); ++j) out.at(0, j) = M.at(r, j);
    const int mi = m.idx;
    return push(std::move(out), [mi, r](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& dm = t.nodes_[mi].adjoint;
      for (int j = 0; j < adj.cols(); ++j) dm.at(r, j) += adj.at(0, j);
    });
  }

  // Row gather: out[i, :] = m[ids[i], :]. Repeated ids accumulate on backward,
  // which is what embedding lookups need.
  Var rows(Var m, std::vector<int> ids) {
    const Tensor& M = value(m);
    Tensor out(static_cast<int>(ids.size()), M.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= M.rows())
        throw ContractError("rows: id " + std::to_string(ids[i]) + " out of " +
                            M.shape_str());
      for (int j = 0; j < M.cols(); ++j)
        out.at(static_cast<int>(i), j) = M.at(ids[i], j);
    }
    const int mi = m.idx;
    return push(std::move(out), [mi, ids = std::move(ids)](Tape& t, int self) {
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& dm = t.nodes_[mi].adjoint;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < adj.cols(); ++j)
          dm.at(ids[i], j) += adj.at(static_cast<int>(i), j);
    });
  }

  // Masked softmax over a 1 x T row; the mask is graph-constant.
  Var softmax_masked(Var logits, const Tensor& mask) {
    Tensor out = hanet::softmax_masked(value(logits), mask);
    const int li = logits.idx;
    return push(std::move(out), [li](Tape& t, int self) {
      const Tensor& y = t.nodes_[self].value;
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& dl = t.nodes_[li].adjoint;
      double s = 0.0;
      for (int j = 0; j < y.cols(); ++j) s += adj.at(0, j) * y.at(0, j);
      // masked entries have y == 0 exactly, so their gradient stays 0
      for (int j = 0; j < y.cols(); ++j)
        dl.at(0, j) += y.at(0, j) * (adj.at(0, j) - s);
    });
  }

  // Scalar 1 x 1 sum of all entries.
  Var sum(Var a) {
    const int ai = a.idx;
    Tensor out(1, 1);
    out.at(0, 0) = sum_all(value(a));
    return push(std::move(out), [ai](Tape& t, int self) {
      const double g = t.nodes_[self].adjoint.at(0, 0);
      Tensor& da = t.nodes_[ai].adjoint;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
    });
  }

  // Scalar 1 x 1 view of entry (r, c).
  Var pick_entry(Var a, int r, int c) {
    const Tensor& A = value(a);
    if (r < 0 || r >= A.rows() || c < 0 || c >= A.cols())
      throw ContractError("pick_entry: (" + std::to_string(r) + "," +
                          std::to_string(c) + ") of " + A.shape_str());
    Tensor out(1, 1);
    out.at(0, 0) = A.at(r, c);
    const int ai = a.idx;
    return push(std::move(out), [ai, r, c](Tape& t, int self) {
      t.nodes_[ai].adjoint.at(r, c) += t.nodes_[self].adjoint.at(0, 0);
    });
  }

  // ln(max(x, kProbFloor)) elementwise. In the clamped region the output is
  // constant, so the gradient there is zero.
  Var log_clamped(Var a) {
    const Tensor& A = value(a);
    Tensor out(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i)
      out[i] = std::log(A[i] > kProbFloor ? A[i] : kProbFloor);
    const int ai = a.idx;
    return push(std::move(out), [ai](Tape& t, int self) {
      const Tensor& x = t.nodes_[ai].value;
      const Tensor& adj = t.nodes_[self].adjoint;
      Tensor& da = t.nodes_[ai].adjoint;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > kProbFloor) da[i] += adj[i] / x[i];
    });
  }

  // Elementwise product with a graph-constant tensor (dropout masks).
  Var mul_const(Var a, Tensor m) {
    Tensor out = hadamard(value(a), m);
    const int ai = a.idx;
    return push(std::move(out), [ai, m = std::move(m)](Tape& t, int self) {
      acc_hadamard(t.nodes_[ai].adjoint, t.nodes_[self].adjoint, m);
    });
  }

  void zero_adjoints() {
    for (auto& n : nodes_) n.adjoint.fill(0.0);
  }

  // Reverse sweep from a scalar root. Adjoints are zeroed first, so calling
  // backward twice yields identical values.
  void backward(Var root) {
    const Tensor& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1)
      throw ContractError("backward: root must be scalar, got " + rv.shape_str());
    zero_adjoints();
    nodes_[root.idx].adjoint.at(0, 0) = 1.0;
    for (int i = root.idx; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(*this, i);
  }

 private:
  struct Node {
    Tensor value;
    Tensor adjoint;
    std::function<void(Tape&, int)> back;  // null for leaves/constants
  };

  int check(Var v) const {
    if (v.idx < 0 || v.idx >= static_cast<int>(nodes_.size()))
      throw ContractError("Var does not belong to this tape");
    return v.idx;
  }

  Var push(Tensor value, std::function<void(Tape&, int)> back) {
    Node n;
    n.adjoint = Tensor(value.rows(), value.cols());
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace hanet
