#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "hanet/errors.hpp"

namespace hanet {

// Dense row-major 2-D array of doubles. The only tensor rank in this library;
// batching is expressed as loops over documents. Vectors are N x 1 columns or
// 1 x N rows depending on context.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols)
      : rows_(rows), cols_(cols), v_(check_size(rows, cols), 0.0) {}
  Tensor(int rows, int cols, double fill)
      : rows_(rows), cols_(cols), v_(check_size(rows, cols), fill) {}

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor ones(int rows, int cols) { return Tensor(rows, cols, 1.0); }

  // Row-major literal, e.g. Tensor::of({{1,2},{3,4}}).
  static Tensor of(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw DimensionError("Tensor::of: ragged rows");
      int j = 0;
      for (double x : row) t.at(i, j++) = x;
      ++i;
    }
    return t;
  }
  // 1 x N row literal.
  static Tensor row(std::initializer_list<double> xs) {
    Tensor t(1, static_cast<int>(xs.size()));
    int j = 0;
    for (double x : xs) t.at(0, j++) = x;
    return t;
  }
  // N x 1 column literal.
  static Tensor col(std::initializer_list<double> xs) {
    Tensor t(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double x : xs) t.at(i++, 0) = x;
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  bool bit_equal(const Tensor& o) const {
    return same_shape(o) && v_ == o.v_;
  }

 private:
  static std::size_t check_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative tensor dimension");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  int rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + a.shape_str() + " x " + b.shape_str());
  Tensor out(a.rows(), b.cols());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    double* orow = out.data() + static_cast<std::size_t>(i) * n;
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

// dst += a * b
inline void acc_matmul(Tensor& dst, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows() || dst.rows() != a.rows() || dst.cols() != b.cols())
    throw DimensionError("acc_matmul: " + dst.shape_str() + " += " + a.shape_str() +
                         " x " + b.shape_str());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    double* orow = dst.data() + static_cast<std::size_t>(i) * n;
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// dst += a^T * b
inline void acc_matmul_tn(Tensor& dst, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || dst.rows() != a.cols() || dst.cols() != b.cols())
    throw DimensionError("acc_matmul_tn: " + dst.shape_str() + " += " +
                         a.shape_str() + "^T x " + b.shape_str());
  const int m = a.cols(), k = a.rows(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const double* arow = a.data() + static_cast<std::size_t>(p) * m;
    const double* brow = b.data() + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = dst.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// dst += a * b^T
inline void acc_matmul_nt(Tensor& dst, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols() || dst.rows() != a.rows() || dst.cols() != b.rows())
    throw DimensionError("acc_matmul_nt: " + dst.shape_str() + " += " +
                         a.shape_str() + " x " + b.shape_str() + "^T");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    double* orow = dst.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b.data() + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      orow[j] += s;
    }
  }
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

inline void acc_scaled(Tensor& dst, const Tensor& a, double s) {
  require_same_shape(dst, a, "acc_scaled");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * a[i];
}

inline void acc_hadamard(Tensor& dst, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "acc_hadamard");
  require_same_shape(dst, a, "acc_hadamard");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a[i] * b[i];
}

inline Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

// Largest double strictly below 1; tanh/sigmoid outputs are clamped one ulp
// inside their codomain so saturation never produces the boundary exactly.
inline double clamp_open_unit(double v) {
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  if (v >= 1.0) return kBelowOne;
  if (v <= 0.0) return std::numeric_limits<double>::denorm_min();
  return v;
}

inline double tanh_scalar(double x) {
  const double v = std::tanh(x);
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  if (v >= 1.0) return kBelowOne;
  if (v <= -1.0) return -kBelowOne;
  return v;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tanh_scalar(out[i]);
  return out;
}

inline double sigmoid_scalar(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return clamp_open_unit(1.0 / (1.0 + e));
  }
  const double e = std::exp(x);
  return clamp_open_unit(e / (1.0 + e));
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  return out;
}

// Softmax over a 1 x T row with a binary keep-mask. Masked entries come out
// exactly 0; unmasked entries are computed with max-subtraction and sum to 1.
inline Tensor softmax_masked(const Tensor& logits, const Tensor& mask) {
  if (logits.rows() != 1 || mask.rows() != 1)
    throw DimensionError("softmax_masked: expected 1xT rows, got " +
                         logits.shape_str() + " and " + mask.shape_str());
  require_same_shape(logits, mask, "softmax_masked");
  double mx = -std::numeric_limits<double>::infinity();
  int kept = 0;
  for (int j = 0; j < logits.cols(); ++j) {
    if (mask.at(0, j) != 0.0) {
      mx = std::max(mx, logits.at(0, j));
      ++kept;
    }
  }
  if (kept == 0)
    throw DegenerateInputError("softmax_masked: mask has no unmasked entry");
  Tensor out(1, logits.cols());
  double z = 0.0;
  for (int j = 0; j < logits.cols(); ++j) {
    if (mask.at(0, j) != 0.0) {
      out.at(0, j) = std::exp(logits.at(0, j) - mx);
      z += out.at(0, j);
    }
  }
  for (int j = 0; j < logits.cols(); ++j)
    if (mask.at(0, j) != 0.0) out.at(0, j) /= z;
  return out;
}

inline double l2_norm(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sum_all(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

inline bool all_finite(const Tensor& a) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

}  // namespace hanet
