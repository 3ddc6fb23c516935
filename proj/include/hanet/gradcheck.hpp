#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hanet/tensor.hpp"

namespace hanet {

// Scalar objective over a flat list of parameter tensors. When grads_out is
// non-null the callee must also fill it with dLoss/dParam (same shapes),
// normally by running the tape backward.
using GradFn =
    std::function<double(const std::vector<Tensor>&, std::vector<Tensor>*)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> per_param;  // worst coordinate per tensor
  int worst_param = -1;
};

// Central-difference check of the analytic gradient. Error metric per
// coordinate: |analytic - numeric| / max(1, |analytic| + |numeric|).
inline GradCheckReport grad_check_report(
    const GradFn& f, std::vector<Tensor> params, double eps = 1e-5,
    const std::vector<std::string>* names = nullptr) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");

  auto param_name = [&](std::size_t p) {
    return names && p < names->size() ? (*names)[p]
                                      : "param[" + std::to_string(p) + "]";
  };

  std::vector<Tensor> analytic(params.size());
  for (std::size_t p = 0; p < params.size(); ++p)
    analytic[p] = Tensor(params[p].rows(), params[p].cols());
  const double base = f(params, &analytic);
  if (!std::isfinite(base))
    throw NumericError("grad_check: non-finite loss at the base point");

  GradCheckReport report;
  report.per_param.assign(params.size(), 0.0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!all_finite(analytic[p]))
      throw NumericError("grad_check: non-finite analytic gradient in " +
                         param_name(p));
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + eps;
      const double up = f(params, nullptr);
      params[p][i] = saved - eps;
      const double down = f(params, nullptr);
      params[p][i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: non-finite loss while perturbing " +
                           param_name(p));
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double err =
          std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      if (err > report.per_param[p]) report.per_param[p] = err;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = static_cast<int>(p);
      }
    }
  }
  return report;
}

inline double grad_check(const GradFn& f, const std::vector<Tensor>& params,
                         double eps = 1e-5) {
  return grad_check_report(f, params, eps).max_rel_error;
}

}  // namespace hanet
