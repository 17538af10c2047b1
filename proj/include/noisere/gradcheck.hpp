#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "noisere/params.hpp"

namespace noisere {

struct GradCheckEntry {
  std::string param;
  int64_t index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> worst_per_param;  // one entry per checked parameter

  bool passes(double tolerance) const { return max_rel_error < tolerance; }
};

// Compares analytic gradients against central finite differences.
//
// loss_fn(true) must zero the gradients, run a fresh forward + backward,
// leave gradients in the Parameters, and return the loss; loss_fn(false)
// runs forward only. The function must be deterministic in the parameter
// values. Relative error is |a - n| / max(1e-8, |a| + |n|).
//
// Entries where both sides are below 1e-8 count as agreeing: an
// analytically inert parameter (e.g. a bias added uniformly inside a
// softmax row) has a true gradient of exactly zero, and central
// differences only measure cancellation noise (~1e-11) there.
inline GradCheckReport finite_diff_check(const std::function<double(bool)>& loss_fn,
                                         const std::vector<Parameter*>& params,
                                         double h = 1e-5) {
  GradCheckReport report;
  loss_fn(true);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    GradCheckEntry worst;
    worst.param = p->name;
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double fp = loss_fn(false);
      p->value[i] = saved - h;
      const double fm = loss_fn(false);
      p->value[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][i];
      const bool both_zero = std::abs(a) < 1e-8 && std::abs(numeric) < 1e-8;
      const double rel =
          both_zero ? 0.0
                    : std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (rel >= worst.rel_error) {
        worst.index = i;
        worst.analytic = a;
        worst.numeric = numeric;
        worst.rel_error = rel;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, worst.rel_error);
    report.worst_per_param.push_back(std::move(worst));
  }
  return report;
}

}  // namespace noisere
