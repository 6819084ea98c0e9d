#pragma once

// Central finite-difference gradient checking. Independent of the tape's
// backward pass: it only re-runs forward evaluations.

#include <cmath>
#include <functional>
#include <string>

#include "trajevent/tensor.hpp"

namespace testsupport {

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t checked = 0;
  std::string worst;  // where the worst element was found
};

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-4});
  return std::abs(a - b) / scale;
}

// `loss()` must re-read `values` on every call; the final call re-syncs the
// model so no stale +-h perturbation leaks into later checks.
inline GradCheckResult finite_diff_check(
    std::vector<double>& values, const std::vector<double>& analytic,
    const std::function<double()>& loss, double h = 1e-5) {
  GradCheckResult result;
  for (size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss();
    values[i] = saved - h;
    const double down = loss();
    values[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = rel_err(analytic[i], fd);
    if (err > result.max_rel_err) {
      result.max_rel_err = err;
      result.worst = "index " + std::to_string(i) + " analytic " +
                     std::to_string(analytic[i]) + " fd " + std::to_string(fd);
    }
    ++result.checked;
  }
  loss();
  return result;
}

}  // namespace testsupport
