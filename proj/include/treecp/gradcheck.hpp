#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "treecp/tape.hpp"

namespace treecp {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t exact_coords = 0;  // coordinates where both gradients vanish
  std::size_t coords = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool pass(double tolerance) const { return max_rel_err < tolerance; }
};

// Central-difference check of a scalar function of the given parameters.
// `build` constructs the forward computation on a fresh tape and returns the
// scalar root; it must read parameter values through Tape::param so that the
// analytic route sees the perturbations too. Coordinates whose analytic and
// numeric gradients agree within `atol` count as exact: central differences
// cannot resolve gradients near the f(x)*eps/step noise floor, so a relative
// comparison there would only measure noise. `corrupt` shifts the first
// analytic coordinate (fault-injection hook for the CLI).
template <typename BuildFn>
GradCheckReport grad_check(std::span<Param* const> params, BuildFn build, double step = 1e-5,
                           double corrupt = 0.0, double atol = 1e-8) {
  if (step <= 0.0) throw usage_error("grad_check: step must be positive");

  for (Param* p : params) p->grad.zero();
  {
    Tape tape;
    Var root = build(tape);
    tape.backward(root);
    tape.accumulate_param_grads();
  }

  GradCheckReport report;
  bool first_coord = true;
  for (Param* p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    entry.coords = p->value.numel();
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      double f_plus;
      {
        Tape tape;
        f_plus = tape.val(build(tape))[0];
      }
      p->value[i] = saved - step;
      double f_minus;
      {
        Tape tape;
        f_minus = tape.val(build(tape))[0];
      }
      p->value[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * step);
      double analytic = p->grad[i];
      if (first_coord) {
        analytic += corrupt;
        first_coord = false;
      }
      const double diff = std::abs(analytic - numeric);
      if (diff <= atol) {
        ++entry.exact_coords;
        continue;
      }
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, diff / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace treecp
