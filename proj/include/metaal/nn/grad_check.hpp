#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metaal/nn/graph.hpp"
#include "metaal/nn/param_store.hpp"

namespace metaal::nn {

/// Outcome of comparing reverse-mode gradients with central differences.
///
/// Relative error per coordinate is |analytic - numeric| / max(|analytic|,
/// |numeric|, floor); `floor` keeps vanishing coordinates from dominating.
struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool finite = true;

  bool passed(double tol) const { return finite && max_rel_error < tol; }
  std::string summary() const;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double floor = 1e-6;
};

/// `fn` builds a single-element node from graph variables holding `inputs`.
using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

GradCheckReport grad_check(const ScalarFn& fn, std::span<const Tensor> inputs, GradCheckOptions opts = {});

/// Same check against every parameter in `store` (restored afterwards).
GradCheckReport grad_check_params(ParamStore& store, const std::function<Var(Graph&, ParamStore&)>& fn,
                                  GradCheckOptions opts = {});

}  // namespace metaal::nn
