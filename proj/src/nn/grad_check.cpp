#include "metaal/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metaal::nn {

namespace {

void record(GradCheckReport& r, double analytic, double numeric, std::size_t input, std::size_t index, double floor) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) r.finite = false;
  const double abs_err = std::abs(analytic - numeric);
  const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
  r.max_abs_error = std::max(r.max_abs_error, abs_err);
  if (rel > r.max_rel_error || r.checked == 0) {
    r.max_rel_error = std::max(r.max_rel_error, rel);
    r.worst_input = input;
    r.worst_index = index;
  }
  ++r.checked;
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "checked=" << checked << " max_rel=" << max_rel_error << " max_abs=" << max_abs_error << " worst=("
     << worst_input << ',' << worst_index << ')' << (finite ? "" : " NON-FINITE");
  return os.str();
}

GradCheckReport grad_check(const ScalarFn& fn, std::span<const Tensor> inputs, GradCheckOptions opts) {
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.variable(t));
    Var out = fn(g, vars);
    g.backward(out);
    for (const Var& v : vars) {
      auto gr = g.grad(v);
      analytic.emplace_back(gr.begin(), gr.end());
    }
  }

  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : xs) vars.push_back(g.constant(t));
    return fn(g, vars).item();
  };

  GradCheckReport report;
  std::vector<Tensor> work(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double orig = work[k].values[i];
      work[k].values[i] = orig + opts.eps;
      const double up = evaluate(work);
      work[k].values[i] = orig - opts.eps;
      const double down = evaluate(work);
      work[k].values[i] = orig;
      record(report, analytic[k][i], (up - down) / (2.0 * opts.eps), k, i, opts.floor);
    }
  }
  return report;
}

GradCheckReport grad_check_params(ParamStore& store, const std::function<Var(Graph&, ParamStore&)>& fn,
                                  GradCheckOptions opts) {
  const std::vector<double> original = store.flatten();
  store.zero_grad();
  {
    Graph g;
    g.backward(fn(g, store));
  }
  const std::vector<double> analytic = store.flatten_grads();

  auto evaluate = [&] {
    Graph g;
    return fn(g, store).item();
  };

  GradCheckReport report;
  std::vector<double> work = original;
  for (std::size_t i = 0; i < work.size(); ++i) {
    work[i] = original[i] + opts.eps;
    store.restore(work);
    const double up = evaluate();
    work[i] = original[i] - opts.eps;
    store.restore(work);
    const double down = evaluate();
    work[i] = original[i];
    record(report, analytic[i], (up - down) / (2.0 * opts.eps), 0, i, opts.floor);
  }
  store.restore(original);
  store.zero_grad();
  return report;
}

}  // namespace metaal::nn
