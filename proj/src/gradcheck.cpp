#include "streamtag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace streamtag::num {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradCheckResult> grad_check(const std::function<Var(Graph&)>& loss,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var l = loss(g);
    g.backward(l);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  for (Parameter* p : params) p->zero_grad();

  auto evaluate = [&] {
    Graph g;
    return loss(g).value().item();
  };

  std::mt19937_64 rng(options.seed);
  std::vector<GradCheckResult> results;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    std::vector<std::size_t> order(p.value.size());
    std::iota(order.begin(), order.end(), 0);
    if (options.max_elements_per_parameter > 0 &&
        order.size() > options.max_elements_per_parameter) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(options.max_elements_per_parameter);
      std::sort(order.begin(), order.end());
    }
    GradCheckResult r{p.name, 0.0, 0};
    for (std::size_t idx : order) {
      const double saved = p.value[idx];
      p.value[idx] = saved + options.epsilon;
      const double up = evaluate();
      p.value[idx] = saved - options.epsilon;
      const double down = evaluate();
      p.value[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      r.max_relative_error =
          std::max(r.max_relative_error,
                   relative_error(analytic[k][idx], numeric, options.denominator_floor));
      ++r.checked;
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace streamtag::num
