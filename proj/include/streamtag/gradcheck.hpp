#ifndef STREAMTAG_GRADCHECK_HPP_
#define STREAMTAG_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "streamtag/autodiff.hpp"

namespace streamtag::num {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // 0 checks every element; otherwise a seeded sample of this many per parameter.
  std::size_t max_elements_per_parameter = 0;
  std::uint64_t seed = 17;
  // Entries with |gradient| below the floor are compared absolutely. Central
  // differences at epsilon 1e-5 carry ~1e-10 of roundoff for O(10) losses.
  double denominator_floor = 1e-5;
};

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// Compares analytic gradients of the scalar built by `loss` against central
/// differences (f(x+e) - f(x-e)) / 2e for every trainable parameter. Values are
/// restored afterwards and all gradients are left zeroed.
std::vector<GradCheckResult> grad_check(const std::function<Var(Graph&)>& loss,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& options = {});

}  // namespace streamtag::num

#endif  // STREAMTAG_GRADCHECK_HPP_
