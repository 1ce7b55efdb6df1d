#ifndef STREAMTAG_ADAM_HPP_
#define STREAMTAG_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "streamtag/autodiff.hpp"

namespace streamtag::num {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// Adam with bias correction over a fixed, ordered parameter list. Frozen
/// parameters keep their values; every gradient is zeroed after the step.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double learning_rate = 1e-3);

  void step();
  void zero_grad();

  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }
  std::span<Parameter* const> parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamState state_;
};

}  // namespace streamtag::num

#endif  // STREAMTAG_ADAM_HPP_
