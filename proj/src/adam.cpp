#include "streamtag/adam.hpp"

#include <cmath>

namespace streamtag::num {

Adam::Adam(std::vector<Parameter*> params, double learning_rate) : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
  for (const Parameter* p : params_) {
    state_.first_moment.emplace_back(p->value.shape());
    state_.second_moment.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++state_.step;
  const double b1 = state_.beta1, b2 = state_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
  const double lr = state_.learning_rate;
  const double eps = state_.epsilon;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.trainable) {
      double* m = state_.first_moment[k].raw();
      double* v = state_.second_moment[k].raw();
      double* w = p.value.raw();
      const double* g = p.grad.raw();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        w[i] -= lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + eps);
      }
    }
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace streamtag::num
