#include "streamtag/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace streamtag::crf {
namespace {

void check_shapes(const num::Tensor& e, const num::Tensor& t) {
  if (e.rank() != 2 || e.rows() == 0) {
    throw num::ShapeError("crf: emissions must be a non-empty matrix, got " + num::shape_string(e.shape()));
  }
  const std::size_t k = e.cols() + 2;
  if (t.rank() != 2 || t.rows() != k || t.cols() != k) {
    throw num::ShapeError("crf: transitions " + num::shape_string(t.shape()) + " do not match " +
                          std::to_string(e.cols()) + " tags");
  }
}

double lse(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (std::isinf(mx)) return mx;
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// alpha[t][k]: log-sum of all prefixes ending in tag k at position t.
std::vector<double> forward_table(const num::Tensor& e, const num::Tensor& tr) {
  const std::size_t n = e.rows(), K = e.cols();
  const std::size_t S = start_state(K);
  std::vector<double> alpha(n * K);
  std::vector<double> scratch(K);
  for (std::size_t k = 0; k < K; ++k) alpha[k] = tr.at(S, k) + e.at(0, k);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t b = 0; b < K; ++b) {
      for (std::size_t a = 0; a < K; ++a) scratch[a] = alpha[(t - 1) * K + a] + tr.at(a, b);
      alpha[t * K + b] = e.at(t, b) + lse(scratch);
    }
  }
  return alpha;
}

// beta[t][k]: log-sum of all suffixes after position t given tag k at t.
std::vector<double> backward_table(const num::Tensor& e, const num::Tensor& tr) {
  const std::size_t n = e.rows(), K = e.cols();
  const std::size_t E = stop_state(K);
  std::vector<double> beta(n * K);
  std::vector<double> scratch(K);
  for (std::size_t k = 0; k < K; ++k) beta[(n - 1) * K + k] = tr.at(k, E);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        scratch[b] = tr.at(a, b) + e.at(t + 1, b) + beta[(t + 1) * K + b];
      }
      beta[t * K + a] = lse(scratch);
    }
  }
  return beta;
}

double final_lse(const std::vector<double>& alpha, const num::Tensor& e, const num::Tensor& tr) {
  const std::size_t n = e.rows(), K = e.cols();
  std::vector<double> last(K);
  for (std::size_t k = 0; k < K; ++k) last[k] = alpha[(n - 1) * K + k] + tr.at(k, stop_state(K));
  return lse(last);
}

}  // namespace

double path_score(const num::Tensor& e, const num::Tensor& tr, std::span<const int> path) {
  check_shapes(e, tr);
  const std::size_t K = e.cols();
  if (path.size() != e.rows()) throw std::invalid_argument("crf: path length mismatch");
  double s = tr.at(start_state(K), static_cast<std::size_t>(path[0]));
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto y = static_cast<std::size_t>(path[t]);
    if (y >= K) throw std::out_of_range("crf: tag id out of range");
    s += e.at(t, y);
    if (t > 0) s += tr.at(static_cast<std::size_t>(path[t - 1]), y);
  }
  return s + tr.at(static_cast<std::size_t>(path.back()), stop_state(K));
}

double log_partition(const num::Tensor& e, const num::Tensor& tr) {
  check_shapes(e, tr);
  return final_lse(forward_table(e, tr), e, tr);
}

std::vector<int> viterbi_decode(const num::Tensor& e, const num::Tensor& tr) {
  check_shapes(e, tr);
  const std::size_t n = e.rows(), K = e.cols();
  std::vector<double> delta(K), next(K);
  std::vector<int> back(n * K, 0);
  for (std::size_t k = 0; k < K; ++k) delta[k] = tr.at(start_state(K), k) + e.at(0, k);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t b = 0; b < K; ++b) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t a = 0; a < K; ++a) {
        const double v = delta[a] + tr.at(a, b);
        if (v > best) {
          best = v;
          arg = static_cast<int>(a);
        }
      }
      next[b] = best + e.at(t, b);
      back[t * K + b] = arg;
    }
    std::swap(delta, next);
  }
  double best = -std::numeric_limits<double>::infinity();
  int last = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double v = delta[k] + tr.at(k, stop_state(K));
    if (v > best) {
      best = v;
      last = static_cast<int>(k);
    }
  }
  std::vector<int> path(n);
  path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) {
    path[t - 1] = back[t * K + static_cast<std::size_t>(path[t])];
  }
  return path;
}

num::Var nll(num::Var emissions, num::Var transitions, std::span<const int> gold) {
  const num::Tensor& e = emissions.value();
  const num::Tensor& tr = transitions.value();
  if (e.rank() == 2 && e.rows() == 0) throw std::invalid_argument("crf: empty sequence");
  check_shapes(e, tr);
  if (gold.size() != e.rows()) {
    throw std::invalid_argument("crf: gold length " + std::to_string(gold.size()) +
                                " != sequence length " + std::to_string(e.rows()));
  }
  const double log_z = log_partition(e, tr);
  const double loss = log_z - path_score(e, tr, gold);
  std::vector<int> gold_copy(gold.begin(), gold.end());
  const std::size_t ie = emissions.id(), it = transitions.id();
  return emissions.graph().record(
      num::Tensor::scalar(loss), {emissions, transitions},
      [ie, it, gold_copy, log_z](num::Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        const num::Tensor& ev = g.value(ie);
        const num::Tensor& tv = g.value(it);
        const std::size_t n = ev.rows(), K = ev.cols();
        const std::size_t S = start_state(K), E = stop_state(K);
        const auto alpha = forward_table(ev, tv);
        const auto beta = backward_table(ev, tv);
        if (g.requires_grad(ie)) {
          num::Tensor& de = g.grad(ie);
          for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t k = 0; k < K; ++k) {
              const double p = std::exp(alpha[t * K + k] + beta[t * K + k] - log_z);
              de[t * K + k] += d * p;
            }
            de[t * K + static_cast<std::size_t>(gold_copy[t])] -= d;
          }
        }
        if (g.requires_grad(it)) {
          num::Tensor& dt = g.grad(it);
          for (std::size_t k = 0; k < K; ++k) {
            dt.at(S, k) += d * std::exp(alpha[k] + beta[k] - log_z);
            dt.at(k, E) += d * std::exp(alpha[(n - 1) * K + k] + beta[(n - 1) * K + k] - log_z);
          }
          for (std::size_t t = 1; t < n; ++t) {
            for (std::size_t a = 0; a < K; ++a) {
              for (std::size_t b = 0; b < K; ++b) {
                const double p = std::exp(alpha[(t - 1) * K + a] + tv.at(a, b) + ev.at(t, b) +
                                          beta[t * K + b] - log_z);
                dt.at(a, b) += d * p;
              }
            }
          }
          dt.at(S, static_cast<std::size_t>(gold_copy[0])) -= d;
          dt.at(static_cast<std::size_t>(gold_copy[n - 1]), E) -= d;
          for (std::size_t t = 1; t < n; ++t) {
            dt.at(static_cast<std::size_t>(gold_copy[t - 1]), static_cast<std::size_t>(gold_copy[t])) -= d;
          }
        }
      });
}

std::vector<TriggerTag> repair_bio(std::vector<TriggerTag> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind != TagKind::I) continue;
    const bool continues = i > 0 && tags[i - 1].kind != TagKind::O &&
                           tags[i - 1].event_type == tags[i].event_type;
    if (!continues) tags[i].kind = TagKind::B;
  }
  return tags;
}

}  // namespace streamtag::crf
