#ifndef STREAMTAG_CRF_HPP_
#define STREAMTAG_CRF_HPP_

#include <span>
#include <vector>

#include "streamtag/autodiff.hpp"
#include "streamtag/corpus.hpp"

// Linear-chain CRF over K tags. Transition matrices are (K+2) x (K+2) indexed
// [from][to]; row/column K is the virtual start state and K+1 the stop state.
// Transitions into start and out of stop are never read.
namespace streamtag::crf {

inline std::size_t start_state(std::size_t num_tags) { return num_tags; }
inline std::size_t stop_state(std::size_t num_tags) { return num_tags + 1; }

/// Emission plus transition score of one path, including start and stop.
double path_score(const num::Tensor& emissions, const num::Tensor& transitions,
                  std::span<const int> path);

/// log Z by the forward algorithm in log space.
double log_partition(const num::Tensor& emissions, const num::Tensor& transitions);

/// Highest-scoring path. Ties go to the lowest tag id, both at every
/// backpointer and at the final state.
std::vector<int> viterbi_decode(const num::Tensor& emissions, const num::Tensor& transitions);

/// Negative log-likelihood log Z - score(gold). The gradient with respect to
/// emissions is (marginals - gold indicator); for transitions it is
/// (expected - observed) transition counts.
num::Var nll(num::Var emissions, num::Var transitions, std::span<const int> gold);

/// Rewrites every I-x that does not continue an x span as B-x.
std::vector<TriggerTag> repair_bio(std::vector<TriggerTag> tags);

}  // namespace streamtag::crf

#endif  // STREAMTAG_CRF_HPP_
