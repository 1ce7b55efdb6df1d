#ifndef STREAMTAG_MEMORY_HPP_
#define STREAMTAG_MEMORY_HPP_

#include <optional>
#include <random>
#include <vector>

#include "streamtag/encoder.hpp"
#include "streamtag/sentence_embed.hpp"

namespace streamtag {

inline constexpr std::size_t kMemoryHidden = 128;

/// Forward LSTM over retrieved sentence embeddings, oldest batch first.
class MemoryNetwork {
 public:
  MemoryNetwork() = default;
  MemoryNetwork(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng);

  std::size_t input_dim() const { return lstm_.w_ih.value.rows(); }
  std::size_t hidden() const { return lstm_.hidden(); }

  /// |seq| x hidden trajectory of hidden states.
  num::Var trajectory(num::Graph& g, const RetrievedSequence& seq) const;

  const LstmWeights& weights() const { return lstm_; }
  LstmWeights& weights() { return lstm_; }
  void collect(std::vector<num::Parameter*>& out) { lstm_.collect(out); }

 private:
  LstmWeights lstm_;
};

/// Final hidden state as a 1 x hidden row; none for an empty sequence.
std::optional<num::Var> memory_embed(num::Graph& g, const MemoryNetwork& net,
                                     const RetrievedSequence& seq);

}  // namespace streamtag

#endif  // STREAMTAG_MEMORY_HPP_
