#include "streamtag/memory.hpp"

#include "streamtag/ops.hpp"

namespace streamtag {

MemoryNetwork::MemoryNetwork(std::size_t input_dim, std::size_t hidden, std::mt19937_64& rng)
    : lstm_(LstmWeights::create("memory.lstm", input_dim, hidden, rng)) {}

num::Var MemoryNetwork::trajectory(num::Graph& g, const RetrievedSequence& seq) const {
  const std::size_t d = input_dim();
  num::Tensor x({seq.size(), d});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].vector.size() != d) {
      throw num::ShapeError("memory expects " + std::to_string(d) + "-dim embeddings, got " +
                            std::to_string(seq[t].vector.size()));
    }
    std::copy(seq[t].vector.begin(), seq[t].vector.end(), x.row_span(t).begin());
  }
  return lstm_.run(g, g.constant(std::move(x)), false);
}

std::optional<num::Var> memory_embed(num::Graph& g, const MemoryNetwork& net,
                                     const RetrievedSequence& seq) {
  if (seq.empty()) return std::nullopt;
  num::Var states = net.trajectory(g, seq);
  return num::row(states, seq.size() - 1);
}

}  // namespace streamtag
