#ifndef STREAMTAG_TAGGER_HPP_
#define STREAMTAG_TAGGER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "streamtag/checkpoint_io.hpp"
#include "streamtag/encoder.hpp"
#include "streamtag/memory.hpp"

namespace streamtag {

inline constexpr std::size_t kContextHidden = 128;  // per direction
inline constexpr std::size_t kPreCrfHidden = 128;

/// Everything a model needs that is not a trained parameter.
struct ModelContext {
  TagSet tagset;
  std::shared_ptr<const WordEmbeddingTable> words;
  Vocabulary pos_vocab;
  EncoderDims dims;
  bool train_word_vectors = false;
};

/// input -> 128 (tanh) -> |tags|
class PreCrfLayer {
 public:
  PreCrfLayer() = default;
  PreCrfLayer(std::size_t input_dim, std::size_t num_tags, std::mt19937_64& rng);

  std::size_t input_dim() const { return w1_.value.rows(); }
  num::Var apply(num::Graph& g, num::Var x) const;
  void collect(std::vector<num::Parameter*>& out);

 private:
  num::Parameter w1_, b1_, w2_, b2_;
};

class StreamModel {
 public:
  StreamModel(ModelContext context, std::uint64_t seed);

  const ModelContext& context() const { return *context_; }
  const TagSet& tagset() const { return context_->tagset; }
  std::size_t num_tags() const { return context_->tagset.size(); }
  bool has_memory() const { return memory_.has_value(); }
  std::size_t pre_crf_input() const { return pre_crf_.input_dim(); }

  /// Adds a memory network and replaces the pre-CRF layer by a fresh
  /// (256 + 128)-input one. Throws if memory is already enabled.
  void enable_memory(std::uint64_t seed);

  num::Var features(num::Graph& g, const Sentence& s) const;
  /// |tokens| x 256
  num::Var context_encode(num::Graph& g, num::Var features) const;
  /// Memory embedding for `seq`; none without a memory network or for an empty sequence.
  std::optional<num::Var> memory(num::Graph& g, const RetrievedSequence* seq) const;
  /// |tokens| x |tags|. A 384-input layer without memory sees a zero vector.
  num::Var emissions(num::Graph& g, num::Var context, std::optional<num::Var> memory) const;
  num::Var emissions(num::Graph& g, const Sentence& s, const RetrievedSequence* seq = nullptr) const;
  num::Var transitions(num::Graph& g) const { return g.parameter(transitions_); }

  num::Var loss(num::Graph& g, const Sentence& s, const RetrievedSequence* seq = nullptr) const;
  std::vector<TriggerTag> decode(const Sentence& s, const RetrievedSequence* seq = nullptr) const;

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
  /// Trained parameters by name. The word table is included only when trainable.
  num::ParameterContainer export_parameters() const;
  /// Requires the same parameter names and shapes as export_parameters().
  void import_parameters(const num::ParameterContainer& params);

 private:
  std::shared_ptr<const ModelContext> context_;
  TokenEncoder encoder_;
  LstmWeights ctx_fwd_;
  LstmWeights ctx_bwd_;
  PreCrfLayer pre_crf_;
  num::Parameter transitions_;
  std::optional<MemoryNetwork> memory_;
};

}  // namespace streamtag

#endif  // STREAMTAG_TAGGER_HPP_
