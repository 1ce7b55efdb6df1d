#ifndef STREAMTAG_SYNTH_HPP_
#define STREAMTAG_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamtag/corpus.hpp"
#include "streamtag/encoder.hpp"

namespace streamtag {

struct SynthBatchSpec {
  std::string name;
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
  std::size_t n_test = 0;
};

struct SynthConfig {
  int n_event_types = 8;
  std::size_t vocab_size = 400;  // filler words
  std::size_t n_trigger_lemmas = 24;
  double ambiguous_fraction = 0.5;
  std::size_t markers_per_type = 6;
  double zipf_exponent = 1.0;    // trigger lemma frequency
  double phrasal_fraction = 0.1; // lemmas that always take a particle (two-token trigger)
  std::vector<SynthBatchSpec> batches;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::size_t sentences_per_doc = 10;
  std::uint64_t seed = 1;

  /// Four batches with 300/40/40 sentences named after months.
  static SynthConfig standard();
  static SynthConfig from_json_text(const std::string& text);
  static SynthConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct TriggerLemma {
  std::string lemma;
  std::vector<int> types;      // one entry unless ambiguous
  std::string particle;        // empty unless phrasal
  std::vector<std::string> surfaces;
};

/// The lexicon shared by every sentence generated from one config.
struct SynthWorld {
  std::vector<std::string> event_types;
  std::vector<std::string> fillers;
  std::vector<std::string> filler_pos;
  std::vector<TriggerLemma> lemmas;
  std::vector<std::vector<std::string>> markers;  // per type
  std::vector<double> lemma_weights;              // Zipf, sums to 1

  std::vector<std::string> vocabulary() const;
  std::optional<int> marker_type(const std::string& surface) const;
  const TriggerLemma* find_lemma(const std::string& lemma) const;
};

SynthWorld build_world(const SynthConfig& config);

/// Deterministic in config.seed. Sentences carry 0-2 trigger spans sharing one
/// event type, and every trigger sentence holds at least one marker of that
/// type.
std::vector<Batch> generate_corpus(const SynthConfig& config);
std::vector<Batch> generate_corpus(const SynthConfig& config, const SynthWorld& world);

/// Clean example sentences for extractor pretraining, `per_type` per event type,
/// each lemma reading covered round-robin.
std::vector<Sentence> generate_guidelines(const SynthConfig& config, const SynthWorld& world,
                                          std::size_t per_type, std::uint64_t seed);

/// Word vectors where markers cluster around a per-type direction and all
/// surfaces of a lemma share the lemma's vector up to small noise.
struct StructuredEmbeddingOptions {
  std::size_t dim = 200;
  double marker_cluster = 1.0;  // weight of the type direction for markers
  double lemma_cluster = 0.0;   // same for unambiguous trigger lemmas
  double noise = 1.0;
  std::uint64_t seed = 11;
};
WordEmbeddingTable structured_word_embeddings(const SynthWorld& world,
                                              const StructuredEmbeddingOptions& options);

/// Tags a clean sentence from its lemmas and markers alone.
std::vector<TriggerTag> oracle_tags(const SynthWorld& world, const Sentence& sentence);

}  // namespace streamtag

#endif  // STREAMTAG_SYNTH_HPP_
