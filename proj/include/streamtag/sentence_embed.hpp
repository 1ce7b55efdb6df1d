#ifndef STREAMTAG_SENTENCE_EMBED_HPP_
#define STREAMTAG_SENTENCE_EMBED_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "streamtag/autodiff.hpp"
#include "streamtag/checkpoint_io.hpp"
#include "streamtag/corpus.hpp"
#include "streamtag/encoder.hpp"

namespace streamtag {

inline constexpr std::size_t kSentenceEmbeddingDim = 256;

/// First stage of the sentence-level extractor: sentence -> raw fixed-size vector.
class SentenceProvider {
 public:
  virtual ~SentenceProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(const Sentence& sentence) const = 0;
  virtual std::string name() const = 0;
};

/// Mean of the sentence's word vectors.
class MeanPoolProvider final : public SentenceProvider {
 public:
  explicit MeanPoolProvider(std::shared_ptr<const WordEmbeddingTable> words);
  std::size_t dim() const override { return words_->dim(); }
  std::vector<double> embed(const Sentence& sentence) const override;
  std::string name() const override { return "meanpool"; }

 private:
  std::shared_ptr<const WordEmbeddingTable> words_;
};

/// Vectors computed elsewhere, keyed by (batch name, index within batch).
/// File layout: "STPV", u32 version, u64 count, u32 dim, then per record
/// (u32 name length, name bytes, u32 index, dim float64), little-endian.
class PrecomputedProvider final : public SentenceProvider {
 public:
  using Key = std::pair<std::string, int>;

  PrecomputedProvider(std::size_t dim, std::map<Key, std::vector<double>> vectors);
  static PrecomputedProvider load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(const Sentence& sentence) const override;
  std::string name() const override { return "precomputed"; }

 private:
  std::size_t dim_;
  std::map<Key, std::vector<double>> vectors_;
};

/// Affine provider_dim -> 256 map; frozen once pretrained.
class ProjectionLayer {
 public:
  ProjectionLayer() = default;
  ProjectionLayer(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return weight_.value.rows(); }
  std::size_t output_dim() const { return weight_.value.cols(); }

  std::vector<double> apply(std::span<const double> raw) const;
  num::Var apply(num::Graph& g, num::Var raw) const;

  void freeze();
  bool frozen() const { return !weight_.trainable; }
  std::vector<num::Parameter*> parameters() { return {&weight_, &bias_}; }

  num::ParameterContainer export_parameters() const;
  static ProjectionLayer from_parameters(const num::ParameterContainer& params);

 private:
  num::Parameter weight_;
  num::Parameter bias_;
};

std::vector<double> embed_sentence(const Sentence& sentence, const SentenceProvider& provider,
                                   const ProjectionLayer& projection);

struct LabeledSentence {
  const Sentence* sentence = nullptr;
  std::set<std::string> event_types;
};

/// Event types with a B- tag in each sentence.
std::vector<LabeledSentence> label_by_tags(std::span<const Sentence* const> sentences);

enum class PretrainObjective {
  Softmax,  // one type per sentence (first present); sentences without events are skipped
  Sigmoid,  // independent presence per type
};

struct PretrainConfig {
  std::size_t output_dim = kSentenceEmbeddingDim;
  int epochs = 40;
  int runs = 3;
  double learning_rate = 1e-3;
  double train_fraction = 0.9;
  std::uint64_t seed = 7;
  PretrainObjective objective = PretrainObjective::Softmax;
};

struct PretrainRun {
  int run = 0;
  int best_epoch = 0;  // 1-based epoch that first reached best_score
  double best_score = 0.0;
  std::vector<double> test_scores;
};

struct PretrainResult {
  ProjectionLayer projection;  // frozen
  std::vector<PretrainRun> runs;
  int selected_run = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Trains provider -> projection -> per-type output layer on a 90/10 split,
/// repeats `runs` times and keeps the run whose test score peaks at the
/// earliest epoch (ties: higher score, then lower run index). The output layer
/// is discarded and the projection frozen.
PretrainResult pretrain_projection(std::span<const LabeledSentence> sentences,
                                   std::span<const std::string> event_types,
                                   const SentenceProvider& provider, const PretrainConfig& config);

struct StoreEntry {
  int index = 0;
  std::vector<double> vector;
};

struct Retrieved {
  int batch_ordinal = 0;
  int index = 0;
  double distance = 0.0;
  std::vector<double> vector;
};

/// One nearest embedding per previous batch, ascending ordinal.
using RetrievedSequence = std::vector<Retrieved>;

/// Append-once store of per-batch sentence embeddings with exact
/// nearest-neighbour search.
/// File layout: "STES", u32 version, u64 count, u32 dim, then per record
/// (u32 batch ordinal, u32 index, dim float64), little-endian.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = kSentenceEmbeddingDim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  bool has_batch(int ordinal) const { return batches_.count(ordinal) > 0; }
  std::size_t batch_size(int ordinal) const;
  std::size_t total_entries() const;
  std::vector<int> ordinals() const;
  StoreEntry entry(int ordinal, std::size_t position) const;

  /// Entries are kept sorted by index; storing an ordinal twice throws.
  void store_batch(int ordinal, std::vector<StoreEntry> entries);
  /// Embeds and stores the batch's training sentences.
  void store_batch(const Batch& batch, const SentenceProvider& provider,
                   const ProjectionLayer& projection);

  /// Euclidean nearest entry of batch `ordinal`; ties go to the lowest index.
  Retrieved retrieve_nearest(std::span<const double> query, int ordinal) const;
  /// Nearest entry from each batch 1..current_ordinal-1; empty for the first batch.
  RetrievedSequence retrieve_sequence(std::span<const double> query, int current_ordinal) const;

  std::size_t payload_bytes_per_entry() const { return dim_ * sizeof(double); }

  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);
  std::string to_bytes() const;

 private:
  struct BatchData {
    std::vector<int> indices;
    std::vector<double> values;  // row-major, one row per index
  };
  std::size_t dim_;
  std::map<int, BatchData> batches_;
};

}  // namespace streamtag

#endif  // STREAMTAG_SENTENCE_EMBED_HPP_
