#ifndef STREAMTAG_TRAINER_HPP_
#define STREAMTAG_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "streamtag/adam.hpp"
#include "streamtag/eval.hpp"
#include "streamtag/sentence_embed.hpp"
#include "streamtag/tagger.hpp"

namespace streamtag {

enum class Strategy { All, Current, Finetune, Proposed };
inline constexpr std::array<Strategy, 4> kAllStrategies = {Strategy::All, Strategy::Current,
                                                           Strategy::Finetune, Strategy::Proposed};
std::string_view strategy_name(Strategy s);
/// Case-insensitive.
std::optional<Strategy> parse_strategy(std::string_view text);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  int patience = 5;  // epochs without dev improvement before stopping; 0 disables
  bool shuffle = true;
  std::size_t sentences_per_step = 1;
  bool use_zero_memory_at_batch1 = false;
  bool carry_optimizer_state = false;
  bool train_word_vectors = false;
};

struct CheckpointMeta {
  Strategy strategy = Strategy::Current;
  int batch_ordinal = 1;
  int epoch = 0;
  double dev_f1 = 0.0;
  double wall_clock_seconds = 0.0;
};

struct Checkpoint {
  StreamModel model;
  CheckpointMeta meta;
  std::optional<num::AdamState> optimizer;  // kept only when carrying optimizer state
};

/// Writes `<stem>.bin` (parameters) and `<stem>.json` (metadata).
void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& stem, const ModelContext& context);

/// Which (batch, split) labels a strategy read while training a batch.
class DataAccessLog {
 public:
  struct Entry {
    Strategy strategy;
    int training_batch;
    int read_batch;
    Split split;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  void record(const Entry& e);
  std::vector<Entry> entries() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

struct EpochResult {
  int epoch = 0;
  double dev_f1 = 0.0;
};

/// Index of the highest dev F1; the earliest epoch wins ties.
std::size_t select_best(std::span<const EpochResult> epochs);

/// Frozen sentence extractor plus the per-batch store used by the proposed strategy.
struct MemoryResources {
  const SentenceProvider* provider = nullptr;
  const ProjectionLayer* projection = nullptr;
  EmbeddingStore* store = nullptr;
};

using SequenceCache = std::unordered_map<const Sentence*, RetrievedSequence>;

/// Sequences over batches 1..ordinal-1 for every sentence.
SequenceCache build_sequence_cache(std::span<const Sentence* const> sentences, int ordinal,
                                   const MemoryResources& memory);

struct TrainContext {
  const ModelContext* model = nullptr;
  TrainConfig config;
  DataAccessLog* log = nullptr;
};

/// Fresh model on the union of training splits of `batches` (1..i), dev on the union of dev splits.
Checkpoint train_all(std::span<const Batch> batches, const TrainContext& ctx);
/// Fresh model on one batch.
Checkpoint train_current(const Batch& batch, const TrainContext& ctx);
/// Continues from `prior`; with no prior the batch must be the first one.
Checkpoint train_finetune(const Checkpoint* prior, const Batch& batch, const TrainContext& ctx);
/// Batch 1 trains like Current. Later batches inherit `prior`, add the memory
/// path on first use and read only the store for earlier batches. Stores the
/// batch's training sentences afterwards.
Checkpoint train_proposed(const Checkpoint* prior, const Batch& batch, const MemoryResources& memory,
                          const TrainContext& ctx);

/// Pooled trigger P/R over `sentences`.
PrecisionRecall evaluate(const StreamModel& model, std::span<const Sentence* const> sentences,
                         const SequenceCache* cache = nullptr);

struct ExperimentConfig {
  TrainConfig train;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::string noise_label = "25%";
  int jobs = 1;
  std::filesystem::path checkpoint_dir;  // empty: checkpoints and the proposed store are not written
};

struct GroupData {
  int group_id = 1;
  std::vector<Batch> batches;
};

struct StrategyRun {
  int group_id = 1;
  Strategy strategy = Strategy::Current;
  std::vector<PrecisionRecall> per_batch;  // on the union of all test splits
  std::vector<CheckpointMeta> checkpoints;
  num::ParameterContainer projection_after;  // proposed runs only
  double seconds = 0.0;
};

struct ExperimentResult {
  RunMetrics metrics;
  std::vector<StrategyRun> runs;  // ordered by (group, strategy)
};

/// Trains every (group, strategy) pair over all batches, on `jobs` threads.
/// Each group uses its own store and a seed derived from train.seed and the group id.
ExperimentResult run_experiment(std::span<const GroupData> groups, const ModelContext& model,
                                const SentenceProvider* provider, const ProjectionLayer* projection,
                                const ExperimentConfig& config, DataAccessLog* log = nullptr);

/// metrics.json, metrics.csv and timing.csv under `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunMetrics& metrics);

}  // namespace streamtag

#endif  // STREAMTAG_TRAINER_HPP_
