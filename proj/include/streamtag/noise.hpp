#ifndef STREAMTAG_NOISE_HPP_
#define STREAMTAG_NOISE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "streamtag/corpus.hpp"

namespace streamtag {

/// Per-batch probability that a training trigger span is corrupted.
struct NoiseSchedule {
  std::map<int, double> per_batch;

  double level(int ordinal) const;
  // Throws if an ordinal of `batches` is missing or a level leaves [0, 1].
  void check_covers(std::span<const Batch> batches) const;
};

/// Trigger lemmas observed as B- under at least two event types.
struct ConfusingList {
  std::map<std::string, std::set<std::string>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  const std::set<std::string>* find(const std::string& lemma) const;
};

ConfusingList build_confusing_list(std::span<const Sentence* const> train_sentences);
ConfusingList build_confusing_list(std::span<const Batch> batches);  // training splits only

struct CorruptionOptions {
  // Weight of the drop option relative to weight 1 per alternative type for
  // confusing lemmas; unset means uniform over all options.
  std::optional<double> drop_weight;
};

struct CorruptionStats {
  std::size_t spans = 0;
  std::size_t dropped = 0;
  std::size_t swapped = 0;
  std::size_t corrupted() const { return dropped + swapped; }
  CorruptionStats& operator+=(const CorruptionStats& o) {
    spans += o.spans;
    dropped += o.dropped;
    swapped += o.swapped;
    return *this;
  }
};

/// Corrupts whole trigger spans: with probability `noise_level` a span is
/// dropped to O or, for confusing lemmas, possibly relabeled to another type
/// keeping its extent.
Sentence corrupt_sentence(const Sentence& sentence, double noise_level,
                          const ConfusingList& confusing, std::mt19937_64& rng,
                          const CorruptionOptions& options = {},
                          CorruptionStats* stats = nullptr);

struct SimulationGroup {
  int group_id = 1;
  std::uint64_t seed = 0;
  std::vector<Batch> batches;
  CorruptionStats stats;
};

std::uint64_t group_seed(std::uint64_t master_seed, int group_id);

/// Groups are numbered 1..n_groups; only training splits are touched.
std::vector<SimulationGroup> generate_groups(std::span<const Batch> batches,
                                             const NoiseSchedule& schedule, int n_groups,
                                             std::uint64_t master_seed,
                                             const CorruptionOptions& options = {});

struct SimulationConfig {
  NoiseSchedule schedule;
  int n_groups = 10;
  std::uint64_t master_seed = 0;
  CorruptionOptions corruption;

  static SimulationConfig from_json_text(const std::string& text);
  static SimulationConfig load(const std::filesystem::path& path);
};

/// Writes `<dir>/group_<id>/corpus.tsv` for every group.
void write_groups(const std::filesystem::path& dir, std::span<const SimulationGroup> groups);

// Decreasing schedules over four batches, named by the first batch's level.
NoiseSchedule schedule_25();
NoiseSchedule schedule_10();

}  // namespace streamtag

#endif  // STREAMTAG_NOISE_HPP_
