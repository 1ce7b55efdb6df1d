#ifndef STREAMTAG_EVAL_HPP_
#define STREAMTAG_EVAL_HPP_

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "streamtag/corpus.hpp"

namespace streamtag {

struct TriggerSpan {
  std::size_t sentence = 0;  // position in the evaluated sentence list
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string event_type;
  auto operator<=>(const TriggerSpan&) const = default;
};

/// Maximal runs of B-x I-x ... I-x. Stray I- tags start a new span.
std::set<TriggerSpan> extract_spans(std::span<const TriggerTag> tags, std::size_t sentence = 0);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  static PRF from(double p, double r);
};

/// Exact span and type match.
PRF trigger_prf(const std::set<TriggerSpan>& predicted, const std::set<TriggerSpan>& gold);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// F1 of the mean precision and mean recall.
PRF aggregate_runs(std::span<const PrecisionRecall> runs);

/// Round half up to one decimal after scaling by 100, e.g. 0.7025 -> "70.3".
std::string format_percent(double value);

struct MetricRecord {
  std::string noise;
  std::string strategy;
  std::string batch;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int groups = 0;
};

struct TimingRecord {
  std::string strategy;
  double seconds = 0.0;
};

struct RunMetrics {
  std::vector<MetricRecord> records;
  std::vector<TimingRecord> timing;
};

std::string metrics_to_json(std::span<const MetricRecord> records);
std::vector<MetricRecord> metrics_from_json(const std::string& text);
std::string metrics_to_csv(std::span<const MetricRecord> records);
std::string timing_to_csv(std::span<const TimingRecord> timing);
std::vector<TimingRecord> timing_from_csv(const std::string& text);

/// Rows are strategies, column groups are batches, cells P/R/F1 x 100.
/// One table per noise setting.
std::string render_table(std::span<const MetricRecord> records);
std::string render_timing(std::span<const TimingRecord> timing);

/// Canonical strategy order used by reports.
int strategy_rank(const std::string& name);

}  // namespace streamtag

#endif  // STREAMTAG_EVAL_HPP_
