// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "streamtag/crf.hpp"
#include "streamtag/gradcheck.hpp"
#include "streamtag/ops.hpp"
#include "streamtag/pipeline.hpp"

using namespace streamtag;

namespace {

// Pinned tolerances and budgets.
constexpr double kCrfTolerance = 1e-9;
constexpr int kCrfInstances = 500;
constexpr double kCrfSeconds = 5.0;
constexpr double kGradEpsilon = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kGradSamples = 40;
constexpr double kGradSeconds = 60.0;
constexpr double kRetrievalSeconds = 2.0;
constexpr std::size_t kMinSpans = 10000;
constexpr double kNoiseLow = 0.23, kNoiseHigh = 0.27;
constexpr double kNoiseSeconds = 5.0;
constexpr double kMinProposedGap = 0.02;  // F1 as a fraction
constexpr double kTimingSlack = 0.95;

// Directional workload: 5 groups, 3 epochs per batch, no early stopping.
constexpr int kGroups = 5;
constexpr int kEpochs = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

void for_each_path(std::size_t n, std::size_t k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(n, 0);
  for (;;) {
    fn(path);
    std::size_t i = 0;
    while (i < n && ++path[i] == static_cast<int>(k)) path[i++] = 0;
    if (i == n) return;
  }
}

// Score recomputed from the definition, independent of crf::path_score.
double brute_score(const num::Tensor& e, const num::Tensor& t, const std::vector<int>& p) {
  const std::size_t k = e.cols();
  double s = t.at(k, static_cast<std::size_t>(p.front())) + t.at(static_cast<std::size_t>(p.back()), k + 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += e.at(i, static_cast<std::size_t>(p[i]));
    if (i > 0) s += t.at(static_cast<std::size_t>(p[i - 1]), static_cast<std::size_t>(p[i]));
  }
  return s;
}

Outcome crf_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int mismatches = 0;
  for (int inst = 0; inst < kCrfInstances; ++inst) {
    const std::size_t n = 1 + rng() % 5, k = 1 + rng() % 5;
    num::Tensor e({n, k}), t({k + 2, k + 2});
    for (double& v : e.data()) v = normal(rng);
    for (double& v : t.data()) v = normal(rng);
    std::vector<int> gold(n);
    for (int& y : gold) y = static_cast<int>(rng() % k);
    std::vector<double> scores;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> arg;
    for_each_path(n, k, [&](const std::vector<int>& p) {
      const double s = brute_score(e, t, p);
      scores.push_back(s);
      if (s > best) {
        best = s;
        arg = p;
      }
    });
    double z = 0.0;
    for (double s : scores) z += std::exp(s - best);
    const double expected = best + std::log(z) - brute_score(e, t, gold);
    num::Graph g;
    const double loss = crf::nll(g.constant(e), g.constant(t), gold).value().item();
    worst = std::max(worst, std::abs(loss - expected));
    if (crf::viterbi_decode(e, t) != arg) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {worst < kCrfTolerance && mismatches == 0 && secs < kCrfSeconds,
          std::to_string(kCrfInstances) + " instances, max |nll - brute| " + fmt(worst) + ", viterbi mismatches " +
              std::to_string(mismatches) + ", " + fmt(secs) + " s"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.n_event_types = 3;
  cfg.n_trigger_lemmas = 6;
  cfg.vocab_size = 30;
  cfg.markers_per_type = 2;
  cfg.min_length = 3;
  cfg.max_length = 5;
  cfg.batches = {{"micro", 3, 0, 0}};
  cfg.seed = 5;
  const SynthWorld world = build_world(cfg);
  const auto batches = generate_corpus(cfg, world);
  auto words = std::make_shared<const WordEmbeddingTable>(structured_word_embeddings(world, {}));
  StreamModel model(make_model_context(batches, words), 21);
  model.enable_memory(22);
  std::mt19937_64 rng(23);
  std::vector<RetrievedSequence> seqs(batches[0].sentences.size());
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    for (std::size_t m = 0; m <= k; ++m) seqs[k].push_back({static_cast<int>(m + 1), 0, 0.0, normal_vector(256, rng)});
  }
  std::normal_distribution<double> normal(0.0, 0.5);
  for (num::Parameter* p : model.parameters()) {
    if (p->name == "crf.transitions") {
      for (double& x : p->value.data()) x = normal(rng);
    }
  }
  auto loss = [&](num::Graph& g) {
    num::Var total = model.loss(g, batches[0].sentences[0], &seqs[0]);
    for (std::size_t k = 1; k < seqs.size(); ++k) total = num::add(total, model.loss(g, batches[0].sentences[k], &seqs[k]));
    return total;
  };
  num::GradCheckOptions opt;
  opt.epsilon = kGradEpsilon;
  opt.max_elements_per_parameter = kGradSamples;
  const auto params = model.parameters();
  std::map<std::string, double> worst;
  for (const auto& r : num::grad_check(loss, params, opt)) {
    const std::string group = r.name.substr(0, r.name.find('.'));
    worst[group] = std::max(worst[group], r.max_relative_error);
  }
  const double secs = seconds_since(t0);
  bool ok = secs < kGradSeconds && model.pre_crf_input() == 384;
  std::string detail;
  for (const auto& [group, err] : worst) {
    ok = ok && err < kGradTolerance;
    detail += group + " " + fmt(err) + ", ";
  }
  for (const char* required : {"encoder", "context", "memory", "precrf", "crf"}) ok = ok && worst.count(required);
  return {ok, "max rel err " + detail + fmt(secs) + " s"};
}

Outcome retrieval_oracle() {
  std::mt19937_64 rng(303);
  std::map<int, std::vector<StoreEntry>> kept;
  EmbeddingStore store;
  for (int b = 1; b <= 4; ++b) {
    std::vector<StoreEntry> entries;
    for (int i = 0; i < 250; ++i) entries.push_back({i, normal_vector(256, rng)});
    entries[180].vector = entries[20].vector;  // exact ties
    kept[b] = entries;
    store.store_batch(b, entries);
  }
  std::vector<std::vector<double>> queries;
  for (int q = 0; q < 100; ++q) queries.push_back(normal_vector(256, rng));
  for (int b = 1; b <= 4; ++b) queries.push_back(kept[b][20].vector);
  const auto t0 = Clock::now();
  int mismatches = 0;
  for (const auto& q : queries) {
    for (int b = 1; b <= 4; ++b) {
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (const StoreEntry& e : kept[b]) {
        double d = 0;
        for (std::size_t i = 0; i < q.size(); ++i) d += (e.vector[i] - q[i]) * (e.vector[i] - q[i]);
        if (d < best || (d == best && e.index < arg)) {
          best = d;
          arg = e.index;
        }
      }
      if (store.retrieve_nearest(q, b).index != arg) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kRetrievalSeconds,
          "1000 vectors x 4 batches, " + std::to_string(queries.size() * 4) + " queries, " +
              std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s"};
}

std::string split_text(std::span<const Batch> batches, Split split) {
  std::vector<Batch> only(batches.begin(), batches.end());
  for (Batch& b : only) std::erase_if(b.sentences, [split](const Sentence& s) { return s.split != split; });
  return serialize_corpus(only);
}

Outcome noise_statistics() {
  SynthConfig cfg = SynthConfig::standard();
  for (auto& b : cfg.batches) b.n_train = 3000;
  const auto clean = generate_corpus(cfg);
  NoiseSchedule schedule;
  for (const Batch& b : clean) schedule.per_batch[b.ordinal] = 0.25;
  const auto t0 = Clock::now();
  const auto groups = generate_groups(clean, schedule, 1, 404);
  const double secs = seconds_since(t0);
  const CorruptionStats& s = groups[0].stats;
  const double rate = static_cast<double>(s.corrupted()) / static_cast<double>(s.spans);
  const bool intact = split_text(clean, Split::Dev) == split_text(groups[0].batches, Split::Dev) &&
                      split_text(clean, Split::Test) == split_text(groups[0].batches, Split::Test);
  return {s.spans >= kMinSpans && rate >= kNoiseLow && rate <= kNoiseHigh && intact && secs < kNoiseSeconds,
          std::to_string(s.corrupted()) + " of " + std::to_string(s.spans) + " spans corrupted (" + fmt(rate, 4) +
              "), dev/test " + (intact ? "identical" : "CHANGED") + ", " + fmt(secs) + " s"};
}

Outcome aggregation() {
  const std::vector<PrecisionRecall> runs = {{1.0, 0.0}, {0.0, 1.0}};
  const PRF prf = aggregate_runs(runs);
  return {prf.precision == 0.5 && prf.recall == 0.5 && prf.f1 == 0.5,
          "P " + fmt(prf.precision) + ", R " + fmt(prf.recall) + ", F1 " + fmt(prf.f1)};
}

const MetricRecord& final_record(const RunMetrics& m, const std::string& strategy) {
  std::string last;
  for (const auto& r : m.records) last = std::max(last, r.batch);
  for (const auto& r : m.records) {
    if (r.strategy == strategy && r.batch == last) return r;
  }
  throw std::runtime_error("no final-batch record for " + strategy);
}

double timing_of(const RunMetrics& m, const std::string& strategy) {
  for (const auto& t : m.timing) {
    if (t.strategy == strategy) return t.seconds;
  }
  throw std::runtime_error("no timing for " + strategy);
}

Outcome table3(const PipelineResult& r) {
  const auto& m = r.experiment.metrics;
  const double p = final_record(m, "Proposed").f1, f = final_record(m, "Finetune").f1,
               c = final_record(m, "Current").f1, a = final_record(m, "All").f1;
  return {p > f && f > c && p - f >= kMinProposedGap,
          "final-batch F1 Proposed " + format_percent(p) + ", Finetune " + format_percent(f) + ", Current " +
              format_percent(c) + " (All " + format_percent(a) + "), gap " + fmt(100 * (p - f)) + " points"};
}

Outcome table4(const PipelineResult& r) {
  const auto& m = r.experiment.metrics;
  const double all = timing_of(m, "All"), prop = timing_of(m, "Proposed"), fine = timing_of(m, "Finetune"),
               cur = timing_of(m, "Current");
  return {all > prop && prop > kTimingSlack * std::max(fine, cur),
          "mean seconds per group All " + fmt(all) + ", Proposed " + fmt(prop) + ", Finetune " + fmt(fine) +
              ", Current " + fmt(cur)};
}

Outcome batch1_equivalence() {
  const auto clean = generate_corpus(SynthConfig::standard());
  auto words = std::make_shared<const WordEmbeddingTable>(
      synthesize_word_embeddings(corpus_vocabulary(clean), 200, 8));
  const ModelContext model = make_model_context(clean, words);
  TrainContext ctx;
  ctx.model = &model;
  ctx.config.epochs = 2;
  ctx.config.seed = 808;
  const MeanPoolProvider provider(words);
  std::mt19937_64 rng(9);
  ProjectionLayer projection(provider.dim(), kSentenceEmbeddingDim, rng);
  projection.freeze();
  EmbeddingStore store;
  const Batch& first = clean[0];
  const std::string current = num::parameters_to_bytes(train_current(first, ctx).model.export_parameters());
  const std::string all = num::parameters_to_bytes(train_all(std::span(clean).first(1), ctx).model.export_parameters());
  const std::string fine = num::parameters_to_bytes(train_finetune(nullptr, first, ctx).model.export_parameters());
  const std::string prop = num::parameters_to_bytes(
      train_proposed(nullptr, first, {&provider, &projection, &store}, ctx).model.export_parameters());
  const bool ok = all == current && fine == current && prop == current;
  return {ok, std::string("All/Finetune/Proposed vs Current checkpoints ") + (ok ? "byte-identical" : "DIFFER") +
                  " (" + std::to_string(current.size()) + " bytes)"};
}

Outcome frozen_extractor(const PipelineResult& r) {
  const std::string before = num::parameters_to_bytes(r.projection_before);
  int runs = 0;
  bool ok = num::parameters_to_bytes(r.pretrain.projection.export_parameters()) == before;
  for (const auto& run : r.experiment.runs) {
    if (run.strategy != Strategy::Proposed) continue;
    ++runs;
    ok = ok && num::parameters_to_bytes(run.projection_after) == before;
  }
  ok = ok && runs == kGroups;
  return {ok, "projection after " + std::to_string(runs) + " proposed runs " + (ok ? "byte-identical" : "CHANGED")};
}

PipelineConfig directional_config() {
  PipelineConfig c;
  c.n_groups = kGroups;
  c.experiment.train.epochs = kEpochs;
  c.experiment.train.patience = 0;
  return c;
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  report(1, "CRF correctness", crf_correctness());
  report(2, "gradient suite", gradient_suite());
  report(3, "retrieval oracle", retrieval_oracle());
  report(4, "noise simulator statistics", noise_statistics());
  report(5, "aggregation semantics", aggregation());

  const auto t0 = Clock::now();
  const PipelineResult first = run_pipeline(directional_config());
  std::cout << render_table(first.experiment.metrics.records) << render_timing(first.experiment.metrics.timing)
            << "pipeline: " << fmt(seconds_since(t0), 4) << " s\n";
  report(6, "directional F1 ordering", table3(first));
  report(7, "directional timing ordering", table4(first));
  report(8, "batch-1 equivalence", batch1_equivalence());
  report(9, "frozen extractor", frozen_extractor(first));

  // Same master seed; more worker threads must not change a byte.
  PipelineConfig again = directional_config();
  again.experiment.jobs = std::max(2, static_cast<int>(std::thread::hardware_concurrency()));
  const auto t1 = Clock::now();
  const PipelineResult second = run_pipeline(again);
  const std::string a = metrics_to_json(first.experiment.metrics.records);
  const std::string b = metrics_to_json(second.experiment.metrics.records);
  report(10, "reproducibility",
         {a == b, std::string("metrics JSON ") + (a == b ? "byte-identical" : "DIFFERS") + " across two runs (" +
                      std::to_string(a.size()) + " bytes, rerun " + fmt(seconds_since(t1), 4) + " s)"});

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
