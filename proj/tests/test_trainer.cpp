#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"

using namespace streamtag;
using namespace testing;

namespace {

TrainContext quick(const MicroWorld& w, DataAccessLog* log = nullptr, int epochs = 2) {
  TrainContext ctx;
  ctx.model = &w.context;
  ctx.config.epochs = epochs;
  ctx.config.patience = 0;
  ctx.config.seed = 5;
  ctx.log = log;
  return ctx;
}

struct Memory {
  MeanPoolProvider provider;
  ProjectionLayer projection;
  EmbeddingStore store;

  explicit Memory(const MicroWorld& w) : provider(w.words) {
    std::mt19937_64 rng(1);
    projection = ProjectionLayer(provider.dim(), kSentenceEmbeddingDim, rng);
    projection.freeze();
  }
  MemoryResources resources() { return {&provider, &projection, &store}; }
};

}  // namespace

TEST_CASE("select_best picks the earliest maximum") {
  const std::vector<EpochResult> rising = {{1, 0.1}, {2, 0.2}, {3, 0.3}};
  CHECK(select_best(rising) == 2);
  const std::vector<EpochResult> tie = {{1, 0.1}, {2, 0.2}, {3, 0.5}, {4, 0.4}, {5, 0.3}, {6, 0.2}, {7, 0.5}};
  CHECK(tie[select_best(tie)].epoch == 3);
  const std::vector<EpochResult> single = {{1, 0.0}};
  CHECK(select_best(single) == 0);
}

TEST_CASE("strategy names parse case-insensitively") {
  for (Strategy s : kAllStrategies) CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK(parse_strategy("PROPOSED") == Strategy::Proposed);
  CHECK_FALSE(parse_strategy("oracle").has_value());
}

TEST_CASE("all four strategies agree at batch 1") {
  MicroWorld w;
  const TrainContext ctx = quick(w);
  Memory mem(w);
  const Checkpoint all = train_all(std::span(w.batches).first(1), ctx);
  const Checkpoint current = train_current(w.batches[0], ctx);
  const Checkpoint finetune = train_finetune(nullptr, w.batches[0], ctx);
  const Checkpoint proposed = train_proposed(nullptr, w.batches[0], mem.resources(), ctx);
  const auto bytes = num::parameters_to_bytes(current.model.export_parameters());
  CHECK(num::parameters_to_bytes(all.model.export_parameters()) == bytes);
  CHECK(num::parameters_to_bytes(finetune.model.export_parameters()) == bytes);
  CHECK(num::parameters_to_bytes(proposed.model.export_parameters()) == bytes);
  CHECK_FALSE(proposed.model.has_memory());
  CHECK(mem.store.has_batch(1));
  CHECK(mem.store.batch_size(1) == w.batches[0].of_split(Split::Train).size());
}

TEST_CASE("All reads the union of earlier batches") {
  MicroWorld w;
  DataAccessLog log;
  train_all(w.batches, quick(w, &log, 1));
  std::set<std::pair<int, Split>> reads;
  for (const auto& e : log.entries()) reads.insert({e.read_batch, e.split});
  CHECK(reads == std::set<std::pair<int, Split>>{{1, Split::Train}, {2, Split::Train}, {1, Split::Dev}, {2, Split::Dev}});
}

TEST_CASE("finetune with zero epochs keeps the inherited parameters") {
  MicroWorld w;
  const TrainContext ctx = quick(w);
  const Checkpoint first = train_finetune(nullptr, w.batches[0], ctx);
  TrainContext none = ctx;
  none.config.epochs = 0;
  const Checkpoint second = train_finetune(&first, w.batches[1], none);
  CHECK(second.model.export_parameters() == first.model.export_parameters());
  CHECK(second.meta.batch_ordinal == 2);
  CHECK_THROWS(train_finetune(nullptr, w.batches[1], ctx));
}

TEST_CASE("proposed adds memory at batch 2 and keeps the projection frozen") {
  MicroWorld w({{"m1", 6, 2, 2}, {"m2", 6, 2, 2}, {"m3", 6, 2, 2}});
  DataAccessLog log;
  const TrainContext ctx = quick(w, &log);
  Memory mem(w);
  const auto before = num::parameters_to_bytes(mem.projection.export_parameters());

  const Checkpoint b1 = train_proposed(nullptr, w.batches[0], mem.resources(), ctx);
  const Checkpoint b2 = train_proposed(&b1, w.batches[1], mem.resources(), ctx);
  CHECK(b2.model.has_memory());
  CHECK(b2.model.pre_crf_input() == 384);
  const Checkpoint b3 = train_proposed(&b2, w.batches[2], mem.resources(), ctx);
  CHECK(b3.model.pre_crf_input() == 384);
  CHECK(mem.store.ordinals() == std::vector<int>{1, 2, 3});
  CHECK(num::parameters_to_bytes(mem.projection.export_parameters()) == before);

  for (const auto& e : log.entries()) {
    if (e.training_batch >= 2) CHECK(e.read_batch == e.training_batch);
  }

  Memory empty(w);
  CHECK_THROWS_AS(train_proposed(&b1, w.batches[1], empty.resources(), ctx), std::out_of_range);
  std::mt19937_64 rng(2);
  Memory thawed(w);
  thawed.projection = ProjectionLayer(thawed.provider.dim(), kSentenceEmbeddingDim, rng);
  CHECK_THROWS(train_proposed(nullptr, w.batches[0], thawed.resources(), ctx));
}

TEST_CASE("checkpoints round trip through files") {
  MicroWorld w;
  const Checkpoint c = train_current(w.batches[0], quick(w, nullptr, 1));
  const auto stem = std::filesystem::temp_directory_path() / "streamtag_tests" / "ckpt";
  std::filesystem::create_directories(stem.parent_path());
  save_checkpoint(stem, c);
  const Checkpoint back = load_checkpoint(stem, w.context);
  CHECK(back.model.export_parameters() == c.model.export_parameters());
  CHECK(back.meta.epoch == c.meta.epoch);
  CHECK(back.meta.dev_f1 == c.meta.dev_f1);
  CHECK(back.meta.strategy == Strategy::Current);
}

TEST_CASE("experiments are deterministic and report every batch") {
  MicroWorld w;
  Memory mem(w);
  std::vector<GroupData> groups = {{1, w.batches}, {2, w.batches}};
  ExperimentConfig cfg;
  cfg.train = quick(w).config;
  cfg.train.epochs = 1;
  const auto a = run_experiment(groups, w.context, &mem.provider, &mem.projection, cfg);
  const auto b = run_experiment(groups, w.context, &mem.provider, &mem.projection, cfg);
  CHECK(metrics_to_json(a.metrics.records) == metrics_to_json(b.metrics.records));
  CHECK(a.metrics.records.size() == 4 * 2);
  CHECK(a.metrics.timing.size() == 4);
  CHECK(a.runs.size() == 8);
  for (const auto& r : a.metrics.records) CHECK(r.groups == 2);
  // Groups differ only by seed here.
  CHECK(a.runs[0].checkpoints.size() == 2);

  cfg.strategies = {Strategy::Current};
  cfg.jobs = 2;
  const auto c = run_experiment(groups, w.context, &mem.provider, &mem.projection, cfg);
  for (const auto& r : c.metrics.records) {
    const auto match = std::find_if(a.metrics.records.begin(), a.metrics.records.end(), [&](const MetricRecord& m) {
      return m.strategy == r.strategy && m.batch == r.batch;
    });
    REQUIRE(match != a.metrics.records.end());
    CHECK(match->f1 == r.f1);
  }
}
