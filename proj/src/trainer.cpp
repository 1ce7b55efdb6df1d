#include "streamtag/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "streamtag/crf.hpp"
#include "streamtag/rng.hpp"

namespace streamtag {
namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;
constexpr std::uint64_t kMemoryStream = 0x6d656d6f7279ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

StreamModel fresh_model(const TrainContext& ctx, int ordinal) {
  ModelContext mc = *ctx.model;
  mc.train_word_vectors = ctx.config.train_word_vectors;
  return StreamModel(std::move(mc), derive_seed(ctx.config.seed, {kModelStream, static_cast<std::uint64_t>(ordinal)}));
}

void log_reads(const TrainContext& ctx, Strategy s, int ordinal,
               std::span<const Sentence* const> train, std::span<const Sentence* const> dev) {
  if (ctx.log == nullptr) return;
  std::set<std::pair<int, Split>> seen;
  for (auto part : {train, dev}) {
    for (const Sentence* x : part) seen.insert({x->batch_ordinal, x->split});
  }
  for (const auto& [b, split] : seen) ctx.log->record({s, ordinal, b, split});
}

const RetrievedSequence* lookup(const SequenceCache* cache, const Sentence* s) {
  if (cache == nullptr) return nullptr;
  auto it = cache->find(s);
  return it == cache->end() ? nullptr : &it->second;
}

double dev_f1(const StreamModel& model, std::span<const Sentence* const> dev, const SequenceCache* cache) {
  if (dev.empty()) return 0.0;
  const PrecisionRecall pr = evaluate(model, dev, cache);
  return PRF::from(pr.precision, pr.recall).f1;
}

// Trains in place and returns the best-dev checkpoint.
Checkpoint fit(StreamModel model, std::span<const Sentence* const> train,
               std::span<const Sentence* const> dev, const SequenceCache* cache, Strategy strategy,
               int ordinal, const TrainContext& ctx, const std::optional<num::AdamState>& carried) {
  const TrainConfig& cfg = ctx.config;
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.sentences_per_step == 0) throw std::invalid_argument("sentences_per_step must be >= 1");
  log_reads(ctx, strategy, ordinal, train, dev);

  num::Adam adam(model.parameters(), cfg.learning_rate);
  if (cfg.carry_optimizer_state && carried &&
      carried->first_moment.size() == adam.parameters().size()) {
    bool same = true;
    for (std::size_t k = 0; k < carried->first_moment.size(); ++k) {
      same = same && carried->first_moment[k].shape() == adam.parameters()[k]->value.shape();
    }
    if (same) {
      const double lr = adam.state().learning_rate;
      adam.state() = *carried;
      adam.state().learning_rate = lr;
    }
  }
  auto snapshot_optimizer = [&]() -> std::optional<num::AdamState> {
    if (!cfg.carry_optimizer_state) return std::nullopt;
    return adam.state();
  };

  Checkpoint best{model, {strategy, ordinal, 0, 0.0, 0.0}, snapshot_optimizer()};
  if (cfg.epochs == 0) {
    best.meta.dev_f1 = dev_f1(model, dev, cache);
    return best;
  }
  std::vector<EpochResult> history;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      std::mt19937_64 rng(derive_seed(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(ordinal),
                                                  static_cast<std::uint64_t>(epoch)}));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    std::size_t pending = 0;
    for (std::size_t idx : order) {
      const Sentence* s = train[idx];
      num::Graph g;
      g.backward(model.loss(g, *s, lookup(cache, s)));
      if (++pending == cfg.sentences_per_step) {
        adam.step();
        pending = 0;
      }
    }
    if (pending > 0) adam.step();

    history.push_back({epoch, dev_f1(model, dev, cache)});
    const std::size_t arg = select_best(history);
    if (arg + 1 == history.size()) {
      best = Checkpoint{model, {strategy, ordinal, epoch, history.back().dev_f1, 0.0}, snapshot_optimizer()};
    } else if (cfg.patience > 0 && static_cast<int>(history.size() - 1 - arg) >= cfg.patience) {
      break;
    }
  }
  return best;
}

std::vector<const Sentence*> split_of(std::span<const Batch> batches, Split s) {
  return collect_split(batches, s);
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::All: return "All";
    case Strategy::Current: return "Current";
    case Strategy::Finetune: return "Finetune";
    case Strategy::Proposed: return "Proposed";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Strategy s : kAllStrategies) {
    std::string name(strategy_name(s));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return s;
  }
  return std::nullopt;
}

void DataAccessLog::record(const Entry& e) {
  std::lock_guard lock(mutex_);
  entries_.push_back(e);
}

std::vector<DataAccessLog::Entry> DataAccessLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t select_best(std::span<const EpochResult> epochs) {
  if (epochs.empty()) throw std::invalid_argument("select_best needs at least one epoch");
  std::size_t best = 0;
  for (std::size_t k = 1; k < epochs.size(); ++k) {
    if (epochs[k].dev_f1 > epochs[best].dev_f1 ||
        (epochs[k].dev_f1 == epochs[best].dev_f1 && epochs[k].epoch < epochs[best].epoch)) {
      best = k;
    }
  }
  return best;
}

SequenceCache build_sequence_cache(std::span<const Sentence* const> sentences, int ordinal,
                                   const MemoryResources& memory) {
  if (!memory.provider || !memory.projection || !memory.store) {
    throw std::invalid_argument("memory resources are incomplete");
  }
  for (int m = 1; m < ordinal; ++m) {
    if (!memory.store->has_batch(m)) {
      throw std::out_of_range("embedding store lacks batch " + std::to_string(m));
    }
  }
  SequenceCache cache;
  for (const Sentence* s : sentences) {
    const auto query = embed_sentence(*s, *memory.provider, *memory.projection);
    cache.emplace(s, memory.store->retrieve_sequence(query, ordinal));
  }
  return cache;
}

PrecisionRecall evaluate(const StreamModel& model, std::span<const Sentence* const> sentences,
                         const SequenceCache* cache) {
  std::set<TriggerSpan> pred, gold;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const Sentence* s = sentences[k];
    const auto p = extract_spans(model.decode(*s, lookup(cache, s)), k);
    const auto g = extract_spans(s->tags, k);
    pred.insert(p.begin(), p.end());
    gold.insert(g.begin(), g.end());
  }
  const PRF prf = trigger_prf(pred, gold);
  return {prf.precision, prf.recall};
}

Checkpoint train_all(std::span<const Batch> batches, const TrainContext& ctx) {
  if (batches.empty()) throw std::invalid_argument("train_all needs at least one batch");
  const auto start = Clock::now();
  const int ordinal = batches.back().ordinal;
  const auto train = split_of(batches, Split::Train);
  const auto dev = split_of(batches, Split::Dev);
  Checkpoint c = fit(fresh_model(ctx, ordinal), train, dev, nullptr, Strategy::All, ordinal, ctx, std::nullopt);
  c.meta.wall_clock_seconds = seconds_since(start);
  return c;
}

Checkpoint train_current(const Batch& batch, const TrainContext& ctx) {
  const auto start = Clock::now();
  Checkpoint c = fit(fresh_model(ctx, batch.ordinal), batch.of_split(Split::Train),
                     batch.of_split(Split::Dev), nullptr, Strategy::Current, batch.ordinal, ctx,
                     std::nullopt);
  c.meta.wall_clock_seconds = seconds_since(start);
  return c;
}

Checkpoint train_finetune(const Checkpoint* prior, const Batch& batch, const TrainContext& ctx) {
  const auto start = Clock::now();
  if (prior == nullptr) {
    if (batch.ordinal != 1) {
      throw std::invalid_argument("finetune at batch " + std::to_string(batch.ordinal) +
                                  " needs the previous checkpoint");
    }
    Checkpoint c = fit(fresh_model(ctx, batch.ordinal), batch.of_split(Split::Train),
                       batch.of_split(Split::Dev), nullptr, Strategy::Finetune, batch.ordinal, ctx,
                       std::nullopt);
    c.meta.wall_clock_seconds = seconds_since(start);
    return c;
  }
  Checkpoint c = fit(prior->model, batch.of_split(Split::Train), batch.of_split(Split::Dev), nullptr,
                     Strategy::Finetune, batch.ordinal, ctx, prior->optimizer);
  c.meta.wall_clock_seconds = seconds_since(start);
  return c;
}

Checkpoint train_proposed(const Checkpoint* prior, const Batch& batch, const MemoryResources& memory,
                          const TrainContext& ctx) {
  const auto start = Clock::now();
  if (!memory.provider || !memory.projection || !memory.store) {
    throw std::invalid_argument("proposed strategy needs a provider, a projection and a store");
  }
  if (!memory.projection->frozen()) throw std::invalid_argument("projection must be frozen");
  const auto train = batch.of_split(Split::Train);
  const auto dev = batch.of_split(Split::Dev);
  Checkpoint result = [&] {
    if (batch.ordinal == 1 || prior == nullptr) {
      if (batch.ordinal != 1) {
        throw std::invalid_argument("proposed at batch " + std::to_string(batch.ordinal) +
                                    " needs the previous checkpoint");
      }
      StreamModel model = fresh_model(ctx, 1);
      if (ctx.config.use_zero_memory_at_batch1) {
        model.enable_memory(derive_seed(ctx.config.seed, {kMemoryStream, 1}));
      }
      return fit(std::move(model), train, dev, nullptr, Strategy::Proposed, 1, ctx, std::nullopt);
    }
    std::vector<const Sentence*> both(train.begin(), train.end());
    both.insert(both.end(), dev.begin(), dev.end());
    const SequenceCache cache = build_sequence_cache(both, batch.ordinal, memory);
    StreamModel model = prior->model;
    std::optional<num::AdamState> carried = prior->optimizer;
    if (!model.has_memory()) {
      model.enable_memory(derive_seed(ctx.config.seed, {kMemoryStream, static_cast<std::uint64_t>(batch.ordinal)}));
      carried.reset();
    }
    return fit(std::move(model), train, dev, &cache, Strategy::Proposed, batch.ordinal, ctx, carried);
  }();
  memory.store->store_batch(batch, *memory.provider, *memory.projection);
  result.meta.wall_clock_seconds = seconds_since(start);
  return result;
}

void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& checkpoint) {
  std::filesystem::path bin = stem, meta = stem;
  bin += ".bin";
  meta += ".json";
  num::save_parameters(bin, checkpoint.model.export_parameters());
  nlohmann::ordered_json j = {{"strategy", std::string(strategy_name(checkpoint.meta.strategy))},
                              {"batch_ordinal", checkpoint.meta.batch_ordinal},
                              {"epoch", checkpoint.meta.epoch},
                              {"dev_f1", checkpoint.meta.dev_f1},
                              {"wall_clock_seconds", checkpoint.meta.wall_clock_seconds},
                              {"memory", checkpoint.model.has_memory()}};
  std::ofstream out(meta);
  if (!out) throw std::runtime_error("cannot write " + meta.string());
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& stem, const ModelContext& context) {
  std::filesystem::path bin = stem, meta = stem;
  bin += ".bin";
  meta += ".json";
  std::ifstream in(meta);
  if (!in) throw std::runtime_error("cannot read " + meta.string());
  const auto j = nlohmann::json::parse(in);
  const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw std::runtime_error("unknown strategy in " + meta.string());
  StreamModel model(context, 0);
  model.import_parameters(num::load_parameters(bin));
  return Checkpoint{std::move(model),
                    {*strategy, j.at("batch_ordinal").get<int>(), j.at("epoch").get<int>(),
                     j.at("dev_f1").get<double>(), j.at("wall_clock_seconds").get<double>()},
                    std::nullopt};
}

namespace {

StrategyRun run_one(const GroupData& group, Strategy strategy, const ModelContext& model,
                    const SentenceProvider* provider, const ProjectionLayer* projection,
                    const ExperimentConfig& config, DataAccessLog* log) {
  TrainContext ctx{&model, config.train, log};
  ctx.config.seed = derive_seed(config.train.seed, {static_cast<std::uint64_t>(group.group_id)});
  StrategyRun run{group.group_id, strategy, {}, {}, {}, 0.0};
  const auto test = collect_split(group.batches, Split::Test);
  EmbeddingStore store;
  MemoryResources memory{provider, projection, &store};
  std::optional<Checkpoint> prior;
  for (std::size_t b = 0; b < group.batches.size(); ++b) {
    const Batch& batch = group.batches[b];
    std::optional<Checkpoint> next;
    switch (strategy) {
      case Strategy::All:
        next.emplace(train_all(std::span(group.batches).first(b + 1), ctx));
        break;
      case Strategy::Current:
        next.emplace(train_current(batch, ctx));
        break;
      case Strategy::Finetune:
        next.emplace(train_finetune(prior ? &*prior : nullptr, batch, ctx));
        break;
      case Strategy::Proposed:
        next.emplace(train_proposed(prior ? &*prior : nullptr, batch, memory, ctx));
        break;
    }
    run.seconds += next->meta.wall_clock_seconds;
    if (strategy == Strategy::Proposed && next->model.has_memory()) {
      const SequenceCache cache = build_sequence_cache(test, batch.ordinal, memory);
      run.per_batch.push_back(evaluate(next->model, test, &cache));
    } else {
      run.per_batch.push_back(evaluate(next->model, test));
    }
    run.checkpoints.push_back(next->meta);
    if (!config.checkpoint_dir.empty()) {
      const auto dir = config.checkpoint_dir / ("group_" + std::to_string(group.group_id)) /
                       std::string(strategy_name(strategy));
      std::filesystem::create_directories(dir);
      save_checkpoint(dir / ("batch_" + std::to_string(batch.ordinal)), *next);
    }
    prior = std::move(next);
  }
  if (strategy == Strategy::Proposed && projection) {
    run.projection_after = projection->export_parameters();
    if (!config.checkpoint_dir.empty()) {
      store.save(config.checkpoint_dir / ("group_" + std::to_string(group.group_id)) / "Proposed" / "store.bin");
    }
  }
  return run;
}

}  // namespace

ExperimentResult run_experiment(std::span<const GroupData> groups, const ModelContext& model,
                                const SentenceProvider* provider, const ProjectionLayer* projection,
                                const ExperimentConfig& config, DataAccessLog* log) {
  if (groups.empty()) throw std::invalid_argument("run_experiment needs at least one group");
  const bool proposed = std::find(config.strategies.begin(), config.strategies.end(),
                                  Strategy::Proposed) != config.strategies.end();
  if (proposed && (!provider || !projection)) {
    throw std::invalid_argument("the proposed strategy needs a sentence provider and a projection");
  }
  struct Task {
    std::size_t group;
    Strategy strategy;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (Strategy s : config.strategies) tasks.push_back({g, s});
  }
  std::vector<std::optional<StrategyRun>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < tasks.size();) {
      try {
        results[k] = run_one(groups[tasks[k].group], tasks[k].strategy, model, provider, projection,
                             config, log);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult out;
  for (auto& r : results) out.runs.push_back(std::move(*r));
  std::vector<std::string> batch_names;
  for (const Batch& b : groups.front().batches) batch_names.push_back(b.name);
  for (Strategy s : config.strategies) {
    double seconds = 0.0;
    for (std::size_t b = 0; b < batch_names.size(); ++b) {
      std::vector<PrecisionRecall> per_group;
      for (const StrategyRun& r : out.runs) {
        if (r.strategy == s) per_group.push_back(r.per_batch.at(b));
      }
      const PRF prf = aggregate_runs(per_group);
      out.metrics.records.push_back({config.noise_label, std::string(strategy_name(s)), batch_names[b],
                                     prf.precision, prf.recall, prf.f1,
                                     static_cast<int>(per_group.size())});
    }
    for (const StrategyRun& r : out.runs) {
      if (r.strategy == s) seconds += r.seconds;
    }
    out.metrics.timing.push_back({std::string(strategy_name(s)), seconds / static_cast<double>(groups.size())});
  }
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, const RunMetrics& metrics) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("metrics.json", metrics_to_json(metrics.records));
  write("metrics.csv", metrics_to_csv(metrics.records));
  write("timing.csv", timing_to_csv(metrics.timing));
}

}  // namespace streamtag
