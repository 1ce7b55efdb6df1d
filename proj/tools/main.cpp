// streamtag command-line entry point.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <span>
#include <sstream>

#include "json.hpp"
#include "selftest.hpp"
#include "streamtag/noise.hpp"
#include "streamtag/pipeline.hpp"
#include "streamtag/synth.hpp"
#include "streamtag/trainer.hpp"

namespace fs = std::filesystem;
using namespace streamtag;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every command.
struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
};

json read_config(const Common& c) {
  if (c.config.empty()) return json::object();
  std::ifstream in(c.config);
  if (!in) throw UsageError("cannot read config " + c.config);
  json j = json::parse(in);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  return j;
}

// Config values take precedence over flags.
template <typename T>
void apply(const json& cfg, const char* key, T& target) {
  if (cfg.contains(key)) target = cfg.at(key).get<T>();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  return c.out;
}

fs::path require_out_dir(const Common& c) {
  const fs::path out = require_out(c);
  fs::create_directories(out);
  return out;
}

// A corpus argument may name a TSV file or a directory holding corpus.tsv.
fs::path corpus_file(const fs::path& p) {
  return fs::is_directory(p) ? p / "corpus.tsv" : p;
}

// A vector file, or with --synthetic-word-emb random vectors over the corpus vocabulary.
struct WordSource {
  std::string path;
  std::optional<std::uint64_t> synthetic_seed;
};

std::shared_ptr<const WordEmbeddingTable> load_words(const WordSource& src, std::span<const Batch> corpus) {
  if (src.synthetic_seed) {
    if (!src.path.empty()) throw UsageError("--word-emb and --synthetic-word-emb are exclusive");
    return std::make_shared<const WordEmbeddingTable>(
        synthesize_word_embeddings(corpus_vocabulary(corpus), EncoderDims{}.word, *src.synthetic_seed));
  }
  if (src.path.empty()) throw UsageError("--word-emb or --synthetic-word-emb is required");
  return std::make_shared<const WordEmbeddingTable>(load_word_embeddings(src.path, EncoderDims{}.word));
}

void add_word_options(CLI::App* cmd, WordSource& src) {
  cmd->add_option("--word-emb", src.path, "Word vector file");
  cmd->add_option("--synthetic-word-emb", src.synthetic_seed, "Seeded random word vectors instead of a file");
}

ProjectionLayer load_projection(const std::string& path) {
  if (path.empty()) throw UsageError("--projection is required");
  ProjectionLayer p = ProjectionLayer::from_parameters(num::load_parameters(path));
  p.freeze();
  return p;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--config", c.config, "JSON config; its keys override flags");
  cmd->add_option("--out", c.out, "Output path");
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t guidelines_per_type = 45;
};

void run_synth(const SynthArgs& a) {
  const fs::path out = require_out_dir(a.common);
  SynthConfig cfg = a.common.config.empty() ? SynthConfig::standard()
                                            : SynthConfig::load(a.common.config);
  json extra = read_config(a.common);
  std::size_t per_type = a.guidelines_per_type;
  apply(extra, "guidelines_per_type", per_type);
  if (!extra.contains("seed")) cfg.seed = a.common.seed;
  const SynthWorld world = build_world(cfg);
  const auto batches = generate_corpus(cfg, world);
  save_corpus(out / "corpus.tsv", batches);

  Batch guide{1, "guideline", generate_guidelines(cfg, world, per_type, cfg.seed), };
  for (Sentence& s : guide.sentences) s.split = Split::Train;
  save_corpus(out / "guidelines.tsv", std::span(&guide, 1));

  StructuredEmbeddingOptions emb;
  emb.seed = cfg.seed;
  std::ofstream wv(out / "word_vectors.txt");
  write_word_embeddings(wv, structured_word_embeddings(world, emb));
  for (const BatchStats& s : corpus_stats(batches)) {
    std::cout << s.name << ": " << s.documents << " docs, " << s.sentences << " sentences, "
              << s.words << " words, " << s.triggers << " triggers\n";
  }
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string corpus;
  std::string schedule = "25";
  int groups = 10;
};

void run_simulate(const SimulateArgs& a) {
  const fs::path out = require_out_dir(a.common);
  SimulationConfig cfg;
  cfg.n_groups = a.groups;
  cfg.master_seed = a.common.seed;
  if (a.schedule == "25") {
    cfg.schedule = schedule_25();
  } else if (a.schedule == "10") {
    cfg.schedule = schedule_10();
  } else {
    throw UsageError("--schedule must be 25 or 10");
  }
  if (!a.common.config.empty()) {
    const json j = read_config(a.common);
    SimulationConfig from = SimulationConfig::from_json_text(j.dump());
    if (j.contains("schedule")) cfg.schedule = from.schedule;
    if (j.contains("n_groups")) cfg.n_groups = from.n_groups;
    if (j.contains("master_seed")) cfg.master_seed = from.master_seed;
    if (j.contains("drop_weight")) cfg.corruption = from.corruption;
  }
  if (a.corpus.empty()) throw UsageError("--corpus is required");
  const auto batches = load_corpus(corpus_file(a.corpus));
  const auto groups = generate_groups(batches, cfg.schedule, cfg.n_groups, cfg.master_seed, cfg.corruption);
  write_groups(out, groups);
  for (const auto& g : groups) {
    std::cout << "group " << g.group_id << ": " << g.stats.corrupted() << " of " << g.stats.spans
              << " training trigger spans corrupted\n";
  }
}

// ---- pretrain-embedder ----------------------------------------------------

struct PretrainArgs {
  Common common;
  std::string guidelines;
  WordSource words;
  PretrainConfig pretrain;
  std::string objective = "softmax";
};

void run_pretrain(const PretrainArgs& a) {
  const fs::path out = require_out_dir(a.common);
  PretrainConfig cfg = a.pretrain;
  cfg.seed = a.common.seed;
  std::string objective = a.objective;
  const json j = read_config(a.common);
  apply(j, "epochs", cfg.epochs);
  apply(j, "runs", cfg.runs);
  apply(j, "learning_rate", cfg.learning_rate);
  apply(j, "train_fraction", cfg.train_fraction);
  apply(j, "seed", cfg.seed);
  apply(j, "objective", objective);
  if (objective == "softmax") {
    cfg.objective = PretrainObjective::Softmax;
  } else if (objective == "sigmoid") {
    cfg.objective = PretrainObjective::Sigmoid;
  } else {
    throw UsageError("objective must be softmax or sigmoid");
  }
  if (a.guidelines.empty()) throw UsageError("--guidelines is required");
  const auto batches = load_corpus(a.guidelines);
  const auto words = load_words(a.words, batches);
  const MeanPoolProvider provider(words);
  std::vector<const Sentence*> sentences;
  for (const Batch& b : batches) {
    for (const Sentence& s : b.sentences) sentences.push_back(&s);
  }
  const auto labeled = label_by_tags(sentences);
  const auto types = collect_event_types(batches);
  const PretrainResult r = pretrain_projection(labeled, types, provider, cfg);
  fs::create_directories(out);
  num::save_parameters(out / "projection.bin", r.projection.export_parameters());
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"run", run.run}, {"best_epoch", run.best_epoch}, {"best_score", run.best_score},
                    {"test_scores", run.test_scores}});
  }
  json summary = {{"selected_run", r.selected_run}, {"train_size", r.train_size},
                  {"test_size", r.test_size}, {"event_types", types}, {"runs", runs}};
  spit(out / "pretrain.json", summary.dump(2) + "\n");
  const auto& sel = r.runs[static_cast<std::size_t>(r.selected_run)];
  std::cout << "selected run " << r.selected_run << ": best test score " << sel.best_score
            << " at epoch " << sel.best_epoch << "\n";
}

// ---- embed-store ----------------------------------------------------------

struct StoreArgs {
  Common common;
  std::string corpus;
  WordSource words;
  std::string projection;
  std::string store;
  std::string sentence;
  int batch = 0;
};

void run_store_build(const StoreArgs& a) {
  const fs::path out = require_out(a.common);
  if (a.corpus.empty()) throw UsageError("--corpus is required");
  const auto batches = load_corpus(corpus_file(a.corpus));
  const MeanPoolProvider provider(load_words(a.words, batches));
  const ProjectionLayer projection = load_projection(a.projection);
  EmbeddingStore store(projection.output_dim());
  for (const Batch& b : batches) store.store_batch(b, provider, projection);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  store.save(out);
  std::cout << "stored " << store.total_entries() << " sentences from " << batches.size() << " batches\n";
}

void run_store_query(const StoreArgs& a) {
  if (a.store.empty()) throw UsageError("--store is required");
  if (a.sentence.empty()) throw UsageError("--sentence is required");
  const EmbeddingStore store = EmbeddingStore::load(a.store);
  Batch query_batch;
  Sentence& s = query_batch.sentences.emplace_back();
  std::istringstream is(a.sentence);
  for (std::string w; is >> w;) s.tokens.push_back({w, "NN", w});
  const MeanPoolProvider provider(load_words(a.words, std::span(&query_batch, 1)));
  const ProjectionLayer projection = load_projection(a.projection);
  const auto query = embed_sentence(s, provider, projection);
  const int upto = a.batch > 0 ? a.batch : (store.ordinals().empty() ? 1 : store.ordinals().back() + 1);
  json res = json::array();
  for (const Retrieved& r : store.retrieve_sequence(query, upto)) {
    res.push_back({{"batch", r.batch_ordinal}, {"index", r.index}, {"distance", r.distance}});
  }
  std::cout << res.dump(2) << "\n";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::vector<std::string> strategies;
  std::vector<std::string> corpora;
  WordSource words;
  std::string projection;
  std::string noise_label = "25%";
  TrainConfig train;
  int jobs = 1;
  bool no_checkpoints = false;
};

void run_train(const TrainArgs& a) {
  const fs::path out = require_out_dir(a.common);
  TrainArgs args = a;
  ExperimentConfig exp;
  exp.train = args.train;
  exp.train.seed = args.common.seed;
  const json j = read_config(args.common);
  apply(j, "epochs", exp.train.epochs);
  apply(j, "learning_rate", exp.train.learning_rate);
  apply(j, "patience", exp.train.patience);
  apply(j, "seed", exp.train.seed);
  apply(j, "shuffle", exp.train.shuffle);
  apply(j, "sentences_per_step", exp.train.sentences_per_step);
  apply(j, "use_zero_memory_at_batch1", exp.train.use_zero_memory_at_batch1);
  apply(j, "carry_optimizer_state", exp.train.carry_optimizer_state);
  apply(j, "jobs", args.jobs);
  apply(j, "noise", args.noise_label);
  apply(j, "strategies", args.strategies);
  apply(j, "corpora", args.corpora);
  apply(j, "word_emb", args.words.path);
  apply(j, "projection", args.projection);
  if (exp.train.epochs < 1) throw UsageError("epochs must be >= 1");

  if (args.strategies.empty()) throw UsageError("--strategy is required");
  exp.strategies.clear();
  for (const auto& s : args.strategies) {
    if (s == "all-strategies") {
      exp.strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
      continue;
    }
    auto parsed = parse_strategy(s);
    if (!parsed) throw UsageError("unknown strategy '" + s + "'");
    exp.strategies.push_back(*parsed);
  }
  if (args.corpora.empty()) throw UsageError("--corpus is required");
  exp.jobs = args.jobs;
  exp.noise_label = args.noise_label;
  if (!args.no_checkpoints) exp.checkpoint_dir = out / "checkpoints";

  std::vector<GroupData> groups;
  for (std::size_t k = 0; k < args.corpora.size(); ++k) {
    groups.push_back({static_cast<int>(k + 1), load_corpus(corpus_file(args.corpora[k]))});
  }
  std::vector<Batch> all;
  for (const auto& g : groups) all.insert(all.end(), g.batches.begin(), g.batches.end());
  const auto words = load_words(args.words, all);
  const ModelContext model = make_model_context(all, words);

  std::optional<MeanPoolProvider> provider;
  std::optional<ProjectionLayer> projection;
  const bool proposed = std::find(exp.strategies.begin(), exp.strategies.end(), Strategy::Proposed) !=
                        exp.strategies.end();
  if (proposed) {
    provider.emplace(words);
    projection.emplace(load_projection(args.projection));
  }
  const ExperimentResult r = run_experiment(groups, model, provider ? &*provider : nullptr,
                                            projection ? &*projection : nullptr, exp);
  write_run_outputs(out, r.metrics);
  std::cout << render_table(r.metrics.records) << render_timing(r.metrics.timing);
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string checkpoint;
  std::string corpus;
  WordSource words;
  std::string projection;
  std::string store;
};

void run_evaluate(const EvaluateArgs& a) {
  if (a.checkpoint.empty() || a.corpus.empty()) throw UsageError("--checkpoint and --corpus are required");
  const auto batches = load_corpus(corpus_file(a.corpus));
  const auto words = load_words(a.words, batches);
  const ModelContext ctx = make_model_context(batches, words);
  const Checkpoint c = load_checkpoint(a.checkpoint, ctx);
  const auto test = collect_split(batches, Split::Test);
  PrecisionRecall pr;
  if (c.model.has_memory()) {
    if (a.store.empty()) throw UsageError("a memory checkpoint needs --store and --projection");
    const MeanPoolProvider provider(words);
    const ProjectionLayer projection = load_projection(a.projection);
    EmbeddingStore store = EmbeddingStore::load(a.store);
    const SequenceCache cache =
        build_sequence_cache(test, c.meta.batch_ordinal, {&provider, &projection, &store});
    pr = evaluate(c.model, test, &cache);
  } else {
    pr = evaluate(c.model, test);
  }
  const PRF prf = PRF::from(pr.precision, pr.recall);
  const json res = {{"P", prf.precision}, {"R", prf.recall}, {"F1", prf.f1}, {"sentences", test.size()}};
  if (!a.common.out.empty()) spit(a.common.out, res.dump(2) + "\n");
  std::cout << res.dump(2) << "\n";
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  Common common;
  std::string metrics;
  std::string timing;
};

void run_report(const ReportArgs& a) {
  if (a.metrics.empty()) throw UsageError("--metrics is required");
  const auto records = metrics_from_json(slurp(a.metrics));
  std::string text = render_table(records);
  std::vector<TimingRecord> timing;
  std::string timing_path = a.timing;
  if (timing_path.empty()) {
    const fs::path guess = fs::path(a.metrics).parent_path() / "timing.csv";
    if (fs::exists(guess)) timing_path = guess.string();
  }
  if (!timing_path.empty()) {
    timing = timing_from_csv(slurp(timing_path));
    text += "\n" + render_timing(timing);
  }
  std::cout << text;
  if (!a.common.out.empty()) {
    const fs::path out = a.common.out;
    spit(out / "report.txt", text);
    spit(out / "report.csv", metrics_to_csv(records));
    spit(out / "report.json", metrics_to_json(records));
    if (!timing.empty()) spit(out / "timing.csv", timing_to_csv(timing));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stream-based event trigger tagging"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus, guideline set and word vectors");
  add_common(c_synth, synth.common);
  c_synth->add_option("--guidelines-per-type", synth.guidelines_per_type);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write noisy simulation groups of a corpus");
  add_common(c_sim, sim.common);
  c_sim->add_option("--corpus", sim.corpus, "Clean corpus TSV or directory");
  c_sim->add_option("--schedule", sim.schedule, "25 or 10");
  c_sim->add_option("--groups", sim.groups, "Number of simulation groups");

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain-embedder", "Pretrain and freeze the sentence projection");
  add_common(c_pre, pre.common);
  c_pre->add_option("--guidelines", pre.guidelines, "Labeled guideline corpus TSV");
  add_word_options(c_pre, pre.words);
  c_pre->add_option("--epochs", pre.pretrain.epochs);
  c_pre->add_option("--runs", pre.pretrain.runs);
  c_pre->add_option("--objective", pre.objective, "softmax or sigmoid");

  StoreArgs store;
  auto* c_store = app.add_subcommand("embed-store", "Build or query a sentence embedding store");
  c_store->require_subcommand(1);
  auto* c_build = c_store->add_subcommand("build", "Embed and store every batch's training sentences");
  add_common(c_build, store.common);
  c_build->add_option("--corpus", store.corpus);
  add_word_options(c_build, store.words);
  c_build->add_option("--projection", store.projection);
  auto* c_query = c_store->add_subcommand("query", "Nearest stored sentence per batch");
  add_common(c_query, store.common);
  c_query->add_option("--store", store.store);
  add_word_options(c_query, store.words);
  c_query->add_option("--projection", store.projection);
  c_query->add_option("--sentence", store.sentence, "Whitespace-tokenized sentence");
  c_query->add_option("--batch", store.batch, "Retrieve from batches before this ordinal");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train strategies over simulation groups");
  add_common(c_train, train.common);
  c_train->add_option("--strategy", train.strategies, "all, current, finetune, proposed or all-strategies")
      ->take_all();
  c_train->add_option("--corpus", train.corpora, "Group corpus (repeatable)")->take_all();
  add_word_options(c_train, train.words);
  c_train->add_option("--projection", train.projection);
  c_train->add_option("--epochs", train.train.epochs);
  c_train->add_option("--patience", train.train.patience);
  c_train->add_option("--lr", train.train.learning_rate);
  c_train->add_option("--jobs", train.jobs);
  c_train->add_option("--noise", train.noise_label, "Label for the metrics records");
  c_train->add_flag("--zero-memory-at-batch1", train.train.use_zero_memory_at_batch1);
  c_train->add_flag("--carry-optimizer", train.train.carry_optimizer_state);
  c_train->add_flag("--no-checkpoints", train.no_checkpoints);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint on a corpus's test splits");
  add_common(c_eval, ev.common);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint stem (without .bin/.json)");
  c_eval->add_option("--corpus", ev.corpus);
  add_word_options(c_eval, ev.words);
  c_eval->add_option("--projection", ev.projection);
  c_eval->add_option("--store", ev.store);

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Render metrics as tables");
  add_common(c_rep, rep.common);
  c_rep->add_option("--metrics", rep.metrics);
  c_rep->add_option("--timing", rep.timing);

  Common grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_common(c_grad, grad);

  Common self;
  auto* c_self = app.add_subcommand("selftest", "Run the CRF, retrieval and gradient oracles");
  add_common(c_self, self);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_synth) run_synth(synth);
    if (*c_sim) run_simulate(sim);
    if (*c_pre) run_pretrain(pre);
    if (*c_build) run_store_build(store);
    if (*c_query) run_store_query(store);
    if (*c_train) run_train(train);
    if (*c_eval) run_evaluate(ev);
    if (*c_rep) run_report(rep);
    if (*c_grad) return tools::run_gradcheck(grad.seed, std::cout) ? 0 : 1;
    if (*c_self) return tools::run_selftest(self.seed, std::cout) ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
