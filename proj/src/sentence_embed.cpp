#include "streamtag/sentence_embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "streamtag/adam.hpp"
#include "streamtag/binary_io.hpp"
#include "streamtag/ops.hpp"
#include "streamtag/rng.hpp"

namespace streamtag {

MeanPoolProvider::MeanPoolProvider(std::shared_ptr<const WordEmbeddingTable> words)
    : words_(std::move(words)) {
  if (!words_) throw std::invalid_argument("mean-pool provider needs word embeddings");
}

std::vector<double> MeanPoolProvider::embed(const Sentence& sentence) const {
  std::vector<double> out(words_->dim(), 0.0);
  if (sentence.tokens.empty()) return out;
  for (const Token& t : sentence.tokens) {
    auto v = words_->vector(words_->lookup(t.surface));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(sentence.tokens.size());
  for (double& x : out) x *= inv;
  return out;
}

PrecomputedProvider::PrecomputedProvider(std::size_t dim, std::map<Key, std::vector<double>> vectors)
    : dim_(dim), vectors_(std::move(vectors)) {
  for (const auto& [key, v] : vectors_) {
    if (v.size() != dim_) {
      throw std::invalid_argument("precomputed vector for " + key.first + "/" +
                                  std::to_string(key.second) + " has wrong dimension");
    }
  }
}

std::vector<double> PrecomputedProvider::embed(const Sentence& sentence) const {
  auto it = vectors_.find({sentence.batch_name, sentence.index_in_batch});
  if (it == vectors_.end()) {
    throw std::out_of_range("no precomputed vector for batch '" + sentence.batch_name +
                            "' index " + std::to_string(sentence.index_in_batch));
  }
  return it->second;
}

PrecomputedProvider PrecomputedProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  io::BinaryReader r(in);
  r.expect_magic("STPV");
  if (r.u32() != 1) throw io::FormatError("unsupported precomputed vector version");
  const std::uint64_t count = r.u64();
  const std::uint32_t dim = r.u32();
  std::map<Key, std::vector<double>> vectors;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.str();
    const int index = static_cast<int>(r.u32());
    std::vector<double> v(dim);
    for (double& x : v) x = r.f64();
    vectors[{std::move(name), index}] = std::move(v);
  }
  return PrecomputedProvider(dim, std::move(vectors));
}

void PrecomputedProvider::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  io::BinaryWriter w(out);
  w.magic("STPV");
  w.u32(1);
  w.u64(vectors_.size());
  w.u32(static_cast<std::uint32_t>(dim_));
  for (const auto& [key, v] : vectors_) {
    w.str(key.first);
    w.u32(static_cast<std::uint32_t>(key.second));
    for (double x : v) w.f64(x);
  }
}

ProjectionLayer::ProjectionLayer(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng)
    : weight_("projection.weight", num::glorot_uniform(input_dim, output_dim, rng)),
      bias_("projection.bias", num::Tensor({output_dim})) {}

std::vector<double> ProjectionLayer::apply(std::span<const double> raw) const {
  if (raw.size() != input_dim()) {
    throw num::ShapeError("projection expects " + std::to_string(input_dim()) + " inputs, got " +
                          std::to_string(raw.size()));
  }
  const std::size_t out_dim = output_dim();
  std::vector<double> out(bias_.value.data().begin(), bias_.value.data().end());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = raw[i];
    const double* w = weight_.value.raw() + i * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) out[j] += x * w[j];
  }
  return out;
}

num::Var ProjectionLayer::apply(num::Graph& g, num::Var raw) const {
  return num::add_bias(num::matmul(raw, g.parameter(weight_)), g.parameter(bias_));
}

void ProjectionLayer::freeze() {
  weight_.trainable = false;
  bias_.trainable = false;
}

num::ParameterContainer ProjectionLayer::export_parameters() const {
  return {{weight_.name, weight_.value}, {bias_.name, bias_.value}};
}

ProjectionLayer ProjectionLayer::from_parameters(const num::ParameterContainer& params) {
  ProjectionLayer p;
  bool has_w = false, has_b = false;
  for (const auto& nt : params) {
    if (nt.name == "projection.weight") {
      p.weight_ = num::Parameter(nt.name, nt.value, false);
      has_w = true;
    } else if (nt.name == "projection.bias") {
      p.bias_ = num::Parameter(nt.name, nt.value, false);
      has_b = true;
    }
  }
  if (!has_w || !has_b) throw std::invalid_argument("container holds no projection parameters");
  if (p.bias_.value.size() != p.weight_.value.cols()) {
    throw num::ShapeError("projection weight and bias disagree");
  }
  return p;
}

std::vector<double> embed_sentence(const Sentence& sentence, const SentenceProvider& provider,
                                   const ProjectionLayer& projection) {
  return projection.apply(provider.embed(sentence));
}

std::vector<LabeledSentence> label_by_tags(std::span<const Sentence* const> sentences) {
  std::vector<LabeledSentence> out;
  for (const Sentence* s : sentences) {
    LabeledSentence ls{s, {}};
    for (const TriggerTag& t : s->tags) {
      if (t.kind == TagKind::B) ls.event_types.insert(t.event_type);
    }
    out.push_back(std::move(ls));
  }
  return out;
}

namespace {

struct Example {
  num::Tensor raw;           // 1 x provider_dim
  std::vector<int> types;    // indices of present types
  int target = -1;           // softmax target
};

// First event type by token order.
int first_type(const Sentence& s, std::span<const std::string> types) {
  for (const TriggerTag& t : s.tags) {
    if (t.kind != TagKind::B) continue;
    auto it = std::find(types.begin(), types.end(), t.event_type);
    if (it != types.end()) return static_cast<int>(it - types.begin());
  }
  return -1;
}

}  // namespace

PretrainResult pretrain_projection(std::span<const LabeledSentence> sentences,
                                   std::span<const std::string> event_types,
                                   const SentenceProvider& provider, const PretrainConfig& config) {
  if (sentences.size() < 10) {
    throw std::invalid_argument("pretraining needs at least 10 sentences, got " +
                                std::to_string(sentences.size()));
  }
  if (event_types.empty()) throw std::invalid_argument("pretraining needs event types");
  if (config.runs < 1 || config.epochs < 1) throw std::invalid_argument("runs and epochs must be >= 1");
  const bool softmax = config.objective == PretrainObjective::Softmax;

  std::vector<Example> examples;
  for (const LabeledSentence& ls : sentences) {
    Example ex;
    for (const std::string& t : ls.event_types) {
      auto it = std::find(event_types.begin(), event_types.end(), t);
      if (it == event_types.end()) throw std::invalid_argument("unknown event type '" + t + "'");
      ex.types.push_back(static_cast<int>(it - event_types.begin()));
    }
    if (softmax) {
      if (ex.types.empty()) continue;
      ex.target = first_type(*ls.sentence, event_types);
      if (ex.target < 0) ex.target = ex.types.front();
    }
    ex.raw = num::Tensor::row(provider.embed(*ls.sentence));
    examples.push_back(std::move(ex));
  }
  if (examples.size() < 2) throw std::invalid_argument("too few usable pretraining sentences");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(config.seed, {0x73706c6974ULL}));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(examples.size()) * (1.0 - config.train_fraction)));
  n_test = std::clamp<std::size_t>(n_test, 1, examples.size() - 1);
  const std::vector<std::size_t> train(order.begin(), order.end() - static_cast<long>(n_test));
  const std::vector<std::size_t> test(order.end() - static_cast<long>(n_test), order.end());

  const std::size_t T = event_types.size();
  auto forward = [&](num::Graph& g, const ProjectionLayer& proj, const num::Parameter& out_w,
                     const num::Parameter& out_b, const Example& ex) {
    num::Var emb = proj.apply(g, g.constant_ref(ex.raw));
    return num::add_bias(num::matmul(emb, g.parameter(out_w)), g.parameter(out_b));
  };
  auto correct = [&](const num::Tensor& logits, const Example& ex) {
    if (softmax) {
      const auto row = logits.data();
      const int arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      return std::find(ex.types.begin(), ex.types.end(), arg) != ex.types.end();
    }
    for (std::size_t k = 0; k < T; ++k) {
      const bool present = std::find(ex.types.begin(), ex.types.end(), static_cast<int>(k)) != ex.types.end();
      if ((logits[k] > 0.0) != present) return false;
    }
    return true;
  };

  PretrainResult result;
  result.train_size = train.size();
  result.test_size = test.size();
  std::vector<ProjectionLayer> best_layers;
  for (int run = 0; run < config.runs; ++run) {
    std::mt19937_64 rng(derive_seed(config.seed, {0x72756eULL, static_cast<std::uint64_t>(run)}));
    ProjectionLayer proj(provider.dim(), config.output_dim, rng);
    num::Parameter out_w("pretrain.out_w", num::glorot_uniform(config.output_dim, T, rng));
    num::Parameter out_b("pretrain.out_b", num::Tensor({T}));
    std::vector<num::Parameter*> params = proj.parameters();
    params.push_back(&out_w);
    params.push_back(&out_b);
    num::Adam adam(params, config.learning_rate);

    PretrainRun stats;
    stats.run = run;
    stats.best_score = -1.0;
    ProjectionLayer best = proj;
    std::vector<std::size_t> epoch_order = train;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      std::shuffle(epoch_order.begin(), epoch_order.end(), rng);
      for (std::size_t idx : epoch_order) {
        const Example& ex = examples[idx];
        num::Graph g;
        num::Var logits = forward(g, proj, out_w, out_b, ex);
        num::Var loss;
        if (softmax) {
          loss = num::sub(num::sum(num::log_sum_exp(logits, 1)),
                          num::select(logits, static_cast<std::size_t>(ex.target)));
        } else {
          num::Tensor y({1, T});
          for (int k : ex.types) y[static_cast<std::size_t>(k)] = 1.0;
          loss = num::sum(num::sub(num::softplus(logits), num::mul(logits, g.constant(std::move(y)))));
        }
        g.backward(loss);
        adam.step();
      }
      std::size_t hits = 0;
      for (std::size_t idx : test) {
        num::Graph g(false);
        if (correct(forward(g, proj, out_w, out_b, examples[idx]).value(), examples[idx])) ++hits;
      }
      const double score = static_cast<double>(hits) / static_cast<double>(test.size());
      stats.test_scores.push_back(score);
      if (score > stats.best_score) {
        stats.best_score = score;
        stats.best_epoch = epoch;
        best = proj;
      }
    }
    result.runs.push_back(std::move(stats));
    best_layers.push_back(std::move(best));
  }

  int chosen = 0;
  for (int r = 1; r < config.runs; ++r) {
    const PretrainRun& a = result.runs[static_cast<std::size_t>(r)];
    const PretrainRun& b = result.runs[static_cast<std::size_t>(chosen)];
    if (a.best_epoch < b.best_epoch || (a.best_epoch == b.best_epoch && a.best_score > b.best_score)) {
      chosen = r;
    }
  }
  result.selected_run = chosen;
  result.projection = std::move(best_layers[static_cast<std::size_t>(chosen)]);
  result.projection.freeze();
  return result;
}

std::size_t EmbeddingStore::batch_size(int ordinal) const {
  auto it = batches_.find(ordinal);
  return it == batches_.end() ? 0 : it->second.indices.size();
}

std::size_t EmbeddingStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& [o, b] : batches_) n += b.indices.size();
  return n;
}

std::vector<int> EmbeddingStore::ordinals() const {
  std::vector<int> out;
  for (const auto& [o, b] : batches_) out.push_back(o);
  return out;
}

StoreEntry EmbeddingStore::entry(int ordinal, std::size_t position) const {
  const BatchData& b = batches_.at(ordinal);
  const double* row = b.values.data() + position * dim_;
  return StoreEntry{b.indices.at(position), std::vector<double>(row, row + dim_)};
}

void EmbeddingStore::store_batch(int ordinal, std::vector<StoreEntry> entries) {
  if (batches_.count(ordinal)) {
    throw std::logic_error("batch " + std::to_string(ordinal) + " is already stored");
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const StoreEntry& a, const StoreEntry& b) { return a.index < b.index; });
  BatchData data;
  for (const StoreEntry& e : entries) {
    if (e.vector.size() != dim_) {
      throw num::ShapeError("store expects " + std::to_string(dim_) + "-dim vectors, got " +
                            std::to_string(e.vector.size()));
    }
    data.indices.push_back(e.index);
    data.values.insert(data.values.end(), e.vector.begin(), e.vector.end());
  }
  batches_.emplace(ordinal, std::move(data));
}

void EmbeddingStore::store_batch(const Batch& batch, const SentenceProvider& provider,
                                 const ProjectionLayer& projection) {
  std::vector<StoreEntry> entries;
  for (const Sentence* s : batch.of_split(Split::Train)) {
    entries.push_back({s->index_in_batch, embed_sentence(*s, provider, projection)});
  }
  store_batch(batch.ordinal, std::move(entries));
}

Retrieved EmbeddingStore::retrieve_nearest(std::span<const double> query, int ordinal) const {
  if (query.size() != dim_) {
    throw num::ShapeError("query has " + std::to_string(query.size()) + " dims, store has " +
                          std::to_string(dim_));
  }
  auto it = batches_.find(ordinal);
  if (it == batches_.end() || it->second.indices.empty()) {
    throw std::out_of_range("store has no entries for batch " + std::to_string(ordinal));
  }
  const BatchData& b = it->second;
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t r = 0; r < b.indices.size(); ++r) {
    const double* row = b.values.data() + r * dim_;
    double d2 = 0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double diff = row[k] - query[k];
      d2 += diff * diff;
    }
    if (d2 < best) {
      best = d2;
      arg = r;
    }
  }
  const double* row = b.values.data() + arg * dim_;
  return Retrieved{ordinal, b.indices[arg], std::sqrt(best), std::vector<double>(row, row + dim_)};
}

RetrievedSequence EmbeddingStore::retrieve_sequence(std::span<const double> query,
                                                    int current_ordinal) const {
  RetrievedSequence seq;
  for (int m = 1; m < current_ordinal; ++m) seq.push_back(retrieve_nearest(query, m));
  return seq;
}

namespace {
void write_store(std::ostream& out, std::size_t dim, const std::vector<int>& ords,
                 const EmbeddingStore& store) {
  io::BinaryWriter w(out);
  w.magic("STES");
  w.u32(1);
  w.u64(store.total_entries());
  w.u32(static_cast<std::uint32_t>(dim));
  for (int o : ords) {
    for (std::size_t p = 0; p < store.batch_size(o); ++p) {
      const StoreEntry e = store.entry(o, p);
      w.u32(static_cast<std::uint32_t>(o));
      w.u32(static_cast<std::uint32_t>(e.index));
      for (double x : e.vector) w.f64(x);
    }
  }
}
}  // namespace

std::string EmbeddingStore::to_bytes() const {
  std::ostringstream os(std::ios::binary);
  write_store(os, dim_, ordinals(), *this);
  return os.str();
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_store(out, dim_, ordinals(), *this);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  io::BinaryReader r(in);
  r.expect_magic("STES");
  if (r.u32() != 1) throw io::FormatError("unsupported store version");
  const std::uint64_t count = r.u64();
  const std::uint32_t dim = r.u32();
  std::map<int, std::vector<StoreEntry>> grouped;
  for (std::uint64_t k = 0; k < count; ++k) {
    const int ordinal = static_cast<int>(r.u32());
    StoreEntry e;
    e.index = static_cast<int>(r.u32());
    e.vector.resize(dim);
    for (double& x : e.vector) x = r.f64();
    grouped[ordinal].push_back(std::move(e));
  }
  EmbeddingStore store(dim);
  for (auto& [o, entries] : grouped) store.store_batch(o, std::move(entries));
  return store;
}

}  // namespace streamtag
