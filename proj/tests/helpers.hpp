#ifndef STREAMTAG_TESTS_HELPERS_HPP_
#define STREAMTAG_TESTS_HELPERS_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "streamtag/pipeline.hpp"

namespace testing {

using namespace streamtag;

inline num::Tensor random_tensor(num::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  num::Tensor t(std::move(shape));
  std::normal_distribution<double> d(0.0, scale);
  for (double& x : t.data()) x = d(rng);
  return t;
}

// Calls fn for every one of k^n tag sequences.
inline void for_each_path(std::size_t n, std::size_t k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(n, 0);
  for (;;) {
    fn(path);
    std::size_t i = 0;
    while (i < n && ++path[i] == static_cast<int>(k)) path[i++] = 0;
    if (i == n) return;
  }
}

// Independent path score: start, emissions, transitions, stop.
inline double brute_score(const num::Tensor& e, const num::Tensor& t, const std::vector<int>& p) {
  const std::size_t k = e.cols();
  double s = t.at(k, static_cast<std::size_t>(p[0])) + t.at(static_cast<std::size_t>(p.back()), k + 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += e.at(i, static_cast<std::size_t>(p[i]));
    if (i > 0) s += t.at(static_cast<std::size_t>(p[i - 1]), static_cast<std::size_t>(p[i]));
  }
  return s;
}

struct BruteCrf {
  double log_z = 0.0;
  std::vector<int> best;
};

inline BruteCrf brute_crf(const num::Tensor& e, const num::Tensor& t) {
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  BruteCrf out;
  for_each_path(e.rows(), e.cols(), [&](const std::vector<int>& p) {
    const double s = brute_score(e, t, p);
    scores.push_back(s);
    if (s > mx) {
      mx = s;
      out.best = p;
    }
  });
  double z = 0;
  for (double s : scores) z += std::exp(s - mx);
  out.log_z = mx + std::log(z);
  return out;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> v(n);
  std::normal_distribution<double> d(0.0, 1.0);
  for (double& x : v) x = d(rng);
  return v;
}

// Small synthetic setup shared by model-level tests.
struct MicroWorld {
  SynthConfig config;
  SynthWorld world;
  std::vector<Batch> batches;
  std::shared_ptr<const WordEmbeddingTable> words;
  ModelContext context;

  explicit MicroWorld(std::vector<SynthBatchSpec> specs = {{"m1", 6, 2, 2}, {"m2", 6, 2, 2}},
                      std::uint64_t seed = 3) {
    config.n_event_types = 3;
    config.n_trigger_lemmas = 6;
    config.vocab_size = 30;
    config.markers_per_type = 2;
    config.min_length = 3;
    config.max_length = 6;
    config.batches = std::move(specs);
    config.seed = seed;
    world = build_world(config);
    batches = generate_corpus(config, world);
    StructuredEmbeddingOptions emb;
    emb.seed = seed;
    words = std::make_shared<const WordEmbeddingTable>(structured_word_embeddings(world, emb));
    context = make_model_context(batches, words);
  }
};

inline Sentence make_sentence(const std::vector<std::string>& surfaces, const std::vector<std::string>& tags,
                              Split split = Split::Train) {
  Sentence s;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    s.tokens.push_back({surfaces[i], "NN", surfaces[i]});
    s.tags.push_back(*TriggerTag::parse(tags[i]));
  }
  s.doc_id = "d";
  s.batch_name = "b";
  s.split = split;
  return s;
}

}  // namespace testing

#endif  // STREAMTAG_TESTS_HELPERS_HPP_
