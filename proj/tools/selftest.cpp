#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "streamtag/crf.hpp"
#include "streamtag/gradcheck.hpp"
#include "streamtag/ops.hpp"
#include "streamtag/pipeline.hpp"

namespace streamtag::tools {
namespace {

// Enumerates all num_tags^n paths.
void for_each_path(std::size_t n, std::size_t k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(n, 0);
  for (;;) {
    fn(path);
    std::size_t i = 0;
    while (i < n && ++path[i] == static_cast<int>(k)) path[i++] = 0;
    if (i == n) return;
  }
}

bool crf_oracle(std::uint64_t seed, std::ostream& out) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int mismatches = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 1 + rng() % 5, k = 1 + rng() % 5;
    num::Tensor e({n, k}), t({k + 2, k + 2});
    for (double& v : e.data()) v = normal(rng);
    for (double& v : t.data()) v = normal(rng);
    std::vector<int> gold(n);
    for (int& g : gold) g = static_cast<int>(rng() % k);
    double z = 0.0, best = -std::numeric_limits<double>::infinity();
    std::vector<int> arg;
    for_each_path(n, k, [&](const std::vector<int>& p) {
      const double s = crf::path_score(e, t, p);
      z += std::exp(s);
      if (s > best) {
        best = s;
        arg = p;
      }
    });
    num::Graph g;
    const double loss = crf::nll(g.constant(e), g.constant(t), gold).value().item();
    worst = std::max(worst, std::abs(loss - (std::log(z) - crf::path_score(e, t, gold))));
    if (crf::viterbi_decode(e, t) != arg) ++mismatches;
  }
  const bool ok = worst < 1e-9 && mismatches == 0;
  out << (ok ? "PASS" : "FAIL") << " crf brute force: max |nll diff| " << worst << ", viterbi mismatches "
      << mismatches << "\n";
  return ok;
}

bool retrieval_oracle(std::uint64_t seed, std::ostream& out) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingStore store;
  std::map<int, std::vector<StoreEntry>> kept;
  for (int b = 1; b <= 4; ++b) {
    std::vector<StoreEntry> entries;
    for (int i = 0; i < 250; ++i) {
      std::vector<double> v(kSentenceEmbeddingDim);
      for (double& x : v) x = normal(rng);
      entries.push_back({i, v});
    }
    kept[b] = entries;
    store.store_batch(b, entries);
  }
  int mismatches = 0;
  for (int q = 0; q < 50; ++q) {
    std::vector<double> query(kSentenceEmbeddingDim);
    for (double& x : query) x = normal(rng);
    for (int b = 1; b <= 4; ++b) {
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (const auto& e : kept[b]) {
        double d = 0;
        for (std::size_t i = 0; i < query.size(); ++i) d += (e.vector[i] - query[i]) * (e.vector[i] - query[i]);
        if (d < best) {
          best = d;
          arg = e.index;
        }
      }
      if (store.retrieve_nearest(query, b).index != arg) ++mismatches;
    }
  }
  out << (mismatches == 0 ? "PASS" : "FAIL") << " retrieval linear scan: " << mismatches << " mismatches\n";
  return mismatches == 0;
}

}  // namespace

bool run_gradcheck(std::uint64_t seed, std::ostream& out) {
  SynthConfig cfg;
  cfg.n_event_types = 3;
  cfg.n_trigger_lemmas = 6;
  cfg.batches = {{"micro", 3, 0, 0}};
  cfg.min_length = 3;
  cfg.max_length = 5;
  cfg.seed = seed;
  const SynthWorld world = build_world(cfg);
  const auto batches = generate_corpus(cfg, world);
  StructuredEmbeddingOptions emb;
  emb.seed = seed;
  auto words = std::make_shared<const WordEmbeddingTable>(structured_word_embeddings(world, emb));
  StreamModel model(make_model_context(batches, words), seed);
  model.enable_memory(seed + 1);
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RetrievedSequence> seqs(batches[0].sentences.size());
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    for (std::size_t m = 0; m <= k; ++m) {
      Retrieved r{static_cast<int>(m + 1), 0, 0.0, std::vector<double>(kSentenceEmbeddingDim)};
      for (double& x : r.vector) x = normal(rng);
      seqs[k].push_back(std::move(r));
    }
  }
  // Random transitions so the CRF gradient is not trivially symmetric.
  for (num::Parameter* p : model.parameters()) {
    if (p->name == "crf.transitions") {
      for (double& x : p->value.data()) x = 0.5 * normal(rng);
    }
  }
  auto loss = [&](num::Graph& g) {
    num::Var total = model.loss(g, batches[0].sentences[0], &seqs[0]);
    for (std::size_t k = 1; k < seqs.size(); ++k) {
      total = num::add(total, model.loss(g, batches[0].sentences[k], &seqs[k]));
    }
    return total;
  };
  num::GradCheckOptions opt;
  opt.max_elements_per_parameter = 12;
  opt.seed = seed;
  const auto params = model.parameters();
  bool ok = true;
  for (const auto& r : num::grad_check(loss, params, opt)) {
    const bool pass = r.max_relative_error < 1e-4;
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << r.name << " max rel err " << r.max_relative_error << " over "
        << r.checked << " elements\n";
  }
  return ok;
}

bool run_selftest(std::uint64_t seed, std::ostream& out) {
  const bool a = crf_oracle(seed, out);
  const bool b = retrieval_oracle(seed, out);
  const bool c = run_gradcheck(seed, out);
  out << (a && b && c ? "selftest passed\n" : "selftest FAILED\n");
  return a && b && c;
}

}  // namespace streamtag::tools
