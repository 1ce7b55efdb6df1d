#include "streamtag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "streamtag/rng.hpp"

namespace streamtag {
namespace {

const std::vector<std::string>& type_names() {
  static const std::vector<std::string> names = {
      "Attack",    "Meet",        "Transport", "Die",       "Injure",         "Elect",
      "Sue",       "Marry",       "Arrest-Jail", "Demonstrate", "Phone-Write", "Transfer-Money",
      "Start-Org", "End-Org",     "Be-Born",   "Divorce",   "Fine",           "Execute"};
  return names;
}

const std::vector<std::string>& particles() {
  static const std::vector<std::string> p = {"up", "out", "down", "off", "over"};
  return p;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

class WordFactory {
 public:
  explicit WordFactory(std::mt19937_64& rng) : rng_(rng) {
    for (const auto& p : particles()) used_.insert(p);
  }

  std::string fresh(std::size_t min_syllables, std::size_t max_syllables,
                    const std::vector<std::string>& suffixes = {}) {
    static const std::string consonants = "bdfgklmnprstvz";
    static const std::string vowels = "aeiou";
    for (;;) {
      const std::size_t n = min_syllables + uniform_index(rng_, max_syllables - min_syllables + 1);
      std::string w;
      for (std::size_t i = 0; i < n; ++i) {
        w += consonants[uniform_index(rng_, consonants.size())];
        w += vowels[uniform_index(rng_, vowels.size())];
      }
      if (uniform_index(rng_, 2) == 0) w += consonants[uniform_index(rng_, consonants.size())];
      bool clash = used_.count(w) > 0;
      for (const auto& s : suffixes) clash = clash || used_.count(w + s) > 0;
      if (clash) continue;
      used_.insert(w);
      for (const auto& s : suffixes) used_.insert(w + s);
      return w;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

const std::vector<std::string> kInflections = {"s", "ed", "ing"};

std::string inflection_pos(std::size_t surface_index) {
  static const char* pos[] = {"VB", "VBZ", "VBD", "VBG"};
  return pos[surface_index];
}

struct Unit {
  std::vector<Token> tokens;
  std::vector<TriggerTag> tags;
};

class SentenceMaker {
 public:
  SentenceMaker(const SynthConfig& c, const SynthWorld& w) : config_(c), world_(w) {
    for (std::size_t j = 0; j < w.lemmas.size(); ++j) {
      for (int t : w.lemmas[j].types) by_type_[t].push_back(j);
    }
  }

  std::size_t pick_lemma(int type, std::mt19937_64& rng) const {
    const auto& cands = by_type_.at(type);
    std::vector<double> w;
    for (std::size_t j : cands) w.push_back(world_.lemma_weights[j]);
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return cands[d(rng)];
  }

  const std::vector<std::size_t>& lemmas_of(int type) const { return by_type_.at(type); }

  Unit trigger(std::size_t lemma_index, int type, std::mt19937_64& rng) const {
    const TriggerLemma& l = world_.lemmas[lemma_index];
    const std::size_t s = uniform_index(rng, l.surfaces.size());
    const std::string& name = world_.event_types[static_cast<std::size_t>(type)];
    Unit u;
    u.tokens.push_back({l.surfaces[s], inflection_pos(s), l.lemma});
    u.tags.push_back(TriggerTag::begin(name));
    if (!l.particle.empty()) {
      u.tokens.push_back({l.particle, "RP", l.particle});
      u.tags.push_back(TriggerTag::inside(name));
    }
    return u;
  }

  // `forced` fixes the type and first lemma (guideline sentences).
  Sentence make(std::mt19937_64& rng, std::optional<std::pair<int, std::size_t>> forced) const {
    const std::size_t length =
        config_.min_length + uniform_index(rng, config_.max_length - config_.min_length + 1);
    std::size_t n_triggers = 0;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (forced) {
      n_triggers = u < 0.8 ? 1 : 2;
    } else {
      n_triggers = u < 0.25 ? 0 : (u < 0.8 ? 1 : 2);
    }
    std::vector<Unit> units;
    if (n_triggers > 0) {
      const int type = forced ? forced->first
                              : static_cast<int>(uniform_index(rng, world_.event_types.size()));
      for (std::size_t k = 0; k < n_triggers; ++k) {
        const std::size_t lemma = (forced && k == 0) ? forced->second : pick_lemma(type, rng);
        units.push_back(trigger(lemma, type, rng));
      }
      const auto& marks = world_.markers[static_cast<std::size_t>(type)];
      const std::string& m = marks[uniform_index(rng, marks.size())];
      units.push_back(Unit{{{m, "NN", m}}, {TriggerTag::outside()}});
    }
    std::size_t used = 0;
    for (const Unit& un : units) used += un.tokens.size();
    const std::size_t fillers = length > used ? length - used : 1;
    for (std::size_t k = 0; k < fillers; ++k) {
      const std::size_t f = uniform_index(rng, world_.fillers.size());
      units.push_back(Unit{{{world_.fillers[f], world_.filler_pos[f], world_.fillers[f]}},
                           {TriggerTag::outside()}});
    }
    std::shuffle(units.begin(), units.end(), rng);
    Sentence s;
    for (Unit& un : units) {
      for (std::size_t k = 0; k < un.tokens.size(); ++k) {
        s.tokens.push_back(std::move(un.tokens[k]));
        s.tags.push_back(std::move(un.tags[k]));
      }
    }
    return s;
  }

 private:
  const SynthConfig& config_;
  const SynthWorld& world_;
  std::map<int, std::vector<std::size_t>> by_type_;
};

}  // namespace

SynthConfig SynthConfig::standard() {
  SynthConfig c;
  for (const char* name : {"200303", "200304", "200305", "200306"}) {
    c.batches.push_back({name, 300, 40, 40});
  }
  return c;
}

void SynthConfig::validate() const {
  if (n_event_types < 1) throw std::invalid_argument("n_event_types must be >= 1");
  if (ambiguous_fraction < 0.0 || ambiguous_fraction > 1.0) {
    throw std::invalid_argument("ambiguous_fraction must lie in [0, 1]");
  }
  if (phrasal_fraction < 0.0 || phrasal_fraction > 1.0) {
    throw std::invalid_argument("phrasal_fraction must lie in [0, 1]");
  }
  if (ambiguous_fraction > 0.0 && n_event_types < 2) {
    throw std::invalid_argument("ambiguous lemmas need at least two event types");
  }
  if (n_trigger_lemmas == 0) throw std::invalid_argument("n_trigger_lemmas must be >= 1");
  if (vocab_size == 0 || markers_per_type == 0) {
    throw std::invalid_argument("vocab_size and markers_per_type must be >= 1");
  }
  if (min_length == 0 || min_length > max_length) {
    throw std::invalid_argument("sentence length range must satisfy 1 <= min <= max");
  }
  if (sentences_per_doc == 0) throw std::invalid_argument("sentences_per_doc must be >= 1");
  std::set<std::string> names;
  for (const auto& b : batches) {
    if (b.name.empty() || b.name.find_first_of(" \t=") != std::string::npos) {
      throw std::invalid_argument("invalid batch name '" + b.name + "'");
    }
    if (!names.insert(b.name).second) throw std::invalid_argument("duplicate batch name '" + b.name + "'");
  }
}

SynthConfig SynthConfig::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SynthConfig c;
  c.n_event_types = j.value("n_event_types", c.n_event_types);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.n_trigger_lemmas = j.value("n_trigger_lemmas", c.n_trigger_lemmas);
  c.ambiguous_fraction = j.value("ambiguous_fraction", c.ambiguous_fraction);
  c.markers_per_type = j.value("markers_per_type", c.markers_per_type);
  c.zipf_exponent = j.value("zipf_exponent", c.zipf_exponent);
  c.phrasal_fraction = j.value("phrasal_fraction", c.phrasal_fraction);
  c.sentences_per_doc = j.value("sentences_per_doc", c.sentences_per_doc);
  c.seed = j.value("seed", c.seed);
  if (j.contains("sentence_length")) {
    c.min_length = j.at("sentence_length").at(0).get<std::size_t>();
    c.max_length = j.at("sentence_length").at(1).get<std::size_t>();
  }
  if (j.contains("batches")) {
    for (const auto& b : j.at("batches")) {
      c.batches.push_back({b.at("name").get<std::string>(), b.at("n_train").get<std::size_t>(),
                           b.at("n_dev").get<std::size_t>(), b.at("n_test").get<std::size_t>()});
    }
  } else {
    c.batches = standard().batches;
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::vector<std::string> SynthWorld::vocabulary() const {
  std::set<std::string> all(fillers.begin(), fillers.end());
  for (const auto& l : lemmas) all.insert(l.surfaces.begin(), l.surfaces.end());
  for (const auto& ms : markers) all.insert(ms.begin(), ms.end());
  all.insert(particles().begin(), particles().end());
  return {all.begin(), all.end()};
}

std::optional<int> SynthWorld::marker_type(const std::string& surface) const {
  for (std::size_t t = 0; t < markers.size(); ++t) {
    if (std::find(markers[t].begin(), markers[t].end(), surface) != markers[t].end()) {
      return static_cast<int>(t);
    }
  }
  return std::nullopt;
}

const TriggerLemma* SynthWorld::find_lemma(const std::string& lemma) const {
  for (const auto& l : lemmas) {
    if (l.lemma == lemma) return &l;
  }
  return nullptr;
}

SynthWorld build_world(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(derive_seed(config.seed, {0x776f726c64ULL}));
  WordFactory words(rng);
  SynthWorld w;
  const auto T = static_cast<std::size_t>(config.n_event_types);
  for (std::size_t t = 0; t < T; ++t) {
    w.event_types.push_back(t < type_names().size() ? type_names()[t] : "Type" + std::to_string(t));
  }
  static const std::vector<std::string> filler_tags = {"NN", "DT", "JJ", "IN", "RB", "NNS", "PRP", "CC"};
  for (std::size_t i = 0; i < config.vocab_size; ++i) {
    w.fillers.push_back(words.fresh(1, 3));
    w.filler_pos.push_back(filler_tags[uniform_index(rng, filler_tags.size())]);
  }
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::string> ms;
    for (std::size_t k = 0; k < config.markers_per_type; ++k) ms.push_back(words.fresh(2, 3));
    w.markers.push_back(std::move(ms));
  }
  const std::size_t n = config.n_trigger_lemmas;
  const auto n_ambiguous = static_cast<std::size_t>(std::llround(config.ambiguous_fraction * static_cast<double>(n)));
  const auto n_phrasal = static_cast<std::size_t>(std::llround(config.phrasal_fraction * static_cast<double>(n)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<bool> ambiguous(n, false), phrasal(n, false);
  for (std::size_t k = 0; k < n_ambiguous; ++k) ambiguous[perm[k]] = true;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t k = 0; k < n_phrasal; ++k) phrasal[perm[k]] = true;

  std::set<int> covered;
  for (std::size_t j = 0; j < n; ++j) {
    TriggerLemma l;
    l.lemma = words.fresh(2, 3, kInflections);
    l.surfaces = {l.lemma};
    for (const auto& s : kInflections) l.surfaces.push_back(l.lemma + s);
    const int primary = static_cast<int>(j % T);
    l.types.push_back(primary);
    if (ambiguous[j]) {
      l.types.push_back(static_cast<int>((static_cast<std::size_t>(primary) + 1 + uniform_index(rng, T - 1)) % T));
    }
    if (phrasal[j]) l.particle = particles()[uniform_index(rng, particles().size())];
    covered.insert(l.types.begin(), l.types.end());
    w.lemmas.push_back(std::move(l));
  }
  if (covered.size() != T) {
    throw std::invalid_argument("trigger lemmas cover only " + std::to_string(covered.size()) + " of " +
                                std::to_string(T) + " event types");
  }
  std::shuffle(perm.begin(), perm.end(), rng);
  w.lemma_weights.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    w.lemma_weights[perm[r]] = 1.0 / std::pow(static_cast<double>(r + 1), config.zipf_exponent);
  }
  const double total = std::accumulate(w.lemma_weights.begin(), w.lemma_weights.end(), 0.0);
  for (double& x : w.lemma_weights) x /= total;
  return w;
}

std::vector<Batch> generate_corpus(const SynthConfig& config) {
  return generate_corpus(config, build_world(config));
}

std::vector<Batch> generate_corpus(const SynthConfig& config, const SynthWorld& world) {
  config.validate();
  SentenceMaker maker(config, world);
  std::vector<Batch> out;
  for (std::size_t b = 0; b < config.batches.size(); ++b) {
    const SynthBatchSpec& spec = config.batches[b];
    std::mt19937_64 rng(derive_seed(config.seed, {0x6261746368ULL, b}));
    Batch batch;
    batch.ordinal = static_cast<int>(b + 1);
    batch.name = spec.name;
    int index = 0;
    const std::pair<Split, std::size_t> parts[] = {
        {Split::Train, spec.n_train}, {Split::Dev, spec.n_dev}, {Split::Test, spec.n_test}};
    for (const auto& [split, count] : parts) {
      for (std::size_t k = 0; k < count; ++k) {
        Sentence s = maker.make(rng, std::nullopt);
        s.doc_id = spec.name + "_" + std::string(split_name(split)) + "_" +
                   std::to_string(k / config.sentences_per_doc);
        s.batch_name = spec.name;
        s.batch_ordinal = batch.ordinal;
        s.index_in_batch = index++;
        s.split = split;
        batch.sentences.push_back(std::move(s));
      }
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<Sentence> generate_guidelines(const SynthConfig& config, const SynthWorld& world,
                                          std::size_t per_type, std::uint64_t seed) {
  SentenceMaker maker(config, world);
  std::mt19937_64 rng(derive_seed(seed, {0x6775696465ULL}));
  std::vector<Sentence> out;
  for (std::size_t t = 0; t < world.event_types.size(); ++t) {
    const auto& lemmas = maker.lemmas_of(static_cast<int>(t));
    for (std::size_t k = 0; k < per_type; ++k) {
      Sentence s = maker.make(rng, std::make_pair(static_cast<int>(t), lemmas[k % lemmas.size()]));
      s.doc_id = "guideline_" + std::to_string(t);
      s.batch_name = "guideline";
      s.index_in_batch = static_cast<int>(out.size());
      out.push_back(std::move(s));
    }
  }
  return out;
}

WordEmbeddingTable structured_word_embeddings(const SynthWorld& world,
                                              const StructuredEmbeddingOptions& options) {
  const std::size_t dim = options.dim;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  auto random_vec = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    return v;
  };
  std::vector<std::vector<double>> directions;
  for (std::size_t t = 0; t < world.event_types.size(); ++t) {
    auto v = random_vec();
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    directions.push_back(std::move(v));
  }
  std::map<std::string, std::vector<double>> vecs;
  auto mixed = [&](double weight, int type) {
    auto v = random_vec();
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] *= options.noise;
      if (type >= 0) v[i] += weight * directions[static_cast<std::size_t>(type)][i];
    }
    return v;
  };
  for (const auto& f : world.fillers) vecs[f] = mixed(0.0, -1);
  for (const auto& p : particles()) vecs[p] = mixed(0.0, -1);
  for (std::size_t t = 0; t < world.markers.size(); ++t) {
    for (const auto& m : world.markers[t]) vecs[m] = mixed(options.marker_cluster, static_cast<int>(t));
  }
  for (const auto& l : world.lemmas) {
    const int type = l.types.size() == 1 ? l.types.front() : -1;
    const auto base = mixed(type >= 0 ? options.lemma_cluster : 0.0, type);
    for (const auto& s : l.surfaces) {
      auto v = random_vec();
      for (std::size_t i = 0; i < dim; ++i) v[i] = base[i] + 0.1 * options.noise * v[i];
      vecs[s] = std::move(v);
    }
  }
  std::vector<std::string> words;
  std::vector<double> values;
  for (auto& [w, v] : vecs) {
    words.push_back(w);
    values.insert(values.end(), v.begin(), v.end());
  }
  const std::size_t n = words.size();
  return WordEmbeddingTable(std::move(words), num::Tensor({n, dim}, std::move(values)),
                            derive_seed(options.seed, {0x756e6bULL}));
}

std::vector<TriggerTag> oracle_tags(const SynthWorld& world, const Sentence& sentence) {
  std::optional<int> topic;
  for (const Token& t : sentence.tokens) {
    if (auto m = world.marker_type(t.surface)) {
      topic = *m;
      break;
    }
  }
  std::vector<TriggerTag> tags(sentence.tokens.size());
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const TriggerLemma* l = world.find_lemma(sentence.tokens[i].lemma);
    if (l == nullptr) continue;
    int type = l->types.front();
    if (l->types.size() > 1 && topic &&
        std::find(l->types.begin(), l->types.end(), *topic) != l->types.end()) {
      type = *topic;
    }
    const std::string& name = world.event_types[static_cast<std::size_t>(type)];
    tags[i] = TriggerTag::begin(name);
    if (!l->particle.empty() && i + 1 < sentence.tokens.size() &&
        sentence.tokens[i + 1].surface == l->particle) {
      tags[++i] = TriggerTag::inside(name);
    }
  }
  return tags;
}

}  // namespace streamtag
