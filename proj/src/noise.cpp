#include "streamtag/noise.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "streamtag/rng.hpp"

namespace streamtag {

double NoiseSchedule::level(int ordinal) const {
  auto it = per_batch.find(ordinal);
  if (it == per_batch.end()) {
    throw std::out_of_range("noise schedule has no entry for batch " + std::to_string(ordinal));
  }
  return it->second;
}

void NoiseSchedule::check_covers(std::span<const Batch> batches) const {
  for (const auto& [ordinal, lvl] : per_batch) {
    if (!(lvl >= 0.0 && lvl <= 1.0)) {
      throw std::invalid_argument("noise level for batch " + std::to_string(ordinal) +
                                  " outside [0,1]");
    }
  }
  for (const Batch& b : batches) level(b.ordinal);
}

const std::set<std::string>* ConfusingList::find(const std::string& lemma) const {
  auto it = entries.find(lemma);
  return it == entries.end() ? nullptr : &it->second;
}

ConfusingList build_confusing_list(std::span<const Sentence* const> train_sentences) {
  std::map<std::string, std::set<std::string>> seen;
  for (const Sentence* s : train_sentences) {
    for (std::size_t i = 0; i < s->tags.size(); ++i) {
      if (s->tags[i].kind == TagKind::B) seen[s->tokens[i].lemma].insert(s->tags[i].event_type);
    }
  }
  ConfusingList out;
  for (auto& [lemma, types] : seen) {
    if (types.size() >= 2) out.entries.emplace(lemma, std::move(types));
  }
  return out;
}

ConfusingList build_confusing_list(std::span<const Batch> batches) {
  const auto train = collect_split(batches, Split::Train);
  return build_confusing_list(std::span<const Sentence* const>(train));
}

namespace {
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace

Sentence corrupt_sentence(const Sentence& sentence, double noise_level,
                          const ConfusingList& confusing, std::mt19937_64& rng,
                          const CorruptionOptions& options, CorruptionStats* stats) {
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
    throw std::invalid_argument("noise level " + std::to_string(noise_level) + " outside [0,1]");
  }
  if (options.drop_weight && !(*options.drop_weight >= 0.0)) {
    throw std::invalid_argument("drop_weight must be non-negative");
  }
  Sentence out = sentence;
  CorruptionStats local;
  std::size_t i = 0;
  const std::size_t n = out.tags.size();
  while (i < n) {
    if (out.tags[i].kind != TagKind::B) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < n && out.tags[end].kind == TagKind::I &&
           out.tags[end].event_type == out.tags[i].event_type) {
      ++end;
    }
    ++local.spans;
    const double u = uniform01(rng);
    if (u < noise_level) {
      const std::string current = out.tags[i].event_type;
      std::vector<std::string> alternatives;
      if (const auto* types = confusing.find(out.tokens[i].lemma)) {
        for (const std::string& t : *types) {
          if (t != current) alternatives.push_back(t);
        }
      }
      std::optional<std::string> relabel;
      if (!alternatives.empty()) {
        const double w_drop = options.drop_weight.value_or(1.0);
        const double total = w_drop + static_cast<double>(alternatives.size());
        const double pick = uniform01(rng) * total;
        if (pick >= w_drop) {
          std::size_t k = static_cast<std::size_t>(pick - w_drop);
          relabel = alternatives[std::min(k, alternatives.size() - 1)];
        }
      }
      for (std::size_t k = i; k < end; ++k) {
        if (relabel) {
          out.tags[k].event_type = *relabel;
        } else {
          out.tags[k] = TriggerTag::outside();
        }
      }
      if (relabel) {
        ++local.swapped;
      } else {
        ++local.dropped;
      }
    }
    i = end;
  }
  if (stats) *stats += local;
  return out;
}

std::uint64_t group_seed(std::uint64_t master_seed, int group_id) {
  return derive_seed(master_seed, {0x6e6f697365ULL, static_cast<std::uint64_t>(group_id)});
}

std::vector<SimulationGroup> generate_groups(std::span<const Batch> batches,
                                             const NoiseSchedule& schedule, int n_groups,
                                             std::uint64_t master_seed,
                                             const CorruptionOptions& options) {
  if (n_groups < 1) throw std::invalid_argument("n_groups must be >= 1");
  schedule.check_covers(batches);
  const ConfusingList confusing = build_confusing_list(batches);
  std::vector<SimulationGroup> groups;
  for (int g = 1; g <= n_groups; ++g) {
    SimulationGroup group;
    group.group_id = g;
    group.seed = group_seed(master_seed, g);
    std::mt19937_64 rng(group.seed);
    for (const Batch& b : batches) {
      Batch copy;
      copy.ordinal = b.ordinal;
      copy.name = b.name;
      const double level = schedule.level(b.ordinal);
      for (const Sentence& s : b.sentences) {
        if (s.split == Split::Train) {
          copy.sentences.push_back(corrupt_sentence(s, level, confusing, rng, options, &group.stats));
        } else {
          copy.sentences.push_back(s);
        }
      }
      group.batches.push_back(std::move(copy));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

SimulationConfig SimulationConfig::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SimulationConfig cfg;
  for (const auto& [key, value] : j.at("schedule").items()) {
    cfg.schedule.per_batch[std::stoi(key)] = value.get<double>();
  }
  if (j.contains("n_groups")) cfg.n_groups = j.at("n_groups").get<int>();
  if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("drop_weight") && !j.at("drop_weight").is_null()) {
    cfg.corruption.drop_weight = j.at("drop_weight").get<double>();
  }
  cfg.schedule.check_covers({});
  return cfg;
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open simulation config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void write_groups(const std::filesystem::path& dir, std::span<const SimulationGroup> groups) {
  for (const SimulationGroup& g : groups) {
    const auto sub = dir / ("group_" + std::to_string(g.group_id));
    std::filesystem::create_directories(sub);
    save_corpus(sub / "corpus.tsv", g.batches);
  }
}

NoiseSchedule schedule_25() { return NoiseSchedule{{{1, 0.25}, {2, 0.10}, {3, 0.05}, {4, 0.0}}}; }
NoiseSchedule schedule_10() { return NoiseSchedule{{{1, 0.10}, {2, 0.05}, {3, 0.0}, {4, 0.0}}}; }

}  // namespace streamtag
