#include "streamtag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include "json.hpp"
#include <sstream>

namespace streamtag {

std::set<TriggerSpan> extract_spans(std::span<const TriggerTag> tags, std::size_t sentence) {
  std::set<TriggerSpan> out;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i].kind == TagKind::O) {
      ++i;
      continue;
    }
    const std::string& type = tags[i].event_type;
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j].kind == TagKind::I && tags[j].event_type == type) ++j;
    out.insert(TriggerSpan{sentence, i, j, type});
    i = j;
  }
  return out;
}

PRF PRF::from(double p, double r) {
  return PRF{p, r, p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0};
}

PRF trigger_prf(const std::set<TriggerSpan>& predicted, const std::set<TriggerSpan>& gold) {
  std::size_t correct = 0;
  for (const TriggerSpan& s : predicted) correct += gold.count(s);
  const double p = predicted.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted.size());
  const double r = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  return PRF::from(p, r);
}

PRF aggregate_runs(std::span<const PrecisionRecall> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs needs at least one run");
  double p = 0, r = 0;
  for (const auto& run : runs) {
    p += run.precision;
    r += run.recall;
  }
  const double n = static_cast<double>(runs.size());
  return PRF::from(p / n, r / n);
}

std::string format_percent(double value) {
  // The epsilon absorbs representation error, e.g. 0.7025 * 1000 = 702.4999...
  const double tenths = std::floor(value * 1000.0 + 0.5 + 1e-9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
  return buf;
}

std::string metrics_to_json(std::span<const MetricRecord> records) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : records) {
    arr.push_back({{"noise", m.noise},
                   {"strategy", m.strategy},
                   {"batch", m.batch},
                   {"P", m.precision},
                   {"R", m.recall},
                   {"F1", m.f1},
                   {"groups", m.groups}});
  }
  return arr.dump(2) + "\n";
}

std::vector<MetricRecord> metrics_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::runtime_error("metrics JSON must be an array of records");
  std::vector<MetricRecord> out;
  for (const auto& j : arr) {
    out.push_back(MetricRecord{j.at("noise").get<std::string>(), j.at("strategy").get<std::string>(),
                               j.at("batch").get<std::string>(), j.at("P").get<double>(),
                               j.at("R").get<double>(), j.at("F1").get<double>(),
                               j.at("groups").get<int>()});
  }
  return out;
}

namespace {
std::string full_precision(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
}  // namespace

std::string metrics_to_csv(std::span<const MetricRecord> records) {
  std::ostringstream os;
  os << "noise,strategy,batch,P,R,F1,groups\n";
  for (const auto& m : records) {
    os << m.noise << ',' << m.strategy << ',' << m.batch << ',' << full_precision(m.precision) << ','
       << full_precision(m.recall) << ',' << full_precision(m.f1) << ',' << m.groups << '\n';
  }
  return os.str();
}

std::string timing_to_csv(std::span<const TimingRecord> timing) {
  std::ostringstream os;
  os << "strategy,seconds\n";
  for (const auto& t : timing) os << t.strategy << ',' << full_precision(t.seconds) << '\n';
  return os.str();
}

std::vector<TimingRecord> timing_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<TimingRecord> out;
  std::getline(is, line);
  if (line != "strategy,seconds") throw std::runtime_error("timing CSV header must be 'strategy,seconds'");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("malformed timing row '" + line + "'");
    out.push_back({line.substr(0, comma), std::stod(line.substr(comma + 1))});
  }
  return out;
}

int strategy_rank(const std::string& name) {
  static const std::vector<std::string> order = {"All", "Current", "Finetune", "Proposed"};
  auto it = std::find(order.begin(), order.end(), name);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::string render_table(std::span<const MetricRecord> records) {
  std::vector<std::string> noises, batches, strategies;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& m : records) {
    remember(noises, m.noise);
    remember(batches, m.batch);
    remember(strategies, m.strategy);
  }
  std::stable_sort(strategies.begin(), strategies.end(), [](const auto& a, const auto& b) {
    return strategy_rank(a) < strategy_rank(b);
  });
  auto find = [&](const std::string& n, const std::string& s, const std::string& b) -> const MetricRecord* {
    for (const auto& m : records) {
      if (m.noise == n && m.strategy == s && m.batch == b) return &m;
    }
    return nullptr;
  };

  std::ostringstream os;
  for (const std::string& noise : noises) {
    os << "Noise " << noise << '\n';
    os << std::left << std::setw(10) << "Strategy";
    for (const std::string& b : batches) os << " | " << std::setw(17) << b;
    os << '\n' << std::setw(10) << "";
    for (std::size_t i = 0; i < batches.size(); ++i) os << " | " << std::setw(17) << "P     R     F1";
    os << '\n';
    for (const std::string& s : strategies) {
      os << std::setw(10) << s;
      for (const std::string& b : batches) {
        const MetricRecord* m = find(noise, s, b);
        std::string cell = m ? format_percent(m->precision) + "  " + format_percent(m->recall) + "  " +
                                   format_percent(m->f1)
                             : "-";
        os << " | " << std::setw(17) << cell;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

std::string render_timing(std::span<const TimingRecord> timing) {
  std::vector<TimingRecord> sorted(timing.begin(), timing.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return strategy_rank(a.strategy) < strategy_rank(b.strategy);
  });
  std::ostringstream os;
  os << std::left << std::setw(10) << "Strategy" << " | Training Time (Seconds)\n";
  for (const auto& t : sorted) {
    os << std::setw(10) << t.strategy << " | " << std::fixed << std::setprecision(1) << t.seconds << '\n';
  }
  return os.str();
}

}  // namespace streamtag
