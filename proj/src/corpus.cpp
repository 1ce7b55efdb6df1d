#include "streamtag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace streamtag {

std::optional<TriggerTag> TriggerTag::parse(std::string_view text) {
  if (text == "O") return TriggerTag::outside();
  if (text.size() < 3 || text[1] != '-') return std::nullopt;
  std::string type(text.substr(2));
  if (text[0] == 'B') return TriggerTag::begin(std::move(type));
  if (text[0] == 'I') return TriggerTag::inside(std::move(type));
  return std::nullopt;
}

std::string TriggerTag::str() const {
  switch (kind) {
    case TagKind::O: return "O";
    case TagKind::B: return "B-" + event_type;
    case TagKind::I: return "I-" + event_type;
  }
  return "O";
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::vector<const Sentence*> Batch::of_split(Split s) const {
  std::vector<const Sentence*> out;
  for (const Sentence& sent : sentences) {
    if (sent.split == s) out.push_back(&sent);
  }
  return out;
}

std::string BioViolation::message() const {
  return "invalid BIO at token " + std::to_string(index) + ": " + actual + " follows " + previous;
}

std::optional<BioViolation> validate_bio(std::span<const TriggerTag> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const TriggerTag& t = tags[i];
    if (t.kind != TagKind::O && t.event_type.empty()) {
      return BioViolation{i, i ? tags[i - 1].str() : "<start>", t.str()};
    }
    if (t.kind != TagKind::I) continue;
    const bool ok = i > 0 && tags[i - 1].kind != TagKind::O &&
                    tags[i - 1].event_type == t.event_type;
    if (!ok) return BioViolation{i, i ? tags[i - 1].str() : "<start>", t.str()};
  }
  return std::nullopt;
}

std::optional<BioViolation> validate_bio(const Sentence& sentence) {
  return validate_bio(std::span<const TriggerTag>(sentence.tags));
}

namespace {

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Header {
  std::string doc;
  std::string batch;
  Split split = Split::Train;
  std::optional<int> ordinal;
};

Header parse_header(std::string_view line, std::size_t line_no) {
  Header h;
  bool has_doc = false, has_batch = false, has_split = false;
  std::istringstream fields{std::string(line.substr(1))};
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw CorpusError("malformed header field '" + field + "'", line_no);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (value.empty()) throw CorpusError("empty value for '" + key + "'", line_no);
    if (key == "doc") {
      h.doc = value;
      has_doc = true;
    } else if (key == "batch") {
      h.batch = value;
      has_batch = true;
    } else if (key == "split") {
      auto s = parse_split(value);
      if (!s) throw CorpusError("unknown split '" + value + "'", line_no);
      h.split = *s;
      has_split = true;
    } else if (key == "ordinal") {
      try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size() || v < 1) throw std::invalid_argument(value);
        h.ordinal = v;
      } catch (const std::exception&) {
        throw CorpusError("ordinal must be a positive integer, got '" + value + "'", line_no);
      }
    } else {
      throw CorpusError("unknown header key '" + key + "'", line_no);
    }
  }
  if (!has_doc || !has_batch || !has_split) {
    throw CorpusError("sentence header needs doc=, batch= and split=", line_no);
  }
  return h;
}

}  // namespace

std::vector<Batch> parse_corpus(std::istream& in) {
  struct PendingBatch {
    Batch batch;
    std::optional<int> explicit_ordinal;
  };
  std::vector<PendingBatch> batches;
  std::map<std::string, std::size_t> batch_index;

  std::optional<Header> header;
  std::size_t header_line = 0;
  Sentence current;

  auto flush = [&](std::size_t line_no) {
    if (!header) return;
    if (current.tokens.empty()) throw CorpusError("empty sentence", header_line);
    if (auto v = validate_bio(current)) {
      throw CorpusError("sentence of doc '" + header->doc + "': " + v->message(), header_line);
    }
    auto [it, inserted] = batch_index.emplace(header->batch, batches.size());
    if (inserted) {
      PendingBatch pb;
      pb.batch.name = header->batch;
      batches.push_back(std::move(pb));
    }
    PendingBatch& pb = batches[it->second];
    if (header->ordinal) {
      if (pb.explicit_ordinal && *pb.explicit_ordinal != *header->ordinal) {
        throw CorpusError("conflicting ordinals for batch '" + header->batch + "'", header_line);
      }
      pb.explicit_ordinal = header->ordinal;
    }
    current.doc_id = header->doc;
    current.batch_name = header->batch;
    current.split = header->split;
    current.index_in_batch = static_cast<int>(pb.batch.sentences.size());
    pb.batch.sentences.push_back(std::move(current));
    current = Sentence{};
    header.reset();
    (void)line_no;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush(line_no);
      continue;
    }
    if (line[0] == '#' && line.find('\t') == std::string::npos) {
      if (header) {
        if (!current.tokens.empty()) throw CorpusError("missing blank line before header", line_no);
        throw CorpusError("header without tokens", header_line);
      }
      header = parse_header(line, line_no);
      header_line = line_no;
      continue;
    }
    if (!header) throw CorpusError("token line outside a sentence (missing header)", line_no);
    const auto cols = split_on(line, '\t');
    if (cols.size() != 4) {
      throw CorpusError("expected 4 tab-separated columns, got " + std::to_string(cols.size()),
                        line_no);
    }
    for (std::size_t c = 0; c < 4; ++c) {
      if (cols[c].empty()) throw CorpusError("empty column " + std::to_string(c + 1), line_no);
    }
    auto tag = TriggerTag::parse(cols[3]);
    if (!tag) throw CorpusError("bad BIO tag '" + std::string(cols[3]) + "'", line_no);
    current.tokens.push_back(Token{std::string(cols[0]), std::string(cols[1]), std::string(cols[2])});
    current.tags.push_back(std::move(*tag));
  }
  flush(line_no + 1);

  // Explicit ordinals win; the rest take the smallest free ordinals in
  // first-appearance order.
  std::set<int> used;
  for (const PendingBatch& pb : batches) {
    if (pb.explicit_ordinal && !used.insert(*pb.explicit_ordinal).second) {
      throw CorpusError("ordinal " + std::to_string(*pb.explicit_ordinal) + " used twice", 0);
    }
  }
  int next = 1;
  for (PendingBatch& pb : batches) {
    if (pb.explicit_ordinal) {
      pb.batch.ordinal = *pb.explicit_ordinal;
    } else {
      while (used.count(next)) ++next;
      pb.batch.ordinal = next;
      used.insert(next);
    }
  }
  std::vector<Batch> out;
  for (PendingBatch& pb : batches) {
    for (Sentence& s : pb.batch.sentences) s.batch_ordinal = pb.batch.ordinal;
    out.push_back(std::move(pb.batch));
  }
  std::sort(out.begin(), out.end(), [](const Batch& a, const Batch& b) { return a.ordinal < b.ordinal; });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].ordinal != static_cast<int>(i) + 1) {
      throw CorpusError("batch ordinals must be contiguous from 1", 0);
    }
  }
  return out;
}

std::vector<Batch> parse_corpus_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_corpus(in);
}

std::vector<Batch> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string(), 0);
  return parse_corpus(in);
}

std::string serialize_corpus(std::span<const Batch> batches) {
  std::vector<const Batch*> ordered;
  for (const Batch& b : batches) ordered.push_back(&b);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Batch* a, const Batch* b) { return a->ordinal < b->ordinal; });
  std::ostringstream os;
  for (const Batch* b : ordered) {
    for (const Sentence& s : b->sentences) {
      os << "# doc=" << s.doc_id << " batch=" << b->name << " split=" << split_name(s.split)
         << '\n';
      for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        const Token& t = s.tokens[i];
        os << t.surface << '\t' << t.pos << '\t' << t.lemma << '\t' << s.tags[i].str() << '\n';
      }
      os << '\n';
    }
  }
  return os.str();
}

void save_corpus(const std::filesystem::path& path, std::span<const Batch> batches) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CorpusError("cannot write corpus file " + path.string(), 0);
  os << serialize_corpus(batches);
}

TagSet::TagSet(std::vector<std::string> event_types) : event_types_(std::move(event_types)) {
  if (event_types_.empty()) throw std::invalid_argument("tag set needs at least one event type");
  labels_.push_back("O");
  for (const std::string& t : event_types_) {
    if (t.empty()) throw std::invalid_argument("empty event type identifier");
    labels_.push_back("B-" + t);
    labels_.push_back("I-" + t);
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!label_to_id_.emplace(labels_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate event type '" + labels_[i].substr(2) + "'");
    }
  }
}

int TagSet::id(const TriggerTag& tag) const { return id(tag.str()); }

int TagSet::id(std::string_view label) const {
  auto it = label_to_id_.find(label);
  if (it == label_to_id_.end()) {
    throw std::out_of_range("label '" + std::string(label) + "' not in tag set");
  }
  return it->second;
}

TriggerTag TagSet::tag(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) {
    throw std::out_of_range("tag id " + std::to_string(id) + " out of range");
  }
  if (id == 0) return TriggerTag::outside();
  const std::string& type = event_types_[static_cast<std::size_t>(id - 1) / 2];
  return (id % 2 == 1) ? TriggerTag::begin(type) : TriggerTag::inside(type);
}

std::optional<int> TagSet::type_index(std::string_view event_type) const {
  for (std::size_t k = 0; k < event_types_.size(); ++k) {
    if (event_types_[k] == event_type) return static_cast<int>(k);
  }
  return std::nullopt;
}

std::vector<int> TagSet::encode(std::span<const TriggerTag> tags) const {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const TriggerTag& t : tags) out.push_back(id(t));
  return out;
}

std::vector<TriggerTag> TagSet::decode(std::span<const int> ids) const {
  std::vector<TriggerTag> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(tag(i));
  return out;
}

TagSet build_tagset(std::vector<std::string> event_types) { return TagSet(std::move(event_types)); }

std::vector<std::string> collect_event_types(std::span<const Batch> batches) {
  std::set<std::string> types;
  for (const Batch& b : batches) {
    for (const Sentence& s : b.sentences) {
      for (const TriggerTag& t : s.tags) {
        if (t.is_trigger()) types.insert(t.event_type);
      }
    }
  }
  return {types.begin(), types.end()};
}

std::vector<BatchStats> corpus_stats(std::span<const Batch> batches) {
  std::vector<BatchStats> out;
  for (const Batch& b : batches) {
    BatchStats st;
    st.name = b.name;
    std::set<std::string> docs;
    for (const Sentence& s : b.sentences) {
      docs.insert(s.doc_id);
      ++st.sentences;
      st.words += s.tokens.size();
      for (const TriggerTag& t : s.tags) {
        if (t.kind == TagKind::B) ++st.triggers;
      }
    }
    st.documents = docs.size();
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<const Sentence*> collect_split(std::span<const Batch> batches, Split s) {
  std::vector<const Sentence*> out;
  for (const Batch& b : batches) {
    for (const Sentence* p : b.of_split(s)) out.push_back(p);
  }
  return out;
}

}  // namespace streamtag
