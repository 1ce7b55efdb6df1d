#include "streamtag/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "streamtag/ops.hpp"
#include "streamtag/rng.hpp"

namespace streamtag {

WordEmbeddingTable::WordEmbeddingTable(std::vector<std::string> words, num::Tensor vectors,
                                       std::uint64_t unk_seed)
    : words_(std::move(words)) {
  if (vectors.rank() != 2 || vectors.rows() != words_.size()) {
    throw std::invalid_argument("word vector matrix must have one row per word");
  }
  const std::size_t dim = vectors.cols();
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate word '" + words_[i] + "' in embedding table");
    }
  }
  num::Tensor full({words_.size() + 1, dim});
  std::copy(vectors.data().begin(), vectors.data().end(), full.data().begin());
  std::mt19937_64 rng(unk_seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (double& v : full.row_span(words_.size())) v = dist(rng);
  table_ = num::Parameter("encoder.word_table", std::move(full), false);
}

int WordEmbeddingTable::lookup(std::string_view surface) const {
  if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
  std::string lower(surface);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = index_.find(lower); it != index_.end()) return it->second;
  return unk_id();
}

WordEmbeddingTable read_word_embeddings(std::istream& in, std::size_t expected_dim,
                                        std::uint64_t unk_seed) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw CorpusError("empty word embedding file", 1);
  std::size_t count = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> count >> dim) || (hs >> extra) || dim == 0) {
      throw CorpusError("header must be '<count> <dim>'", 1);
    }
  }
  if (dim != expected_dim) {
    throw CorpusError("embedding dimension " + std::to_string(dim) + " does not match configured " +
                          std::to_string(expected_dim),
                      1);
  }
  std::vector<std::string> words;
  std::vector<double> values;
  words.reserve(count);
  values.reserve(count * dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::size_t got = 0;
    double v = 0;
    while (ls >> v) {
      values.push_back(v);
      ++got;
    }
    if (!ls.eof() || got != dim) {
      throw CorpusError("expected a word and " + std::to_string(dim) + " numbers", line_no);
    }
    words.push_back(std::move(word));
  }
  if (words.size() != count) {
    throw CorpusError("header announces " + std::to_string(count) + " words, found " +
                          std::to_string(words.size()),
                      0);
  }
  return WordEmbeddingTable(std::move(words), num::Tensor({count, dim}, std::move(values)), unk_seed);
}

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path, std::size_t expected_dim,
                                        std::uint64_t unk_seed) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open word embedding file " + path.string(), 0);
  return read_word_embeddings(in, expected_dim, unk_seed);
}

void write_word_embeddings(std::ostream& out, const WordEmbeddingTable& table) {
  out << table.vocab_size() << ' ' << table.dim() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    out << table.words()[i];
    for (double v : table.vector(static_cast<int>(i))) out << ' ' << v;
    out << '\n';
  }
}

WordEmbeddingTable synthesize_word_embeddings(std::vector<std::string> words, std::size_t dim,
                                              std::uint64_t seed) {
  num::Tensor t({words.size(), dim});
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (std::size_t r = 0; r < words.size(); ++r) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : words[r]) h = (h ^ c) * 0x100000001b3ULL;
    std::mt19937_64 rng(derive_seed(seed, {h}));
    for (double& v : t.row_span(r)) v = dist(rng);
  }
  return WordEmbeddingTable(std::move(words), std::move(t), seed ^ 0x756e6bULL);
}

std::vector<std::string> corpus_vocabulary(std::span<const Batch> batches) {
  std::set<std::string> words;
  for (const Batch& b : batches) {
    for (const Sentence& s : b.sentences) {
      for (const Token& t : s.tokens) words.insert(t.surface);
    }
  }
  return {words.begin(), words.end()};
}

Vocabulary::Vocabulary(std::span<const std::string> items) : items_{"<unk>"} {
  for (const std::string& it : items) {
    if (index_.count(it)) continue;
    index_.emplace(it, static_cast<int>(items_.size()));
    items_.push_back(it);
  }
}

int Vocabulary::id(std::string_view item) const {
  auto it = index_.find(std::string(item));
  return it == index_.end() ? 0 : it->second;
}

Vocabulary pos_vocabulary(std::span<const Batch> batches) {
  std::set<std::string> tags;
  for (const Batch& b : batches) {
    for (const Sentence& s : b.sentences) {
      for (const Token& t : s.tokens) tags.insert(t.pos);
    }
  }
  std::vector<std::string> sorted(tags.begin(), tags.end());
  return Vocabulary(sorted);
}

LstmWeights LstmWeights::create(const std::string& prefix, std::size_t input, std::size_t hidden,
                                std::mt19937_64& rng) {
  LstmWeights w;
  w.w_ih = num::Parameter(prefix + ".w_ih", num::glorot_uniform(input, 4 * hidden, rng));
  w.w_hh = num::Parameter(prefix + ".w_hh", num::glorot_uniform(hidden, 4 * hidden, rng));
  w.bias = num::Parameter(prefix + ".bias", num::Tensor({4 * hidden}));
  return w;
}

num::Var LstmWeights::run(num::Graph& g, num::Var inputs, bool reverse) const {
  return num::lstm(inputs, g.parameter(w_ih), g.parameter(w_hh), g.parameter(bias), reverse);
}

void LstmWeights::collect(std::vector<num::Parameter*>& out) {
  out.push_back(&w_ih);
  out.push_back(&w_hh);
  out.push_back(&bias);
}

TokenEncoder::TokenEncoder(std::shared_ptr<const WordEmbeddingTable> words, Vocabulary pos_vocab,
                           EncoderDims dims, bool train_words, std::mt19937_64& rng)
    : words_(std::move(words)), pos_vocab_(std::move(pos_vocab)), dims_(dims) {
  if (!words_) throw std::invalid_argument("token encoder needs a word embedding table");
  if (words_->dim() != dims_.word) {
    throw std::invalid_argument("word embedding dim " + std::to_string(words_->dim()) +
                                " does not match configured " + std::to_string(dims_.word));
  }
  if (train_words) {
    word_copy_ = words_->table();
    word_copy_->trainable = true;
  }
  pos_table_ = num::Parameter("encoder.pos_table",
                              num::normal_table(pos_vocab_.size(), dims_.pos, 0.1, rng));
  char_table_ = num::Parameter("encoder.char_table",
                               num::normal_table(kCharVocab, dims_.char_embedding, 0.1, rng));
  char_fwd_ = LstmWeights::create("encoder.char_fwd", dims_.char_embedding, dims_.char_hidden, rng);
  char_bwd_ = LstmWeights::create("encoder.char_bwd", dims_.char_embedding, dims_.char_hidden, rng);
}

num::Var TokenEncoder::encode_chars(num::Graph& g, std::string_view surface) const {
  std::vector<int> bytes;
  bytes.reserve(surface.size());
  for (unsigned char c : surface) bytes.push_back(static_cast<int>(c));
  num::Var chars = num::embedding_lookup(g.parameter(char_table_), bytes);
  num::Var fwd = char_fwd_.run(g, chars, false);
  num::Var bwd = char_bwd_.run(g, chars, true);
  return num::concat({num::row(fwd, bytes.size() - 1), num::row(bwd, 0)});
}

num::Var TokenEncoder::encode(num::Graph& g, const Sentence& sentence) const {
  const std::size_t n = sentence.tokens.size();
  std::vector<int> word_ids, pos_ids;
  for (const Token& t : sentence.tokens) {
    word_ids.push_back(words_->lookup(t.surface));
    pos_ids.push_back(pos_vocab_.id(t.pos));
  }
  num::Var word_rows;
  if (word_copy_) {
    word_rows = num::embedding_lookup(g.parameter(*word_copy_), word_ids);
  } else {
    num::Tensor rows({n, dims_.word});
    for (std::size_t i = 0; i < n; ++i) {
      auto src = words_->vector(word_ids[i]);
      std::copy(src.begin(), src.end(), rows.row_span(i).begin());
    }
    word_rows = g.constant(std::move(rows));
  }
  num::Var pos_rows = num::embedding_lookup(g.parameter(pos_table_), pos_ids);
  std::vector<num::Var> char_rows;
  char_rows.reserve(n);
  for (const Token& t : sentence.tokens) char_rows.push_back(encode_chars(g, t.surface));
  num::Var chars = num::stack_rows(char_rows);
  return num::concat({word_rows, pos_rows, chars});
}

void TokenEncoder::collect(std::vector<num::Parameter*>& out) {
  if (word_copy_) out.push_back(&*word_copy_);
  out.push_back(&pos_table_);
  out.push_back(&char_table_);
  char_fwd_.collect(out);
  char_bwd_.collect(out);
}

}  // namespace streamtag
