#ifndef STREAMTAG_ENCODER_HPP_
#define STREAMTAG_ENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "streamtag/autodiff.hpp"
#include "streamtag/corpus.hpp"

namespace streamtag {

/// Pretrained word vectors. The last row is the out-of-vocabulary row.
class WordEmbeddingTable {
 public:
  WordEmbeddingTable() = default;
  WordEmbeddingTable(std::vector<std::string> words, num::Tensor vectors, std::uint64_t unk_seed);

  std::size_t dim() const { return table_.value.cols(); }
  std::size_t vocab_size() const { return words_.size(); }
  int unk_id() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  /// Exact match, then lowercase, then the unk row.
  int lookup(std::string_view surface) const;
  std::span<const double> vector(int id) const { return table_.value.row_span(static_cast<std::size_t>(id)); }

  const num::Parameter& table() const { return table_; }
  num::Parameter& table() { return table_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  num::Parameter table_;
};

/// Text format: header "<count> <dim>", then "word v1 ... vdim" per line.
WordEmbeddingTable read_word_embeddings(std::istream& in, std::size_t expected_dim,
                                        std::uint64_t unk_seed = 1);
WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path, std::size_t expected_dim,
                                        std::uint64_t unk_seed = 1);
void write_word_embeddings(std::ostream& out, const WordEmbeddingTable& table);

/// Random normal(0, 1/sqrt(dim)) vectors. Each row depends only on `seed` and its word.
WordEmbeddingTable synthesize_word_embeddings(std::vector<std::string> words, std::size_t dim,
                                              std::uint64_t seed);

/// Every distinct surface in the corpus, sorted.
std::vector<std::string> corpus_vocabulary(std::span<const Batch> batches);

/// String -> id map with id 0 reserved for unknown entries.
class Vocabulary {
 public:
  Vocabulary() : items_{"<unk>"} {}
  explicit Vocabulary(std::span<const std::string> items);

  int id(std::string_view item) const;
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary pos_vocabulary(std::span<const Batch> batches);

struct EncoderDims {
  std::size_t word = 200;
  std::size_t pos = 50;
  std::size_t char_embedding = 32;
  std::size_t char_hidden = 10;  // per direction
  std::size_t output() const { return word + pos + 2 * char_hidden; }
};

/// Weights of one LSTM direction; see num::lstm for the layout.
struct LstmWeights {
  num::Parameter w_ih;
  num::Parameter w_hh;
  num::Parameter bias;

  static LstmWeights create(const std::string& prefix, std::size_t input, std::size_t hidden,
                            std::mt19937_64& rng);
  std::size_t hidden() const { return w_hh.value.rows(); }
  num::Var run(num::Graph& g, num::Var inputs, bool reverse) const;
  void collect(std::vector<num::Parameter*>& out);
};

/// Token features: word vector, POS embedding and the final states of a
/// character Bi-LSTM, concatenated per token.
class TokenEncoder {
 public:
  static constexpr std::size_t kCharVocab = 256;  // UTF-8 bytes

  TokenEncoder(std::shared_ptr<const WordEmbeddingTable> words, Vocabulary pos_vocab,
               EncoderDims dims, bool train_words, std::mt19937_64& rng);

  const EncoderDims& dims() const { return dims_; }
  std::size_t output_dim() const { return dims_.output(); }

  /// |tokens| x output_dim()
  num::Var encode(num::Graph& g, const Sentence& sentence) const;
  num::Var encode_chars(num::Graph& g, std::string_view surface) const;

  void collect(std::vector<num::Parameter*>& out);

 private:
  std::shared_ptr<const WordEmbeddingTable> words_;
  std::optional<num::Parameter> word_copy_;  // only when word vectors are finetuned
  Vocabulary pos_vocab_;
  EncoderDims dims_;
  num::Parameter pos_table_;
  num::Parameter char_table_;
  LstmWeights char_fwd_;
  LstmWeights char_bwd_;
};

}  // namespace streamtag

#endif  // STREAMTAG_ENCODER_HPP_
