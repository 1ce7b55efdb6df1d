#ifndef STREAMTAG_CORPUS_HPP_
#define STREAMTAG_CORPUS_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace streamtag {

struct Token {
  std::string surface;
  std::string pos;
  std::string lemma;
  friend bool operator==(const Token&, const Token&) = default;
};

enum class TagKind { O, B, I };

struct TriggerTag {
  TagKind kind = TagKind::O;
  std::string event_type;  // empty iff kind == O

  static TriggerTag outside() { return {}; }
  static TriggerTag begin(std::string type) { return {TagKind::B, std::move(type)}; }
  static TriggerTag inside(std::string type) { return {TagKind::I, std::move(type)}; }

  /// Parses "O", "B-<type>" or "I-<type>"; the type may itself contain '-'.
  static std::optional<TriggerTag> parse(std::string_view text);
  std::string str() const;
  bool is_trigger() const { return kind != TagKind::O; }

  friend bool operator==(const TriggerTag&, const TriggerTag&) = default;
};

enum class Split { Train, Dev, Test };
std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view s);

struct Sentence {
  std::vector<Token> tokens;
  std::vector<TriggerTag> tags;
  std::string doc_id;
  std::string batch_name;
  int batch_ordinal = 1;
  int index_in_batch = 0;  // position among all of the batch's sentences, file order
  Split split = Split::Train;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Batch {
  int ordinal = 1;
  std::string name;
  std::vector<Sentence> sentences;

  std::vector<const Sentence*> of_split(Split s) const;
  friend bool operator==(const Batch&, const Batch&) = default;
};

class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct BioViolation {
  std::size_t index = 0;
  std::string previous;  // tag before `index`, or "<start>"
  std::string actual;    // offending tag
  std::string message() const;
};

/// First position where an I-x is not preceded by B-x or I-x.
std::optional<BioViolation> validate_bio(std::span<const TriggerTag> tags);
std::optional<BioViolation> validate_bio(const Sentence& sentence);

/// Reads the tab-separated corpus format. Batch ordinals follow first
/// appearance unless headers carry an explicit `ordinal=`. Returned batches are
/// sorted by ordinal.
std::vector<Batch> parse_corpus(std::istream& in);
std::vector<Batch> parse_corpus_string(std::string_view text);
std::vector<Batch> load_corpus(const std::filesystem::path& path);

std::string serialize_corpus(std::span<const Batch> batches);
void save_corpus(const std::filesystem::path& path, std::span<const Batch> batches);

/// Label inventory: O is id 0, then B-t = 1 + 2k and I-t = 2 + 2k for the k-th type.
class TagSet {
 public:
  TagSet() = default;
  explicit TagSet(std::vector<std::string> event_types);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_event_types() const { return event_types_.size(); }
  const std::vector<std::string>& event_types() const { return event_types_; }
  const std::vector<std::string>& labels() const { return labels_; }

  int id(const TriggerTag& tag) const;
  int id(std::string_view label) const;
  TriggerTag tag(int id) const;
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::optional<int> type_index(std::string_view event_type) const;

  std::vector<int> encode(std::span<const TriggerTag> tags) const;
  std::vector<TriggerTag> decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> event_types_;
  std::vector<std::string> labels_;
  std::map<std::string, int, std::less<>> label_to_id_;
};

TagSet build_tagset(std::vector<std::string> event_types);

/// Sorted event types observed anywhere in the corpus.
std::vector<std::string> collect_event_types(std::span<const Batch> batches);

struct BatchStats {
  std::string name;
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::size_t triggers = 0;  // trigger spans, not tokens
};
std::vector<BatchStats> corpus_stats(std::span<const Batch> batches);

/// All sentences of one split across the given batches, in batch order.
std::vector<const Sentence*> collect_split(std::span<const Batch> batches, Split s);

}  // namespace streamtag

#endif  // STREAMTAG_CORPUS_HPP_
