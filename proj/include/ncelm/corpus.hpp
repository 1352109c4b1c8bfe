#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ncelm/types.hpp"

namespace ncelm {

inline constexpr std::string_view kUnknownWord = "<unk>";
inline constexpr std::string_view kOutOfSentence = "<s/>";

// Dense word-id space. Ids 0 and 1 are always the unknown-word and
// out-of-sentence tokens; the remaining ids follow descending training
// frequency with ties broken by first occurrence.
class Vocabulary {
 public:
  static constexpr WordId kUnkId = 0;
  static constexpr WordId kOosId = 1;

  Vocabulary();

  // Appends a word. Throws ConfigError on duplicates.
  WordId add(std::string word, std::uint64_t count);

  std::size_t size() const { return words_.size(); }
  WordId unk_id() const { return kUnkId; }
  WordId oos_id() const { return kOosId; }

  const std::string& word(WordId id) const { return words_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  void set_count(WordId id, std::uint64_t count) { counts_.at(id) = count; }

  // Out-of-vocabulary words map to unk_id().
  WordId lookup(std::string_view word) const;
  bool contains(std::string_view word) const;

  // "word<TAB>count" per line in id order.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
};

// Splits on ASCII whitespace; ASCII letters are lowercased when requested and
// other bytes are copied through. Throws IngestionError on invalid UTF-8,
// naming the offending byte offset.
std::vector<std::string> tokenize_line(std::string_view text, bool lowercase);

// Throws ConfigError when min_count < 1 or the stream is empty. Tokens
// spelled like the reserved unknown-word token are counted towards unk.
Vocabulary build_vocab(std::span<const std::string> tokens, std::uint64_t min_count,
                       std::optional<std::size_t> max_size = std::nullopt);

std::vector<WordId> encode(const Vocabulary& vocab, std::span<const std::string> tokens);

enum class BoundaryMode { kOosPadding, kStream };

// Which neighbours of a target form its context.
//   kPreceding:   the context_size words before the target (oldest first).
//   kSurrounding: context_size/2 words before, then context_size/2 after.
enum class ContextLayout { kPreceding, kSurrounding };

struct TrainingExample {
  Context context;
  WordId target = 0;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

// Flat, immutable-after-construction collection of (context, target) pairs.
// Minibatches are themselves Datasets.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t context_size, BoundaryMode mode = BoundaryMode::kOosPadding,
                   ContextLayout layout = ContextLayout::kPreceding);

  void add(std::span<const WordId> context, WordId target);
  void add(const TrainingExample& example) { add(example.context, example.target); }

  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  std::size_t context_size() const { return context_size_; }
  BoundaryMode boundary_mode() const { return boundary_mode_; }
  ContextLayout layout() const { return layout_; }

  std::span<const WordId> context(std::size_t i) const {
    return {contexts_.data() + i * context_size_, context_size_};
  }
  WordId target(std::size_t i) const { return targets_[i]; }
  const std::vector<WordId>& targets() const { return targets_; }
  TrainingExample example(std::size_t i) const;

  Dataset gather(std::span<const std::size_t> rows) const;
  Dataset slice(std::size_t begin, std::size_t end) const;

  // Largest id referenced anywhere, or nullopt when empty.
  std::optional<WordId> max_id() const;

 private:
  std::size_t context_size_ = 0;
  BoundaryMode boundary_mode_ = BoundaryMode::kOosPadding;
  ContextLayout layout_ = ContextLayout::kPreceding;
  std::vector<WordId> contexts_;
  std::vector<WordId> targets_;
};

// One example per input token in kOosPadding mode; in kStream mode sentences
// are concatenated and only positions with a full in-stream context count.
Dataset extract_pairs(std::span<const std::vector<WordId>> sentences, std::size_t context_size,
                      BoundaryMode mode, WordId oos_id = Vocabulary::kOosId);

// Bidirectional layout: context is the `half_width` words before the target
// followed by the `half_width` words after it, oos-padded at both ends.
Dataset extract_surrounding_pairs(std::span<const std::vector<WordId>> sentences,
                                  std::size_t half_width, WordId oos_id = Vocabulary::kOosId);

std::vector<std::uint64_t> unigram_counts(const Dataset& dataset, std::size_t vocab_size);
std::vector<std::uint64_t> unigram_counts(std::span<const WordId> tokens, std::size_t vocab_size);

// Reads one tokenized sentence per non-empty line.
std::vector<std::vector<std::string>> read_sentences(std::istream& in, bool lowercase);
std::vector<std::vector<std::string>> read_sentences_file(const std::string& path, bool lowercase);
std::vector<std::vector<WordId>> encode_sentences(const Vocabulary& vocab,
                                                  const std::vector<std::vector<std::string>>& sentences);

}  // namespace ncelm
