#include "ncelm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ncelm/error.hpp"

namespace ncelm {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Returns the offset of the first byte that starts an invalid sequence, or
// npos when the whole string is well-formed UTF-8.
std::size_t find_invalid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return i;
    }
    if (i + len > n) return i;
    for (std::size_t j = 1; j < len; ++j) {
      if ((s[i + j] & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (s[i + j] & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return i;
    }
    i += len;
  }
  return std::string_view::npos;
}

}  // namespace

Vocabulary::Vocabulary() {
  add(std::string(kUnknownWord), 0);
  add(std::string(kOutOfSentence), 0);
}

WordId Vocabulary::add(std::string word, std::uint64_t count) {
  if (index_.contains(word)) {
    throw ConfigError("duplicate vocabulary entry '" + word + "'");
  }
  const auto id = static_cast<WordId>(words_.size());
  index_.emplace(word, id);
  words_.push_back(std::move(word));
  counts_.push_back(count);
  return id;
}

WordId Vocabulary::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t id = 0; id < words_.size(); ++id) {
    out << words_[id] << '\t' << counts_[id] << '\n';
  }
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + " is not word<TAB>count");
    }
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + " has a bad count");
    }
    entries.emplace_back(line.substr(0, tab), count);
  }
  if (entries.size() < 2 || entries[0].first != kUnknownWord ||
      entries[1].first != kOutOfSentence) {
    throw FormatError("vocabulary must start with the <unk> and <s/> entries");
  }
  Vocabulary vocab;
  vocab.counts_[kUnkId] = entries[0].second;
  vocab.counts_[kOosId] = entries[1].second;
  for (std::size_t i = 2; i < entries.size(); ++i) {
    vocab.add(std::move(entries[i].first), entries[i].second);
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw Error("failed writing '" + path + "'");
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocabulary '" + path + "'");
  return read(in);
}

std::vector<std::string> tokenize_line(std::string_view text, bool lowercase) {
  if (const auto bad = find_invalid_utf8(text); bad != std::string_view::npos) {
    throw IngestionError("malformed UTF-8", bad);
  }
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string token(text.substr(start, i - start));
      if (lowercase) {
        for (char& ch : token) {
          if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
        }
      }
      tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

Vocabulary build_vocab(std::span<const std::string> tokens, std::uint64_t min_count,
                       std::optional<std::size_t> max_size) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  if (tokens.empty()) throw ConfigError("cannot build a vocabulary from an empty token stream");

  struct Entry {
    std::uint64_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string_view, Entry> freq;
  std::vector<std::string_view> order;
  std::uint64_t unk_count = 0;
  std::uint64_t oos_count = 0;
  for (const auto& token : tokens) {
    if (token == kUnknownWord) {
      ++unk_count;
      continue;
    }
    if (token == kOutOfSentence) {
      ++oos_count;
      continue;
    }
    auto [it, inserted] = freq.try_emplace(token, Entry{0, order.size()});
    if (inserted) order.push_back(token);
    ++it->second.count;
  }

  std::stable_sort(order.begin(), order.end(), [&](std::string_view a, std::string_view b) {
    return freq[a].count > freq[b].count;
  });

  Vocabulary vocab;
  std::size_t kept = 0;
  for (auto word : order) {
    const auto count = freq[word].count;
    if (count >= min_count && (!max_size || kept < *max_size)) {
      vocab.add(std::string(word), count);
      ++kept;
    } else {
      unk_count += count;
    }
  }
  vocab.set_count(Vocabulary::kUnkId, unk_count);
  vocab.set_count(Vocabulary::kOosId, oos_count);
  return vocab;
}

std::vector<WordId> encode(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(vocab.lookup(token));
  return ids;
}

Dataset::Dataset(std::size_t context_size, BoundaryMode mode, ContextLayout layout)
    : context_size_(context_size), boundary_mode_(mode), layout_(layout) {}

void Dataset::add(std::span<const WordId> context, WordId target) {
  if (context.size() != context_size_) {
    throw ConfigError("context length " + std::to_string(context.size()) +
                      " does not match dataset context size " + std::to_string(context_size_));
  }
  contexts_.insert(contexts_.end(), context.begin(), context.end());
  targets_.push_back(target);
}

TrainingExample Dataset::example(std::size_t i) const {
  auto ctx = context(i);
  return TrainingExample{Context(ctx.begin(), ctx.end()), targets_[i]};
}

Dataset Dataset::gather(std::span<const std::size_t> rows) const {
  Dataset out(context_size_, boundary_mode_, layout_);
  out.contexts_.reserve(rows.size() * context_size_);
  out.targets_.reserve(rows.size());
  for (auto row : rows) {
    auto ctx = context(row);
    out.contexts_.insert(out.contexts_.end(), ctx.begin(), ctx.end());
    out.targets_.push_back(targets_[row]);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset out(context_size_, boundary_mode_, layout_);
  end = std::min(end, size());
  if (begin >= end) return out;
  out.contexts_.assign(contexts_.begin() + static_cast<std::ptrdiff_t>(begin * context_size_),
                       contexts_.begin() + static_cast<std::ptrdiff_t>(end * context_size_));
  out.targets_.assign(targets_.begin() + static_cast<std::ptrdiff_t>(begin),
                      targets_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::optional<WordId> Dataset::max_id() const {
  if (targets_.empty()) return std::nullopt;
  WordId m = *std::max_element(targets_.begin(), targets_.end());
  if (!contexts_.empty()) m = std::max(m, *std::max_element(contexts_.begin(), contexts_.end()));
  return m;
}

Dataset extract_pairs(std::span<const std::vector<WordId>> sentences, std::size_t context_size,
                      BoundaryMode mode, WordId oos_id) {
  if (context_size < 1) throw ConfigError("context_size must be at least 1");
  Dataset data(context_size, mode, ContextLayout::kPreceding);
  Context ctx(context_size);
  if (mode == BoundaryMode::kOosPadding) {
    for (const auto& sentence : sentences) {
      for (std::size_t t = 0; t < sentence.size(); ++t) {
        for (std::size_t i = 0; i < context_size; ++i) {
          // Position i holds the word context_size - i places before t.
          const std::size_t back = context_size - i;
          ctx[i] = t >= back ? sentence[t - back] : oos_id;
        }
        data.add(ctx, sentence[t]);
      }
    }
  } else {
    std::vector<WordId> stream;
    for (const auto& sentence : sentences) stream.insert(stream.end(), sentence.begin(), sentence.end());
    for (std::size_t t = context_size; t < stream.size(); ++t) {
      std::copy(stream.begin() + static_cast<std::ptrdiff_t>(t - context_size),
                stream.begin() + static_cast<std::ptrdiff_t>(t), ctx.begin());
      data.add(ctx, stream[t]);
    }
  }
  return data;
}

Dataset extract_surrounding_pairs(std::span<const std::vector<WordId>> sentences,
                                  std::size_t half_width, WordId oos_id) {
  if (half_width < 1) throw ConfigError("half_width must be at least 1");
  Dataset data(2 * half_width, BoundaryMode::kOosPadding, ContextLayout::kSurrounding);
  Context ctx(2 * half_width);
  for (const auto& sentence : sentences) {
    const std::size_t n = sentence.size();
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t i = 0; i < half_width; ++i) {
        const std::size_t back = half_width - i;
        ctx[i] = t >= back ? sentence[t - back] : oos_id;
        const std::size_t ahead = t + 1 + i;
        ctx[half_width + i] = ahead < n ? sentence[ahead] : oos_id;
      }
      data.add(ctx, sentence[t]);
    }
  }
  return data;
}

std::vector<std::uint64_t> unigram_counts(const Dataset& dataset, std::size_t vocab_size) {
  return unigram_counts(std::span<const WordId>(dataset.targets()), vocab_size);
}

std::vector<std::uint64_t> unigram_counts(std::span<const WordId> tokens, std::size_t vocab_size) {
  std::vector<std::uint64_t> counts(vocab_size, 0);
  for (WordId id : tokens) counts.at(id) += 1;
  return counts;
}

std::vector<std::vector<std::string>> read_sentences(std::istream& in, bool lowercase) {
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    try {
      auto tokens = tokenize_line(line, lowercase);
      if (!tokens.empty()) sentences.push_back(std::move(tokens));
    } catch (const IngestionError& e) {
      throw IngestionError("malformed UTF-8", offset + e.byte_offset());
    }
    offset += line.size() + 1;
  }
  return sentences;
}

std::vector<std::vector<std::string>> read_sentences_file(const std::string& path, bool lowercase) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus '" + path + "'");
  return read_sentences(in, lowercase);
}

std::vector<std::vector<WordId>> encode_sentences(
    const Vocabulary& vocab, const std::vector<std::vector<std::string>>& sentences) {
  std::vector<std::vector<WordId>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode(vocab, s));
  return out;
}

}  // namespace ncelm
