#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/error.hpp"

namespace ncelm {
namespace {

std::vector<std::string> repeat(const std::vector<std::pair<std::string, int>>& counts) {
  std::vector<std::string> out;
  for (const auto& [word, n] : counts) {
    for (int i = 0; i < n; ++i) out.push_back(word);
  }
  return out;
}

TEST(TokenizeTest, LowercasesAndSplits) {
  EXPECT_EQ(tokenize_line("The cat sat", true), (std::vector<std::string>{"the", "cat", "sat"}));
  EXPECT_TRUE(tokenize_line("", true).empty());
  EXPECT_EQ(tokenize_line("A  B", false), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(tokenize_line(" \tx\r\n", false), (std::vector<std::string>{"x"}));
}

TEST(TokenizeTest, KeepsMultibyteCharacters) {
  EXPECT_EQ(tokenize_line("Caf\xc3\xa9 ok", true), (std::vector<std::string>{"caf\xc3\xa9", "ok"}));
}

TEST(TokenizeTest, InvalidUtf8NamesOffset) {
  try {
    tokenize_line("ab \xff", false);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.byte_offset(), 3u);
  }
  // Truncated two-byte sequence.
  EXPECT_THROW(tokenize_line("x\xc3", false), IngestionError);
}

TEST(VocabularyTest, ThresholdMapsRareWordsToUnk) {
  const auto tokens = repeat({{"a", 6}, {"b", 5}, {"c", 4}});
  const Vocabulary vocab = build_vocab(tokens, 5);
  EXPECT_EQ(vocab.size(), 4u);
  EXPECT_TRUE(vocab.contains("a"));
  EXPECT_TRUE(vocab.contains("b"));
  EXPECT_FALSE(vocab.contains("c"));
  EXPECT_EQ(vocab.lookup("c"), vocab.unk_id());
  EXPECT_EQ(vocab.count(vocab.unk_id()), 4u);
}

TEST(VocabularyTest, SingleWord) {
  const Vocabulary vocab = build_vocab(repeat({{"a", 3}}), 1);
  EXPECT_EQ(vocab.size(), 3u);
  EXPECT_EQ(vocab.lookup("a"), 2u);
  EXPECT_NE(vocab.unk_id(), vocab.oos_id());
}

TEST(VocabularyTest, MaxSizeKeepsFirstSeenOnTies) {
  const auto tokens = std::vector<std::string>{"a", "b", "c", "c", "b", "a"};
  const Vocabulary vocab = build_vocab(tokens, 1, 2);
  EXPECT_EQ(vocab.size(), 4u);
  EXPECT_EQ(vocab.lookup("a"), 2u);
  EXPECT_EQ(vocab.lookup("b"), 3u);
  EXPECT_EQ(vocab.lookup("c"), vocab.unk_id());
}

TEST(VocabularyTest, IdsFollowFrequency) {
  const Vocabulary vocab = build_vocab(repeat({{"x", 1}, {"y", 3}, {"z", 2}}), 1);
  EXPECT_EQ(vocab.word(2), "y");
  EXPECT_EQ(vocab.word(3), "z");
  EXPECT_EQ(vocab.word(4), "x");
}

TEST(VocabularyTest, RejectsBadArguments) {
  EXPECT_THROW(build_vocab(repeat({{"a", 1}}), 0), ConfigError);
  EXPECT_THROW(build_vocab(std::vector<std::string>{}, 1), ConfigError);
}

TEST(VocabularyTest, RoundTrip) {
  const Vocabulary vocab = build_vocab(repeat({{"a", 3}, {"b", 1}}), 1);
  std::stringstream stream;
  vocab.write(stream);
  EXPECT_EQ(Vocabulary::read(stream), vocab);
}

TEST(VocabularyTest, MalformedFileIsRejected) {
  std::stringstream stream("<unk>\t0\n<s/>\t0\nno-tab-here\n");
  EXPECT_THROW(Vocabulary::read(stream), FormatError);
}

TEST(EncodeTest, UnknownWordsMapToUnk) {
  const Vocabulary vocab = build_vocab(std::vector<std::string>{"the", "a"}, 1);
  EXPECT_EQ(encode(vocab, std::vector<std::string>{"the", "qzx"}),
            (std::vector<WordId>{vocab.lookup("the"), vocab.unk_id()}));
  EXPECT_TRUE(encode(vocab, std::vector<std::string>{}).empty());
  const auto a = vocab.lookup("a");
  EXPECT_EQ(encode(vocab, std::vector<std::string>{"a", "a"}), (std::vector<WordId>{a, a}));
}

constexpr WordId kOos = Vocabulary::kOosId;

TEST(ExtractTest, OosPaddingTwoWords) {
  const std::vector<std::vector<WordId>> sentences{{10, 11}};
  const Dataset data = extract_pairs(sentences, 2, BoundaryMode::kOosPadding);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data.example(0), (TrainingExample{{kOos, kOos}, 10}));
  EXPECT_EQ(data.example(1), (TrainingExample{{kOos, 10}, 11}));
}

TEST(ExtractTest, OosPaddingSingleWord) {
  const std::vector<std::vector<WordId>> sentences{{10}};
  const Dataset data = extract_pairs(sentences, 1, BoundaryMode::kOosPadding);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data.example(0), (TrainingExample{{kOos}, 10}));
}

TEST(ExtractTest, StreamModeNeedsFullContext) {
  const std::vector<std::vector<WordId>> sentences{{10, 11}, {12}};
  const Dataset data = extract_pairs(sentences, 2, BoundaryMode::kStream);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data.example(0), (TrainingExample{{10, 11}, 12}));
}

TEST(ExtractTest, EmptyInputGivesEmptyDataset) {
  const std::vector<std::vector<WordId>> none;
  EXPECT_TRUE(extract_pairs(none, 3, BoundaryMode::kOosPadding).empty());
  EXPECT_EQ(extract_pairs(none, 3, BoundaryMode::kOosPadding).context_size(), 3u);
}

TEST(ExtractTest, SurroundingLayout) {
  const std::vector<std::vector<WordId>> sentences{{10, 11, 12}};
  const Dataset data = extract_surrounding_pairs(sentences, 1);
  ASSERT_EQ(data.size(), 3u);
  EXPECT_EQ(data.context_size(), 2u);
  EXPECT_EQ(data.example(0), (TrainingExample{{kOos, 11}, 10}));
  EXPECT_EQ(data.example(1), (TrainingExample{{10, 12}, 11}));
  EXPECT_EQ(data.example(2), (TrainingExample{{11, kOos}, 12}));
}

TEST(DatasetTest, GatherAndSlice) {
  Dataset data(1);
  for (WordId w = 0; w < 5; ++w) data.add(std::vector<WordId>{w}, w + 10);
  const std::vector<std::size_t> rows{4, 1};
  const Dataset picked = data.gather(rows);
  EXPECT_EQ(picked.example(0), (TrainingExample{{4}, 14}));
  EXPECT_EQ(picked.example(1), (TrainingExample{{1}, 11}));
  EXPECT_EQ(data.slice(1, 3).size(), 2u);
  EXPECT_EQ(*data.max_id(), 14u);
  EXPECT_THROW(data.add(std::vector<WordId>{1, 2}, 3), ConfigError);
}

TEST(UnigramTest, CountsTargets) {
  Dataset data(1);
  data.add(std::vector<WordId>{1}, 2);
  data.add(std::vector<WordId>{1}, 2);
  data.add(std::vector<WordId>{1}, 3);
  const auto counts = unigram_counts(data, 5);
  EXPECT_EQ(counts, (std::vector<std::uint64_t>{0, 0, 2, 1, 0}));
  EXPECT_EQ(unigram_counts(Dataset(1), 3), (std::vector<std::uint64_t>{0, 0, 0}));
  const std::vector<WordId> tokens{4, 4, 0};
  EXPECT_EQ(unigram_counts(tokens, 5), (std::vector<std::uint64_t>{1, 0, 0, 0, 2}));
}

TEST(ReadSentencesTest, SkipsBlankLines) {
  std::stringstream in("The cat\n\n  \nsat down\n");
  const auto sentences = read_sentences(in, true);
  ASSERT_EQ(sentences.size(), 2u);
  EXPECT_EQ(sentences[0], (std::vector<std::string>{"the", "cat"}));
}

TEST(ReadSentencesTest, ReportsOffsetWithinStream) {
  std::stringstream in("ok\nbad \xfe\n");
  try {
    read_sentences(in, false);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.byte_offset(), 7u);
  }
}

}  // namespace
}  // namespace ncelm
