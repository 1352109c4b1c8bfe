#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/model.hpp"

namespace ncelm {

// exp(-(1/N) sum log P(w|h)) with explicitly normalized probabilities.
// Learned normalizers are never consulted.
template <typename Real>
double perplexity(const LblParams<Real>& params, const Dataset& dataset);

inline constexpr std::size_t kNumCandidates = 5;

struct CompletionProblem {
  std::vector<WordId> sentence;  // the blank holds an arbitrary id
  std::size_t blank = 0;
  std::array<WordId, kNumCandidates> candidates{};
  std::optional<std::size_t> answer;

  // Throws ConfigError when the blank is out of range, candidates repeat or
  // the answer index is not in [0, 5).
  void validate() const;
};

enum class CompletionMode { kUnidirectional, kBidirectional };

// Scores completed sentences against one parameter snapshot and counts how
// many conditional distributions it evaluated.
template <typename Real>
class SentenceScorer {
 public:
  explicit SentenceScorer(const LblParams<Real>& params) : params_(params) {}

  // Sum over every position of log P(w_t | preceding words), oos-padded.
  double unidirectional(std::span<const WordId> sentence, std::size_t blank, WordId candidate);

  // log P(candidate | c words before, c words after) for a model trained with
  // the surrounding-context layout. Throws ConfigError if the model's context
  // size is odd.
  double bidirectional(std::span<const WordId> sentence, std::size_t blank, WordId candidate);

  double score(std::span<const WordId> sentence, std::size_t blank, WordId candidate, CompletionMode mode) {
    return mode == CompletionMode::kUnidirectional ? unidirectional(sentence, blank, candidate)
                                                   : bidirectional(sentence, blank, candidate);
  }

  std::size_t model_applications() const { return applications_; }

 private:
  const LblParams<Real>& params_;
  std::size_t applications_ = 0;
};

template <typename Real>
double score_sentence_unidirectional(const LblParams<Real>& params, std::span<const WordId> sentence,
                                     std::size_t blank, WordId candidate);
template <typename Real>
double score_sentence_bidirectional(const LblParams<Real>& params, std::span<const WordId> sentence,
                                    std::size_t blank, WordId candidate);

// Index of the largest score; ties go to the lowest index.
std::size_t argmax_first(std::span<const double> scores);

template <typename Real>
std::size_t answer_completion(const LblParams<Real>& params, const CompletionProblem& problem,
                              CompletionMode mode);

struct CompletionReport {
  std::vector<std::size_t> choices;
  std::size_t answered = 0;  // problems that carry a correct index
  std::size_t correct = 0;
  double accuracy() const { return answered ? static_cast<double>(correct) / static_cast<double>(answered) : 0.0; }
};

template <typename Real>
CompletionReport evaluate_completion(const LblParams<Real>& params, std::span<const CompletionProblem> problems,
                                     CompletionMode mode);

// One problem per line:
//   tokenized sentence with the blank written as ___ <TAB> c1|c2|c3|c4|c5 [<TAB> answer]
// Throws FormatError naming the line on malformed input.
std::vector<CompletionProblem> read_completion_problems(std::istream& in, const Vocabulary& vocab,
                                                        bool lowercase);
void write_completion_problems(std::ostream& out, std::span<const CompletionProblem> problems,
                               const Vocabulary& vocab);

// Predicted per-update cost ratio of exact ML to sampling with k samples:
// (cd + V) / (cd + k) for full context matrices, (c + V) / (c + k) for
// diagonal ones.
double predicted_speedup(double c, double d, double V, double k, MatrixMode mode);

}  // namespace ncelm
