#include "ncelm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "ncelm/error.hpp"

namespace ncelm {

template <typename Real>
double perplexity(const LblParams<Real>& params, const Dataset& dataset) {
  if (dataset.empty()) throw ConfigError("perplexity of an empty dataset is undefined");
  if (dataset.context_size() != params.context_size()) {
    throw ConfigError("dataset context size " + std::to_string(dataset.context_size()) +
                      " does not match model context size " + std::to_string(params.context_size()));
  }
  double total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const WordId w = dataset.target(i);
    if (w >= params.vocab_size()) throw std::out_of_range("target id out of range");
    total += log_softmax(params, dataset.context(i))[w];
  }
  return std::exp(-total / static_cast<double>(dataset.size()));
}

void CompletionProblem::validate() const {
  if (blank >= sentence.size()) throw ConfigError("blank position outside the sentence");
  std::set<WordId> distinct(candidates.begin(), candidates.end());
  if (distinct.size() != candidates.size()) throw ConfigError("completion candidates must be distinct");
  if (answer && *answer >= kNumCandidates) throw ConfigError("answer index must be in [0, 5)");
}

template <typename Real>
double SentenceScorer<Real>::unidirectional(std::span<const WordId> sentence, std::size_t blank,
                                            WordId candidate) {
  if (blank >= sentence.size()) throw ConfigError("blank position outside the sentence");
  const std::size_t n = params_.context_size();
  const WordId oos = Vocabulary::kOosId;
  auto word_at = [&](std::size_t t) { return t == blank ? candidate : sentence[t]; };
  Context ctx(n);
  double total = 0;
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t back = n - i;
      ctx[i] = t >= back ? word_at(t - back) : oos;
    }
    total += log_softmax(params_, ctx)[word_at(t)];
    ++applications_;
  }
  return total;
}

template <typename Real>
double SentenceScorer<Real>::bidirectional(std::span<const WordId> sentence, std::size_t blank,
                                           WordId candidate) {
  if (blank >= sentence.size()) throw ConfigError("blank position outside the sentence");
  const std::size_t n = params_.context_size();
  if (n % 2 != 0) {
    throw ConfigError("bidirectional scoring needs an even context size, model has " + std::to_string(n));
  }
  const std::size_t half = n / 2;
  const WordId oos = Vocabulary::kOosId;
  Context ctx(n);
  for (std::size_t i = 0; i < half; ++i) {
    const std::size_t back = half - i;
    ctx[i] = blank >= back ? sentence[blank - back] : oos;
    const std::size_t ahead = blank + 1 + i;
    ctx[half + i] = ahead < sentence.size() ? sentence[ahead] : oos;
  }
  ++applications_;
  return log_softmax(params_, ctx)[candidate];
}

template <typename Real>
double score_sentence_unidirectional(const LblParams<Real>& params, std::span<const WordId> sentence,
                                     std::size_t blank, WordId candidate) {
  return SentenceScorer<Real>(params).unidirectional(sentence, blank, candidate);
}

template <typename Real>
double score_sentence_bidirectional(const LblParams<Real>& params, std::span<const WordId> sentence,
                                    std::size_t blank, WordId candidate) {
  return SentenceScorer<Real>(params).bidirectional(sentence, blank, candidate);
}

std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

template <typename Real>
std::size_t answer_completion(const LblParams<Real>& params, const CompletionProblem& problem,
                              CompletionMode mode) {
  problem.validate();
  SentenceScorer<Real> scorer(params);
  std::array<double, kNumCandidates> scores{};
  for (std::size_t i = 0; i < kNumCandidates; ++i) {
    scores[i] = scorer.score(problem.sentence, problem.blank, problem.candidates[i], mode);
  }
  return argmax_first(scores);
}

template <typename Real>
CompletionReport evaluate_completion(const LblParams<Real>& params, std::span<const CompletionProblem> problems,
                                     CompletionMode mode) {
  CompletionReport report;
  for (const auto& problem : problems) {
    const auto choice = answer_completion(params, problem, mode);
    report.choices.push_back(choice);
    if (problem.answer) {
      ++report.answered;
      if (*problem.answer == choice) ++report.correct;
    }
  }
  return report;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::vector<CompletionProblem> read_completion_problems(std::istream& in, const Vocabulary& vocab,
                                                        bool lowercase) {
  std::vector<CompletionProblem> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError("completion problem line " + std::to_string(line_no) + ": " + why);
    };
    const auto fields = split(line, '\t');
    if (fields.size() != 2 && fields.size() != 3) fail("expected 2 or 3 tab-separated fields");

    std::vector<std::string> tokens;
    try {
      tokens = tokenize_line(fields[0], lowercase);
    } catch (const IngestionError& e) {
      fail(e.what());
    }
    CompletionProblem problem;
    std::size_t blanks = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t] == "___") {
        problem.blank = t;
        ++blanks;
        problem.sentence.push_back(Vocabulary::kUnkId);
      } else {
        problem.sentence.push_back(vocab.lookup(tokens[t]));
      }
    }
    if (blanks != 1) fail("sentence must contain exactly one ___ blank");

    const auto words = split(fields[1], '|');
    if (words.size() != kNumCandidates) fail("expected 5 candidates separated by |");
    for (std::size_t i = 0; i < kNumCandidates; ++i) {
      auto cand = tokenize_line(words[i], lowercase);
      if (cand.size() != 1) fail("candidate " + std::to_string(i) + " must be a single token");
      problem.candidates[i] = vocab.lookup(cand.front());
    }
    if (fields.size() == 3) {
      const auto& a = fields[2];
      if (a.size() != 1 || a[0] < '0' || a[0] > '4') fail("answer must be an index in [0, 5)");
      problem.answer = static_cast<std::size_t>(a[0] - '0');
    }
    try {
      problem.validate();
    } catch (const ConfigError& e) {
      fail(e.what());
    }
    problems.push_back(std::move(problem));
  }
  return problems;
}

void write_completion_problems(std::ostream& out, std::span<const CompletionProblem> problems,
                               const Vocabulary& vocab) {
  for (const auto& p : problems) {
    for (std::size_t t = 0; t < p.sentence.size(); ++t) {
      if (t) out << ' ';
      out << (t == p.blank ? std::string("___") : vocab.word(p.sentence[t]));
    }
    out << '\t';
    for (std::size_t i = 0; i < kNumCandidates; ++i) {
      if (i) out << '|';
      out << vocab.word(p.candidates[i]);
    }
    if (p.answer) out << '\t' << *p.answer;
    out << '\n';
  }
}

double predicted_speedup(double c, double d, double V, double k, MatrixMode mode) {
  if (!(c > 0 && d > 0 && V > 0 && k > 0)) throw ConfigError("speedup inputs must be positive");
  if (mode == MatrixMode::kFull) return (c * d + V) / (c * d + k);
  return (c + V) / (c + k);
}

#define NCELM_INSTANTIATE(Real)                                                                   \
  template double perplexity(const LblParams<Real>&, const Dataset&);                             \
  template class SentenceScorer<Real>;                                                            \
  template double score_sentence_unidirectional(const LblParams<Real>&, std::span<const WordId>,  \
                                                std::size_t, WordId);                             \
  template double score_sentence_bidirectional(const LblParams<Real>&, std::span<const WordId>,   \
                                               std::size_t, WordId);                              \
  template std::size_t answer_completion(const LblParams<Real>&, const CompletionProblem&,        \
                                         CompletionMode);                                         \
  template CompletionReport evaluate_completion(const LblParams<Real>&,                           \
                                                std::span<const CompletionProblem>, CompletionMode);

NCELM_INSTANTIATE(float)
NCELM_INSTANTIATE(double)
#undef NCELM_INSTANTIATE

}  // namespace ncelm
