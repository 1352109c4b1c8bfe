#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/eval.hpp"
#include "ncelm/model.hpp"

namespace ncelm {

// Corpora sampled from a known log-bilinear model, for experiments where the
// true conditional distributions are available.
struct GroundTruthOptions {
  std::size_t vocab_size = 2000;  // including the two reserved ids
  std::size_t dim = 16;
  std::size_t context_size = 2;
  MatrixMode matrix_mode = MatrixMode::kFull;
  double feature_scale = 0.5;  // std-dev of R and Q entries
  double zipf_exponent = 1.0;  // biases are -exponent * log(rank + 1)
  std::uint64_t seed = 1;
};

// Reserved ids get a bias far below everything else and are never generated.
LblParams<double> make_ground_truth(const GroundTruthOptions& options);

struct SampleOptions {
  std::size_t num_tokens = 100000;
  std::size_t min_length = 8;
  std::size_t max_length = 24;
  std::uint64_t seed = 2;
};

// Sentences drawn left to right with oos-padded contexts.
std::vector<std::vector<WordId>> sample_sentences(const LblParams<double>& truth, const SampleOptions& options);

// A vocabulary whose word for id i is "w<i>" (ids 0 and 1 keep the reserved
// spellings) with the given counts.
Vocabulary synthetic_vocabulary(std::size_t vocab_size, const std::vector<std::uint64_t>& counts);

// One problem per sentence: a uniformly chosen blank, the true word plus four
// distinct distractors drawn from `distractor_probs`, shuffled.
std::vector<CompletionProblem> make_completion_problems(const std::vector<std::vector<WordId>>& sentences,
                                                        const std::vector<double>& distractor_probs,
                                                        std::uint64_t seed);

}  // namespace ncelm
