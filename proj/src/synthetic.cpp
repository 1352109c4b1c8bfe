#include "ncelm/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "ncelm/error.hpp"
#include "ncelm/noise.hpp"

namespace ncelm {

LblParams<double> make_ground_truth(const GroundTruthOptions& options) {
  if (options.vocab_size < 3) throw ConfigError("ground truth needs at least one ordinary word");
  InitOptions init;
  init.vocab_size = options.vocab_size;
  init.dim = options.dim;
  init.context_size = options.context_size;
  init.matrix_mode = options.matrix_mode;
  init.init_scale = options.feature_scale;
  init.seed = options.seed;
  auto truth = init_params<double>(init);

  Rng rng = worker_rng(options.seed, 7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(options.dim);
  // Position-dependent mixing so that word order matters.
  for (auto& c : truth.context_weights) {
    if (options.matrix_mode == MatrixMode::kFull) {
      for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = normal(rng) / std::sqrt(static_cast<double>(d));
      c += Matrix<double>::Identity(d, d);
    } else {
      for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = 1.0 + 0.5 * normal(rng);
    }
  }
  truth.bias[Vocabulary::kUnkId] = -1e3;
  truth.bias[Vocabulary::kOosId] = -1e3;
  for (std::size_t w = 2; w < options.vocab_size; ++w) {
    truth.bias[static_cast<Eigen::Index>(w)] = -options.zipf_exponent * std::log(static_cast<double>(w - 1));
  }
  return truth;
}

std::vector<std::vector<WordId>> sample_sentences(const LblParams<double>& truth, const SampleOptions& options) {
  if (options.min_length < 1 || options.max_length < options.min_length) {
    throw ConfigError("invalid sentence length range");
  }
  Rng rng(options.seed);
  const std::size_t n = truth.context_size();
  std::vector<std::vector<WordId>> sentences;
  std::size_t produced = 0;
  Context ctx(n);
  while (produced < options.num_tokens) {
    const std::size_t span = options.max_length - options.min_length + 1;
    std::size_t length = options.min_length + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span));
    length = std::min(length, options.num_tokens - produced);
    std::vector<WordId> sentence;
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t back = n - i;
        ctx[i] = t >= back ? sentence[t - back] : Vocabulary::kOosId;
      }
      const Eigen::VectorXd probs = full_distribution(truth, ctx);
      double u = uniform01(rng);
      WordId w = 2;
      for (Eigen::Index v = 2; v < probs.size(); ++v) {
        u -= probs[v];
        w = static_cast<WordId>(v);
        if (u < 0) break;
      }
      sentence.push_back(w);
    }
    produced += sentence.size();
    sentences.push_back(std::move(sentence));
  }
  return sentences;
}

Vocabulary synthetic_vocabulary(std::size_t vocab_size, const std::vector<std::uint64_t>& counts) {
  Vocabulary vocab;
  for (std::size_t id = 2; id < vocab_size; ++id) {
    vocab.add("w" + std::to_string(id), id < counts.size() ? counts[id] : 0);
  }
  if (counts.size() > 1) {
    vocab.set_count(Vocabulary::kUnkId, counts[0]);
    vocab.set_count(Vocabulary::kOosId, counts[1]);
  }
  return vocab;
}

std::vector<CompletionProblem> make_completion_problems(const std::vector<std::vector<WordId>>& sentences,
                                                        const std::vector<double>& distractor_probs,
                                                        std::uint64_t seed) {
  const auto distractors = NoiseDistribution::from_weights(distractor_probs, NoiseKind::kUnigram);
  Rng rng(seed);
  std::vector<CompletionProblem> problems;
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    CompletionProblem p;
    p.sentence = sentence;
    p.blank = std::min(sentence.size() - 1,
                       static_cast<std::size_t>(uniform01(rng) * static_cast<double>(sentence.size())));
    std::vector<WordId> cands{sentence[p.blank]};
    while (cands.size() < kNumCandidates) {
      const WordId x = distractors.sample(rng);
      if (x < 2 || std::find(cands.begin(), cands.end(), x) != cands.end()) continue;
      cands.push_back(x);
    }
    const auto answer = std::min<std::size_t>(kNumCandidates - 1,
                                              static_cast<std::size_t>(uniform01(rng) * kNumCandidates));
    std::swap(cands[0], cands[answer]);
    std::copy(cands.begin(), cands.end(), p.candidates.begin());
    p.answer = answer;
    problems.push_back(std::move(p));
  }
  return problems;
}

}  // namespace ncelm
