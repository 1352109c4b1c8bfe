// ncelm: command-line front end for vocabulary building, training,
// evaluation, self-checks and cost estimates.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncelm/checkpoint.hpp"
#include "ncelm/corpus.hpp"
#include "ncelm/diagnostics.hpp"
#include "ncelm/error.hpp"
#include "ncelm/eval.hpp"
#include "ncelm/model.hpp"
#include "ncelm/trainer.hpp"
#include "ncelm/version.hpp"

namespace {

using namespace ncelm;

constexpr int kExitCheckFailed = 1;
constexpr int kExitError = 2;
constexpr int kExitDiverged = 3;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  int precision = 32;
};

// How text is turned into (context, target) pairs. Stored in the manifest so
// that evaluation rebuilds contexts the way training did.
struct CorpusOptions {
  std::size_t context_size = 2;
  std::string layout = "preceding";
  std::string boundary = "oos";
  bool lowercase = false;
};

using Manifest = std::map<std::string, std::string>;

std::string manifest_path(const std::string& model_path) { return model_path + ".manifest"; }
std::string history_path(const std::string& model_path) { return model_path + ".history.csv"; }

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [key, value] : manifest) out << key << '=' << value << '\n';
  if (!out) throw Error("cannot write " + path);
}

std::optional<Manifest> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path + ":" + std::to_string(line_no) + ": expected key=value");
    manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return manifest;
}

// Shortest text that reads back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, result.ptr);
}

Dataset make_dataset(const std::vector<std::vector<WordId>>& sentences, const CorpusOptions& options) {
  if (options.layout == "surrounding") {
    if (options.context_size % 2 != 0) throw ConfigError("surrounding layout needs an even context size");
    if (options.boundary != "oos") throw ConfigError("surrounding layout only supports oos padding");
    return extract_surrounding_pairs(sentences, options.context_size / 2);
  }
  const BoundaryMode mode = options.boundary == "stream" ? BoundaryMode::kStream : BoundaryMode::kOosPadding;
  return extract_pairs(sentences, options.context_size, mode);
}

Dataset load_dataset(const std::string& path, const Vocabulary& vocab, const CorpusOptions& options) {
  const auto sentences = encode_sentences(vocab, read_sentences_file(path, options.lowercase));
  Dataset dataset = make_dataset(sentences, options);
  if (dataset.empty()) throw ConfigError(path + " yields no training examples");
  return dataset;
}

// Corpus options for evaluating a model: the manifest's values where present,
// with explicitly given flags required to agree with them.
CorpusOptions resolve_corpus_options(const std::string& model_path, std::size_t context_size,
                                     const std::optional<std::string>& layout,
                                     const std::optional<std::string>& boundary, bool lowercase_flag) {
  CorpusOptions options;
  options.context_size = context_size;
  options.lowercase = lowercase_flag;
  auto manifest = read_manifest(manifest_path(model_path));
  if (manifest) {
    auto& m = *manifest;
    if (m.count("layout")) options.layout = m["layout"];
    if (m.count("boundary")) options.boundary = m["boundary"];
    if (m.count("lowercase")) options.lowercase = options.lowercase || m["lowercase"] == "1";
  }
  auto agree = [&](const char* name, const std::optional<std::string>& flag, std::string& value,
                   bool from_manifest) {
    if (!flag) return;
    if (from_manifest && *flag != value)
      throw ConfigError(std::string(name) + " mismatch: model was trained with " + value + ", requested " + *flag);
    value = *flag;
  };
  const bool have_manifest = manifest.has_value();
  agree("layout", layout, options.layout, have_manifest);
  agree("boundary", boundary, options.boundary, have_manifest);
  return options;
}

void check_vocab(const Vocabulary& vocab, std::size_t model_vocab) {
  if (vocab.size() != model_vocab) {
    throw ConfigError("vocabulary has " + std::to_string(vocab.size()) + " words but the model has " +
                      std::to_string(model_vocab));
  }
}

// ---------------------------------------------------------------------------
// build-vocab

struct BuildVocabArgs {
  std::vector<std::string> corpora;
  std::uint64_t min_count = 1;
  std::size_t max_size = 0;
  bool lowercase = false;
  std::string out;
};

int cmd_build_vocab(const BuildVocabArgs& args) {
  std::vector<std::string> tokens;
  for (const auto& path : args.corpora) {
    for (auto& sentence : read_sentences_file(path, args.lowercase)) {
      for (auto& token : sentence) tokens.push_back(std::move(token));
    }
  }
  const std::optional<std::size_t> max_size = args.max_size ? std::optional(args.max_size) : std::nullopt;
  const Vocabulary vocab = build_vocab(tokens, args.min_count, max_size);
  vocab.save(args.out);
  std::cout << "V=" << vocab.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string train_path;
  std::string valid_path;
  std::string vocab_path;
  std::string out;
  CorpusOptions corpus;
  TrainConfig config;
  std::string estimator = "nce";
  std::string noise = "unigram";
  std::string normalizers = "fixed-one";
  std::string matrix = "full";
  bool no_unigram_bias = false;
  double ess_floor = 0;
};

Manifest train_manifest(const TrainArgs& args, const GlobalOptions& global, std::size_t vocab_size) {
  const TrainConfig& c = args.config;
  Manifest m;
  m["manifest_version"] = std::to_string(kManifestVersion);
  m["checkpoint_version"] = std::to_string(kCheckpointVersion);
  m["tool_version"] = kToolVersion;
  m["seed"] = std::to_string(c.seed);
  m["workers"] = std::to_string(c.worker_count);
  m["precision"] = std::to_string(global.precision);
  m["train"] = args.train_path;
  m["valid"] = args.valid_path;
  m["vocab"] = args.vocab_path;
  m["out"] = args.out;
  m["history"] = history_path(args.out);
  m["vocab_size"] = std::to_string(vocab_size);
  m["context_size"] = std::to_string(args.corpus.context_size);
  m["layout"] = args.corpus.layout;
  m["boundary"] = args.corpus.boundary;
  m["lowercase"] = args.corpus.lowercase ? "1" : "0";
  m["estimator"] = to_string(c.estimator);
  m["k"] = std::to_string(c.k);
  m["noise"] = to_string(c.noise_kind);
  m["noise_smoothing"] = format_double(c.noise_smoothing);
  m["minibatch_size"] = std::to_string(c.minibatch_size);
  m["initial_lr"] = format_double(c.initial_lr);
  m["max_epochs"] = std::to_string(c.max_epochs);
  m["weight_penalty"] = format_double(c.weight_penalty);
  m["normalizers"] = to_string(c.normalizer_mode);
  m["ess_floor"] = c.ess_floor ? format_double(*c.ess_floor) : "none";
  m["share_noise_samples"] = c.share_noise_samples ? "1" : "0";
  m["dim"] = std::to_string(c.dim);
  m["matrix"] = to_string(c.matrix_mode);
  m["init_scale"] = format_double(c.init_scale);
  m["bias_from_unigram"] = c.bias_from_unigram ? "1" : "0";
  m["patience"] = std::to_string(c.patience);
  m["min_lr_fraction"] = format_double(c.min_lr_fraction);
  return m;
}

template <typename Real>
int cmd_train(TrainArgs args, const GlobalOptions& global) {
  TrainConfig& config = args.config;
  config.seed = global.seed;
  config.worker_count = global.workers;
  config.estimator = args.estimator == "ml" ? EstimatorKind::kMl
                     : args.estimator == "is" ? EstimatorKind::kIs
                                              : EstimatorKind::kNce;
  config.noise_kind = args.noise == "uniform" ? NoiseKind::kUniform : NoiseKind::kUnigram;
  config.normalizer_mode = args.normalizers == "per-context" ? NormalizerMode::kPerContext : NormalizerMode::kFixedOne;
  config.matrix_mode = args.matrix == "diagonal" ? MatrixMode::kDiagonal : MatrixMode::kFull;
  config.bias_from_unigram = !args.no_unigram_bias;
  if (args.ess_floor > 0) config.ess_floor = args.ess_floor;
  config.checkpoint_path = args.out;
  config.validate();
  if (args.corpus.layout == "surrounding" && args.corpus.context_size % 2 != 0)
    throw ConfigError("surrounding layout needs an even context size");

  const Vocabulary vocab = Vocabulary::load(args.vocab_path);
  const Dataset train_set = load_dataset(args.train_path, vocab, args.corpus);
  const Dataset valid_set = load_dataset(args.valid_path, vocab, args.corpus);
  write_manifest(manifest_path(args.out), train_manifest(args, global, vocab.size()));

  TrainHistory history;
  auto log_epoch = [&](const EpochRecord& record, const LblParams<Real>&, const NormalizerStore<Real>&) {
    history.epochs.push_back(record);
    history.save_csv(history_path(args.out));
    std::cerr << "epoch " << record.epoch << " objective " << record.train_objective << " valid_ppl "
              << record.valid_ppl << " lr " << record.learning_rate << '\n';
  };

  try {
    const TrainResult<Real> result = train<Real>(config, train_set, valid_set, vocab, log_epoch);
    history.save_csv(history_path(args.out));
    std::cout << "epochs=" << result.history.epochs.size() << '\n'
              << "valid_ppl=" << std::setprecision(10) << result.history.epochs.back().valid_ppl << '\n'
              << "stop=" << result.stop_reason << '\n';
  } catch (const DivergenceError& e) {
    history.save_csv(history_path(args.out));
    std::cerr << "error: " << to_string(config.estimator) << " training diverged in epoch " << e.epoch << " ("
              << e.tensor() << "): " << e.what() << '\n';
    if (!e.last_good_checkpoint.empty()) std::cerr << "last good checkpoint: " << e.last_good_checkpoint << '\n';
    return kExitDiverged;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ppl

struct EvalArgs {
  std::string model;
  std::string vocab_path;
  std::string corpus_path;
  std::string problems_path;
  std::string mode = "uni";
  std::optional<std::string> layout;
  std::optional<std::string> boundary;
  bool lowercase = false;
};

template <typename Real>
int cmd_ppl(const EvalArgs& args) {
  const Checkpoint<Real> checkpoint = load_checkpoint<Real>(args.model);
  const Vocabulary vocab = Vocabulary::load(args.vocab_path);
  check_vocab(vocab, checkpoint.params.vocab_size());
  const CorpusOptions options = resolve_corpus_options(args.model, checkpoint.params.context_size(), args.layout,
                                                       args.boundary, args.lowercase);
  const Dataset dataset = load_dataset(args.corpus_path, vocab, options);
  std::cout << "n=" << dataset.size() << '\n'
            << "ppl=" << std::setprecision(10) << perplexity(checkpoint.params, dataset) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// complete

template <typename Real>
int cmd_complete(const EvalArgs& args) {
  const Checkpoint<Real> checkpoint = load_checkpoint<Real>(args.model);
  const Vocabulary vocab = Vocabulary::load(args.vocab_path);
  check_vocab(vocab, checkpoint.params.vocab_size());
  const CompletionMode mode = args.mode == "bi" ? CompletionMode::kBidirectional : CompletionMode::kUnidirectional;
  const CorpusOptions options = resolve_corpus_options(args.model, checkpoint.params.context_size(), args.layout,
                                                       std::nullopt, args.lowercase);
  const std::string wanted = mode == CompletionMode::kBidirectional ? "surrounding" : "preceding";
  if (options.layout != wanted) {
    throw ConfigError("layout mismatch: mode " + args.mode + " needs a model trained with the " + wanted +
                      " layout, this one used " + options.layout);
  }

  std::ifstream in(args.problems_path);
  if (!in) throw Error("cannot open " + args.problems_path);
  const auto problems = read_completion_problems(in, vocab, options.lowercase);
  const CompletionReport report = evaluate_completion(checkpoint.params, problems, mode);
  for (std::size_t choice : report.choices) std::cout << choice << '\n';
  if (report.answered > 0) {
    std::cout << "accuracy=" << std::setprecision(6) << report.accuracy() << '\n'
              << "correct=" << report.correct << '\n'
              << "n=" << report.answered << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  std::string name;
  std::string model;
  std::size_t instances = 20;
  std::size_t epochs = 20;
};

void print_check(const std::string& name, bool passed, const std::string& detail) {
  std::cout << (passed ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
}

int cmd_diagnose(const DiagnoseArgs& args, const GlobalOptions& global) {
  std::ostringstream detail;
  detail << std::setprecision(4);
  bool passed = true;

  if (args.name == "gradcheck") {
    GradCheckReport r;
    if (!args.model.empty()) {
      r = gradcheck_params(load_checkpoint<double>(args.model).params, global.seed);
    } else {
      r = run_gradcheck(global.seed, args.instances);
    }
    detail << "max relative error ml " << r.ml_error << ", nce " << r.nce_error << ", is " << r.is_error
           << ", normalizer " << r.normalizer_error << " (tolerance " << r.tolerance << ")";
    passed = r.passed();
  } else if (args.name == "nce-limit") {
    const NceLimitReport r = run_nce_limit(global.seed, args.instances);
    detail << "instances with increasing gap " << r.non_monotone << ", worst gap at k=" << r.ks.back() << " "
           << r.worst_final_gap << " (tolerance " << r.tolerance << ")";
    passed = r.passed();
  } else if (args.name == "is-stability") {
    const StabilityReport r = run_is_stability(global.seed, args.epochs);
    if (r.is_diverged) {
      detail << "is diverged in epoch " << r.is_epochs << " (" << r.is_message << ")";
    } else {
      detail << "is completed " << r.is_epochs << " epochs, max weight fraction " << r.is_max_weight_fraction;
    }
    detail << "; nce "
           << (r.nce_completed ? "completed" : "failed") << " " << r.nce_epochs << " epochs, weights in ["
           << r.nce_min_weight << ", " << r.nce_max_weight << "]";
    passed = r.passed();
  } else if (args.name == "speedup") {
    const SpeedupReport r = run_speedup_benchmark(2, 100, 10000, 25, MatrixMode::kFull, 100, 20, global.seed);
    detail << "predicted " << r.predicted << ", measured " << r.measured << " (ml " << r.ml_seconds << " s, nce "
           << r.nce_seconds << " s); nce k=1 " << r.nce_k1_seconds << " s vs k=100 " << r.nce_k100_seconds
           << " s, variation " << r.sample_count_variation << " (tolerance 0.3)";
    passed = r.within_factor_two() && r.sample_count_variation < 0.3;
  }
  print_check(args.name, passed, detail.str());
  return passed ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// speedup

struct SpeedupArgs {
  double c = 2;
  double d = 100;
  double V = 10000;
  double k = 25;
  bool diagonal = false;
  bool measure = false;
};

int cmd_speedup(const SpeedupArgs& args, const GlobalOptions& global) {
  const MatrixMode mode = args.diagonal ? MatrixMode::kDiagonal : MatrixMode::kFull;
  std::cout << std::fixed << std::setprecision(1)
            << "predicted=" << predicted_speedup(args.c, args.d, args.V, args.k, mode) << '\n';
  if (args.measure) {
    const SpeedupReport r =
        run_speedup_benchmark(static_cast<std::size_t>(args.c), static_cast<std::size_t>(args.d),
                              static_cast<std::size_t>(args.V), static_cast<std::size_t>(args.k), mode, 100, 20,
                              global.seed);
    std::cout << "measured=" << r.measured << '\n';
  }
  return 0;
}

template <typename F>
int with_precision(int precision, F&& body) {
  return precision == 64 ? body(double{}) : body(float{});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trainer and evaluator for log-bilinear language models"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master random seed")->capture_default_str();
  app.add_option("--workers", global.workers, "Worker threads per minibatch")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}))
      ->capture_default_str();
  app.add_option("--precision", global.precision, "Floating-point width for training and evaluation")
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();

  BuildVocabArgs vocab_args;
  auto* build_vocab_cmd = app.add_subcommand("build-vocab", "Build a vocabulary from tokenized text");
  build_vocab_cmd->add_option("corpus", vocab_args.corpora, "One sentence per line")->required()->check(CLI::ExistingFile);
  build_vocab_cmd->add_option("--min-count", vocab_args.min_count, "Words rarer than this map to <unk>")
      ->capture_default_str();
  build_vocab_cmd->add_option("--max-size", vocab_args.max_size, "Cap on vocabulary size (0: none)")
      ->capture_default_str();
  build_vocab_cmd->add_flag("--lowercase", vocab_args.lowercase, "Lowercase ASCII letters");
  build_vocab_cmd->add_option("-o,--out", vocab_args.out, "Output vocabulary file")->required();

  TrainArgs train_args;
  TrainConfig& tc = train_args.config;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, history and manifest");
  train_cmd->add_option("--train", train_args.train_path, "Training corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--valid", train_args.valid_path, "Validation corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", train_args.vocab_path, "Vocabulary file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--context", train_args.corpus.context_size, "Context words per prediction")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}))
      ->capture_default_str();
  train_cmd->add_option("--layout", train_args.corpus.layout, "Context layout")
      ->check(CLI::IsMember({"preceding", "surrounding"}))
      ->capture_default_str();
  train_cmd->add_option("--boundary", train_args.corpus.boundary, "Sentence boundary handling")
      ->check(CLI::IsMember({"oos", "stream"}))
      ->capture_default_str();
  train_cmd->add_flag("--lowercase", train_args.corpus.lowercase, "Lowercase ASCII letters");
  train_cmd->add_option("--estimator", train_args.estimator)->check(CLI::IsMember({"ml", "nce", "is"}))->capture_default_str();
  train_cmd->add_option("--k", tc.k, "Noise or proposal samples per word")->capture_default_str();
  train_cmd->add_option("--noise", train_args.noise)->check(CLI::IsMember({"unigram", "uniform"}))->capture_default_str();
  train_cmd->add_option("--noise-smoothing", tc.noise_smoothing, "Add-n smoothing of unigram noise")->capture_default_str();
  train_cmd->add_option("--batch", tc.minibatch_size, "Minibatch size")->capture_default_str();
  train_cmd->add_option("--lr", tc.initial_lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tc.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--penalty", tc.weight_penalty, "L2 weight penalty")->capture_default_str();
  train_cmd->add_option("--normalizers", train_args.normalizers)
      ->check(CLI::IsMember({"fixed-one", "per-context"}))
      ->capture_default_str();
  train_cmd->add_option("--ess-floor", train_args.ess_floor, "Grow k when mean ESS falls below this (is only)");
  train_cmd->add_flag("--share-noise", tc.share_noise_samples, "One noise sample set per minibatch");
  train_cmd->add_option("--dim", tc.dim, "Feature dimension")->capture_default_str();
  train_cmd->add_option("--matrix", train_args.matrix)->check(CLI::IsMember({"full", "diagonal"}))->capture_default_str();
  train_cmd->add_option("--init-scale", tc.init_scale, "Std-dev of initial features")->capture_default_str();
  train_cmd->add_flag("--no-unigram-bias", train_args.no_unigram_bias, "Start biases at zero");
  train_cmd->add_option("--patience", tc.patience, "Epochs without improvement before stopping")->capture_default_str();
  train_cmd->add_option("--min-lr-fraction", tc.min_lr_fraction, "Stop when lr falls below this fraction")
      ->capture_default_str();

  EvalArgs eval_args;
  auto* ppl_cmd = app.add_subcommand("ppl", "Perplexity of a corpus under a checkpoint");
  ppl_cmd->add_option("-m,--model", eval_args.model)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--vocab", eval_args.vocab_path)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("corpus", eval_args.corpus_path)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--layout", eval_args.layout)->check(CLI::IsMember({"preceding", "surrounding"}));
  ppl_cmd->add_option("--boundary", eval_args.boundary)->check(CLI::IsMember({"oos", "stream"}));
  ppl_cmd->add_flag("--lowercase", eval_args.lowercase);

  auto* complete_cmd = app.add_subcommand("complete", "Answer 5-candidate sentence completion problems");
  complete_cmd->add_option("-m,--model", eval_args.model)->required()->check(CLI::ExistingFile);
  complete_cmd->add_option("--vocab", eval_args.vocab_path)->required()->check(CLI::ExistingFile);
  complete_cmd->add_option("problems", eval_args.problems_path)->required()->check(CLI::ExistingFile);
  complete_cmd->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"uni", "bi"}))->capture_default_str();
  complete_cmd->add_option("--layout", eval_args.layout)->check(CLI::IsMember({"preceding", "surrounding"}));
  complete_cmd->add_flag("--lowercase", eval_args.lowercase);

  DiagnoseArgs diagnose_args;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "Run a self-check and report pass/fail");
  diagnose_cmd->add_option("check", diagnose_args.name)
      ->required()
      ->check(CLI::IsMember({"gradcheck", "nce-limit", "is-stability", "speedup"}));
  diagnose_cmd->add_option("-m,--model", diagnose_args.model, "Checkpoint to check instead of random instances (gradcheck)")
      ->check(CLI::ExistingFile);
  diagnose_cmd->add_option("--instances", diagnose_args.instances)->capture_default_str();
  diagnose_cmd->add_option("--epochs", diagnose_args.epochs)->capture_default_str();

  SpeedupArgs speedup_args;
  auto* speedup_cmd = app.add_subcommand("speedup", "Predicted per-update cost ratio of ML to sampling");
  speedup_cmd->add_option("c", speedup_args.c, "Context size")->required();
  speedup_cmd->add_option("d", speedup_args.d, "Feature dimension")->required();
  speedup_cmd->add_option("V", speedup_args.V, "Vocabulary size")->required();
  speedup_cmd->add_option("k", speedup_args.k, "Samples per word")->required();
  auto* full_flag = speedup_cmd->add_flag("--full", "Full context matrices (default)");
  speedup_cmd->add_flag("--diagonal", speedup_args.diagonal, "Diagonal context matrices")->excludes(full_flag);
  speedup_cmd->add_flag("--measure", speedup_args.measure, "Also time both estimators at this shape");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_vocab_cmd) return cmd_build_vocab(vocab_args);
    if (*train_cmd) {
      return with_precision(global.precision, [&](auto tag) { return cmd_train<decltype(tag)>(train_args, global); });
    }
    if (*ppl_cmd) return with_precision(global.precision, [&](auto tag) { return cmd_ppl<decltype(tag)>(eval_args); });
    if (*complete_cmd) {
      return with_precision(global.precision, [&](auto tag) { return cmd_complete<decltype(tag)>(eval_args); });
    }
    if (*diagnose_cmd) return cmd_diagnose(diagnose_args, global);
    if (*speedup_cmd) return cmd_speedup(speedup_args, global);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
