#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pielab/corpus.hpp"
#include "pielab/nn/model.hpp"
#include "pielab/prune.hpp"

namespace pielab::harness {

/// Where the examples come from: a corpus directory or the synthetic generator.
struct CorpusSource {
  std::optional<std::filesystem::path> path;
  std::optional<corpus::SyntheticSpec> synthetic;
  double coverage = 0.85;
  /// 0 = use the manifest override or compute from coverage.
  int max_tokens = 0;
};

/// Full declarative description of one study.
struct ExperimentConfig {
  std::string name = "experiment";
  CorpusSource corpus;
  nn::Family family = nn::Family::MeanEmbeddingMlp;
  int embedding_dim = 32;
  int hidden_dim = 32;
  /// Canonical pruner ids, in config order.
  std::vector<std::string> pruners;
  std::vector<double> thresholds;
  int n_initializations = 5;
  /// N: epochs per training phase (unpruned and at-init runs train N epochs,
  /// iterative runs 4N).
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t impact_sample_size = 100;
  std::uint64_t base_seed = 0;

  /// Throws ConfigError on out-of-range values or invalid pruner combinations.
  void validate() const;
};

/// Strict parse: unknown keys at any level are errors naming the key. Pruners
/// are canonical ids or {"scoring", "schedule", "tuning"} objects.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::filesystem::path& path);
/// Every field written explicitly, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Strict (unknown keys rejected) JSON form of the synthetic generator knobs.
corpus::SyntheticSpec synthetic_from_json(const nlohmann::json& j);
nlohmann::json synthetic_to_json(const corpus::SyntheticSpec& spec);

/// Loads or generates the corpus described by `source`. A relative corpus path
/// is resolved against `base_dir`, then against $PIELAB_DATA.
corpus::CorpusSplits materialize_corpus(const CorpusSource& source, const std::filesystem::path& base_dir = {});

/// The corpus as the models see it.
struct EncodedCorpus {
  corpus::Vocabulary vocab;
  int max_tokens = 0;
  nn::ModelSpec model;
  std::vector<corpus::EncodedExample> train;
  std::vector<corpus::EncodedExample> test;

  const std::vector<corpus::EncodedExample>& split(std::string_view name) const;
};

EncodedCorpus encode_corpus(const corpus::CorpusSplits& corpus, const ExperimentConfig& config);

/// A model condition: the unpruned baseline or one pruner at one threshold.
struct Condition {
  std::string pruner_id;  // empty for the unpruned baseline
  double threshold = 0.0;

  bool pruned() const { return !pruner_id.empty(); }
  /// "unpruned" or "<pruner_id>_<threshold>", e.g. "RP-AI_0.99".
  std::string directory_name() const;
  bool operator==(const Condition&) const = default;
};

/// Unpruned first, then pruners in config order, thresholds in config order.
std::vector<Condition> conditions(const ExperimentConfig& config);

/// Per-initialization probabilities of one condition on one split.
struct PredictionMatrix {
  std::string split;
  std::vector<std::int64_t> example_ids;
  /// One examples x classes matrix per initialization.
  std::vector<nn::Matrix<float>> per_init;

  int n_initializations() const { return static_cast<int>(per_init.size()); }
  std::size_t n_examples() const { return example_ids.size(); }
  int n_classes() const { return per_init.empty() ? 0 : static_cast<int>(per_init.front().cols()); }
};

/// Argmax with ties to the lowest class index.
int argmax(const nn::Matrix<float>& probs, Eigen::Index row);

/// Multi-label decision rule: class c is predicted when p_c >= kPositiveThreshold.
inline constexpr float kPositiveThreshold = 0.5F;
std::vector<int> predicted_set(const nn::Matrix<float>& probs, Eigen::Index row);

/// Fraction of rows whose argmax equals the gold label. Throws NumericError on
/// an empty split and Error on a length mismatch.
double accuracy(std::span<const int> predictions, std::span<const int> gold);
double accuracy(const nn::Matrix<float>& probs, std::span<const std::vector<int>> gold);

/// Mean over classes of per-class F1 at the 0.5 threshold; a class with no
/// predicted and no gold positives contributes 0.
double macro_f1(const nn::Matrix<float>& probs, std::span<const std::vector<int>> gold);

struct MeanStd {
  double mean = 0.0;
  /// Sample (n - 1) standard deviation; 0 for a single value.
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> values);

/// Layout helpers for a run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path summary() const { return root / "summary.csv"; }
  std::filesystem::path condition(const Condition& c) const { return root / c.directory_name(); }
  std::filesystem::path init(const Condition& c, int k) const;
  std::filesystem::path checkpoint(const Condition& c, int k, int epoch) const;
  std::filesystem::path predictions(const Condition& c, int k, std::string_view split) const;
  std::filesystem::path run_metadata(const Condition& c, int k) const;
  std::filesystem::path analysis() const { return root / "analysis"; }
};

/// Splits for which prediction files are written.
inline constexpr std::string_view kPredictionSplits[] = {"train", "test"};

struct RunOptions {
  /// Worker threads; changes wall time only, never output bytes.
  int jobs = 1;
  /// Train only the unpruned baseline.
  bool unpruned_only = false;
};

/// Trains the unpruned baseline and every (pruner, threshold) condition for
/// n_initializations seeds base_seed..base_seed+n-1 (shared by all conditions)
/// and writes the run directory. Runs already completed with the same config
/// are kept; a directory holding a different config is an error.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& run_dir, const RunOptions& options = {});

/// Everything an analysis needs from a finished run directory.
struct RunData {
  RunLayout layout;
  ExperimentConfig config;
  corpus::CorpusSplits corpus;

  static RunData open(const std::filesystem::path& run_dir);

  /// Gold label sets of a split, aligned with the split's example order.
  std::vector<std::vector<int>> gold(std::string_view split) const;
  /// Reads the prediction files of every initialization; missing files are a
  /// MissingInputError naming the initialization.
  PredictionMatrix predictions(const Condition& condition, std::string_view split) const;
  /// Completed-epoch count of a condition (N, or 4N for iterative pruners).
  int total_epochs(const Condition& condition) const;
};

PredictionMatrix read_prediction_matrix(std::span<const std::filesystem::path> files, std::string_view split,
                                        int num_classes);
void write_predictions(const std::filesystem::path& file, std::span<const std::int64_t> ids,
                       const nn::Matrix<float>& probs);

/// One summary.csv row.
struct SummaryRow {
  Condition condition;
  std::string split;
  std::string metric;
  MeanStd value;
};

/// Mean/std of accuracy (single-label) or macro-F1 (multi-label) per condition
/// and split; writes summary.csv into the run directory.
std::vector<SummaryRow> summarize(const std::filesystem::path& run_dir);

/// Writes `content` to `file` atomically (temporary file + rename).
void write_file(const std::filesystem::path& file, std::string_view content);
std::string read_file(const std::filesystem::path& file);

}  // namespace pielab::harness
