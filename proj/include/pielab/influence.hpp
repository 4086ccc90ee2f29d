#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pielab/harness.hpp"
#include "pielab/pie.hpp"

namespace pielab::influence {

/// ||p - y||_2. For single-label targets `p` must sum to 1 (within 1e-5) and
/// `y` must be one-hot; multi-label compares sigmoid outputs with the multi-hot
/// target directly.
double el2n(std::span<const double> p, std::span<const double> y, LabelKind kind = LabelKind::Single);

/// max(1, smallest epoch e with e > 0.3 * total_epochs).
int monitor_start_epoch(int total_epochs);

struct Profile {
  harness::Condition source;
  std::vector<std::int64_t> example_ids;
  std::vector<double> scores;
  int monitor_start = 1;
  int total_epochs = 0;
  int n_initializations = 0;
};

/// Per-example mean of the per-checkpoint scores within each initialization.
/// `per_epoch_probs[e]` holds the examples x classes probabilities of one
/// monitored checkpoint.
std::vector<double> mean_over_checkpoints(std::span<const nn::Matrix<float>> per_epoch_probs,
                                          std::span<const corpus::EncodedExample> examples, LabelKind kind);

/// EL2N of every train example, averaged over the monitored end-of-epoch
/// checkpoints of each initialization and then over initializations.
/// Missing checkpoints are a MissingInputError naming the file.
Profile profile(const harness::RunData& run, const harness::Condition& source, int jobs = 1);

/// Contiguous groups of row indices into the profile, ascending by score
/// (ties: ascending example id); the first n mod k bins are one larger.
struct Bins {
  std::vector<std::vector<std::size_t>> members;
};

Bins make_bins(std::span<const double> scores, std::span<const std::int64_t> example_ids, int k = 20);

/// |PIEs in bin| / |bin| per bin; verdicts must follow the profile's example order.
std::vector<double> pie_fraction_per_bin(const Bins& bins, std::span<const std::int64_t> example_ids,
                                         std::span<const pie::Verdict> verdicts);

struct ConditionBins {
  harness::Condition condition;
  std::vector<std::size_t> sizes;
  std::vector<double> pie_fractions;
};

struct AnalysisOptions {
  /// Profile each pruned condition from its own checkpoints instead of the
  /// unpruned baseline's.
  bool pruned_source = false;
  int bins = 20;
  int jobs = 1;
};

/// For every pruned condition: train-split PIEs, EL2N bins, and
/// analysis/<condition>/train/influence.csv + influence_bins.csv, plus the
/// combined analysis/influence_bins.csv table.
std::vector<ConditionBins> analyze_run(const harness::RunData& run, const AnalysisOptions& options = {});

}  // namespace pielab::influence
