#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pielab/harness.hpp"

namespace pielab::pie {

/// Class indices in ascending order.
using ClassSet = std::vector<int>;

/// Mode of the votes; ties go to the smallest class index. Throws on no votes.
int majority_class(std::span<const int> votes);

/// {c : counts[c] > n / 2}. Throws when a count exceeds n.
ClassSet majority_set(std::span<const int> counts, int n);

/// Majority over the initializations of one row: the mode of the argmax
/// predictions (single-label, as a one-element set) or the majority set of the
/// binarized predictions (multi-label).
ClassSet majority(const harness::PredictionMatrix& m, std::size_t row, LabelKind kind);

struct Verdict {
  std::int64_t example_id = 0;
  bool is_pie = false;
  ClassSet pruned_majority;
  ClassSet unpruned_majority;

  bool operator==(const Verdict&) const = default;
};

/// An example is a PIE when the pruned and unpruned majorities differ.
std::vector<Verdict> detect_pies(const harness::PredictionMatrix& pruned, const harness::PredictionMatrix& unpruned,
                                 LabelKind kind);

/// |PIEs| / |examples|; 0 for an empty list.
double pie_fraction(std::span<const Verdict> verdicts);
std::vector<std::size_t> pie_rows(std::span<const Verdict> verdicts);

/// Class histograms of all examples and of the PIEs, classes ordered by
/// descending train frequency (ties: lower index first). A multi-label example
/// counts once for each of its classes; each histogram sums to 1 (or is all
/// zeros when empty).
struct ClassDistribution {
  std::vector<int> class_order;
  std::vector<std::int64_t> train_frequency;
  std::vector<double> all;
  std::vector<double> pies;
};

ClassDistribution class_distribution(std::span<const Verdict> verdicts, std::span<const std::vector<int>> gold,
                                     std::span<const std::int64_t> train_frequencies);

struct SubsetAccuracy {
  std::size_t n_examples = 0;
  /// Mean and sample std over initializations of the accuracy on the subset.
  harness::MeanStd per_init;
  /// Accuracy of the majority prediction on the subset.
  double majority_vote = 0.0;
};

/// Accuracies restricted to `rows`. Single-label: argmax equals the gold label;
/// multi-label: predicted set equals the gold set. Empty subset -> nullopt.
std::optional<SubsetAccuracy> subset_accuracy(const harness::PredictionMatrix& m,
                                              std::span<const std::vector<int>> gold, LabelKind kind,
                                              std::span<const std::size_t> rows);

/// "2" (single-label) or "0;2" (multi-label); the empty set is "".
std::string format_class_set(const ClassSet& s);
std::string pies_csv(std::span<const Verdict> verdicts);

/// Everything the PIE stage reports for one pruned condition on one split.
struct ConditionReport {
  harness::Condition condition;
  std::string split;
  std::vector<Verdict> verdicts;
  double pie_fraction = 0.0;
  ClassDistribution distribution;
  std::optional<SubsetAccuracy> pruned_all;
  std::optional<SubsetAccuracy> unpruned_all;
  std::optional<SubsetAccuracy> pruned_pies;
  std::optional<SubsetAccuracy> unpruned_pies;
};

/// Verdicts of one pruned condition against the unpruned baseline.
std::vector<Verdict> verdicts_for(const harness::RunData& run, const harness::Condition& condition,
                                  std::string_view split);

/// Runs the PIE analysis for every pruned condition on the train and test
/// splits and writes analysis/<condition>/<split>/pies.csv plus the
/// pie_occurrence.csv, pie_accuracy.csv and pie_class_distribution.csv tables.
std::vector<ConditionReport> analyze_run(const harness::RunData& run);

}  // namespace pielab::pie
