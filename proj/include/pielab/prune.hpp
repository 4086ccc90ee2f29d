#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pielab/corpus.hpp"
#include "pielab/mask.hpp"
#include "pielab/nn/model.hpp"
#include "pielab/nn/train.hpp"

namespace pielab::prune {

enum class Scoring { Magnitude, Impact, Random };
enum class Schedule { AtInit, Iterative };
enum class Tuning { None, Finetune, Rewind };

std::string_view to_string(Scoring s);
std::string_view to_string(Schedule s);
std::string_view to_string(Tuning t);
Scoring scoring_from_string(std::string_view s);
Schedule schedule_from_string(std::string_view s);
Tuning tuning_from_string(std::string_view s);

/// The five pruning thresholds used throughout the study.
inline constexpr double kStandardThresholds[] = {0.20, 0.50, 0.70, 0.90, 0.99};

/// One of the eight scheduling x scoring methods at a target pruned fraction.
/// Construction validates: at-init runs have no tuning, iterative runs fine-tune
/// or rewind, random scoring never rewinds, 0 < target < 1.
class PrunerSpec {
 public:
  PrunerSpec(Scoring scoring, Schedule schedule, Tuning tuning, double target);

  /// Parses IMP-WR, IMP-FT, MP-AI, IIBP-WR, IIBP-FT, IBP-AI, IRP-FT, RP-AI.
  static PrunerSpec from_id(std::string_view canonical_id, double target);

  Scoring scoring() const { return scoring_; }
  Schedule schedule() const { return schedule_; }
  Tuning tuning() const { return tuning_; }
  double target() const { return target_; }
  std::string canonical_id() const;

 private:
  Scoring scoring_;
  Schedule schedule_;
  Tuning tuning_;
  double target_;
};

/// All eight canonical ids in table order.
const std::vector<std::string>& canonical_ids();

/// Per prunable array, one non-negative score per weight (row-major).
struct ScoreMap {
  struct Entry {
    std::string layer;
    std::vector<double> scores;
  };
  std::vector<Entry> entries;

  const Entry* find(std::string_view layer) const;
};

/// Up to `n` examples drawn without replacement; the whole split (with a
/// warning) when it holds fewer than `n`.
std::vector<corpus::EncodedExample> sample_examples(std::span<const corpus::EncodedExample> train, std::size_t n,
                                                    std::uint64_t seed);

/// magnitude: |w|; impact: |w * G| with G the summed loss gradient over
/// `impact_sample`; random: U[0,1) drawn from `seed`.
ScoreMap score(const nn::ParamSet<float>& params, Scoring scoring,
               std::span<const corpus::EncodedExample> impact_sample, std::uint64_t seed);

/// Fraction r of the remaining weights removed per step so that three steps
/// reach `target`: (1 - r)^iterations = 1 - target.
double per_iteration_fraction(double target, int iterations = 3);

/// In every masked array independently, deactivates floor(r * active) of the
/// active positions with the lowest scores; ties go to the lower flat index.
PruneMask prune_step(const PruneMask& mask, const ScoreMap& scores, double r);

/// Active positions take their initial values, pruned positions become 0.
nn::ParamSet<float> rewind_weights(const nn::ParamSet<float>& params, const nn::ParamSet<float>& initial,
                                   const PruneMask& mask);

struct MaskStats {
  struct Layer {
    std::string name;
    std::int64_t size = 0;
    std::int64_t active = 0;
    double pruned_fraction = 0.0;
  };
  std::int64_t total_parameters = 0;
  std::int64_t prunable_parameters = 0;
  std::int64_t pruned_parameters = 0;
  /// pruned / prunable
  double nominal_pruned_fraction = 0.0;
  /// pruned / all parameters
  double effective_pruned_fraction = 0.0;
  std::vector<Layer> layers;
};

MaskStats mask_stats(const PruneMask& mask, const nn::ParamSet<float>& params);

struct PruneEvent {
  /// Number of completed training epochs when the mask changed (0 = before training).
  int after_epoch = 0;
  /// Fraction of the remaining weights removed at this event.
  double step_fraction = 0.0;
  MaskStats stats;
};

struct PrunerRunHyper {
  nn::TrainHyper train;
  /// N: epochs per training phase.
  int epochs = 5;
  std::size_t impact_sample_size = 100;
};

struct PrunerRun {
  nn::TrainState final_state;
  nn::ParamSet<float> initial_params;
  std::vector<PruneEvent> events;
  int total_epochs = 0;
  std::vector<double> epoch_losses;
};

/// Called after each prune event, once the mask is applied and (for rewinding)
/// the weights and optimizer have been reset.
using PruneSink = std::function<void(const PruneEvent&, const nn::TrainState&)>;

/// Executes one pruned training run. At-init: score at initialization, prune to
/// the full target, train N epochs. Iterative: train N epochs, then three times
/// score at the current weights, prune r of the remainder, and either keep
/// training (fine-tune) or rewind to the initialization (fresh optimizer) and
/// train N epochs; 4N epochs in total. `sink` sees the state after every epoch.
PrunerRun run_pruner(const PrunerSpec& spec, const nn::ModelSpec& model, std::uint64_t model_seed,
                     std::span<const corpus::EncodedExample> train, const PrunerRunHyper& hyper,
                     const nn::EpochSink& sink = {}, const PruneSink& on_prune = {});

/// Seed for the scoring randomness of one run; depends on the init seed, the
/// method and the threshold.
std::uint64_t pruning_seed(std::uint64_t model_seed, const PrunerSpec& spec);

}  // namespace pielab::prune
