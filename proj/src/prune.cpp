#include "pielab/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pielab::prune {

std::string_view to_string(Scoring s) {
  switch (s) {
    case Scoring::Magnitude: return "magnitude";
    case Scoring::Impact: return "impact";
    case Scoring::Random: return "random";
  }
  return "?";
}

std::string_view to_string(Schedule s) { return s == Schedule::AtInit ? "at_init" : "iterative"; }

std::string_view to_string(Tuning t) {
  switch (t) {
    case Tuning::None: return "none";
    case Tuning::Finetune: return "finetune";
    case Tuning::Rewind: return "rewind";
  }
  return "?";
}

Scoring scoring_from_string(std::string_view s) {
  for (auto v : {Scoring::Magnitude, Scoring::Impact, Scoring::Random})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scoring \"" + std::string(s) + "\" (expected magnitude|impact|random)");
}

Schedule schedule_from_string(std::string_view s) {
  for (auto v : {Schedule::AtInit, Schedule::Iterative})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown schedule \"" + std::string(s) + "\" (expected at_init|iterative)");
}

Tuning tuning_from_string(std::string_view s) {
  for (auto v : {Tuning::None, Tuning::Finetune, Tuning::Rewind})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown tuning \"" + std::string(s) + "\" (expected none|finetune|rewind)");
}

PrunerSpec::PrunerSpec(Scoring scoring, Schedule schedule, Tuning tuning, double target)
    : scoring_(scoring), schedule_(schedule), tuning_(tuning), target_(target) {
  if (scoring == Scoring::Random && tuning == Tuning::Rewind)
    throw ConfigError("random scoring cannot be combined with weight rewinding: rewound weights are not random");
  if (schedule == Schedule::AtInit && tuning != Tuning::None)
    throw ConfigError("pruning at initialization takes no tuning strategy");
  if (schedule == Schedule::Iterative && tuning == Tuning::None)
    throw ConfigError("iterative pruning needs a tuning strategy (finetune or rewind)");
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("pruning target must be in (0, 1)");
}

namespace {

struct IdRow {
  const char* id;
  Scoring scoring;
  Schedule schedule;
  Tuning tuning;
};

constexpr IdRow kIds[] = {
    {"IIBP-WR", Scoring::Impact, Schedule::Iterative, Tuning::Rewind},
    {"IMP-WR", Scoring::Magnitude, Schedule::Iterative, Tuning::Rewind},
    {"IIBP-FT", Scoring::Impact, Schedule::Iterative, Tuning::Finetune},
    {"IMP-FT", Scoring::Magnitude, Schedule::Iterative, Tuning::Finetune},
    {"IRP-FT", Scoring::Random, Schedule::Iterative, Tuning::Finetune},
    {"IBP-AI", Scoring::Impact, Schedule::AtInit, Tuning::None},
    {"MP-AI", Scoring::Magnitude, Schedule::AtInit, Tuning::None},
    {"RP-AI", Scoring::Random, Schedule::AtInit, Tuning::None},
};

}  // namespace

PrunerSpec PrunerSpec::from_id(std::string_view canonical_id, double target) {
  for (const auto& row : kIds)
    if (canonical_id == row.id) return PrunerSpec(row.scoring, row.schedule, row.tuning, target);
  throw ConfigError("unknown pruner id \"" + std::string(canonical_id) + "\"");
}

std::string PrunerSpec::canonical_id() const {
  for (const auto& row : kIds)
    if (row.scoring == scoring_ && row.schedule == schedule_ && row.tuning == tuning_) return row.id;
  throw Error("pruner combination has no canonical id");
}

const std::vector<std::string>& canonical_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& row : kIds) v.emplace_back(row.id);
    return v;
  }();
  return ids;
}

const ScoreMap::Entry* ScoreMap::find(std::string_view layer) const {
  for (const auto& e : entries)
    if (e.layer == layer) return &e;
  return nullptr;
}

std::vector<corpus::EncodedExample> sample_examples(std::span<const corpus::EncodedExample> train, std::size_t n,
                                                    std::uint64_t seed) {
  if (train.size() <= n) {
    if (train.size() < n)
      log_warning("train split has " + std::to_string(train.size()) + " examples, fewer than the " +
                  std::to_string(n) + " requested for impact scoring; using all of them");
    return {train.begin(), train.end()};
  }
  // partial Fisher-Yates over indices
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<corpus::EncodedExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(train[idx[i]]);
  return out;
}

ScoreMap score(const nn::ParamSet<float>& params, Scoring scoring,
               std::span<const corpus::EncodedExample> impact_sample, std::uint64_t seed) {
  ScoreMap out;
  nn::Gradients<float> summed;
  if (scoring == Scoring::Impact) {
    if (impact_sample.empty()) throw ConfigError("impact scoring needs at least one training example");
    // backward returns the batch mean; rescale to the sum over the sample
    auto result = nn::backward<float>(params, impact_sample);
    for (auto& g : result.grads) g *= static_cast<float>(impact_sample.size());
    summed = std::move(result.grads);
  }
  Rng rng(seed);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& layer = params.layers[li];
    if (!layer.prunable()) continue;
    ScoreMap::Entry e{layer.name, std::vector<double>(static_cast<std::size_t>(layer.value.size()))};
    const float* w = layer.value.data();
    for (std::size_t k = 0; k < e.scores.size(); ++k) {
      switch (scoring) {
        case Scoring::Magnitude: e.scores[k] = std::abs(static_cast<double>(w[k])); break;
        case Scoring::Impact:
          e.scores[k] = std::abs(static_cast<double>(w[k]) * static_cast<double>(summed[li].data()[k]));
          break;
        case Scoring::Random: e.scores[k] = rng.uniform(); break;
      }
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

double per_iteration_fraction(double target, int iterations) {
  if (!(target >= 0.0 && target < 1.0)) throw ConfigError("pruning target must be in [0, 1)");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  return 1.0 - std::pow(1.0 - target, 1.0 / iterations);
}

PruneMask prune_step(const PruneMask& mask, const ScoreMap& scores, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("prune_step: fraction must be in [0, 1]");
  PruneMask out = mask;
  for (auto& e : out.entries) {
    const auto* s = scores.find(e.layer);
    if (!s || s->scores.size() != e.active.size()) throw Error("no aligned scores for masked array " + e.layer);
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < e.active.size(); ++k)
      if (e.active[k]) active.push_back(k);
    // the epsilon absorbs representation error in r * n (e.g. 0.7 * 1000)
    const auto remove = static_cast<std::size_t>(std::floor(r * static_cast<double>(active.size()) + 1e-9));
    if (remove == 0) continue;
    std::stable_sort(active.begin(), active.end(),
                     [&](std::size_t a, std::size_t b) { return s->scores[a] < s->scores[b]; });
    for (std::size_t k = 0; k < remove; ++k) e.active[active[k]] = 0;
  }
  return out;
}

nn::ParamSet<float> rewind_weights(const nn::ParamSet<float>& params, const nn::ParamSet<float>& initial,
                                   const PruneMask& mask) {
  if (params.layers.size() != initial.layers.size()) throw Error("rewind: parameter sets differ in layer count");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& a = params.layers[i];
    const auto& b = initial.layers[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      throw Error("rewind: shape mismatch at " + a.name);
  }
  nn::ParamSet<float> out = initial;
  apply_mask(out, mask);
  return out;
}

MaskStats mask_stats(const PruneMask& mask, const nn::ParamSet<float>& params) {
  MaskStats st;
  st.total_parameters = params.parameter_count();
  for (const auto& l : params.layers) {
    if (!l.prunable()) continue;
    MaskStats::Layer row{l.name, l.value.size(), l.value.size(), 0.0};
    if (const auto* e = mask.find(l.name)) row.active = e->active_count();
    if (row.size > 0) row.pruned_fraction = static_cast<double>(row.size - row.active) / static_cast<double>(row.size);
    st.prunable_parameters += row.size;
    st.pruned_parameters += row.size - row.active;
    st.layers.push_back(row);
  }
  if (st.prunable_parameters > 0)
    st.nominal_pruned_fraction = static_cast<double>(st.pruned_parameters) / static_cast<double>(st.prunable_parameters);
  if (st.total_parameters > 0)
    st.effective_pruned_fraction = static_cast<double>(st.pruned_parameters) / static_cast<double>(st.total_parameters);
  return st;
}

std::uint64_t pruning_seed(std::uint64_t model_seed, const PrunerSpec& spec) {
  std::uint64_t h = 0;
  for (char c : spec.canonical_id()) h = h * 131 + static_cast<unsigned char>(c);
  h = mix_seed(h, static_cast<std::uint64_t>(std::llround(spec.target() * 1e6)));
  return mix_seed(model_seed, h);
}

PrunerRun run_pruner(const PrunerSpec& spec, const nn::ModelSpec& model, std::uint64_t model_seed,
                     std::span<const corpus::EncodedExample> train, const PrunerRunHyper& hyper,
                     const nn::EpochSink& sink, const PruneSink& on_prune) {
  if (hyper.epochs < 1) throw ConfigError("epochs must be >= 1");
  PrunerRun run;
  nn::TrainState state = nn::initial_state(model, model_seed);
  run.initial_params = state.params;
  const auto seed = pruning_seed(model_seed, spec);
  int event_index = 0;

  const auto prune_now = [&](double r) {
    const auto event_seed = mix_seed(seed, static_cast<std::uint64_t>(event_index));
    std::vector<corpus::EncodedExample> sample;
    if (spec.scoring() == Scoring::Impact)
      sample = sample_examples(train, hyper.impact_sample_size, mix_seed(event_seed, 1));
    const ScoreMap scores = score(state.params, spec.scoring(), sample, mix_seed(event_seed, 2));
    state.mask = prune_step(state.mask, scores, r);
    state.mask.target = spec.target();
    apply_mask(state.params, state.mask);
    run.events.push_back({state.epoch, r, mask_stats(state.mask, state.params)});
    ++event_index;
  };
  const auto train_phase = [&] {
    for (int e = 0; e < hyper.epochs; ++e) {
      run.epoch_losses.push_back(nn::train_epoch(state, train, hyper.train));
      if (sink) sink(state);
    }
  };

  if (spec.schedule() == Schedule::AtInit) {
    prune_now(spec.target());
    if (on_prune) on_prune(run.events.back(), state);
    train_phase();
  } else {
    const double r = per_iteration_fraction(spec.target(), 3);
    train_phase();
    for (int it = 0; it < 3; ++it) {
      prune_now(r);
      if (spec.tuning() == Tuning::Rewind) {
        state.params = rewind_weights(state.params, run.initial_params, state.mask);
        state.optimizer = nn::OptimizerState<float>::fresh(state.params);
      }
      if (on_prune) on_prune(run.events.back(), state);
      train_phase();
    }
  }
  run.total_epochs = state.epoch;
  run.final_state = std::move(state);
  return run;
}

}  // namespace pielab::prune
