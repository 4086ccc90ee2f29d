#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "pielab/corpus.hpp"
#include "pielab/mask.hpp"
#include "pielab/nn/checkpoint.hpp"
#include "pielab/nn/model.hpp"
#include "pielab/nn/optimizer.hpp"

namespace pielab::nn {

struct TrainHyper {
  SgdHyper sgd;
  int batch_size = 32;
};

/// Everything a training run carries from epoch to epoch.
struct TrainState {
  ParamSet<float> params;
  OptimizerState<float> optimizer;
  Rng rng;
  PruneMask mask;
  int epoch = 0;

  Checkpoint checkpoint() const;
};

/// Fresh parameters and optimizer for initialization `seed`. Pruned and
/// unpruned runs that share a seed start from identical bytes.
TrainState initial_state(const ModelSpec& spec, std::uint64_t seed);

/// One pass over `train` in a seeded shuffled order, mini-batch SGD honoring
/// `state.mask`. Throws NumericError when the loss or a weight stops being finite.
/// Returns the mean training loss.
double train_epoch(TrainState& state, std::span<const corpus::EncodedExample> train, const TrainHyper& hyper);

using EpochSink = std::function<void(const TrainState&)>;

}  // namespace pielab::nn
