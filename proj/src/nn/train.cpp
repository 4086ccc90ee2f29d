#include "pielab/nn/train.hpp"

#include <cmath>
#include <numeric>

namespace pielab::nn {

Checkpoint TrainState::checkpoint() const {
  Checkpoint c;
  c.epoch = epoch;
  c.params = params;
  c.optimizer = optimizer;
  c.rng_state = rng.state();
  c.mask = mask;
  return c;
}

TrainState initial_state(const ModelSpec& spec, std::uint64_t seed) {
  TrainState s{init_params<float>(spec, seed), {}, Rng(mix_seed(seed, 0x545241494e)), {}, 0};
  s.optimizer = OptimizerState<float>::fresh(s.params);
  s.mask = PruneMask::full(s.params);
  return s;
}

double train_epoch(TrainState& state, std::span<const corpus::EncodedExample> train, const TrainHyper& hyper) {
  if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order.begin(), order.end(), state.rng);

  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  std::vector<corpus::EncodedExample> batch;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(train[order[i]]);
    const auto result = backward<float>(state.params, batch);
    if (!std::isfinite(result.loss))
      throw NumericError("non-finite training loss at epoch " + std::to_string(state.epoch + 1));
    opt_step(state.params, result.grads, state.mask, state.optimizer, hyper.sgd);
    loss_sum += result.loss;
    ++batches;
  }
  for (const auto& l : state.params.layers)
    if (!l.value.allFinite()) throw NumericError("non-finite weights in " + l.name + " after epoch " + std::to_string(state.epoch + 1));
  ++state.epoch;
  return batches ? loss_sum / static_cast<double>(batches) : 0.0;
}

}  // namespace pielab::nn
