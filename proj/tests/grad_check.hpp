#pragma once

// Test-only finite-difference oracle for nn::backward.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pielab/nn/model.hpp"

namespace pielab::testing {

inline std::vector<corpus::EncodedExample> random_batch(const nn::ModelSpec& spec, int n, int max_tokens, Rng& rng) {
  std::vector<corpus::EncodedExample> out;
  for (int i = 0; i < n; ++i) {
    corpus::EncodedExample ex;
    ex.id = i;
    ex.token_ids.assign(static_cast<std::size_t>(max_tokens), corpus::kPadId);
    ex.true_length = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_tokens)));
    for (int t = 0; t < ex.true_length; ++t)
      ex.token_ids[static_cast<std::size_t>(t)] = 1 + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(spec.vocab_size - 1)));
    ex.label_vector.assign(static_cast<std::size_t>(spec.num_classes), 0.0F);
    if (spec.kind == LabelKind::Single) {
      const auto c = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes)));
      ex.labels = {c};
      ex.label_vector[static_cast<std::size_t>(c)] = 1.0F;
    } else {
      for (int c = 0; c < spec.num_classes; ++c)
        if (rng.uniform() < 0.5) {
          ex.labels.push_back(c);
          ex.label_vector[static_cast<std::size_t>(c)] = 1.0F;
        }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Smallest |pre-activation| of the MLP hidden ReLU over the batch; +inf for
// models without a ReLU. Finite differences are only valid away from the kink.
inline double relu_margin(const nn::ParamSet<double>& p, const std::vector<corpus::EncodedExample>& batch) {
  if (p.spec.family != nn::Family::MeanEmbeddingMlp) return std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& ex : batch) {
    nn::Vector<double> x = nn::Vector<double>::Zero(p.spec.embedding_dim);
    for (int t = 0; t < ex.true_length; ++t) x += p["embedding"].row(ex.token_ids[static_cast<std::size_t>(t)]).transpose();
    if (ex.true_length > 0) x /= ex.true_length;
    const nn::Vector<double> pre = p["hidden.weight"] * x + p["hidden.bias"].col(0);
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
  }
  return margin;
}

struct TinyProblem {
  nn::ParamSet<double> params;
  std::vector<corpus::EncodedExample> batch;
};

// A randomly initialized model with every entry jittered by N(0, 0.3^2), and a
// random batch. Draws are repeated until all ReLU pre-activations sit at least
// `margin` away from zero.
inline TinyProblem random_tiny_problem(const nn::ModelSpec& spec, std::uint64_t seed, double margin = 1e-2) {
  Rng rng(seed);
  for (;;) {
    TinyProblem t{nn::init_params<double>(spec, rng.next()), {}};
    for (auto& l : t.params.layers)
      for (Eigen::Index k = 0; k < l.value.size(); ++k) l.value.data()[k] += 0.3 * rng.normal();
    t.batch = random_batch(spec, 4, 6, rng);
    if (relu_margin(t.params, t.batch) >= margin) return t;
  }
}

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_layer;
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries whose
// true gradient is ~0 from dividing truncation noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of the mean batch loss for every parameter entry.
inline GradCheckReport gradient_check(const nn::ParamSet<double>& params,
                                      const std::vector<corpus::EncodedExample>& batch, double eps) {
  GradCheckReport report;
  const auto analytic = nn::backward<double>(params, batch).grads;
  nn::ParamSet<double> probe = params;
  const auto f = [&] { return nn::loss<double>(nn::forward<double>(probe, batch), batch, params.spec.kind); };
  for (std::size_t li = 0; li < probe.layers.size(); ++li) {
    auto& w = probe.layers[li].value;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double orig = w.data()[k];
      w.data()[k] = orig + eps;
      const double up = f();
      w.data()[k] = orig - eps;
      const double down = f();
      w.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[li].data()[k], numeric);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_layer = probe.layers[li].name + "[" + std::to_string(k) + "]";
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace pielab::testing
