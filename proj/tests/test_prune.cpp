#include <doctest.h>

#include <cmath>
#include <set>

#include "pielab/prune.hpp"
#include "grad_check.hpp"

using namespace pielab;
using namespace pielab::prune;
using corpus::EncodedExample;

namespace {

PruneMask one_layer_mask(std::size_t n) {
  PruneMask m;
  m.entries.push_back({"w", std::vector<std::uint8_t>(n, 1)});
  return m;
}

ScoreMap one_layer_scores(std::vector<double> s) {
  ScoreMap m;
  m.entries.push_back({"w", std::move(s)});
  return m;
}

std::vector<std::size_t> pruned_positions(const PruneMask& m) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < m.entries[0].active.size(); ++k)
    if (!m.entries[0].active[k]) out.push_back(k);
  return out;
}

nn::ModelSpec small_spec(nn::Family family) { return {family, 30, 8, 10, 3, LabelKind::Single}; }

std::vector<EncodedExample> small_data(const nn::ModelSpec& spec, int n = 48) {
  Rng rng(11);
  return testing::random_batch(spec, n, 8, rng);
}

PrunerRunHyper small_hyper(int epochs) {
  PrunerRunHyper h;
  h.epochs = epochs;
  h.train.batch_size = 8;
  h.impact_sample_size = 20;
  return h;
}

// Active count after `steps` floor applications of r to n active weights.
std::int64_t oracle_active(std::int64_t n, double r, int steps) {
  for (int i = 0; i < steps; ++i) n -= static_cast<std::int64_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  return n;
}

}  // namespace

TEST_CASE("PrunerSpec ids round-trip and the combo guard holds") {
  CHECK(canonical_ids().size() == 8);
  for (const auto& id : canonical_ids()) CHECK(PrunerSpec::from_id(id, 0.5).canonical_id() == id);
  for (double t : kStandardThresholds) {
    CHECK_THROWS_AS(PrunerSpec(Scoring::Random, Schedule::Iterative, Tuning::Rewind, t), ConfigError);
    CHECK_THROWS_AS(PrunerSpec(Scoring::Random, Schedule::AtInit, Tuning::Rewind, t), ConfigError);
  }
  CHECK_THROWS_AS(PrunerSpec(Scoring::Magnitude, Schedule::AtInit, Tuning::Finetune, 0.5), ConfigError);
  CHECK_THROWS_AS(PrunerSpec(Scoring::Magnitude, Schedule::Iterative, Tuning::None, 0.5), ConfigError);
  CHECK_THROWS_AS(PrunerSpec(Scoring::Magnitude, Schedule::AtInit, Tuning::None, 0.0), ConfigError);
  CHECK_THROWS_AS(PrunerSpec(Scoring::Magnitude, Schedule::AtInit, Tuning::None, 1.0), ConfigError);
  CHECK_THROWS_AS(PrunerSpec::from_id("RP-WR", 0.5), ConfigError);
}

TEST_CASE("per_iteration_fraction") {
  CHECK(per_iteration_fraction(0.488) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(per_iteration_fraction(0.0) == 0.0);
  CHECK(per_iteration_fraction(0.99) == doctest::Approx(0.78456).epsilon(1e-5));
  for (double t : kStandardThresholds) CHECK(std::pow(1.0 - per_iteration_fraction(t), 3) == doctest::Approx(1.0 - t));
  CHECK_THROWS_AS(per_iteration_fraction(1.0), ConfigError);
  CHECK_THROWS_AS(per_iteration_fraction(-0.1), ConfigError);
}

TEST_CASE("prune_step examples") {
  SUBCASE("two lowest go") {
    const auto m = prune_step(one_layer_mask(4), one_layer_scores({0.5, 0.1, 0.9, 0.2}), 0.5);
    CHECK(pruned_positions(m) == std::vector<std::size_t>{1, 3});
  }
  SUBCASE("ties go to the lower flat index") {
    const auto m = prune_step(one_layer_mask(4), one_layer_scores({0.3, 0.3, 0.3, 0.3}), 0.25);
    CHECK(pruned_positions(m) == std::vector<std::size_t>{0});
  }
  SUBCASE("r = 0 is the identity") {
    const auto base = one_layer_mask(4);
    CHECK(prune_step(base, one_layer_scores({0.5, 0.1, 0.9, 0.2}), 0.0) == base);
  }
  SUBCASE("scores of pruned positions are ignored") {
    auto base = one_layer_mask(4);
    base.entries[0].active[1] = 0;
    // position 1 has the lowest score but is already gone: the next lowest active goes
    const auto m = prune_step(base, one_layer_scores({0.5, 0.0, 0.9, 0.2}), 0.34);
    CHECK(pruned_positions(m) == std::vector<std::size_t>{1, 3});
  }
  SUBCASE("misaligned scores are an error") {
    CHECK_THROWS(prune_step(one_layer_mask(4), one_layer_scores({0.1, 0.2}), 0.5));
  }
}

TEST_CASE("prune_step properties: monotone, floor counts, lowest scores") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    auto mask = one_layer_mask(n);
    for (int step = 0; step < 3; ++step) {
      std::vector<double> s(n);
      // coarse values force plenty of ties
      for (auto& v : s) v = static_cast<double>(rng.below(5)) / 4.0;
      const double r = rng.uniform();
      const auto next = prune_step(mask, one_layer_scores(s), r);
      CHECK(is_monotone(mask, next));
      const auto before = mask.entries[0].active_count();
      const auto removed = before - next.entries[0].active_count();
      CHECK(removed == static_cast<std::int64_t>(std::floor(r * static_cast<double>(before) + 1e-9)));
      // every newly pruned position scores <= every surviving one, and among
      // equal scores the lower index goes first
      for (std::size_t a = 0; a < n; ++a) {
        if (!(mask.entries[0].active[a] && !next.entries[0].active[a])) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (!next.entries[0].active[b]) continue;
          CHECK(s[a] <= s[b]);
          if (s[a] == s[b]) CHECK(a < b);
        }
      }
      mask = next;
    }
  }
}

TEST_CASE("score: magnitude, impact and random") {
  const auto spec = small_spec(nn::Family::MeanEmbeddingMlp);
  auto params = nn::init_params<float>(spec, 1);
  params["hidden.weight"](0, 0) = -0.7F;
  params["hidden.weight"](0, 1) = 0.5F;
  const auto data = small_data(spec, 10);

  SUBCASE("magnitude") {
    const auto s = score(params, Scoring::Magnitude, {}, 0);
    CHECK(s.entries.size() == 1);
    CHECK(s.entries[0].layer == "hidden.weight");
    CHECK(s.entries[0].scores[0] == doctest::Approx(0.7).epsilon(1e-7));
    CHECK(s.entries[0].scores[1] == doctest::Approx(0.5));
  }
  SUBCASE("impact is |w * sum of per-example gradients|") {
    const auto s = score(params, Scoring::Impact, data, 0);
    // oracle: accumulate one-example gradients in double
    nn::Matrix<double> summed = nn::Matrix<double>::Zero(params["hidden.weight"].rows(), params["hidden.weight"].cols());
    const auto idx = params.index_of("hidden.weight");
    for (const auto& ex : data)
      summed += nn::backward<float>(params, std::span(&ex, 1)).grads[idx].cast<double>();
    const auto& w = params["hidden.weight"];
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double expected = std::abs(static_cast<double>(w.data()[k]) * summed.data()[k]);
      CHECK(s.entries[0].scores[static_cast<std::size_t>(k)] == doctest::Approx(expected).epsilon(1e-4).scale(1e-6));
    }
    CHECK(s.entries[0].scores[1] == doctest::Approx(std::abs(0.5 * summed.data()[1])).epsilon(1e-4));
  }
  SUBCASE("random is seeded and in [0, 1)") {
    const auto a = score(params, Scoring::Random, {}, 5);
    const auto b = score(params, Scoring::Random, {}, 5);
    const auto c = score(params, Scoring::Random, {}, 6);
    CHECK(a.entries[0].scores == b.entries[0].scores);
    CHECK(a.entries[0].scores != c.entries[0].scores);
    for (double v : a.entries[0].scores) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("only prunable arrays are scored") {
    const auto bl = nn::init_params<float>(small_spec(nn::Family::BiLstm), 0);
    std::set<std::string> names;
    for (const auto& e : score(bl, Scoring::Magnitude, {}, 0).entries) names.insert(e.layer);
    CHECK(names == std::set<std::string>{"lstm_fwd.weight_ih", "lstm_fwd.weight_hh", "lstm_bwd.weight_ih",
                                         "lstm_bwd.weight_hh"});
  }
}

TEST_CASE("sample_examples draws without replacement") {
  const auto data = small_data(small_spec(nn::Family::MeanEmbeddingMlp), 48);
  const auto s = sample_examples(data, 20, 3);
  std::set<std::int64_t> ids;
  for (const auto& ex : s) ids.insert(ex.id);
  CHECK(ids.size() == 20);
  CHECK(sample_examples(data, 20, 3).front().id == s.front().id);
  CHECK(sample_examples(data, 100, 3).size() == 48);
}

TEST_CASE("rewind_weights") {
  const auto spec = small_spec(nn::Family::MeanEmbeddingMlp);
  const auto initial = nn::init_params<float>(spec, 2);
  auto trained = initial;
  for (auto& l : trained.layers) l.value.array() += 0.25F;

  SUBCASE("empty mask gives the initial weights exactly") {
    const auto r = rewind_weights(trained, initial, PruneMask{});
    for (std::size_t i = 0; i < r.layers.size(); ++i) CHECK(r.layers[i].value == initial.layers[i].value);
  }
  SUBCASE("mask dominates; active positions bit-equal the initialization") {
    auto mask = PruneMask::full(initial);
    auto& e = mask.entries[0];
    for (std::size_t k = 0; k < e.active.size(); k += 2) e.active[k] = 0;
    const auto r = rewind_weights(trained, initial, mask);
    const float* w = r[e.layer].data();
    const float* w0 = initial[e.layer].data();
    for (std::size_t k = 0; k < e.active.size(); ++k) {
      if (e.active[k]) CHECK(w[k] == w0[k]);
      else CHECK(w[k] == 0.0F);
    }
  }
  SUBCASE("shape mismatch") {
    const auto other = nn::init_params<float>(small_spec(nn::Family::BiLstm), 2);
    CHECK_THROWS(rewind_weights(trained, other, PruneMask{}));
  }
}

TEST_CASE("mask_stats") {
  SUBCASE("BiLSTM: nearly everything prunable, effective close to nominal") {
    const auto p = nn::init_params<float>({nn::Family::BiLstm, 10, 32, 32, 3, LabelKind::Single}, 0);
    const auto m = prune_step(PruneMask::full(p), score(p, Scoring::Magnitude, {}, 0), 0.2);
    const auto st = mask_stats(m, p);
    CHECK(st.nominal_pruned_fraction == doctest::Approx(0.2).epsilon(1e-3));
    CHECK(st.effective_pruned_fraction > 0.18);
    CHECK(st.effective_pruned_fraction <= 0.2);
  }
  SUBCASE("half the parameters non-prunable") {
    nn::ParamSet<float> p;
    p.layers.push_back({"w", nn::Role::Dense, nn::Matrix<float>::Ones(2, 5)});
    p.layers.push_back({"b", nn::Role::Bias, nn::Matrix<float>::Ones(10, 1)});
    auto m = one_layer_mask(10);
    for (std::size_t k = 0; k < 5; ++k) m.entries[0].active[k] = 0;
    const auto st = mask_stats(m, p);
    CHECK(st.nominal_pruned_fraction == 0.5);
    CHECK(st.effective_pruned_fraction == 0.25);
  }
  SUBCASE("empty mask") {
    const auto p = nn::init_params<float>(small_spec(nn::Family::MeanEmbeddingMlp), 0);
    const auto st = mask_stats(PruneMask{}, p);
    CHECK(st.nominal_pruned_fraction == 0.0);
    CHECK(st.effective_pruned_fraction == 0.0);
  }
}

TEST_CASE("run_pruner schedule bookkeeping") {
  const auto spec = small_spec(nn::Family::MeanEmbeddingMlp);
  const auto data = small_data(spec);

  SUBCASE("at_init: one transition before epoch 1, N epochs") {
    std::vector<int> epochs;
    const auto run = run_pruner(PrunerSpec::from_id("MP-AI", 0.2), spec, 0, data, small_hyper(3),
                                [&](const nn::TrainState& s) { epochs.push_back(s.epoch); });
    REQUIRE(run.events.size() == 1);
    CHECK(run.events[0].after_epoch == 0);
    CHECK(run.total_epochs == 3);
    CHECK(epochs == std::vector<int>{1, 2, 3});
  }
  SUBCASE("iterative N=2: 8 epochs, transitions after 2, 4, 6") {
    for (const char* id : {"IMP-FT", "IMP-WR", "IIBP-FT", "IRP-FT"}) {
      std::vector<int> epochs;
      const auto run = run_pruner(PrunerSpec::from_id(id, 0.5), spec, 0, data, small_hyper(2),
                                  [&](const nn::TrainState& s) { epochs.push_back(s.epoch); });
      REQUIRE(run.events.size() == 3);
      CHECK(run.events[0].after_epoch == 2);
      CHECK(run.events[1].after_epoch == 4);
      CHECK(run.events[2].after_epoch == 6);
      CHECK(run.total_epochs == 8);
      CHECK(run.epoch_losses.size() == 8);
      CHECK(epochs == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
    }
  }
}

TEST_CASE("run_pruner exactness, monotonicity and masked zeros") {
  for (auto family : {nn::Family::MeanEmbeddingMlp, nn::Family::BiLstm}) {
    const auto spec = small_spec(family);
    const auto data = small_data(spec);
    for (const auto& id : canonical_ids()) {
      for (double t : kStandardThresholds) {
        const auto ps = PrunerSpec::from_id(id, t);
        PruneMask previous = PruneMask::full(nn::init_params<float>(spec, 4));
        bool monotone = true;
        bool zeros = true;
        const auto check_zeros = [&](const nn::TrainState& s) {
          for (const auto& e : s.mask.entries) {
            const float* w = s.params[e.layer].data();
            for (std::size_t k = 0; k < e.active.size(); ++k)
              if (!e.active[k] && w[k] != 0.0F) zeros = false;
          }
        };
        const auto run = run_pruner(
            ps, spec, 4, data, small_hyper(1), check_zeros, [&](const PruneEvent&, const nn::TrainState& s) {
              monotone &= is_monotone(previous, s.mask);
              previous = s.mask;
              check_zeros(s);
            });
        INFO(id << " @ " << t << " family " << nn::to_string(family));
        CHECK(monotone);
        CHECK(zeros);
        const bool iterative = ps.schedule() == Schedule::Iterative;
        const double r = iterative ? per_iteration_fraction(t) : t;
        for (const auto& e : run.final_state.mask.entries) {
          const auto n = static_cast<std::int64_t>(e.active.size());
          CHECK(e.active_count() == oracle_active(n, r, iterative ? 3 : 1));
          const double pruned = 1.0 - static_cast<double>(e.active_count()) / static_cast<double>(n);
          CHECK(std::abs(pruned - t) <= 3.0 / static_cast<double>(n));
          CHECK(pruned <= t + 1e-12);
        }
        std::set<std::string> masked;
        for (const auto& e : run.final_state.mask.entries) masked.insert(e.layer);
        for (const auto& l : run.final_state.params.layers) CHECK(masked.count(l.name) == (l.prunable() ? 1U : 0U));
      }
    }
  }
}

TEST_CASE("rewinding resets weights and the optimizer at every event") {
  const auto spec = small_spec(nn::Family::BiLstm);
  const auto data = small_data(spec);
  const auto initial = nn::init_params<float>(spec, 9);
  int events = 0;
  run_pruner(PrunerSpec::from_id("IIBP-WR", 0.7), spec, 9, data, small_hyper(1), {},
             [&](const PruneEvent&, const nn::TrainState& s) {
               ++events;
               for (std::size_t i = 0; i < s.params.layers.size(); ++i) {
                 const auto& w = s.params.layers[i].value;
                 const auto* e = s.mask.find(s.params.layers[i].name);
                 for (Eigen::Index k = 0; k < w.size(); ++k) {
                   const bool active = !e || e->active[static_cast<std::size_t>(k)];
                   REQUIRE(w.data()[k] == (active ? initial.layers[i].value.data()[k] : 0.0F));
                 }
               }
               CHECK(s.optimizer == nn::OptimizerState<float>::fresh(s.params));
             });
  CHECK(events == 3);
}

TEST_CASE("run_pruner is deterministic") {
  const auto spec = small_spec(nn::Family::MeanEmbeddingMlp);
  const auto data = small_data(spec);
  const auto a = run_pruner(PrunerSpec::from_id("IIBP-FT", 0.9), spec, 1, data, small_hyper(1));
  const auto b = run_pruner(PrunerSpec::from_id("IIBP-FT", 0.9), spec, 1, data, small_hyper(1));
  CHECK(a.final_state.mask == b.final_state.mask);
  for (std::size_t i = 0; i < a.final_state.params.layers.size(); ++i)
    CHECK(a.final_state.params.layers[i].value == b.final_state.params.layers[i].value);
}
