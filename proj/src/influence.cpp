#include "pielab/influence.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <numeric>
#include <optional>
#include <thread>

#include "pielab/nn/checkpoint.hpp"

namespace pielab::influence {

double el2n(std::span<const double> p, std::span<const double> y, LabelKind kind) {
  if (p.size() != y.size() || p.empty())
    throw Error("el2n: probability vector has " + std::to_string(p.size()) + " entries, target has " +
                std::to_string(y.size()));
  if (kind == LabelKind::Single) {
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-5) throw NumericError("el2n: probabilities sum to " + format_stat(sum) + ", not 1");
    int ones = 0;
    for (double v : y) {
      if (v != 0.0 && v != 1.0) throw Error("el2n: single-label target must be one-hot");
      ones += v == 1.0;
    }
    if (ones != 1) throw Error("el2n: single-label target must be one-hot");
  }
  double ss = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) ss += (p[c] - y[c]) * (p[c] - y[c]);
  return std::sqrt(ss);
}

int monitor_start_epoch(int total_epochs) {
  if (total_epochs < 1) throw Error("monitor_start_epoch needs at least one epoch");
  // smallest integer e with 10 e > 3 total, in exact integer arithmetic
  return std::max(1, 3 * total_epochs / 10 + 1);
}

std::vector<double> mean_over_checkpoints(std::span<const nn::Matrix<float>> per_epoch_probs,
                                          std::span<const corpus::EncodedExample> examples, LabelKind kind) {
  if (per_epoch_probs.empty()) throw Error("no checkpoints to average");
  std::vector<double> out(examples.size(), 0.0);
  std::vector<double> p, y;
  for (const auto& probs : per_epoch_probs) {
    if (static_cast<std::size_t>(probs.rows()) != examples.size()) throw Error("checkpoint predictions misaligned");
    for (std::size_t i = 0; i < examples.size(); ++i) {
      p.assign(static_cast<std::size_t>(probs.cols()), 0.0);
      for (Eigen::Index c = 0; c < probs.cols(); ++c) p[static_cast<std::size_t>(c)] = probs(static_cast<Eigen::Index>(i), c);
      y.assign(examples[i].label_vector.begin(), examples[i].label_vector.end());
      out[i] += el2n(p, y, kind);
    }
  }
  for (auto& v : out) v /= static_cast<double>(per_epoch_probs.size());
  return out;
}

Profile profile(const harness::RunData& run, const harness::Condition& source, int jobs) {
  const auto data = harness::encode_corpus(run.corpus, run.config);
  const auto kind = run.corpus.label_space.kind;
  Profile prof;
  prof.source = source;
  prof.total_epochs = run.total_epochs(source);
  prof.monitor_start = monitor_start_epoch(prof.total_epochs);
  prof.n_initializations = run.config.n_initializations;
  for (const auto& ex : data.train) prof.example_ids.push_back(ex.id);

  const auto n_init = static_cast<std::size_t>(prof.n_initializations);
  std::vector<std::vector<double>> per_init(n_init);
  std::vector<std::exception_ptr> errors(n_init);
  const auto score_init = [&](std::size_t k) {
    try {
      std::vector<nn::Matrix<float>> probs;
      for (int e = prof.monitor_start; e <= prof.total_epochs; ++e) {
        const auto file = run.layout.checkpoint(source, static_cast<int>(k), e);
        if (!std::filesystem::exists(file))
          throw MissingInputError("missing checkpoint for EL2N monitoring: " + file.string());
        const auto ckpt = nn::load_checkpoint(file);
        if (!(ckpt.params.spec == data.model)) throw FormatError("checkpoint " + file.string() + " has a different model");
        probs.push_back(nn::predict<float>(ckpt.params, data.train));
      }
      per_init[k] = mean_over_checkpoints(probs, data.train, kind);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const auto n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, n_init);
  if (n_threads == 1) {
    for (std::size_t k = 0; k < n_init; ++k) score_init(k);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < n_init; k += n_threads) score_init(k);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // reduce in initialization order so the sum is independent of scheduling
  prof.scores.assign(data.train.size(), 0.0);
  for (const auto& s : per_init)
    for (std::size_t i = 0; i < s.size(); ++i) prof.scores[i] += s[i];
  for (auto& v : prof.scores) v /= static_cast<double>(n_init);
  return prof;
}

Bins make_bins(std::span<const double> scores, std::span<const std::int64_t> example_ids, int k) {
  if (scores.size() != example_ids.size()) throw Error("make_bins: scores and ids differ in length");
  if (k < 1) throw Error("make_bins: need at least one bin");
  const auto n = scores.size();
  if (n < static_cast<std::size_t>(k))
    throw Error("cannot split " + std::to_string(n) + " examples into " + std::to_string(k) + " bins");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return example_ids[a] < example_ids[b];
  });
  Bins bins;
  const auto base = n / static_cast<std::size_t>(k);
  const auto extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < static_cast<std::size_t>(k); ++b) {
    const auto size = base + (b < extra ? 1 : 0);
    bins.members.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                              order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return bins;
}

std::vector<double> pie_fraction_per_bin(const Bins& bins, std::span<const std::int64_t> example_ids,
                                         std::span<const pie::Verdict> verdicts) {
  if (verdicts.size() != example_ids.size()) throw Error("PIE verdicts and influence profile cover different splits");
  for (std::size_t i = 0; i < verdicts.size(); ++i)
    if (verdicts[i].example_id != example_ids[i]) throw Error("PIE verdicts and influence profile are not aligned");
  std::vector<double> out;
  for (const auto& members : bins.members) {
    std::size_t pies = 0;
    for (auto row : members) pies += verdicts[row].is_pie;
    out.push_back(members.empty() ? 0.0 : static_cast<double>(pies) / static_cast<double>(members.size()));
  }
  return out;
}

std::vector<ConditionBins> analyze_run(const harness::RunData& run, const AnalysisOptions& options) {
  std::vector<ConditionBins> out;
  std::optional<Profile> baseline;
  std::string combined = "pruner_id,threshold,bin_index,size,pie_fraction\n";
  for (const auto& cond : harness::conditions(run.config)) {
    if (!cond.pruned()) continue;
    Profile prof;
    if (options.pruned_source) {
      prof = profile(run, cond, options.jobs);
    } else {
      if (!baseline) baseline = profile(run, harness::Condition{}, options.jobs);
      prof = *baseline;
    }
    const auto verdicts = pie::verdicts_for(run, cond, "train");
    const auto bins = make_bins(prof.scores, prof.example_ids, options.bins);
    ConditionBins cb{cond, {}, pie_fraction_per_bin(bins, prof.example_ids, verdicts)};

    std::vector<int> bin_of(prof.scores.size(), 0);
    for (std::size_t b = 0; b < bins.members.size(); ++b) {
      cb.sizes.push_back(bins.members[b].size());
      for (auto row : bins.members[b]) bin_of[row] = static_cast<int>(b) + 1;
    }
    std::string influence_csv = "example_id,el2n,bin_index\n";
    for (std::size_t i = 0; i < prof.scores.size(); ++i)
      influence_csv += std::to_string(prof.example_ids[i]) + "," + format_stat(prof.scores[i]) + "," +
                       std::to_string(bin_of[i]) + "\n";
    std::string bins_csv = "bin_index,size,pie_fraction\n";
    for (std::size_t b = 0; b < cb.sizes.size(); ++b) {
      const auto row = std::to_string(b + 1) + "," + std::to_string(cb.sizes[b]) + "," + format_stat(cb.pie_fractions[b]);
      bins_csv += row + "\n";
      combined += cond.pruner_id + "," + format_threshold(cond.threshold) + "," + row + "\n";
    }
    const auto dir = run.layout.analysis() / cond.directory_name() / "train";
    harness::write_file(dir / "influence.csv", influence_csv);
    harness::write_file(dir / "influence_bins.csv", bins_csv);
    const nlohmann::json meta{{"source_condition", prof.source.directory_name()},
                              {"monitor_start_epoch", prof.monitor_start},
                              {"total_epochs", prof.total_epochs},
                              {"n_initializations", prof.n_initializations},
                              {"bins", options.bins}};
    harness::write_file(dir / "influence.json", meta.dump(2) + "\n");
    out.push_back(std::move(cb));
  }
  harness::write_file(run.layout.analysis() / "influence_bins.csv", combined);
  return out;
}

}  // namespace pielab::influence
