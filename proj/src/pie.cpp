#include "pielab/pie.hpp"

#include <algorithm>
#include <numeric>

namespace pielab::pie {

using harness::PredictionMatrix;

int majority_class(std::span<const int> votes) {
  if (votes.empty()) throw Error("majority_class needs at least one vote");
  const int max_class = *std::max_element(votes.begin(), votes.end());
  if (*std::min_element(votes.begin(), votes.end()) < 0) throw Error("negative class index in votes");
  std::vector<int> counts(static_cast<std::size_t>(max_class) + 1, 0);
  for (int v : votes) ++counts[static_cast<std::size_t>(v)];
  // max_element returns the first maximum: the smallest tied class
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

ClassSet majority_set(std::span<const int> counts, int n) {
  if (n < 1) throw Error("majority_set needs at least one initialization");
  ClassSet out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 0 || counts[c] > n)
      throw Error("vote count " + std::to_string(counts[c]) + " outside [0, " + std::to_string(n) + "]");
    // count > n/2 without floating point
    if (2 * counts[c] > n) out.push_back(static_cast<int>(c));
  }
  return out;
}

ClassSet majority(const PredictionMatrix& m, std::size_t row, LabelKind kind) {
  const auto r = static_cast<Eigen::Index>(row);
  if (kind == LabelKind::Single) {
    std::vector<int> votes;
    for (const auto& probs : m.per_init) votes.push_back(harness::argmax(probs, r));
    return {majority_class(votes)};
  }
  std::vector<int> counts(static_cast<std::size_t>(m.n_classes()), 0);
  for (const auto& probs : m.per_init)
    for (int c : harness::predicted_set(probs, r)) ++counts[static_cast<std::size_t>(c)];
  return majority_set(counts, m.n_initializations());
}

std::vector<Verdict> detect_pies(const PredictionMatrix& pruned, const PredictionMatrix& unpruned, LabelKind kind) {
  if (pruned.split != unpruned.split)
    throw Error("PIE detection across different splits (" + pruned.split + " vs " + unpruned.split + ")");
  if (pruned.n_initializations() != unpruned.n_initializations())
    throw Error("pruned and unpruned conditions need the same number of initializations (" +
                std::to_string(pruned.n_initializations()) + " vs " + std::to_string(unpruned.n_initializations()) + ")");
  if (pruned.n_initializations() < 1) throw Error("PIE detection needs at least one initialization");
  if (pruned.example_ids != unpruned.example_ids) throw Error("pruned and unpruned predictions cover different examples");
  if (pruned.n_classes() != unpruned.n_classes()) throw Error("pruned and unpruned class counts differ");
  std::vector<Verdict> out;
  out.reserve(pruned.n_examples());
  for (std::size_t i = 0; i < pruned.n_examples(); ++i) {
    Verdict v{pruned.example_ids[i], false, majority(pruned, i, kind), majority(unpruned, i, kind)};
    v.is_pie = v.pruned_majority != v.unpruned_majority;
    out.push_back(std::move(v));
  }
  return out;
}

double pie_fraction(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) return 0.0;
  const auto n = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.is_pie; });
  return static_cast<double>(n) / static_cast<double>(verdicts.size());
}

std::vector<std::size_t> pie_rows(std::span<const Verdict> verdicts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < verdicts.size(); ++i)
    if (verdicts[i].is_pie) out.push_back(i);
  return out;
}

ClassDistribution class_distribution(std::span<const Verdict> verdicts, std::span<const std::vector<int>> gold,
                                     std::span<const std::int64_t> train_frequencies) {
  if (verdicts.size() != gold.size()) throw Error("class_distribution: verdicts and gold labels differ in length");
  const auto C = train_frequencies.size();
  ClassDistribution d;
  d.class_order.resize(C);
  std::iota(d.class_order.begin(), d.class_order.end(), 0);
  std::stable_sort(d.class_order.begin(), d.class_order.end(), [&](int a, int b) {
    return train_frequencies[static_cast<std::size_t>(a)] > train_frequencies[static_cast<std::size_t>(b)];
  });
  std::vector<double> all(C, 0.0), pies(C, 0.0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (int c : gold[i]) {
      all.at(static_cast<std::size_t>(c)) += 1.0;
      if (verdicts[i].is_pie) pies[static_cast<std::size_t>(c)] += 1.0;
    }
  }
  const auto normalize = [](std::vector<double>& h) {
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    if (total > 0.0)
      for (auto& v : h) v /= total;
  };
  normalize(all);
  normalize(pies);
  for (int c : d.class_order) {
    d.train_frequency.push_back(train_frequencies[static_cast<std::size_t>(c)]);
    d.all.push_back(all[static_cast<std::size_t>(c)]);
    d.pies.push_back(pies[static_cast<std::size_t>(c)]);
  }
  return d;
}

std::optional<SubsetAccuracy> subset_accuracy(const PredictionMatrix& m, std::span<const std::vector<int>> gold,
                                              LabelKind kind, std::span<const std::size_t> rows) {
  if (gold.size() != m.n_examples()) throw Error("subset_accuracy: gold labels and predictions differ in length");
  if (rows.empty()) return std::nullopt;
  const auto correct = [&](const ClassSet& predicted, std::size_t row) {
    if (kind == LabelKind::Single) return predicted.size() == 1 && gold[row].size() == 1 && predicted[0] == gold[row][0];
    ClassSet g = gold[row];
    std::sort(g.begin(), g.end());
    return predicted == g;
  };
  SubsetAccuracy out;
  out.n_examples = rows.size();
  std::vector<double> per_init;
  for (const auto& probs : m.per_init) {
    std::size_t hits = 0;
    for (auto row : rows) {
      const auto r = static_cast<Eigen::Index>(row);
      const ClassSet predicted = kind == LabelKind::Single ? ClassSet{harness::argmax(probs, r)}
                                                            : harness::predicted_set(probs, r);
      hits += correct(predicted, row);
    }
    per_init.push_back(static_cast<double>(hits) / static_cast<double>(rows.size()));
  }
  out.per_init = harness::mean_std(per_init);
  std::size_t hits = 0;
  for (auto row : rows) hits += correct(majority(m, row, kind), row);
  out.majority_vote = static_cast<double>(hits) / static_cast<double>(rows.size());
  return out;
}

std::string format_class_set(const ClassSet& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(s[i]);
  }
  return out;
}

std::string pies_csv(std::span<const Verdict> verdicts) {
  std::string out = "example_id,is_pie,pruned_majority,unpruned_majority\n";
  for (const auto& v : verdicts)
    out += std::to_string(v.example_id) + (v.is_pie ? ",1," : ",0,") + format_class_set(v.pruned_majority) + "," +
           format_class_set(v.unpruned_majority) + "\n";
  return out;
}

std::vector<Verdict> verdicts_for(const harness::RunData& run, const harness::Condition& condition,
                                  std::string_view split) {
  return detect_pies(run.predictions(condition, split), run.predictions(harness::Condition{}, split),
                     run.corpus.label_space.kind);
}

namespace {

std::string accuracy_cells(const std::optional<SubsetAccuracy>& a) {
  if (!a) return "0,undefined,undefined,undefined";
  return std::to_string(a->n_examples) + "," + format_stat(a->per_init.mean) + "," + format_stat(a->per_init.std) +
         "," + format_stat(a->majority_vote);
}

}  // namespace

std::vector<ConditionReport> analyze_run(const harness::RunData& run) {
  const auto kind = run.corpus.label_space.kind;
  const auto C = run.corpus.label_space.num_classes();
  const auto train_freq = corpus::class_frequencies(run.corpus.train, C);
  std::vector<ConditionReport> reports;
  for (auto split : harness::kPredictionSplits) {
    const auto unpruned = run.predictions(harness::Condition{}, split);
    const auto gold = run.gold(split);
    std::vector<std::size_t> all_rows(gold.size());
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    const auto unpruned_all = subset_accuracy(unpruned, gold, kind, all_rows);
    for (const auto& cond : harness::conditions(run.config)) {
      if (!cond.pruned()) continue;
      const auto pruned = run.predictions(cond, split);
      ConditionReport r;
      r.condition = cond;
      r.split = std::string(split);
      r.verdicts = detect_pies(pruned, unpruned, kind);
      r.pie_fraction = pie_fraction(r.verdicts);
      r.distribution = class_distribution(r.verdicts, gold, train_freq);
      const auto rows = pie_rows(r.verdicts);
      r.pruned_all = subset_accuracy(pruned, gold, kind, all_rows);
      r.unpruned_all = unpruned_all;
      r.pruned_pies = subset_accuracy(pruned, gold, kind, rows);
      r.unpruned_pies = subset_accuracy(unpruned, gold, kind, rows);
      harness::write_file(run.layout.analysis() / cond.directory_name() / std::string(split) / "pies.csv",
                          pies_csv(r.verdicts));
      reports.push_back(std::move(r));
    }
  }

  std::string occurrence = "pruner_id,threshold,split,examples,pies,pie_fraction\n";
  std::string accuracy =
      "pruner_id,threshold,split,subset,condition,examples,per_init_mean,per_init_std,majority_vote\n";
  std::string distribution = "pruner_id,threshold,split,rank,class_index,class_name,train_frequency,all_fraction,pie_fraction\n";
  for (const auto& r : reports) {
    const auto prefix = r.condition.pruner_id + "," + format_threshold(r.condition.threshold) + "," + r.split + ",";
    occurrence += prefix + std::to_string(r.verdicts.size()) + "," + std::to_string(pie_rows(r.verdicts).size()) + "," +
                  format_stat(r.pie_fraction) + "\n";
    accuracy += prefix + "all,pruned," + accuracy_cells(r.pruned_all) + "\n";
    accuracy += prefix + "all,unpruned," + accuracy_cells(r.unpruned_all) + "\n";
    accuracy += prefix + "pies,pruned," + accuracy_cells(r.pruned_pies) + "\n";
    accuracy += prefix + "pies,unpruned," + accuracy_cells(r.unpruned_pies) + "\n";
    for (std::size_t k = 0; k < r.distribution.class_order.size(); ++k) {
      const int c = r.distribution.class_order[k];
      distribution += prefix + std::to_string(k) + "," + std::to_string(c) + "," +
                      csv_field(run.corpus.label_space.class_names[static_cast<std::size_t>(c)]) + "," +
                      std::to_string(r.distribution.train_frequency[k]) + "," + format_stat(r.distribution.all[k]) +
                      "," + format_stat(r.distribution.pies[k]) + "\n";
    }
  }
  harness::write_file(run.layout.analysis() / "pie_occurrence.csv", occurrence);
  harness::write_file(run.layout.analysis() / "pie_accuracy.csv", accuracy);
  harness::write_file(run.layout.analysis() / "pie_class_distribution.csv", distribution);
  return reports;
}

}  // namespace pielab::pie
