#include <doctest.h>

#include <cmath>

#include "pielab/pie.hpp"
#include "pie_oracle.hpp"

using namespace pielab;
using namespace pielab::pie;
using harness::PredictionMatrix;

namespace {

// Single-label matrix whose initialization k votes for votes[k][row] with
// probability 0.8 (the rest spread evenly).
PredictionMatrix vote_matrix(const std::vector<std::vector<int>>& votes, int n_classes, std::string split = "test") {
  std::vector<std::vector<std::vector<float>>> probs;
  for (const auto& init : votes) {
    std::vector<std::vector<float>> rows;
    for (int v : init) {
      std::vector<float> p(static_cast<std::size_t>(n_classes), 0.2F / static_cast<float>(n_classes - 1));
      p[static_cast<std::size_t>(v)] = 0.8F;
      rows.push_back(p);
    }
    probs.push_back(rows);
  }
  return testing::to_matrix(probs, std::move(split));
}

}  // namespace

TEST_CASE("majority_class: mode with ties to the smallest class") {
  CHECK(majority_class(std::vector<int>{2, 2, 1}) == 2);
  CHECK(majority_class(std::vector<int>{2, 1, 2, 1}) == 1);
  CHECK(majority_class(std::vector<int>{3, 0, 1, 2}) == 0);
  CHECK(majority_class(std::vector<int>{4}) == 4);
  CHECK_THROWS(majority_class(std::vector<int>{}));
}

TEST_CASE("majority_set: strictly more than N/2") {
  CHECK(majority_set(std::vector<int>{3, 2, 0}, 5) == ClassSet{0});
  CHECK(majority_set(std::vector<int>{2, 3, 2}, 4) == ClassSet{1});  // 2 of 4 is not a majority
  CHECK(majority_set(std::vector<int>{1, 1}, 2).empty());
  CHECK(majority_set(std::vector<int>{1, 0, 1}, 1) == (ClassSet{0, 2}));
  CHECK_THROWS(majority_set(std::vector<int>{6}, 5));
  CHECK_THROWS(majority_set(std::vector<int>{1}, 0));
}

TEST_CASE("detect_pies: worked single-label example") {
  // row 0: pruned {0,0,1} -> 0, unpruned {0,1,1} -> 1  => PIE
  // row 1: pruned {2,2,2} -> 2, unpruned {2,0,2} -> 2  => not
  // row 2: pruned {0,1,2} -> 0 (tie), unpruned {2,1,0} -> 0 (tie) => not
  const auto pruned = vote_matrix({{0, 2, 0}, {0, 2, 1}, {1, 2, 2}}, 3);
  const auto unpruned = vote_matrix({{0, 2, 2}, {1, 0, 1}, {1, 2, 0}}, 3);
  const auto v = detect_pies(pruned, unpruned, LabelKind::Single);
  REQUIRE(v.size() == 3);
  CHECK(v[0].is_pie);
  CHECK(v[0].pruned_majority == ClassSet{0});
  CHECK(v[0].unpruned_majority == ClassSet{1});
  CHECK_FALSE(v[1].is_pie);
  CHECK_FALSE(v[2].is_pie);
  CHECK(v[0].example_id == 100);
  CHECK(pie_fraction(v) == doctest::Approx(1.0 / 3.0));
  CHECK(pie_rows(v) == std::vector<std::size_t>{0});
}

TEST_CASE("detect_pies: multi-label majority sets, both-empty counts as agreement") {
  // 2 inits, 3 classes. pruned: both positive on class 0; unpruned: one each.
  std::vector<std::vector<std::vector<float>>> pruned = {{{0.9F, 0.1F, 0.5F}, {0.1F, 0.1F, 0.1F}},
                                                         {{0.7F, 0.6F, 0.5F}, {0.9F, 0.1F, 0.1F}}};
  std::vector<std::vector<std::vector<float>>> unpruned = {{{0.9F, 0.1F, 0.5F}, {0.1F, 0.1F, 0.1F}},
                                                           {{0.2F, 0.6F, 0.5F}, {0.1F, 0.1F, 0.1F}}};
  const auto v = detect_pies(testing::to_matrix(pruned), testing::to_matrix(unpruned), LabelKind::Multi);
  // row 0: pruned {0,2} (0.5 counts as positive), unpruned {2} => PIE
  CHECK(v[0].pruned_majority == (ClassSet{0, 2}));
  CHECK(v[0].unpruned_majority == ClassSet{2});
  CHECK(v[0].is_pie);
  // row 1: pruned class 0 has 1 of 2 votes -> empty; unpruned empty => agree
  CHECK(v[1].pruned_majority.empty());
  CHECK(v[1].unpruned_majority.empty());
  CHECK_FALSE(v[1].is_pie);
}

TEST_CASE("detect_pies rejects mismatched inputs") {
  const auto a = vote_matrix({{0, 1}, {1, 1}}, 2);
  CHECK_THROWS(detect_pies(a, vote_matrix({{0, 1}}, 2), LabelKind::Single));
  CHECK_THROWS(detect_pies(a, vote_matrix({{0, 1}, {1, 1}}, 2, "train"), LabelKind::Single));
  auto shifted = a;
  shifted.example_ids[0] = 7;
  CHECK_THROWS(detect_pies(a, shifted, LabelKind::Single));
}

TEST_CASE("detect_pies agrees with the brute-force oracle on random matrices") {
  Rng rng(2024);
  int trials = 0, pies = 0, non_pies = 0;
  for (auto kind : {LabelKind::Single, LabelKind::Multi}) {
    for (int t = 0; t < 600; ++t, ++trials) {
      const auto c = testing::random_oracle_case(rng, kind, 8);
      const auto expected = testing::oracle_pies(c, kind);
      const auto got = detect_pies(testing::to_matrix(c.pruned), testing::to_matrix(c.unpruned), kind);
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].is_pie == expected[i]);
        REQUIRE(got[i].pruned_majority == testing::oracle_majority(c.pruned, i, c.n_classes, kind));
        (expected[i] ? pies : non_pies) += 1;
      }
    }
  }
  CHECK(trials == 1200);
  CHECK(pies > 0);
  CHECK(non_pies > 0);
}

TEST_CASE("PIE detection is symmetric and reflexive") {
  Rng rng(7);
  for (auto kind : {LabelKind::Single, LabelKind::Multi}) {
    for (int t = 0; t < 100; ++t) {
      const auto c = testing::random_oracle_case(rng, kind, 6);
      const auto a = testing::to_matrix(c.pruned), b = testing::to_matrix(c.unpruned);
      const auto ab = detect_pies(a, b, kind), ba = detect_pies(b, a, kind), aa = detect_pies(a, a, kind);
      for (std::size_t i = 0; i < ab.size(); ++i) {
        CHECK(ab[i].is_pie == ba[i].is_pie);
        CHECK_FALSE(aa[i].is_pie);
      }
    }
  }
}

TEST_CASE("class_distribution orders by train frequency and normalizes") {
  std::vector<Verdict> v(4);
  v[0].is_pie = true;
  v[2].is_pie = true;
  const std::vector<std::vector<int>> gold = {{0}, {1}, {2}, {2}};
  const std::vector<std::int64_t> freq = {5, 9, 5};
  const auto d = class_distribution(v, gold, freq);
  CHECK(d.class_order == std::vector<int>{1, 0, 2});
  CHECK(d.train_frequency == std::vector<std::int64_t>{9, 5, 5});
  CHECK(d.all == std::vector<double>{0.25, 0.25, 0.5});
  CHECK(d.pies == std::vector<double>{0.0, 0.5, 0.5});

  std::vector<Verdict> none(4);
  const auto e = class_distribution(none, gold, freq);
  CHECK(e.pies == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("class_distribution counts each label of a multi-label example") {
  std::vector<Verdict> v(2);
  v[1].is_pie = true;
  const std::vector<std::vector<int>> gold = {{0, 1}, {1}};
  const auto d = class_distribution(v, gold, std::vector<std::int64_t>{1, 1});
  CHECK(d.all == std::vector<double>{1.0 / 3.0, 2.0 / 3.0});
  CHECK(d.pies == std::vector<double>{0.0, 1.0});
}

TEST_CASE("subset_accuracy: per-init mean/std and majority vote") {
  // 3 inits, 4 rows, gold {0,1,1,2}
  const auto m = vote_matrix({{0, 1, 0, 2}, {0, 0, 1, 1}, {1, 1, 1, 2}}, 3);
  const std::vector<std::vector<int>> gold = {{0}, {1}, {1}, {2}};
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  const auto a = subset_accuracy(m, gold, LabelKind::Single, all);
  REQUIRE(a);
  CHECK(a->n_examples == 4);
  // per-init: 3/4, 2/4, 3/4
  CHECK(a->per_init.mean == doctest::Approx(2.0 / 3.0));
  CHECK(a->per_init.std == doctest::Approx(std::sqrt(1.0 / 48.0)));
  // majority: row0 0, row1 1, row2 1, row3 2 -> all correct
  CHECK(a->majority_vote == 1.0);
  const std::vector<std::size_t> first = {0};
  CHECK(subset_accuracy(m, gold, LabelKind::Single, first)->majority_vote == 1.0);
  CHECK_FALSE(subset_accuracy(m, gold, LabelKind::Single, std::span<const std::size_t>{}));
}

TEST_CASE("majority-vote accuracies of pruned and unpruned on PIEs sum to at most 1") {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const auto c = testing::random_oracle_case(rng, LabelKind::Single, 10);
    const auto pruned = testing::to_matrix(c.pruned), unpruned = testing::to_matrix(c.unpruned);
    std::vector<std::vector<int>> gold;
    for (int i = 0; i < 10; ++i) gold.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_classes)))});
    const auto rows = pie_rows(detect_pies(pruned, unpruned, LabelKind::Single));
    const auto p = subset_accuracy(pruned, gold, LabelKind::Single, rows);
    const auto u = subset_accuracy(unpruned, gold, LabelKind::Single, rows);
    if (p) CHECK(p->majority_vote + u->majority_vote <= 1.0);
  }
}

TEST_CASE("pies_csv and class-set formatting") {
  CHECK(format_class_set({}).empty());
  CHECK(format_class_set({0, 2}) == "0;2");
  std::vector<Verdict> v = {{5, true, {1}, {0}}, {6, false, {}, {}}};
  CHECK(pies_csv(v) == "example_id,is_pie,pruned_majority,unpruned_majority\n5,1,1,0\n6,0,,\n");
}
