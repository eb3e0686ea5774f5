#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "modl/report.hpp"
#include "modl/rng.hpp"
#include "support/models.hpp"

using namespace modl;
using namespace testing_support;

namespace {

// Pair-counting AUC: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (pos[k]) continue;
      pairs += 1;
      wins += s[i] > s[k] ? 1.0 : s[i] == s[k] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(Auc, HandCases) {
  EXPECT_DOUBLE_EQ(*auc({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}), 1.0);
  EXPECT_DOUBLE_EQ(*auc({0.9, 0.8, 0.2, 0.1}, {false, false, true, true}), 0.0);
  EXPECT_DOUBLE_EQ(*auc({0.1, 0.4, 0.35, 0.8}, {false, false, true, true}), 0.75);
  EXPECT_DOUBLE_EQ(*auc({0.5, 0.5, 0.5}, {true, false, true}), 0.5);
  EXPECT_DOUBLE_EQ(*auc(std::vector<std::pair<double, bool>>{{0.3, true}, {0.1, false}}), 1.0);
}

TEST(Auc, UndefinedWithOneClass) {
  EXPECT_FALSE(auc({0.1, 0.2}, {true, true}));
  EXPECT_FALSE(auc({0.1, 0.2}, {false, false}));
  EXPECT_FALSE(auc({}, {}));
  EXPECT_THROW(auc({0.1}, {true, false}), std::invalid_argument);
}

TEST(Auc, MatchesPairCountingAndSymmetries) {
  auto rng = Rng::substream(5, "auc");
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_index(60);
    std::vector<double> s(n);
    std::vector<bool> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(10));
      pos[i] = rng.bernoulli(0.4);
      neg[i] = !pos[i];
    }
    pos[0] = true;
    neg[0] = false;
    pos[1] = false;
    neg[1] = true;
    const double a = *auc(s, pos);
    EXPECT_NEAR(a, pairwise_auc(s, pos), 1e-12);
    EXPECT_NEAR(a + *auc(s, neg), 1.0, 1e-12);
    std::vector<double> mono(n);
    for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_NEAR(*auc(mono, pos), a, 1e-12);
    std::vector<double> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = -s[i];
    EXPECT_NEAR(*auc(flipped, pos), 1.0 - a, 1e-12);
  }
}

TEST(Evaluate, MajorityClassModel) {
  auto y = categorical_column("Y");
  auto x = numeric_column("X");
  for (int i = 0; i < 100; ++i) {
    y.append(Cell{std::string(i < 70 ? "no" : "yes")});
    x.append(Cell{static_cast<double>(i % 7)});
  }
  const auto flat = make_flat({x}, y);
  const auto m = fit(flat);
  EXPECT_EQ(m.selected(), 0u);
  const auto r = evaluate(m, flat);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  ASSERT_TRUE(r.auc);
  EXPECT_DOUBLE_EQ(*r.auc, 0.5);
  EXPECT_EQ(r.confusion[0][0], 70u);
  EXPECT_EQ(r.confusion[1][0], 30u);
}

TEST(Evaluate, AccuracyIsConfusionTrace) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto train = planted_flat(400, 2, 0.75, 3, seed);
    const auto test = planted_flat(300, 2, 0.75, 3, seed + 100);
    const auto m = fit(train);
    const auto r = evaluate(m, test, "test", 2);
    std::uint64_t trace = 0, total = 0;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      trace += r.confusion[i][i];
      total += std::accumulate(r.confusion[i].begin(), r.confusion[i].end(), std::uint64_t{0});
    }
    EXPECT_EQ(total, 300u);
    EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / 300.0);
    const auto lp = predict_log_proba(m, test);
    std::vector<double> s;
    std::vector<bool> pos;
    for (std::size_t i = 0; i < test.rows; ++i) {
      s.push_back(lp[i][1]);
      pos.push_back(test.target->category(i) == m.class_labels[1]);
    }
    EXPECT_NEAR(*r.auc, pairwise_auc(s, pos), 1e-12);
  }
}

TEST(Evaluate, UnknownLabelsAreCounted) {
  const auto m = binary_model(0.9, 0.1, 1.0);
  const std::vector<double> lp{std::log(0.9), std::log(0.1), std::log(0.1), std::log(0.9), std::log(0.5),
                               std::log(0.5)};
  const std::vector<std::uint32_t> classes{0, 1, kNoClass};
  const auto r = evaluate_posteriors(m, std::span<const double>(lp), classes, "evaluation");
  EXPECT_EQ(r.instances, 2u);
  EXPECT_EQ(r.unknown_labels, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_THROW(evaluate_posteriors(m, std::span<const double>(lp).first(4), classes, "x"), std::invalid_argument);
  EXPECT_THROW(evaluate_posteriors(m, std::span<const double>(lp).first(0), {}, "x"), DataError);
}

TEST(Report, PreparationSortedByLevelAndValidJson) {
  const auto flat = planted_flat(500, 3, 0.7, 4, 12);
  std::vector<std::uint32_t> rows(flat.rows);
  std::iota(rows.begin(), rows.end(), 0u);
  const auto labels = class_labels_of(*flat.target, rows);
  const auto cls = class_indices(*flat.target, labels);
  AnalysisReport report;
  report.target = "Y";
  report.instances = flat.rows;
  report.preparation = prepare_columns(
      flat.columns.size(), [&](std::size_t j) { return flat.columns[j]; }, [](std::size_t) { return 0.0; }, rows, cls,
      labels, 1);
  report.model = fit(flat);
  report.evaluation.push_back(evaluate(report.model, flat, "train"));
  const auto text = to_json(report).dump(2);
  const auto j = nlohmann::json::parse(text);
  const auto& prep = j.at("preparation");
  ASSERT_EQ(prep.size(), flat.columns.size());
  for (std::size_t i = 1; i < prep.size(); ++i) {
    EXPECT_GE(prep[i - 1].at("level").get<double>(), prep[i].at("level").get<double>());
  }
  EXPECT_EQ(prep[0].at("name").get<std::string>().front(), 'S');
  EXPECT_EQ(j.at("modeling").at("selected").get<std::size_t>(), report.model.selected());
  EXPECT_NEAR(j["modeling"]["cost"]["total_nats"].get<double>(), report.model.cost.total(), 1e-9);
  EXPECT_EQ(j.at("evaluation").at(0).at("role"), "train");
  EXPECT_EQ(j.at("instances").at("total").get<std::size_t>(), flat.rows);
}
