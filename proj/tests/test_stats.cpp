#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "cvabench/stats.hpp"

using namespace cvabench::stats;

namespace {

// Kappa as one minus mean observed distance over mean distance across all cross pairs.
double kappa_oracle(const std::vector<int>& a, const std::vector<int>& b, int k) {
  double n = a.size(), dobs = 0, dexp = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dobs += std::abs(a[i] - b[i]) / double(k - 1);
  for (int x : a)
    for (int y : b) dexp += std::abs(x - y) / double(k - 1);
  return 1 - (dobs / n) / (dexp / (n * n));
}

double rho_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r;
    for (double a : v) {
      int below = 0, same = 0;
      for (double b : v) {
        below += b < a;
        same += b == a;
      }
      r.push_back(1 + below + (same - 1) / 2.0);
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double n = x.size(), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Kappa, MatchesOracleOnRandomInstances) {
  std::mt19937 rng(11);
  int checked = 0;
  for (int inst = 0; inst < 100; ++inst) {
    int k = 2 + rng() % 4;
    int n = 2 + rng() % 15;
    std::vector<int> a, b;
    std::vector<double> da, db, cats;
    for (int c = 1; c <= k; ++c) cats.push_back(c);
    for (int i = 0; i < n; ++i) {
      a.push_back(1 + rng() % k);
      b.push_back(rng() % 3 == 0 ? a.back() : 1 + int(rng() % k));
      da.push_back(a.back());
      db.push_back(b.back());
    }
    auto r = weighted_kappa(da, db, cats);
    bool a_const = std::all_of(a.begin(), a.end(), [&](int v) { return v == a[0]; });
    bool b_const = std::all_of(b.begin(), b.end(), [&](int v) { return v == b[0]; });
    if (a_const && b_const && a[0] == b[0]) {
      EXPECT_FALSE(r.defined());
      continue;
    }
    ASSERT_TRUE(r.defined());
    EXPECT_NEAR(*r.value, kappa_oracle(a, b, k), 1e-9);
    EXPECT_NEAR(*r.value, *weighted_kappa(db, da, cats).value, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 90);
}

TEST(Kappa, KnownValues) {
  EXPECT_DOUBLE_EQ(*weighted_kappa({1, 2, 3, 3}, {1, 2, 3, 3}, {1, 2, 3, 4, 5}).value, 1.0);
  // confusion [[1,1],[1,1]]
  EXPECT_NEAR(*weighted_kappa({0, 0, 1, 1}, {0, 1, 0, 1}, {0, 1}).value, 0.0, 1e-12);
  auto c = weighted_kappa({3, 3, 3}, {3, 3, 3}, {1, 2, 3, 4, 5});
  EXPECT_FALSE(c.defined());
  EXPECT_EQ(c.to_string(), "undefined: no variance");
  EXPECT_THROW(weighted_kappa({1, 7}, {1, 2}, {1, 2, 3}), std::invalid_argument);
  RatingSeries a{{"i1", "i2", "i3"}, {1, 2, 3}}, b{{"i3", "i1", "i2", "i9"}, {3, 1, 2, 5}};
  EXPECT_DOUBLE_EQ(*weighted_kappa(a, b, {1, 2, 3, 4, 5}).value, 1.0);
}

TEST(Spearman, MatchesOracleOnRandomInstances) {
  std::mt19937 rng(5);
  for (int inst = 0; inst < 100; ++inst) {
    int n = 3 + rng() % 12;
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      x.push_back(rng() % 5);
      y.push_back(rng() % 6);
    }
    x[0] = 0;
    x[1] = 4;
    y[0] = 0;
    y[1] = 5;
    auto r = spearman_rho(x, y);
    ASSERT_TRUE(r.defined());
    EXPECT_NEAR(*r.value, rho_oracle(x, y), 1e-9);
    EXPECT_NEAR(*r.value, *spearman_rho(y, x).value, 1e-12);
  }
}

TEST(Spearman, KnownValues) {
  std::vector<double> x{3, 1, 4, 1.5, 9, 2.6};
  std::vector<double> rev(x);
  for (auto& v : rev) v = -v;
  EXPECT_DOUBLE_EQ(*spearman_rho(x, x).value, 1.0);
  EXPECT_DOUBLE_EQ(*spearman_rho(x, rev).value, -1.0);
  EXPECT_NEAR(*spearman_rho({1, 2, 2, 4}, {1, 3, 2, 4}).value, rho_oracle({1, 2, 2, 4}, {1, 3, 2, 4}), 1e-9);
  std::vector<double> cubed(x);
  for (auto& v : cubed) v = v * v * v + 7;
  EXPECT_NEAR(*spearman_rho(cubed, {6, 5, 4, 3, 2, 1}).value, *spearman_rho(x, {6, 5, 4, 3, 2, 1}).value, 1e-12);
  EXPECT_FALSE(spearman_rho({2, 2, 2}, {1, 2, 3}).defined());
  EXPECT_EQ(average_ranks({10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Preferences, Endpoints) {
  auto one = preference_scores({{{"A", 1}, {"B", 2}, {"C", 3}}}, {"A", "B", "C"});
  EXPECT_EQ(one.scores.at("A"), 1.0);
  EXPECT_EQ(one.scores.at("B"), 0.5);
  EXPECT_EQ(one.scores.at("C"), 0.0);
  auto opposite = preference_scores({{{"A", 1}, {"B", 2}}, {{"A", 2}, {"B", 1}}}, {"A", "B"});
  EXPECT_EQ(opposite.scores.at("A"), 0.5);
  EXPECT_EQ(opposite.scores.at("B"), 0.5);
  auto tie = preference_scores({{{"A", 1}, {"B", 1}, {"C", 3}}}, {"A", "B", "C"});
  EXPECT_EQ(tie.scores.at("A"), 0.75);
  EXPECT_EQ(tie.scores.at("B"), 0.75);
  EXPECT_EQ(tie.scores.at("C"), 0.0);
  auto partial = preference_scores({{{"A", 1}, {"B", 2}}, {{"B", 1}, {"C", 2}}}, {"A", "B", "C", "D"});
  EXPECT_EQ(partial.scores.at("B"), 0.5);
  EXPECT_EQ(partial.participants.at("B"), 2);
  EXPECT_FALSE(partial.scores.count("D"));
  EXPECT_EQ(partial.notes.size(), 1u);
  EXPECT_THROW(preference_scores({{{"A", 1}}}, {"A"}), std::invalid_argument);
}

TEST(StatsCsv, RatingsByMetric) {
  auto p = write_temp("cvabench_ratings.csv",
                      "itemId,raterId,metricId,value\n"
                      "1,r1,coherence,4\n1,r2,coherence,4\n2,r1,coherence,2\n2,r2,coherence,2\n"
                      "3,r1,coherence,5\n3,r2,coherence,5\n"
                      "1,r1,insight,3\n1,r2,insight,3\n2,r1,insight,3\n2,r2,insight,3\n");
  auto ratings = load_ratings(p);
  auto k = kappa_by_metric(ratings, {1, 2, 3, 4, 5});
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].metric_id, "coherence");
  EXPECT_DOUBLE_EQ(*k[0].result.value, 1.0);
  EXPECT_EQ(k[1].result.to_string(), "undefined: no variance");
  auto s = spearman_by_metric(ratings);
  EXPECT_DOUBLE_EQ(*s[0].result.value, 1.0);
  EXPECT_FALSE(s[1].result.defined());

  auto bad = write_temp("cvabench_bad.csv", "itemId,raterId,metricId,value\n1,r1,m,high\n");
  EXPECT_THROW(load_ratings(bad), std::runtime_error);
  EXPECT_EQ(parse_csv("a,\"b,\"\"c\"\"\"\r\n1,2\n").at(0).at(1), "b,\"c\"");
}
