#include <gtest/gtest.h>

#include "cvabench/spec_engine.hpp"
#include "cvabench/text.hpp"
#include "cvabench/viz_metrics.hpp"
#include "helpers.hpp"

using namespace cvabench;
using namespace cvabench::metrics;
using testutil::spec;
using testutil::superstore;

namespace {

const char* kRegionQuantity = R"({"mark":"bar","encoding":{"x":{"field":"Region"},
  "y":{"field":"Quantity","aggregate":"sum"}}})";

}  // namespace

TEST(DataFidelity, IdenticalTablesScore100) {
  auto e = spec(kRegionQuantity);
  EXPECT_EQ(score_data_fidelity(e, e, superstore()).value, 100);
}

TEST(DataFidelity, SumVersusCountIsMinorAggregationDifference) {
  auto e = spec(kRegionQuantity);
  auto a = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"field":"Quantity","aggregate":"count"}}})");
  EXPECT_EQ(score_data_fidelity(e, a, superstore()).value, 70);
}

TEST(DataFidelity, MissingRowsScoreZero) {
  auto e = spec(kRegionQuantity);
  auto a = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"field":"Quantity","aggregate":"sum"}},
    "filters":[{"field":"Region","op":"in","values":["East","West"]}]})");
  auto s = score_data_fidelity(e, a, superstore());
  EXPECT_EQ(s.value, 0);
  EXPECT_NE(s.explanation.find("expected 4 rows, got 2"), std::string::npos) << s.explanation;
}

TEST(DataFidelity, SwappedAxesKeepTheSameTable) {
  auto e = spec(kRegionQuantity);
  auto a = spec(R"({"mark":"bar","encoding":{"y":{"field":"Region"},
    "x":{"field":"Quantity","aggregate":"sum"}}})");
  EXPECT_EQ(score_data_fidelity(e, a, superstore()).value, 100);
}

TEST(DataFidelity, RawVersusAggregatedScoresZero) {
  auto e = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"}}})");
  auto a = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales","aggregate":"sum"},
    "y":{"field":"Profit","aggregate":"sum"}}})");
  EXPECT_EQ(score_data_fidelity(e, a, superstore()).value, 0);
}

TEST(DataFidelity, TableValuesMatchHandComputedSums) {
  const auto& ds = superstore();
  auto t = compute_result_table(spec(kRegionQuantity), ds);
  ASSERT_TRUE(t.computable);
  ASSERT_EQ(t.row_keys, (std::vector<std::string>{"central", "east", "south", "west"}));
  const auto* region = ds.find("Region");
  const auto* qty = ds.find("Quantity");
  std::map<std::string, double> oracle;
  for (std::size_t i = 0; i < ds.row_count(); ++i) {
    oracle[text::to_lower(scalar_to_string(region->values[i]))] += *scalar_as_number(qty->values[i]);
  }
  for (const auto& [k, v] : oracle) EXPECT_DOUBLE_EQ(t.values.at(k)[0], v) << k;
}

TEST(DataFidelity, TopNKeepsHighestTotals) {
  const auto& ds = testutil::accounts();
  auto t = compute_result_table(spec(R"({"mark":"bar","encoding":{"y":{"field":"Account Name"},
    "x":{"field":"Item Quantity","aggregate":"sum"}},
    "filters":[{"field":"Account Name","op":"top-n","values":[5],"measure":"Item Quantity"}]})"),
                                ds);
  ASSERT_EQ(t.row_count(), 5u);
  std::map<std::string, double> totals;
  const auto* name = ds.find("Account Name");
  const auto* qty = ds.find("Item Quantity");
  for (std::size_t i = 0; i < ds.row_count(); ++i) {
    totals[text::to_lower(scalar_to_string(name->values[i]))] += *scalar_as_number(qty->values[i]);
  }
  std::vector<double> sorted;
  for (const auto& [k, v] : totals) sorted.push_back(v);
  std::sort(sorted.rbegin(), sorted.rend());
  for (const auto& [k, v] : t.values) EXPECT_GE(v[0], sorted[4]) << k;
}

TEST(DataFidelity, YearFilterMatchesTemporalPrefix) {
  const auto& ds = superstore();
  auto t = compute_result_table(spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"aggregate":"count"}},"filters":[{"field":"Order Date","op":"eq","values":[2023]}]})"),
                                ds);
  ASSERT_TRUE(t.computable);
  double total = 0;
  for (const auto& [k, v] : t.values) total += v[0];
  std::size_t oracle = 0;
  for (const auto& v : ds.find("Order Date")->values) oracle += scalar_to_string(v).rfind("2023-", 0) == 0;
  EXPECT_EQ(total, static_cast<double>(oracle));
}

TEST(FieldSimilarity, OrderDateVersusShipDateOnOneAxis) {
  auto e = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  auto a = spec(R"({"mark":"line","encoding":{"x":{"field":"Ship Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  double v = score_field_similarity(e, a, superstore()).value;
  EXPECT_NEAR(v, 87, 15);
  EXPECT_LT(v, 100);
}

TEST(FieldSimilarity, RegionVersusCategorySingleAxis) {
  auto e = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"}}})");
  auto a = spec(R"({"mark":"bar","encoding":{"x":{"field":"Category"}}})");
  double v = score_field_similarity(e, a, superstore()).value;
  EXPECT_NEAR(v, 39, 15);
  EXPECT_GT(v, 10);  // graded, not just the type bonus
}

TEST(FieldSimilarity, MissingAxisContributesZero) {
  auto e = spec(kRegionQuantity);
  auto a = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"}}})");
  EXPECT_DOUBLE_EQ(score_field_similarity(e, a, superstore()).value, 50);
  auto none = spec(R"({"mark":"bar","encoding":{"y":{"field":"Quantity","aggregate":"sum"}}})");
  auto x_only = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"}}})");
  EXPECT_DOUBLE_EQ(score_field_similarity(x_only, none, superstore()).value, 0);
}

TEST(ChartType, ShowMeTable) {
  using D = DataType;
  EXPECT_EQ(show_me_recommend({D::temporal, D::quantitative}),
            (ChartRecommendation{MarkType::line, MarkType::area, MarkType::bar, MarkType::point}));
  EXPECT_EQ(show_me_recommend({D::quantitative, D::nominal}),
            (ChartRecommendation{MarkType::bar, MarkType::pie, MarkType::point, MarkType::table}));
  auto qq = show_me_recommend({D::quantitative, D::quantitative});
  EXPECT_EQ(std::count(qq.begin(), qq.end(), MarkType::table), 0);
  EXPECT_TRUE(show_me_recommend({D::temporal}).empty());
}

TEST(ChartType, Quartet) {
  const auto& ds = superstore();
  auto ts = [](const char* mark) {
    return spec(std::string(R"({"mark":")") + mark +
                R"(","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  };
  EXPECT_EQ(score_chart_similarity(ts("line"), ts("line"), ds).value, 100);
  EXPECT_EQ(score_chart_similarity(ts("line"), ts("area"), ds).value, 50);
  auto cat = spec(R"({"mark":"bar","encoding":{"x":{"field":"Category"},"y":{"field":"Sales","aggregate":"sum"}}})");
  auto pie = cat;
  pie.mark = Mark{MarkType::pie, ""};
  EXPECT_EQ(score_chart_similarity(cat, pie, ds).value, 50);
  auto two = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"}}})");
  auto table = two;
  table.mark = Mark{MarkType::table, ""};
  EXPECT_EQ(score_chart_similarity(two, table, ds).value, 0);
}

TEST(ChartType, HeatmapSignatureUsesColor) {
  auto e = spec(R"({"mark":"rect","encoding":{"x":{"field":"Region"},"y":{"field":"Category"},
    "color":{"field":"Sales","aggregate":"sum"}}})");
  EXPECT_EQ(chart_signature(e, superstore()),
            (std::vector<DataType>{DataType::nominal, DataType::nominal, DataType::quantitative}));
  EXPECT_EQ(score_chart_similarity(e, e, superstore()).value, 100);
}

TEST(AxisAccuracy, SwappedIdenticalFieldsScore50) {
  auto e = spec(kRegionQuantity);
  auto a = spec(R"({"mark":"bar","encoding":{"y":{"field":"Region"},"x":{"field":"Quantity","aggregate":"sum"}}})");
  EXPECT_DOUBLE_EQ(score_axis_accuracy(e, e, superstore()).value, 100);
  EXPECT_DOUBLE_EQ(score_axis_accuracy(e, a, superstore()).value, 50);
}

TEST(AxisAccuracy, PerAxisSimilarityFormula) {
  // Unresolved names with a known blended similarity; both sides unresolved
  // and key-distinct, so types do not match.
  Datasource meta;
  VizSpec e, a;
  e.encoding[Channel::x] = {"Order Date", {}, {}, {}};
  a.encoding[Channel::x] = {"Ship Date", {}, {}, {}};
  double sim = engine::field_similarity("Order Date", "Ship Date", meta);
  EXPECT_NEAR(score_axis_accuracy(e, a, meta).value, 100 * (0.9 * sim), 1e-9);
  // With matching types the 0.8 example from the worked set gives 82.
  EXPECT_NEAR(100 * (0.9 * 0.8 + 0.1 * 1), 82, 1e-9);
}

TEST(AxisAccuracy, ZeroBaselinePenalty) {
  auto e = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"field":"Quantity","aggregate":"sum","scale":{"zero":true}}}})");
  auto a = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"field":"Quantity","aggregate":"sum","scale":{"zero":false}}}})");
  EXPECT_TRUE(wrong_scale_or_baseline(e, a, superstore()));
  EXPECT_DOUBLE_EQ(score_axis_accuracy(e, a, superstore()).value, 70);
  auto log = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},
    "y":{"field":"Quantity","aggregate":"sum","scale":{"type":"log"}}}})");
  EXPECT_TRUE(wrong_scale_or_baseline(spec(kRegionQuantity), log, superstore()));
}

TEST(FilterAccuracy, Trio) {
  Datasource meta;
  auto both_empty = spec(R"({"mark":"bar","encoding":{}})");
  EXPECT_EQ(score_filter_accuracy(both_empty, both_empty, meta).value, 100);
  auto e = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Year","op":"eq","values":[2023]}]})");
  auto a = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Year","op":"eq","values":["2023"]},
    {"field":"Region","op":"eq","values":["West"]}]})");
  EXPECT_DOUBLE_EQ(score_filter_accuracy(e, a, meta).value, 60);
  auto jan = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Month","op":"eq","values":["Jan"]}]})");
  auto feb = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Month","op":"eq","values":["February"]}]})");
  EXPECT_DOUBLE_EQ(score_filter_accuracy(jan, feb, meta).value, 0);
}

TEST(FilterAccuracy, AliasMatchScoresFull) {
  auto e = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Region","op":"eq","values":["West"]}]})");
  auto a = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"SalesRegion","op":"eq","values":["west"]}]})");
  EXPECT_DOUBLE_EQ(score_filter_accuracy(e, a, superstore()).value, 100);
}

TEST(FilterAccuracy, ValueSetMustAgree) {
  auto e = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Region","op":"eq","values":["West"]}]})");
  auto a = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Region","op":"in","values":["West","East"]}]})");
  EXPECT_DOUBLE_EQ(score_filter_accuracy(e, a, superstore()).value, 0);
}

TEST(SortAccuracy, Trio) {
  const auto& ds = superstore();
  auto desc = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Quantity","order":"descending"}})");
  auto none = spec(R"({"mark":"bar","encoding":{}})");
  auto s = score_sort_accuracy(desc, none, ds);
  EXPECT_EQ(s.value, 0);
  EXPECT_EQ(s.explanation.rfind("Sort: Expected descending, Model: none", 0), 0u) << s.explanation;
  auto sd = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Sales","order":"descending"}})");
  auto sa = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Sales","order":"ascending"}})");
  EXPECT_DOUBLE_EQ(score_sort_accuracy(sd, sa, ds).value, 60);
  EXPECT_DOUBLE_EQ(sort_score(0.8, 1.0, true), 90);
  auto rev = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Revenue","order":"descending"}})");
  auto amt = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"SalesAmount","order":"descending"}})");
  EXPECT_DOUBLE_EQ(score_sort_accuracy(rev, amt, ds).value, 100);
  EXPECT_EQ(score_sort_accuracy(none, none, ds).value, 100);
}

TEST(SortAccuracy, DirectionFactor) {
  using S = SortDirection;
  EXPECT_EQ(direction_factor(S::desc, S::desc), 1.0);
  EXPECT_EQ(direction_factor(S::desc, S::asc), 0.5);
  EXPECT_EQ(direction_factor(S::desc, std::nullopt), 0.0);
  EXPECT_EQ(direction_factor(std::nullopt, S::asc), 0.5);
  EXPECT_EQ(direction_factor(std::nullopt, std::nullopt), 1.0);
}

TEST(EncodingAccuracy, Examples) {
  const auto& ds = superstore();
  auto base = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},"y":{"field":"Sales","aggregate":"sum"},
    "color":{"field":"Region"},"text":{"field":"Sales","aggregate":"sum"}}})");
  EXPECT_DOUBLE_EQ(score_encoding_accuracy(base, base, ds).value, 100);

  auto plain = spec(kRegionQuantity);
  EXPECT_DOUBLE_EQ(score_encoding_accuracy(plain, plain, ds).value, 100);

  auto colored = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},"y":{"field":"Quantity","aggregate":"sum"},
    "color":{"field":"Region"}}})");
  EXPECT_NEAR(score_encoding_accuracy(colored, plain, ds).value, 80, 10);

  auto quant_color = spec(R"({"mark":"point","encoding":{"color":{"field":"Sales","scale":{"type":"ordinal"}}}})");
  auto quant_expected = spec(R"({"mark":"point","encoding":{"color":{"field":"Sales"}}})");
  auto bd = encoding_breakdown(quant_expected, quant_color, ds);
  EXPECT_EQ(bd[0].practice, 0);
  EXPECT_NEAR(bd[0].s_c, 80, 10);

  auto size_sales = spec(R"({"mark":"point","encoding":{"size":{"field":"Sales"}}})");
  auto size_region = spec(R"({"mark":"point","encoding":{"size":{"field":"Region"}}})");
  auto sz = encoding_breakdown(size_sales, size_region, ds);
  EXPECT_NEAR(sz[4].s_c, 40, 10);

  auto scatter = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"}}})");
  auto scatter_opacity = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"},
    "opacity":{"field":"Quantity"}}})");
  EXPECT_NEAR(score_encoding_accuracy(scatter, scatter_opacity, ds).value, 80, 10);
}

TEST(EncodingAccuracy, BreakdownWeightsHold) {
  auto e = spec(R"({"mark":"point","encoding":{"color":{"field":"Region"},"shape":{"field":"Category"}}})");
  auto a = spec(R"({"mark":"point","encoding":{"color":{"field":"Category"},"size":{"field":"Profit"}}})");
  for (const auto& b : encoding_breakdown(e, a, superstore())) {
    if (b.presence == 100 && b.sem == 100 && b.type_ok == 100 && b.practice == 100) continue;
    EXPECT_NEAR(b.s_c, 0.3 * b.presence + 0.4 * b.sem + 0.1 * b.type_ok + 0.2 * b.practice, 1e-9);
  }
}

TEST(Interactivity, CompletePartialMissing) {
  const auto& ds = superstore();
  auto e = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"},
    "color":{"field":"Region"}},
    "tooltip":[{"field":"Order Date"},{"field":"Sales","aggregate":"sum","format":"$,.0f"},{"field":"Region"}],
    "interactions":["selection"]})");
  EXPECT_DOUBLE_EQ(score_interactivity_accuracy(e, e, ds).value, 100);

  auto ef = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}},
    "filters":[{"field":"Segment","op":"eq","values":["Consumer"]}],
    "tooltip":[{"field":"Order Date"},{"field":"Sales","aggregate":"sum","format":"$"},{"field":"Segment"}]})");
  auto partial = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}},
    "filters":[{"field":"Segment","op":"eq","values":["Consumer"]}],
    "tooltip":[{"field":"Order Date"},{"field":"Sales","aggregate":"count"}]})");
  EXPECT_NEAR(score_interactivity_accuracy(ef, partial, ds).value, 60, 10);

  auto bare = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"},
    "color":{"field":"Region"}}})");
  EXPECT_DOUBLE_EQ(score_interactivity_accuracy(e, bare, ds).value, 0);
}

TEST(Interactivity, SoftJaccard) {
  using I = Interaction;
  EXPECT_DOUBLE_EQ(soft_jaccard({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(soft_jaccard({I::zoom}, {I::pan}), 0.5 / 1.5);
  EXPECT_DOUBLE_EQ(soft_jaccard({I::zoom, I::selection}, {I::zoom}), 0.5);
}

TEST(Overall, MeanOfScoredMetrics) {
  std::vector<MetricScore> s;
  for (double v : {100, 100, 100, 100, 100, 100, 95}) {
    MetricScore m;
    m.metric_id = "encoding_accuracy";
    m.value = v;
    s.push_back(m);
  }
  EXPECT_NEAR(overall_viz_score(s), 99.2857, 1e-3);
  EXPECT_THROW(overall_viz_score({}), std::invalid_argument);
}

TEST(Overall, MaxOverExpectedPerMetric) {
  const auto& ds = superstore();
  ExpectedResponse bar{spec(kRegionQuantity), "x"};
  ExpectedResponse pie{spec(R"({"mark":"pie","encoding":{"color":{"field":"Region"},
    "theta":{"field":"Quantity","aggregate":"sum"}}})"),
                       "x"};
  auto actual = spec(kRegionQuantity);
  auto one = score_visualization({pie}, actual, ds, viz_metric_ids());
  auto two = score_visualization({pie, bar}, actual, ds, viz_metric_ids());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_GE(two[i].value, one[i].value) << one[i].metric_id;
  auto missing = score_visualization({bar}, std::nullopt, ds, viz_metric_ids());
  EXPECT_EQ(missing[0].status, MetricStatus::unavailable);
  auto strict = score_visualization({bar}, std::nullopt, ds, viz_metric_ids(), true);
  EXPECT_EQ(strict[0].status, MetricStatus::scored);
  EXPECT_EQ(strict[0].value, 0);
}
