#include "cvabench/viz_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cvabench/io.hpp"
#include "cvabench/spec_engine.hpp"
#include "cvabench/text.hpp"

namespace cvabench::metrics {

namespace {

using engine::binding_similarity;
using engine::binding_type;
using engine::binding_types_match;
using engine::field_similarity;

MetricScore make_score(std::string_view id, double value, std::string explanation) {
  MetricScore s;
  s.metric_id = std::string(id);
  s.status = MetricStatus::scored;
  s.value = std::clamp(value, 0.0, 100.0);
  s.explanation = std::move(explanation);
  return s;
}

void attach_fragments(MetricScore& s, const VizSpec& e, const VizSpec& a, std::string_view path) {
  s.expected_fragment = engine::spec_fragment(e, path).dump();
  s.actual_fragment = engine::spec_fragment(a, path).dump();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::string resolved_name(const std::string& ref, const Datasource& ds) {
  if (const auto* f = ds.find(ref)) return f->name;
  return text::trim(ref);
}

std::string binding_label(const EncodingBinding* b) {
  if (!b) return "none";
  std::string name = b->field.empty() ? "records" : b->field;
  if (b->aggregated()) return std::string(to_string(*b->aggregate)) + "(" + name + ")";
  return name;
}

// ---------------------------------------------------------------------------
// result tables

bool is_null(const Scalar& v) {
  if (std::holds_alternative<std::monostate>(v)) return true;
  if (const auto* s = std::get_if<std::string>(&v)) return text::trim(*s).empty();
  return false;
}

// Temporal prefix match: "2023" matches "2023-01-05", "2023-01" matches "2023-01-31".
bool temporal_prefix(const Scalar& cell, const Scalar& bound) {
  const auto* c = std::get_if<std::string>(&cell);
  const auto* b = std::get_if<std::string>(&bound);
  if (!c || !b || b->size() >= c->size()) return false;
  return c->compare(0, b->size(), *b) == 0 && (*c)[b->size()] == '-';
}

Scalar year_as_string(const Scalar& v) {
  // A numeric year filter against a temporal column.
  if (const auto* d = std::get_if<double>(&v)) {
    if (*d >= 1000 && *d <= 9999 && std::floor(*d) == *d) return std::to_string(static_cast<int>(*d));
  }
  return v;
}

bool cell_matches(const Scalar& cell, const Scalar& value, bool temporal) {
  if (engine::scalars_equal(cell, value)) return true;
  if (temporal) return temporal_prefix(cell, year_as_string(value));
  return false;
}

bool cell_in_range(const Scalar& cell, const Scalar& lo, const Scalar& hi, bool temporal) {
  if (temporal) {
    auto c = std::get_if<std::string>(&cell);
    Scalar l = year_as_string(lo), h = year_as_string(hi);
    auto ls = std::get_if<std::string>(&l);
    auto hs = std::get_if<std::string>(&h);
    if (c && ls && hs) {
      return c->substr(0, ls->size()) >= *ls && c->substr(0, hs->size()) <= *hs;
    }
  }
  if (cell.index() != lo.index()) return false;
  return !engine::scalar_less(cell, lo) && !engine::scalar_less(hi, cell);
}

struct Frame {
  const Datasource& ds;
  std::vector<std::size_t> rows;

  Scalar cell(const DataField& f, std::size_t r) const {
    return r < f.values.size() ? engine::normalize_value(f.values[r]) : Scalar{};
  }
};

double aggregate_values(Aggregate agg, const std::vector<double>& xs, std::size_t non_null) {
  switch (agg) {
    case Aggregate::count:
      return static_cast<double>(non_null);
    case Aggregate::sum:
      return std::accumulate(xs.begin(), xs.end(), 0.0);
    case Aggregate::mean:
      return xs.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    case Aggregate::min:
      return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::min_element(xs.begin(), xs.end());
    case Aggregate::max:
      return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::max_element(xs.begin(), xs.end());
    case Aggregate::median: {
      if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
      std::vector<double> v = xs;
      std::sort(v.begin(), v.end());
      std::size_t n = v.size();
      return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    }
    case Aggregate::none:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void apply_filter(Frame& frame, const FilterClause& clause, const DataField& field) {
  const Datasource& ds = frame.ds;
  bool temporal = field.data_type == DataType::temporal;
  std::vector<std::size_t> kept;
  if (clause.op == FilterOp::top_n) {
    const DataField* measure = clause.measure ? ds.find(*clause.measure) : nullptr;
    auto n = scalar_as_number(clause.values.empty() ? Scalar{} : clause.values[0]);
    std::map<std::string, double> totals;
    for (auto r : frame.rows) {
      Scalar key = frame.cell(field, r);
      double add = 0.0;
      if (measure) {
        if (auto x = scalar_as_number(frame.cell(*measure, r))) add = *x;
      } else {
        add = 1.0;
      }
      totals[scalar_to_string(key)] += add;
    }
    std::vector<std::pair<std::string, double>> ranked(totals.begin(), totals.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::set<std::string> top;
    std::size_t limit = n ? static_cast<std::size_t>(std::max(0.0, *n)) : 0;
    for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) top.insert(ranked[i].first);
    for (auto r : frame.rows) {
      if (top.count(scalar_to_string(frame.cell(field, r)))) kept.push_back(r);
    }
    frame.rows = std::move(kept);
    return;
  }
  for (auto r : frame.rows) {
    Scalar c = frame.cell(field, r);
    bool pass = false;
    switch (clause.op) {
      case FilterOp::eq:
      case FilterOp::in:
        pass = std::any_of(clause.values.begin(), clause.values.end(),
                           [&](const Scalar& v) { return cell_matches(c, v, temporal); });
        break;
      case FilterOp::neq:
        pass = !clause.values.empty() && !cell_matches(c, clause.values[0], temporal);
        break;
      case FilterOp::range:
        pass = clause.values.size() == 2 && cell_in_range(c, clause.values[0], clause.values[1], temporal);
        break;
      case FilterOp::not_null:
        pass = !is_null(c);
        break;
      case FilterOp::top_n:
        break;
    }
    if (pass) kept.push_back(r);
  }
  frame.rows = std::move(kept);
}

std::string join_key(const std::vector<Scalar>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '\x1f';
    out += scalar_to_string(parts[i]);
  }
  return out;
}

}  // namespace

ResultTable compute_result_table(const VizSpec& spec, const Datasource& ds) {
  ResultTable t;
  bool grouped = false;
  for (const auto& [c, b] : spec.encoding) {
    if (b.aggregated()) grouped = true;
  }
  std::vector<std::string> missing;
  for (const auto& [c, b] : spec.encoding) {
    if (b.field.empty() && !b.aggregated()) continue;
    if (!b.field.empty() && !ds.find(b.field)) missing.push_back(b.field);
    std::string name = b.field.empty() ? "" : resolved_name(b.field, ds);
    if (b.aggregated()) {
      t.measures.insert({name, *b.aggregate});
    } else {
      t.dimensions.insert(name);
    }
  }
  auto filters = engine::normalize_filters(spec).clauses;
  for (const auto& f : filters) {
    if (!ds.find(f.field)) missing.push_back(f.field);
    if (f.op == FilterOp::top_n && f.measure && !ds.find(*f.measure)) missing.push_back(*f.measure);
  }
  if (!missing.empty()) {
    t.computable = false;
    t.problem = "unresolved field: " + missing.front();
    return t;
  }

  Frame frame{ds, {}};
  frame.rows.resize(ds.row_count());
  std::iota(frame.rows.begin(), frame.rows.end(), std::size_t{0});
  // Top-n ranks over rows that survive the other filters.
  std::stable_partition(filters.begin(), filters.end(),
                        [](const FilterClause& f) { return f.op != FilterOp::top_n; });
  for (const auto& f : filters) apply_filter(frame, f, *ds.find(f.field));

  std::vector<const DataField*> dim_fields;
  for (const auto& d : t.dimensions) dim_fields.push_back(ds.find(d));

  auto row_key = [&](std::size_t r) {
    std::vector<Scalar> parts;
    for (const auto* f : dim_fields) parts.push_back(frame.cell(*f, r));
    return join_key(parts);
  };

  if (!grouped) {
    for (auto r : frame.rows) t.row_keys.push_back(row_key(r));
    std::sort(t.row_keys.begin(), t.row_keys.end());
    return t;
  }

  std::map<std::string, std::vector<std::size_t>> groups;
  for (auto r : frame.rows) groups[row_key(r)].push_back(r);
  for (const auto& [key, rows] : groups) {
    t.row_keys.push_back(key);
    std::vector<double> vals;
    for (const auto& [field, agg] : t.measures) {
      const DataField* f = field.empty() ? nullptr : ds.find(field);
      std::vector<double> xs;
      std::size_t non_null = 0;
      for (auto r : rows) {
        if (!f) {
          ++non_null;
          continue;
        }
        Scalar c = frame.cell(*f, r);
        if (is_null(c)) continue;
        ++non_null;
        if (auto x = scalar_as_number(c)) xs.push_back(*x);
      }
      vals.push_back(aggregate_values(agg, xs, non_null));
    }
    t.values[key] = std::move(vals);
  }
  return t;
}

namespace {

bool same_number(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

bool minor_aggregate(Aggregate a) {
  return a == Aggregate::sum || a == Aggregate::mean || a == Aggregate::count || a == Aggregate::median;
}

std::multiset<std::string> measure_fields(const ResultTable& t) {
  std::multiset<std::string> out;
  for (const auto& [f, a] : t.measures) out.insert(f);
  return out;
}

}  // namespace

MetricScore score_data_fidelity(const ResultTable& e, const ResultTable& a) {
  auto id = metric_id::data_fidelity;
  if (!e.computable || !a.computable) {
    bool same = e.dimensions == a.dimensions && e.measures == a.measures;
    std::string why = !a.computable ? a.problem : e.problem;
    return make_score(id, same ? 100 : 0,
                      "Data fidelity: result rows not computed (" + why + "); " +
                          (same ? "field and aggregation sets agree" : "field or aggregation sets differ"));
  }
  if (e.dimensions != a.dimensions || measure_fields(e) != measure_fields(a)) {
    return make_score(id, 0, "Data fidelity: fields differ from the expected result");
  }
  if (e.row_keys != a.row_keys) {
    return make_score(id, 0,
                      "Data fidelity: expected " + std::to_string(e.row_count()) + " rows, got " +
                          std::to_string(a.row_count()) +
                          (e.row_count() == a.row_count() ? " with different keys" : ""));
  }
  if (e.measures == a.measures) {
    bool equal = true;
    for (const auto& [key, ev] : e.values) {
      auto it = a.values.find(key);
      if (it == a.values.end() || it->second.size() != ev.size()) {
        equal = false;
        break;
      }
      for (std::size_t i = 0; i < ev.size(); ++i) equal = equal && same_number(ev[i], it->second[i]);
    }
    if (equal) return make_score(id, 100, "Data fidelity: result table matches");
    return make_score(id, 0, "Data fidelity: same rows and fields but values differ");
  }
  // Same rows and measure fields; compare aggregations field by field.
  std::vector<std::pair<std::string, Aggregate>> ev(e.measures.begin(), e.measures.end());
  std::vector<std::pair<std::string, Aggregate>> av(a.measures.begin(), a.measures.end());
  std::string detail;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (ev[i].second == av[i].second) continue;
    if (!minor_aggregate(ev[i].second) || !minor_aggregate(av[i].second)) {
      return make_score(id, 0, "Data fidelity: aggregation of " + ev[i].first + " differs");
    }
    if (!detail.empty()) detail += ", ";
    detail += std::string(to_string(ev[i].second)) + " vs " + std::string(to_string(av[i].second)) + " of " +
              (ev[i].first.empty() ? "records" : ev[i].first);
  }
  return make_score(id, 70, "Data fidelity: same rows, minor aggregation difference (" + detail + ")");
}

MetricScore score_data_fidelity(const VizSpec& expected, const VizSpec& actual, const Datasource& ds) {
  auto s = score_data_fidelity(compute_result_table(expected, ds), compute_result_table(actual, ds));
  attach_fragments(s, expected, actual, "encoding");
  return s;
}

// ---------------------------------------------------------------------------
// field similarity and axes

namespace {

struct AxisPair {
  Channel channel;
  const EncodingBinding* expected;
  const EncodingBinding* actual;
};

std::vector<AxisPair> axis_pairs(const VizSpec& e, const VizSpec& a, bool swapped) {
  std::vector<AxisPair> out;
  for (Channel c : {Channel::x, Channel::y}) {
    const auto* eb = e.binding(c);
    if (!eb) continue;
    Channel other = swapped ? (c == Channel::x ? Channel::y : Channel::x) : c;
    out.push_back({c, eb, a.binding(other)});
  }
  return out;
}

}  // namespace

MetricScore score_field_similarity(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto id = metric_id::field_similarity;
  bool swapped = engine::axes_swapped(expected, actual, meta);
  auto pairs = axis_pairs(expected, actual, swapped);
  if (pairs.empty()) {
    bool none = !actual.binding(Channel::x) && !actual.binding(Channel::y);
    auto s = make_score(id, none ? 100 : 0,
                        none ? "Field similarity: neither spec binds an axis"
                             : "Field similarity: expected no axes but the model bound some");
    attach_fragments(s, expected, actual, "encoding");
    return s;
  }
  double total = 0.0;
  bool all_types = true;
  std::string detail;
  for (const auto& p : pairs) {
    double sim = binding_similarity(p.expected, p.actual, meta);
    bool t = binding_types_match(p.expected, p.actual, meta);
    total += sim;
    all_types = all_types && t;
    if (!detail.empty()) detail += "; ";
    detail += std::string(to_string(p.channel)) + " " + binding_label(p.expected) + " vs " +
              binding_label(p.actual) + " " + fmt(sim) + (t ? " (types match)" : " (types differ)");
  }
  double s_mean = total / pairs.size();
  double bonus = all_types ? 10.0 : 0.0;
  auto s = make_score(id, std::min(100.0, 100.0 * s_mean + bonus),
                      "Field similarity: " + detail + (swapped ? "; axes swapped" : ""));
  attach_fragments(s, expected, actual, "encoding");
  return s;
}

ChartRecommendation show_me_recommend(const std::vector<DataType>& field_types) {
  using D = DataType;
  using M = MarkType;
  std::vector<DataType> sig = field_types;
  for (auto& t : sig) {
    if (t == D::ordinal) t = D::nominal;
  }
  std::sort(sig.begin(), sig.end());
  static const std::vector<std::pair<std::vector<DataType>, ChartRecommendation>> table = {
      {{D::quantitative, D::temporal}, {M::line, M::area, M::bar, M::point}},
      {{D::nominal, D::quantitative}, {M::bar, M::pie, M::point, M::table}},
      {{D::quantitative, D::quantitative}, {M::point, M::line}},
      {{D::quantitative}, {M::histogram, M::boxplot}},
      {{D::nominal}, {M::bar, M::table}},
      {{D::nominal, D::nominal, D::quantitative}, {M::heatmap, M::bar}},
  };
  for (const auto& [key, marks] : table) {
    if (key == sig) return marks;
  }
  return {};
}

std::vector<DataType> chart_signature(const VizSpec& spec, const Datasource& meta) {
  auto type_of = [&](const EncodingBinding& b) -> std::optional<DataType> {
    if (b.field.empty()) return std::nullopt;  // field-less count is the implicit histogram axis
    if (b.aggregated()) return DataType::quantitative;
    auto t = binding_type(b, meta);
    if (!t) return DataType::nominal;
    return *t == DataType::ordinal ? DataType::nominal : *t;
  };
  std::vector<DataType> sig;
  for (Channel c : {Channel::x, Channel::y}) {
    if (const auto* b = spec.binding(c)) {
      if (auto t = type_of(*b)) sig.push_back(*t);
    }
  }
  std::sort(sig.begin(), sig.end());
  if (sig == std::vector<DataType>{DataType::nominal, DataType::nominal}) {
    if (const auto* color = spec.binding(Channel::color)) {
      if (type_of(*color) == DataType::quantitative) sig.push_back(DataType::quantitative);
    }
  }
  return sig;
}

MetricScore score_chart_similarity(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto id = metric_id::chart_type_similarity;
  auto sig = chart_signature(expected, meta);
  auto rec = show_me_recommend(sig);
  std::string sig_text;
  for (auto t : sig) sig_text += (sig_text.empty() ? "" : ", ") + std::string(to_string(t));
  std::string rec_text;
  for (auto m : rec) rec_text += (rec_text.empty() ? "" : ", ") + std::string(to_string(m));
  std::string mark = mark_name(actual.mark);
  double value = 0.0;
  std::string verdict;
  if (rec.empty()) {
    verdict = "no recommendation for field types {" + sig_text + "}";
  } else if (actual.mark.type == rec.front()) {
    value = 100;
    verdict = mark + " is the top recommendation";
  } else if (std::find(rec.begin(), rec.end(), actual.mark.type) != rec.end() &&
             actual.mark.type != MarkType::other) {
    value = 50;
    verdict = mark + " is plausible but not the top recommendation";
  } else {
    verdict = mark + " is not recommended";
  }
  auto s = make_score(id, value,
                      "Chart type: " + verdict + (rec.empty() ? "" : " (ranking: " + rec_text + ")"));
  attach_fragments(s, expected, actual, "mark");
  return s;
}

namespace {

std::optional<ScaleType> default_scale(const EncodingBinding& b, const Datasource& meta) {
  if (b.aggregated()) return ScaleType::linear;
  auto t = binding_type(b, meta);
  if (!t) return std::nullopt;
  switch (*t) {
    case DataType::quantitative:
      return ScaleType::linear;
    case DataType::temporal:
      return ScaleType::time;
    default:
      return ScaleType::ordinal;
  }
}

}  // namespace

bool wrong_scale_or_baseline(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  bool swapped = engine::axes_swapped(expected, actual, meta);
  for (const auto& p : axis_pairs(expected, actual, swapped)) {
    if (!p.actual) continue;
    if (p.expected->scale || p.actual->scale) {
      auto es = p.expected->scale ? p.expected->scale : default_scale(*p.expected, meta);
      auto as = p.actual->scale ? p.actual->scale : default_scale(*p.actual, meta);
      if (es && as && *es != *as) return true;
    }
    if (p.expected->zero == true && p.actual->zero == false) return true;
  }
  return false;
}

MetricScore score_axis_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto id = metric_id::axis_accuracy;
  bool swapped = engine::axes_swapped(expected, actual, meta);
  auto pairs = axis_pairs(expected, actual, swapped);
  if (pairs.empty()) {
    bool none = !actual.binding(Channel::x) && !actual.binding(Channel::y);
    auto s = make_score(id, none ? 100 : 0, "Axis accuracy: expected spec binds no axes");
    attach_fragments(s, expected, actual, "encoding");
    return s;
  }
  double total = 0.0;
  std::string detail;
  for (const auto& p : pairs) {
    double sim = binding_similarity(p.expected, p.actual, meta);
    double t = binding_types_match(p.expected, p.actual, meta) ? 1.0 : 0.0;
    total += 0.9 * sim + 0.1 * t;
    if (!detail.empty()) detail += "; ";
    detail += std::string(to_string(p.channel)) + " " + binding_label(p.expected) + " vs " +
              binding_label(p.actual);
  }
  double score = 100.0 * total / pairs.size();
  if (swapped) {
    score *= 0.5;
    detail += "; x and y swapped";
  }
  if (wrong_scale_or_baseline(expected, actual, meta)) {
    score *= 0.7;
    detail += "; wrong scale or baseline";
  }
  auto s = make_score(id, std::min(100.0, score), "Axis accuracy: " + detail);
  attach_fragments(s, expected, actual, "encoding");
  return s;
}

// ---------------------------------------------------------------------------
// filters

MetricScore score_filter_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto id = metric_id::filter_accuracy;
  auto E = engine::normalize_filters(expected).clauses;
  auto A = engine::normalize_filters(actual).clauses;
  std::size_t union_size_all = E.size() + A.size();
  if (union_size_all == 0) {
    auto s = make_score(id, 100, "Filters: none expected, none applied");
    attach_fragments(s, expected, actual, "filters");
    return s;
  }
  std::vector<bool> used(A.size(), false);
  double matched = 0.0;
  std::size_t match_count = 0;
  bool types_agree = true;
  std::vector<std::string> notes;
  for (const auto& e : E) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < A.size(); ++j) {
      if (used[j]) continue;
      double sf = field_similarity(e.field, A[j].field, meta);
      if (sf < kFilterFieldThreshold || !engine::values_equivalent(e, A[j])) continue;
      if (sf > best) {
        best = sf;
        best_j = j;
      }
    }
    if (best < 0) {
      notes.push_back("missing " + e.field);
      continue;
    }
    used[best_j] = true;
    ++match_count;
    matched += (best + engine::op_match(e, A[best_j])) / 2.0;
    types_agree = types_agree && engine::types_match(e.field, A[best_j].field, meta);
  }
  for (std::size_t j = 0; j < A.size(); ++j) {
    if (!used[j]) notes.push_back("extra " + A[j].field);
  }
  std::size_t union_size = union_size_all - match_count;
  double base = 100.0 * matched / union_size;
  double bonus = (match_count > 0 && types_agree) ? 10.0 : 0.0;
  std::string detail = std::to_string(match_count) + " of " + std::to_string(union_size) + " matched";
  if (!notes.empty()) detail += " (" + text::join(notes, ", ") + ")";
  auto s = make_score(id, std::min(100.0, base + bonus), "Filters: " + detail);
  attach_fragments(s, expected, actual, "filters");
  return s;
}

// ---------------------------------------------------------------------------
// sort

double sort_score(double field_sim, double direction, bool type_match) {
  return std::clamp(100.0 * field_sim * direction + (type_match ? 10.0 : 0.0), 0.0, 100.0);
}

double direction_factor(std::optional<SortDirection> expected, std::optional<SortDirection> actual) {
  if (expected == actual) return 1.0;
  if (expected && !actual) return 0.0;
  return 0.5;
}

MetricScore score_sort_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto id = metric_id::sort_accuracy;
  auto dir = [](const std::optional<SortClause>& s) -> std::string {
    if (!s) return "none";
    if (!s->direction) return "unspecified";
    return *s->direction == SortDirection::asc ? "ascending" : "descending";
  };
  std::string head = "Sort: Expected " + dir(expected.sort) + ", Model: " + dir(actual.sort);
  MetricScore s;
  if (!expected.sort && !actual.sort) {
    s = make_score(id, 100, head);
  } else if (!expected.sort || !actual.sort) {
    s = make_score(id, 0, head);
  } else {
    double sf = field_similarity(expected.sort->field, actual.sort->field, meta);
    double d = direction_factor(expected.sort->direction, actual.sort->direction);
    bool t = engine::types_match(expected.sort->field, actual.sort->field, meta);
    s = make_score(id, sort_score(sf, d, t),
                   head + " (field " + expected.sort->field + " vs " + actual.sort->field + " " + fmt(sf) + ")");
  }
  attach_fragments(s, expected, actual, "sort");
  return s;
}

// ---------------------------------------------------------------------------
// encoding

namespace {

// The reference design is authoritative: reproducing it exactly earns full practice credit.
bool same_binding(const EncodingBinding& e, const EncodingBinding& a, const Datasource& meta) {
  const auto* fe = meta.find(e.field);
  const auto* fa = meta.find(a.field);
  bool same_field = (fe && fe == fa) || (!fe && !fa && text::normalize_key(e.field) == text::normalize_key(a.field));
  auto agg = [](const EncodingBinding& b) { return b.aggregate.value_or(Aggregate::none); };
  return same_field && agg(e) == agg(a) && e.scale == a.scale && e.zero == a.zero;
}

std::optional<DataType> practice_type(const EncodingBinding& b, const Datasource& meta) {
  if (b.aggregated()) return DataType::quantitative;
  return binding_type(b, meta);
}

std::size_t cardinality(const EncodingBinding& b, const Datasource& meta) {
  if (const auto* f = meta.find(b.field)) return meta.distinct_count(*f);
  return 0;
}

}  // namespace

double best_practice_score(Channel channel, const EncodingBinding* expected, const EncodingBinding* actual,
                           const Datasource& meta, MarkType mark) {
  if (!actual) return 0.0;
  if (expected && same_binding(*expected, *actual, meta)) return 1.0;
  auto type = practice_type(*actual, meta);
  if (!type) return 0.5;
  DataType t = *type;
  std::size_t n = (t == DataType::nominal || t == DataType::ordinal) ? cardinality(*actual, meta) : 0;
  auto scale = actual->scale;
  switch (channel) {
    case Channel::color:
      if (t == DataType::quantitative) {
        return scale == ScaleType::ordinal ? 0.0 : 1.0;  // needs a sequential gradient
      }
      if (t == DataType::temporal) return scale == ScaleType::ordinal ? 0.5 : 1.0;
      if (scale && *scale != ScaleType::ordinal) return 0.25;
      return n > 10 ? 0.5 : 1.0;
    case Channel::shape: {
      double base = 0.0;
      if (t == DataType::nominal) base = n > 6 ? 0.5 : 1.0;
      else if (t == DataType::ordinal) base = 0.5;
      if (mark != MarkType::point && mark != MarkType::line && mark != MarkType::other) base *= 0.5;
      return base;
    }
    case Channel::size:
      if (t == DataType::quantitative) return 1.0;
      if (t == DataType::ordinal) return n > 6 ? 0.25 : 0.5;
      if (t == DataType::temporal) return 0.25;
      return 0.0;  // size reads as magnitude; categories have none
    case Channel::opacity:
      if (t == DataType::quantitative) return mark == MarkType::point ? 1.0 : 0.5;
      if (t == DataType::ordinal) return 0.5;
      return 0.25;
    case Channel::text:
      if (t == DataType::quantitative) return 1.0;
      return n > 20 ? 0.5 : 1.0;
    case Channel::x:
    case Channel::y:
      break;
  }
  return 0.5;
}

std::vector<ChannelScoreBreakdown> encoding_breakdown(const VizSpec& expected, const VizSpec& actual,
                                                      const Datasource& meta) {
  std::vector<ChannelScoreBreakdown> out;
  for (Channel c : kNonPositionalChannels) {
    ChannelScoreBreakdown b;
    b.channel = c;
    const auto* e = expected.binding(c);
    const auto* a = actual.binding(c);
    if (!e && !a) {
      b.presence = b.sem = b.type_ok = b.practice = b.s_c = 100.0;
    } else {
      b.presence = (e && a) ? 100.0 : (a ? 50.0 : 0.0);
      if (e && a) {
        b.sem = 100.0 * binding_similarity(e, a, meta);
        b.type_ok = binding_types_match(e, a, meta) ? 100.0 : 0.0;
      }
      b.practice = 100.0 * best_practice_score(c, e, a, meta, actual.mark.type);
      b.s_c = 0.3 * b.presence + 0.4 * b.sem + 0.1 * b.type_ok + 0.2 * b.practice;
    }
    out.push_back(b);
  }
  return out;
}

MetricScore score_encoding_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto breakdown = encoding_breakdown(expected, actual, meta);
  double total = 0.0;
  std::string detail;
  for (const auto& b : breakdown) {
    total += b.s_c;
    if (b.s_c < 100.0) {
      if (!detail.empty()) detail += "; ";
      detail += std::string(to_string(b.channel)) + " " + binding_label(expected.binding(b.channel)) + " vs " +
                binding_label(actual.binding(b.channel)) + " " + fmt(b.s_c);
    }
  }
  auto s = make_score(metric_id::encoding_accuracy, total / breakdown.size(),
                      "Encoding: " + (detail.empty() ? std::string("all channels agree") : detail));
  attach_fragments(s, expected, actual, "encoding");
  return s;
}

// ---------------------------------------------------------------------------
// interactivity

double soft_jaccard(const std::set<Interaction>& expected, const std::set<Interaction>& actual) {
  if (expected.empty() && actual.empty()) return 1.0;
  auto sim = [](Interaction a, Interaction b) {
    if (a == b) return 1.0;
    auto pair = [&](Interaction p, Interaction q) { return (a == p && b == q) || (a == q && b == p); };
    if (pair(Interaction::zoom, Interaction::pan)) return 0.5;
    if (pair(Interaction::selection, Interaction::drilldown)) return 0.5;
    return 0.0;
  };
  std::vector<std::tuple<double, Interaction, Interaction>> cand;
  for (auto e : expected) {
    for (auto a : actual) {
      if (double s = sim(e, a); s > 0) cand.emplace_back(s, e, a);
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  std::set<Interaction> ue, ua;
  double inter = 0.0;
  for (const auto& [s, e, a] : cand) {
    if (ue.count(e) || ua.count(a)) continue;
    ue.insert(e);
    ua.insert(a);
    inter += s;
  }
  double denom = expected.size() + actual.size() - inter;
  return denom <= 0 ? 1.0 : inter / denom;
}

namespace {

struct Required {
  std::string field;
  std::optional<Aggregate> aggregate;
};

std::optional<Aggregate> effective_agg(std::optional<Aggregate> a) {
  if (a && *a == Aggregate::none) return std::nullopt;
  return a;
}

std::vector<Required> required_tooltip_fields(const VizSpec& e, const Datasource& meta) {
  std::vector<Required> out;
  if (e.tooltip.empty()) return out;
  std::set<std::string> seen;
  auto add = [&](const std::string& field, std::optional<Aggregate> agg) {
    if (field.empty()) return;
    std::string key = text::normalize_key(resolved_name(field, meta));
    if (!seen.insert(key).second) return;
    out.push_back({field, effective_agg(agg)});
  };
  for (Channel c : {Channel::x, Channel::y, Channel::color, Channel::size}) {
    if (const auto* b = e.binding(c)) add(b->field, b->aggregate);
  }
  for (const auto& f : e.filters) add(f.field, std::nullopt);
  for (const auto& [c, b] : e.encoding) {
    if (b.aggregated()) add(b.field, b.aggregate);
  }
  return out;
}

std::optional<Aggregate> encoding_agg_for(const VizSpec& spec, const std::string& field, const Datasource& meta) {
  for (const auto& [c, b] : spec.encoding) {
    if (!b.field.empty() && field_similarity(b.field, field, meta) >= 1.0) return effective_agg(b.aggregate);
  }
  return std::nullopt;
}

bool is_quantitative_entry(const TooltipField& t, const VizSpec& spec, const Datasource& meta) {
  if (effective_agg(t.aggregate)) return true;
  if (encoding_agg_for(spec, t.field, meta)) return true;
  return engine::field_type(t.field, meta) == DataType::quantitative;
}

}  // namespace

InteractivityBreakdown interactivity_breakdown(const VizSpec& expected, const VizSpec& actual,
                                               const Datasource& meta) {
  InteractivityBreakdown r;
  auto R = required_tooltip_fields(expected, meta);
  const auto& A = actual.tooltip;

  // One-to-one greedy semantic matching.
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < R.size(); ++i) {
    for (std::size_t j = 0; j < A.size(); ++j) {
      double s = field_similarity(R[i].field, A[j].field, meta);
      if (s >= kFilterFieldThreshold) cand.emplace_back(s, i, j);
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  std::vector<int> match_of_r(R.size(), -1);
  std::vector<bool> a_used(A.size(), false);
  for (const auto& [s, i, j] : cand) {
    if (match_of_r[i] >= 0 || a_used[j]) continue;
    match_of_r[i] = static_cast<int>(j);
    a_used[j] = true;
  }
  std::size_t matched = 0;
  double correct = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (match_of_r[i] < 0) continue;
    ++matched;
    const auto& t = A[match_of_r[i]];
    auto agg = effective_agg(t.aggregate);
    if (!agg) agg = encoding_agg_for(actual, t.field, meta);
    if (agg == R[i].aggregate) correct += 1.0;
  }

  // Entries repeating an earlier field and aggregation.
  std::set<std::pair<std::string, int>> seen;
  std::size_t duplicates = 0;
  for (const auto& t : A) {
    auto agg = effective_agg(t.aggregate);
    auto key = std::make_pair(text::normalize_key(resolved_name(t.field, meta)), agg ? static_cast<int>(*agg) : -1);
    if (!seen.insert(key).second) ++duplicates;
  }

  if (R.empty()) {
    r.coverage = 100.0;
    r.correctness = 100.0;
  } else {
    r.coverage = 100.0 * matched / R.size();
    r.correctness = matched ? 100.0 * correct / matched : 0.0;
  }
  if (A.empty()) {
    r.extras = R.empty() ? 100.0 : 0.0;
  } else {
    std::size_t relevant = 0;
    std::set<std::string> relevant_keys;
    for (std::size_t j = 0; j < A.size(); ++j) {
      bool resolves = meta.fields.empty() || meta.find(A[j].field);
      if (!(a_used[j] || resolves)) continue;
      if (relevant_keys.insert(text::normalize_key(resolved_name(A[j].field, meta)) + "|" +
                               std::to_string(A[j].aggregate ? static_cast<int>(*A[j].aggregate) : -1))
              .second) {
        ++relevant;
      }
    }
    r.extras = 100.0 * relevant / A.size();
  }
  r.redundancy_penalty = A.empty() ? 0.0 : 100.0 * duplicates / A.size();
  r.tooltip_score = std::clamp(0.6 * r.coverage + 0.3 * r.correctness + 0.1 * r.extras - 0.1 * r.redundancy_penalty,
                               0.0, 100.0);
  r.inter_match = 100.0 * soft_jaccard(expected.interactions, actual.interactions);

  bool nothing_shown = A.empty() && actual.interactions.empty();
  bool expected_something = !R.empty() || !expected.interactions.empty();
  if (nothing_shown && expected_something) {
    r.consistency = 0.0;
    r.usability = 0.0;
  } else {
    bool consistent = true;
    std::set<std::string> excluded;
    for (const auto& f : engine::normalize_filters(actual).clauses) {
      if (f.op == FilterOp::eq && f.values.size() == 1) excluded.insert(text::normalize_key(resolved_name(f.field, meta)));
    }
    for (const auto& t : A) {
      if (!meta.fields.empty() && !meta.find(t.field)) consistent = false;
      auto enc = encoding_agg_for(actual, t.field, meta);
      auto agg = effective_agg(t.aggregate);
      if (enc && agg && *enc != *agg) consistent = false;
    }
    if (actual.interactions.count(Interaction::selection) || actual.interactions.count(Interaction::drilldown)) {
      // Selecting needs a discrete field that still varies after filtering.
      bool selectable = false;
      for (const auto& [c, b] : actual.encoding) {
        if (b.field.empty() || b.aggregated()) continue;
        if (!excluded.count(text::normalize_key(resolved_name(b.field, meta)))) selectable = true;
      }
      consistent = consistent && selectable;
    }
    r.consistency = consistent ? 100.0 : 0.0;

    if (A.empty()) {
      r.usability = R.empty() ? 100.0 : 0.0;
    } else {
      bool formatting_ok = duplicates == 0;
      bool units_shown = std::all_of(A.begin(), A.end(), [&](const TooltipField& t) {
        return !is_quantitative_entry(t, actual, meta) || !text::trim(t.format).empty();
      });
      bool brevity_ok = A.size() <= 6;
      r.usability = 100.0 * (formatting_ok + units_shown + brevity_ok) / 3.0;
    }
  }
  r.total = std::clamp(0.6 * r.tooltip_score + 0.2 * r.inter_match + 0.1 * r.consistency + 0.1 * r.usability,
                       0.0, 100.0);
  return r;
}

MetricScore score_interactivity_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  auto b = interactivity_breakdown(expected, actual, meta);
  auto s = make_score(metric_id::interactivity_accuracy, b.total,
                      "Interactivity: tooltip " + fmt(b.tooltip_score) + " (coverage " + fmt(b.coverage) +
                          ", correctness " + fmt(b.correctness) + "), interactions " + fmt(b.inter_match) +
                          ", consistency " + fmt(b.consistency) + ", usability " + fmt(b.usability));
  attach_fragments(s, expected, actual, "tooltip");
  return s;
}

// ---------------------------------------------------------------------------

MetricScore score_viz_metric(std::string_view id, const VizSpec& expected, const VizSpec& actual,
                             const Datasource& meta) {
  if (id == metric_id::data_fidelity) return score_data_fidelity(expected, actual, meta);
  if (id == metric_id::field_similarity) return score_field_similarity(expected, actual, meta);
  if (id == metric_id::chart_type_similarity) return score_chart_similarity(expected, actual, meta);
  if (id == metric_id::axis_accuracy) return score_axis_accuracy(expected, actual, meta);
  if (id == metric_id::filter_accuracy) return score_filter_accuracy(expected, actual, meta);
  if (id == metric_id::sort_accuracy) return score_sort_accuracy(expected, actual, meta);
  if (id == metric_id::encoding_accuracy) return score_encoding_accuracy(expected, actual, meta);
  if (id == metric_id::interactivity_accuracy) return score_interactivity_accuracy(expected, actual, meta);
  throw std::invalid_argument("unknown visualization metric: " + std::string(id));
}

std::vector<MetricScore> score_visualization(const std::vector<ExpectedResponse>& expected,
                                             const std::optional<VizSpec>& actual, const Datasource& meta,
                                             const std::vector<std::string>& metric_ids, bool strict) {
  std::vector<MetricScore> out;
  for (const auto& id : metric_ids) {
    if (!is_viz_metric(id)) continue;
    if (!actual || expected.empty()) {
      MetricScore s;
      s.metric_id = id;
      if (strict && !actual) {
        s.status = MetricStatus::scored;
        s.value = 0.0;
        s.explanation = "No visualization spec could be parsed from the response (strict mode)";
      } else {
        s.status = MetricStatus::unavailable;
        s.explanation = !actual ? "No visualization spec could be parsed from the response"
                                : "Turn has no expected visualization";
      }
      out.push_back(std::move(s));
      continue;
    }
    std::optional<MetricScore> best;
    for (const auto& e : expected) {
      auto s = score_viz_metric(id, e.viz_spec, *actual, meta);
      if (!best || s.value > best->value) best = std::move(s);
    }
    out.push_back(std::move(*best));
  }
  return out;
}

double overall_viz_score(const std::vector<MetricScore>& scores) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (!s.scored() || !is_viz_metric(s.metric_id)) continue;
    total += s.value;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no visualization metric was scored");
  return total / n;
}

}  // namespace cvabench::metrics
