#include "cvabench/model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <regex>
#include <unordered_set>
#include <utility>

#include "cvabench/text.hpp"

namespace cvabench {

std::string scalar_to_string(const Scalar& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "null";
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          if (std::isfinite(x) && std::floor(x) == x && std::fabs(x) < 1e15) {
            return std::to_string(static_cast<long long>(x));
          }
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.10g", x);
          return buf;
        } else {
          return x;
        }
      },
      v);
}

std::optional<double> scalar_as_number(const Scalar& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    return *d;
  }
  if (const auto* s = std::get_if<std::string>(&v)) {
    auto t = text::trim(*s);
    if (t.empty()) {
      return std::nullopt;
    }
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out)) {
      return out;
    }
  }
  return std::nullopt;
}

const DataField* Datasource::find(std::string_view ref) const {
  auto key = text::normalize_key(ref);
  if (key.empty()) {
    return nullptr;
  }
  for (const auto& f : fields) {
    if (text::normalize_key(f.name) == key) {
      return &f;
    }
  }
  for (const auto& f : fields) {
    for (const auto& alias : f.aliases) {
      if (text::normalize_key(alias) == key) {
        return &f;
      }
    }
  }
  return nullptr;
}

std::size_t Datasource::row_count() const {
  return fields.empty() ? 0 : fields.front().values.size();
}

std::size_t Datasource::distinct_count(const DataField& field) const {
  std::unordered_set<std::string> seen;
  for (const auto& v : field.values) {
    if (!std::holds_alternative<std::monostate>(v)) {
      seen.insert(text::to_lower(scalar_to_string(v)));
    }
  }
  return seen.size();
}

// ---------------------------------------------------------------------------
// metric catalogue

const std::vector<std::string>& viz_metric_ids() {
  static const std::vector<std::string> ids = {
      std::string(metric_id::data_fidelity),       std::string(metric_id::field_similarity),
      std::string(metric_id::chart_type_similarity), std::string(metric_id::axis_accuracy),
      std::string(metric_id::filter_accuracy),     std::string(metric_id::sort_accuracy),
      std::string(metric_id::encoding_accuracy),   std::string(metric_id::interactivity_accuracy)};
  return ids;
}

const std::vector<std::string>& judge_metric_ids() {
  static const std::vector<std::string> ids = {
      std::string(metric_id::assumptions_disclosure), std::string(metric_id::insightfulness),
      std::string(metric_id::coherence), std::string(metric_id::followup_relevance)};
  return ids;
}

const std::vector<std::string>& nl_metric_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v = {std::string(metric_id::factual_grounding)};
    for (const auto& id : judge_metric_ids()) v.push_back(id);
    return v;
  }();
  return ids;
}

const std::vector<std::string>& nlg_metric_ids() {
  static const std::vector<std::string> ids = {std::string(metric_id::nlg_precision),
                                               std::string(metric_id::nlg_recall),
                                               std::string(metric_id::nlg_f1)};
  return ids;
}

const std::vector<std::string>& all_metric_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v = viz_metric_ids();
    v.insert(v.end(), nl_metric_ids().begin(), nl_metric_ids().end());
    v.insert(v.end(), nlg_metric_ids().begin(), nlg_metric_ids().end());
    return v;
  }();
  return ids;
}

namespace {
bool contains(const std::vector<std::string>& v, std::string_view id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}
}  // namespace

bool is_viz_metric(std::string_view id) { return contains(viz_metric_ids(), id); }
bool is_nl_metric(std::string_view id) { return contains(nl_metric_ids(), id); }
bool is_judge_metric(std::string_view id) { return contains(judge_metric_ids(), id); }
bool is_nlg_metric(std::string_view id) { return contains(nlg_metric_ids(), id); }

// ---------------------------------------------------------------------------
// enum names

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E v) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> parse_from(const NameTable<E, N>& table, std::string_view s) {
  auto key = text::to_lower(text::trim(s));
  for (const auto& [e, name] : table) {
    if (name == key) return e;
  }
  return std::nullopt;
}

constexpr NameTable<DataType, 4> kDataTypes{{{DataType::nominal, "nominal"},
                                             {DataType::ordinal, "ordinal"},
                                             {DataType::quantitative, "quantitative"},
                                             {DataType::temporal, "temporal"}}};
constexpr NameTable<MarkType, 10> kMarks{{{MarkType::bar, "bar"},
                                          {MarkType::line, "line"},
                                          {MarkType::area, "area"},
                                          {MarkType::point, "point"},
                                          {MarkType::pie, "pie"},
                                          {MarkType::histogram, "histogram"},
                                          {MarkType::boxplot, "boxplot"},
                                          {MarkType::table, "table"},
                                          {MarkType::heatmap, "heatmap"},
                                          {MarkType::other, "other"}}};
constexpr NameTable<Channel, 7> kChannels{{{Channel::x, "x"},
                                           {Channel::y, "y"},
                                           {Channel::color, "color"},
                                           {Channel::shape, "shape"},
                                           {Channel::opacity, "opacity"},
                                           {Channel::size, "size"},
                                           {Channel::text, "text"}}};
constexpr NameTable<Aggregate, 7> kAggregates{{{Aggregate::sum, "sum"},
                                               {Aggregate::mean, "mean"},
                                               {Aggregate::count, "count"},
                                               {Aggregate::min, "min"},
                                               {Aggregate::max, "max"},
                                               {Aggregate::median, "median"},
                                               {Aggregate::none, "none"}}};
constexpr NameTable<ScaleType, 5> kScales{{{ScaleType::linear, "linear"},
                                           {ScaleType::log, "log"},
                                           {ScaleType::sqrt, "sqrt"},
                                           {ScaleType::ordinal, "ordinal"},
                                           {ScaleType::time, "time"}}};
constexpr NameTable<FilterOp, 6> kFilterOps{{{FilterOp::eq, "eq"},
                                             {FilterOp::neq, "neq"},
                                             {FilterOp::in, "in"},
                                             {FilterOp::range, "range"},
                                             {FilterOp::top_n, "top-n"},
                                             {FilterOp::not_null, "not-null"}}};
constexpr NameTable<SortDirection, 2> kDirections{
    {{SortDirection::asc, "asc"}, {SortDirection::desc, "desc"}}};
constexpr NameTable<Interaction, 4> kInteractions{{{Interaction::selection, "selection"},
                                                   {Interaction::zoom, "zoom"},
                                                   {Interaction::pan, "pan"},
                                                   {Interaction::drilldown, "drilldown"}}};
constexpr NameTable<Ambiguity, 3> kAmbiguities{{{Ambiguity::syntactic, "syntactic"},
                                                {Ambiguity::semantic, "semantic"},
                                                {Ambiguity::pragmatic, "pragmatic"}}};
constexpr NameTable<ContextHandling, 4> kContextHandling{
    {{ContextHandling::slot_filling, "slot-filling"},
     {ContextHandling::reference_resolution, "reference-resolution"},
     {ContextHandling::filter_carryover, "filter-carryover"},
     {ContextHandling::none, "none"}}};
constexpr NameTable<ParseStatus, 3> kParseStatus{{{ParseStatus::ok, "ok"},
                                                  {ParseStatus::repaired, "repaired"},
                                                  {ParseStatus::failed, "failed"}}};
constexpr NameTable<MetricStatus, 3> kMetricStatus{
    {{MetricStatus::scored, "scored"},
     {MetricStatus::unavailable, "unavailable"},
     {MetricStatus::not_applicable, "not-applicable"}}};

}  // namespace

std::string_view to_string(DataType v) { return name_of(kDataTypes, v); }
std::string_view to_string(MarkType v) { return name_of(kMarks, v); }
std::string_view to_string(Channel v) { return name_of(kChannels, v); }
std::string_view to_string(Aggregate v) { return name_of(kAggregates, v); }
std::string_view to_string(ScaleType v) { return name_of(kScales, v); }
std::string_view to_string(FilterOp v) { return name_of(kFilterOps, v); }
std::string_view to_string(SortDirection v) { return name_of(kDirections, v); }
std::string_view to_string(Interaction v) { return name_of(kInteractions, v); }
std::string_view to_string(Ambiguity v) { return name_of(kAmbiguities, v); }
std::string_view to_string(ContextHandling v) { return name_of(kContextHandling, v); }
std::string_view to_string(ParseStatus v) { return name_of(kParseStatus, v); }
std::string_view to_string(MetricStatus v) { return name_of(kMetricStatus, v); }

std::string mark_name(const Mark& m) {
  return m.type == MarkType::other ? m.other_name : std::string(to_string(m.type));
}

std::optional<DataType> parse_data_type(std::string_view s) { return parse_from(kDataTypes, s); }
std::optional<Channel> parse_channel(std::string_view s) { return parse_from(kChannels, s); }
std::optional<ScaleType> parse_scale_type(std::string_view s) { return parse_from(kScales, s); }
std::optional<Interaction> parse_interaction(std::string_view s) {
  auto key = text::normalize_key(s);
  if (key == "drill" || key == "drilldown") return Interaction::drilldown;
  if (key == "select" || key == "brush" || key == "highlight") return Interaction::selection;
  return parse_from(kInteractions, s);
}
std::optional<Ambiguity> parse_ambiguity(std::string_view s) { return parse_from(kAmbiguities, s); }
std::optional<ContextHandling> parse_context_handling(std::string_view s) {
  return parse_from(kContextHandling, s);
}
std::optional<ParseStatus> parse_parse_status(std::string_view s) {
  return parse_from(kParseStatus, s);
}
std::optional<MetricStatus> parse_metric_status(std::string_view s) {
  return parse_from(kMetricStatus, s);
}

std::optional<Aggregate> parse_aggregate(std::string_view s) {
  auto key = text::to_lower(text::trim(s));
  if (key == "average" || key == "avg") return Aggregate::mean;
  if (key == "distinct" || key == "countd") return Aggregate::count;
  return parse_from(kAggregates, key);
}

std::optional<FilterOp> parse_filter_op(std::string_view s) {
  auto key = text::to_lower(text::trim(s));
  if (key == "==" || key == "=" || key == "equal") return FilterOp::eq;
  if (key == "!=" || key == "ne") return FilterOp::neq;
  if (key == "oneof" || key == "one-of") return FilterOp::in;
  if (key == "topn" || key == "top_n" || key == "top") return FilterOp::top_n;
  if (key == "notnull" || key == "not_null" || key == "valid") return FilterOp::not_null;
  if (key == "between") return FilterOp::range;
  return parse_from(kFilterOps, key);
}

std::optional<SortDirection> parse_sort_direction(std::string_view s) {
  auto key = text::to_lower(text::trim(s));
  if (key == "ascending") return SortDirection::asc;
  if (key == "descending") return SortDirection::desc;
  return parse_from(kDirections, key);
}

Mark normalize_mark(std::string_view s) {
  auto key = text::normalize_key(s);
  static const std::vector<std::pair<std::string_view, MarkType>> aliases = {
      {"bar", MarkType::bar},           {"column", MarkType::bar},
      {"hbar", MarkType::bar},          {"barh", MarkType::bar},
      {"horizontalbar", MarkType::bar}, {"line", MarkType::line},
      {"trail", MarkType::line},        {"area", MarkType::area},
      {"point", MarkType::point},       {"circle", MarkType::point},
      {"square", MarkType::point},      {"scatter", MarkType::point},
      {"scatterplot", MarkType::point}, {"dot", MarkType::point},
      {"pie", MarkType::pie},           {"arc", MarkType::pie},
      {"donut", MarkType::pie},         {"histogram", MarkType::histogram},
      {"boxplot", MarkType::boxplot},   {"box", MarkType::boxplot},
      {"table", MarkType::table},       {"text", MarkType::table},
      {"heatmap", MarkType::heatmap},   {"rect", MarkType::heatmap}};
  for (const auto& [name, type] : aliases) {
    if (key == name) {
      return Mark{type, {}};
    }
  }
  return Mark{MarkType::other, text::to_lower(text::trim(s))};
}

std::optional<std::string> parse_temporal(std::string_view s) {
  static const std::regex re(
      R"(^(\d{4})(?:-(\d{2})(?:-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?)?)?$)");
  std::string t = text::trim(s);
  std::smatch m;
  if (!std::regex_match(t, m, re)) {
    return std::nullopt;
  }
  std::string out = m[1].str();
  if (m[2].matched) {
    int month = std::stoi(m[2].str());
    if (month < 1 || month > 12) return std::nullopt;
    out += "-" + m[2].str();
  }
  if (m[3].matched) {
    int day = std::stoi(m[3].str());
    if (day < 1 || day > 31) return std::nullopt;
    out += "-" + m[3].str();
  }
  if (m[4].matched) {
    int hh = std::stoi(m[4].str());
    int mm = std::stoi(m[5].str());
    int ss = m[6].matched ? std::stoi(m[6].str()) : 0;
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    if (hh != 0 || mm != 0 || ss != 0) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", hh, mm, ss);
      out += buf;
    }
  }
  return out;
}

}  // namespace cvabench
