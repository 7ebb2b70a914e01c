#include "cvabench/spec_engine.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "cvabench/text.hpp"

namespace cvabench::engine {

namespace {

void add_tokens(std::string_view name, CanonicalName& out) {
  for (const auto& w : text::words(name)) {
    auto stem = text::porter_stem(w);
    out.stemmed_tokens[stem] += 1;
    std::string padded = "#" + stem + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      out.trigrams.insert(padded.substr(i, 3));
    }
  }
}

}  // namespace

CanonicalName canon(std::string_view field, const Datasource& meta) {
  CanonicalName out;
  if (const auto* f = meta.find(field)) {
    out.source_field = f->name;
    add_tokens(f->name, out);
    for (const auto& alias : f->aliases) add_tokens(alias, out);
  } else {
    out.source_field = text::trim(field);
    add_tokens(field, out);
  }
  return out;
}

double token_cosine(const CanonicalName& a, const CanonicalName& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [tok, n] : a.stemmed_tokens) {
    na += double(n) * n;
    if (auto it = b.stemmed_tokens.find(tok); it != b.stemmed_tokens.end()) {
      dot += double(n) * it->second;
    }
  }
  for (const auto& [tok, n] : b.stemmed_tokens) nb += double(n) * n;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double trigram_cosine(const CanonicalName& a, const CanonicalName& b) {
  if (a.trigrams.empty() || b.trigrams.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a.trigrams) shared += b.trigrams.count(t);
  return double(shared) / std::sqrt(double(a.trigrams.size()) * double(b.trigrams.size()));
}

double cos_sim_stems(const CanonicalName& a, const CanonicalName& b) {
  if (a.empty() || b.empty()) return 0.0;
  double s = 0.5 * token_cosine(a, b) + 0.5 * trigram_cosine(a, b);
  return std::clamp(s, 0.0, 1.0);
}

double field_similarity(std::string_view a, std::string_view b, const Datasource& meta) {
  const auto* fa = meta.find(a);
  const auto* fb = meta.find(b);
  if (fa && fa == fb) return 1.0;
  return cos_sim_stems(canon(a, meta), canon(b, meta));
}

double binding_similarity(const EncodingBinding* e, const EncodingBinding* a, const Datasource& meta) {
  if (!e || !a) return 0.0;
  if (e->field.empty() || a->field.empty()) {
    bool both_count = e->field.empty() && a->field.empty() && e->aggregate == a->aggregate;
    return both_count ? 1.0 : 0.0;
  }
  return field_similarity(e->field, a->field, meta);
}

std::optional<DataType> field_type(std::string_view field, const Datasource& meta) {
  if (const auto* f = meta.find(field)) return f->data_type;
  return std::nullopt;
}

std::optional<DataType> binding_type(const EncodingBinding& b, const Datasource& meta) {
  if (b.field.empty()) {
    if (b.aggregate && *b.aggregate == Aggregate::count) return DataType::quantitative;
    return std::nullopt;
  }
  return field_type(b.field, meta);
}

bool types_match(std::string_view e, std::string_view a, const Datasource& meta) {
  auto te = field_type(e, meta);
  auto ta = field_type(a, meta);
  if (te && ta) return *te == *ta;
  if (!te && !ta) return text::normalize_key(e) == text::normalize_key(a) && !text::normalize_key(e).empty();
  return false;
}

bool binding_types_match(const EncodingBinding* e, const EncodingBinding* a, const Datasource& meta) {
  if (!e || !a) return false;
  auto te = binding_type(*e, meta);
  auto ta = binding_type(*a, meta);
  if (te && ta) return *te == *ta;
  if (!te && !ta) return types_match(e->field, a->field, meta);
  return false;
}

// ---------------------------------------------------------------------------
// filter values

namespace {

std::optional<std::string> month_key(const std::string& s) {
  static const char* names[] = {"january", "february", "march",     "april",   "may",      "june",
                                "july",    "august",   "september", "october", "november", "december"};
  if (s.size() < 3) return std::nullopt;
  for (const char* full : names) {
    std::string_view f(full);
    if (s == f || (s.size() >= 3 && f.substr(0, s.size()) == s) || (s == "sept" && f == "september")) {
      return std::string(f.substr(0, 3));
    }
  }
  return std::nullopt;
}

int kind_rank(const Scalar& v) { return static_cast<int>(v.index()); }

}  // namespace

Scalar normalize_value(const Scalar& v) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    auto trimmed = text::trim(*s);
    if (auto n = scalar_as_number(trimmed)) return *n;
    if (trimmed.find('-') != std::string::npos) {
      if (auto d = parse_temporal(trimmed)) return *d;
    }
    auto t = text::to_lower(trimmed);
    if (auto m = month_key(t)) return *m;
    if (t == "true") return true;
    if (t == "false") return false;
    return t;
  }
  if (const auto* d = std::get_if<double>(&v)) {
    return *d == 0.0 ? 0.0 : *d;  // fold -0
  }
  return v;
}

bool scalars_equal(const Scalar& a, const Scalar& b) {
  const auto* da = std::get_if<double>(&a);
  const auto* db = std::get_if<double>(&b);
  if (da && db) {
    return std::fabs(*da - *db) <= 1e-9 * std::max({1.0, std::fabs(*da), std::fabs(*db)});
  }
  return a == b;
}

bool scalar_less(const Scalar& a, const Scalar& b) {
  if (kind_rank(a) != kind_rank(b)) return kind_rank(a) < kind_rank(b);
  if (scalars_equal(a, b)) return false;
  return a < b;
}

namespace {

bool values_less(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), scalar_less);
}

bool values_equal(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!scalars_equal(a[i], b[i])) return false;
  }
  return true;
}

bool clause_less(const FilterClause& a, const FilterClause& b) {
  auto ka = text::normalize_key(a.field);
  auto kb = text::normalize_key(b.field);
  if (ka != kb) return ka < kb;
  if (a.op != b.op) return a.op < b.op;
  if (!values_equal(a.values, b.values)) return values_less(a.values, b.values);
  return a.measure.value_or("") < b.measure.value_or("");
}

bool clause_equal(const FilterClause& a, const FilterClause& b) {
  return text::normalize_key(a.field) == text::normalize_key(b.field) && a.op == b.op &&
         values_equal(a.values, b.values) &&
         text::normalize_key(a.measure.value_or("")) == text::normalize_key(b.measure.value_or(""));
}

std::string describe(const FilterClause& f) {
  std::string vals;
  for (const auto& v : f.values) {
    if (!vals.empty()) vals += ", ";
    vals += scalar_to_string(v);
  }
  return std::string(to_string(f.op)) + "(" + f.field + (vals.empty() ? "" : ": " + vals) + ")";
}

std::optional<FilterClause> normalize_clause(const FilterClause& in, std::string& problem) {
  FilterClause f;
  f.field = text::trim(in.field);
  f.op = in.op;
  if (f.field.empty()) {
    problem = "filter has no field";
    return std::nullopt;
  }
  for (const auto& v : in.values) {
    if (std::holds_alternative<std::monostate>(v)) continue;
    f.values.push_back(normalize_value(v));
  }
  auto sort_unique = [&] {
    std::sort(f.values.begin(), f.values.end(), scalar_less);
    f.values.erase(std::unique(f.values.begin(), f.values.end(), scalars_equal), f.values.end());
  };
  switch (f.op) {
    case FilterOp::eq:
    case FilterOp::in:
      sort_unique();
      if (f.values.empty()) {
        problem = describe(in) + " has no values";
        return std::nullopt;
      }
      f.op = f.values.size() == 1 ? FilterOp::eq : FilterOp::in;
      break;
    case FilterOp::neq:
      sort_unique();
      if (f.values.size() != 1) {
        problem = describe(in) + " must carry exactly one value";
        return std::nullopt;
      }
      break;
    case FilterOp::range: {
      if (f.values.size() != 2 || f.values[0].index() != f.values[1].index() ||
          std::holds_alternative<bool>(f.values[0])) {
        problem = describe(in) + " must carry exactly two comparable bounds";
        return std::nullopt;
      }
      if (scalar_less(f.values[1], f.values[0])) std::swap(f.values[0], f.values[1]);
      break;
    }
    case FilterOp::top_n: {
      const double* n = f.values.size() == 1 ? std::get_if<double>(&f.values[0]) : nullptr;
      if (!n || *n < 1 || std::floor(*n) != *n) {
        problem = describe(in) + " must carry one positive integer";
        return std::nullopt;
      }
      if (!in.measure || text::trim(*in.measure).empty()) {
        problem = describe(in) + " has no ranking measure";
        return std::nullopt;
      }
      f.measure = text::trim(*in.measure);
      break;
    }
    case FilterOp::not_null:
      f.values.clear();
      break;
  }
  return f;
}

}  // namespace

NormalizedFilters normalize_filters(const std::vector<FilterClause>& filters) {
  NormalizedFilters out;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    std::string problem;
    if (auto f = normalize_clause(filters[i], problem)) {
      out.clauses.push_back(std::move(*f));
    } else {
      out.issues.push_back("filters[" + std::to_string(i) + "]: " + problem);
    }
  }
  std::sort(out.clauses.begin(), out.clauses.end(), clause_less);
  out.clauses.erase(std::unique(out.clauses.begin(), out.clauses.end(), clause_equal),
                    out.clauses.end());
  return out;
}

NormalizedFilters normalize_filters(const VizSpec& spec) { return normalize_filters(spec.filters); }

bool values_equivalent(const FilterClause& e, const FilterClause& a) {
  std::string p1, p2;
  auto ne = normalize_clause(e, p1);
  auto na = normalize_clause(a, p2);
  if (!ne || !na) return false;
  if (!values_equal(ne->values, na->values)) return false;
  if (ne->op == FilterOp::top_n || na->op == FilterOp::top_n) {
    return text::normalize_key(ne->measure.value_or("")) ==
           text::normalize_key(na->measure.value_or(""));
  }
  return true;
}

double op_match(const FilterClause& e, const FilterClause& a) {
  if (e.op == a.op) return 1.0;
  auto eqish = [](FilterOp op) { return op == FilterOp::eq || op == FilterOp::in; };
  if (eqish(e.op) && eqish(a.op)) return 0.5;
  return 0.0;
}

// ---------------------------------------------------------------------------
// axes

bool axes_swapped(const VizSpec& expected, const VizSpec& actual, const Datasource& meta) {
  const auto* ex = expected.binding(Channel::x);
  const auto* ey = expected.binding(Channel::y);
  const auto* ax = actual.binding(Channel::x);
  const auto* ay = actual.binding(Channel::y);
  if ((!ex && !ey) || (!ax && !ay)) return false;
  bool any = false;
  if (ex) {
    double cross = binding_similarity(ex, ay, meta);
    double direct = binding_similarity(ex, ax, meta);
    if (cross < kSwapThreshold || cross <= direct) return false;
    any = true;
  }
  if (ey) {
    double cross = binding_similarity(ey, ax, meta);
    double direct = binding_similarity(ey, ay, meta);
    if (cross < kSwapThreshold || cross <= direct) return false;
    any = true;
  }
  return any;
}

bool axes_swapped(const VizSpec& expected, const VizSpec& actual) {
  return axes_swapped(expected, actual, Datasource{});
}

// ---------------------------------------------------------------------------
// normalization and diff

VizSpec normalize_spec(const VizSpec& spec) {
  VizSpec out = spec;
  for (auto& [c, b] : out.encoding) {
    b.field = text::trim(b.field);
    if (b.aggregate && *b.aggregate == Aggregate::none) b.aggregate.reset();
  }
  for (auto& t : out.tooltip) {
    t.field = text::trim(t.field);
    t.format = text::trim(t.format);
    if (t.aggregate && *t.aggregate == Aggregate::none) t.aggregate.reset();
  }
  out.filters = normalize_filters(spec).clauses;
  if (out.sort) out.sort->field = text::trim(out.sort->field);
  return out;
}

std::string_view to_string(DiffKind k) {
  switch (k) {
    case DiffKind::missing:
      return "missing";
    case DiffKind::extra:
      return "extra";
    case DiffKind::changed:
      return "changed";
  }
  return "changed";
}

namespace {

json binding_json(const EncodingBinding& b) {
  VizSpec tmp;
  tmp.encoding[Channel::x] = b;
  return viz_spec_to_json(tmp)["encoding"]["x"];
}

json filters_json(const std::vector<FilterClause>& fs) {
  VizSpec tmp;
  tmp.filters = fs;
  return viz_spec_to_json(tmp)["filters"];
}

json tooltip_json(const TooltipField& t) {
  VizSpec tmp;
  tmp.tooltip = {t};
  return viz_spec_to_json(tmp)["tooltip"][0];
}

std::optional<json> opt(const std::optional<std::string_view>& v) {
  if (!v) return std::nullopt;
  return json(std::string(*v));
}

void compare(SpecDiff& out, const std::string& path, const std::optional<json>& e,
             const std::optional<json>& a) {
  if (e == a) return;
  DiffKind kind = !a ? DiffKind::missing : (!e ? DiffKind::extra : DiffKind::changed);
  out.push_back(DiffEntry{path, e, a, kind});
}

}  // namespace

SpecDiff diff_specs(const VizSpec& expected_in, const VizSpec& actual_in) {
  auto e = normalize_spec(expected_in);
  auto a = normalize_spec(actual_in);
  SpecDiff out;
  compare(out, "mark", json(mark_name(e.mark)), json(mark_name(a.mark)));

  for (auto c : kAllChannels) {
    auto path = "encoding." + std::string(to_string(c));
    const auto* eb = e.binding(c);
    const auto* ab = a.binding(c);
    if (!eb && !ab) continue;
    if (!eb || !ab) {
      compare(out, path, eb ? std::optional<json>(binding_json(*eb)) : std::nullopt,
              ab ? std::optional<json>(binding_json(*ab)) : std::nullopt);
      continue;
    }
    auto field_of = [](const EncodingBinding& b) -> std::optional<json> {
      if (b.field.empty()) return std::nullopt;
      return json(b.field);
    };
    auto fe = field_of(*eb);
    auto fa = field_of(*ab);
    if (text::normalize_key(eb->field) != text::normalize_key(ab->field)) {
      compare(out, path + ".field", fe, fa);
    }
    compare(out, path + ".aggregate", opt(eb->aggregate ? std::optional(to_string(*eb->aggregate)) : std::nullopt),
            opt(ab->aggregate ? std::optional(to_string(*ab->aggregate)) : std::nullopt));
    compare(out, path + ".scale.type", opt(eb->scale ? std::optional(to_string(*eb->scale)) : std::nullopt),
            opt(ab->scale ? std::optional(to_string(*ab->scale)) : std::nullopt));
    compare(out, path + ".scale.zero", eb->zero ? std::optional<json>(*eb->zero) : std::nullopt,
            ab->zero ? std::optional<json>(*ab->zero) : std::nullopt);
  }

  auto tooltip_key = [](const TooltipField& t) {
    return json{{"field", text::normalize_key(t.field)},
                {"aggregate", t.aggregate ? std::string(to_string(*t.aggregate)) : ""},
                {"format", t.format}};
  };
  std::size_t n = std::max(e.tooltip.size(), a.tooltip.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto path = "tooltip[" + std::to_string(i) + "]";
    const auto* te = i < e.tooltip.size() ? &e.tooltip[i] : nullptr;
    const auto* ta = i < a.tooltip.size() ? &a.tooltip[i] : nullptr;
    if (te && ta && tooltip_key(*te) == tooltip_key(*ta)) continue;
    compare(out, path, te ? std::optional<json>(tooltip_json(*te)) : std::nullopt,
            ta ? std::optional<json>(tooltip_json(*ta)) : std::nullopt);
  }

  std::map<std::string, std::pair<std::vector<FilterClause>, std::vector<FilterClause>>> by_field;
  for (const auto& f : e.filters) by_field[text::normalize_key(f.field)].first.push_back(f);
  for (const auto& f : a.filters) by_field[text::normalize_key(f.field)].second.push_back(f);
  for (const auto& [key, pair] : by_field) {
    const auto& [fe, fa] = pair;
    bool same = fe.size() == fa.size();
    for (std::size_t i = 0; same && i < fe.size(); ++i) {
      same = fe[i].op == fa[i].op && values_equal(fe[i].values, fa[i].values) &&
             text::normalize_key(fe[i].measure.value_or("")) ==
                 text::normalize_key(fa[i].measure.value_or(""));
    }
    if (same) continue;
    std::string label = !fe.empty() ? fe.front().field : fa.front().field;
    compare(out, "filters." + label, fe.empty() ? std::nullopt : std::optional<json>(filters_json(fe)),
            fa.empty() ? std::nullopt : std::optional<json>(filters_json(fa)));
  }

  if (e.sort || a.sort) {
    if (!e.sort || !a.sort) {
      auto sj = [](const SortClause& s) {
        VizSpec tmp;
        tmp.sort = s;
        return viz_spec_to_json(tmp)["sort"];
      };
      compare(out, "sort", e.sort ? std::optional<json>(sj(*e.sort)) : std::nullopt,
              a.sort ? std::optional<json>(sj(*a.sort)) : std::nullopt);
    } else {
      if (text::normalize_key(e.sort->field) != text::normalize_key(a.sort->field)) {
        compare(out, "sort.field", json(e.sort->field), json(a.sort->field));
      }
      auto dir = [](const SortClause& s) -> std::optional<json> {
        if (!s.direction) return std::nullopt;
        return json(*s.direction == SortDirection::asc ? "ascending" : "descending");
      };
      compare(out, "sort.order", dir(*e.sort), dir(*a.sort));
    }
  }

  for (auto i : {Interaction::selection, Interaction::zoom, Interaction::pan, Interaction::drilldown}) {
    bool in_e = e.interactions.count(i) > 0;
    bool in_a = a.interactions.count(i) > 0;
    if (in_e == in_a) continue;
    auto name = json(std::string(to_string(i)));
    compare(out, "interactions." + std::string(to_string(i)),
            in_e ? std::optional<json>(name) : std::nullopt,
            in_a ? std::optional<json>(name) : std::nullopt);
  }
  return out;
}

json diff_to_json(const SpecDiff& diff) {
  json arr = json::array();
  for (const auto& d : diff) {
    arr.push_back(json{{"path", d.path},
                       {"expected", d.expected ? *d.expected : json(nullptr)},
                       {"actual", d.actual ? *d.actual : json(nullptr)},
                       {"kind", to_string(d.kind)}});
  }
  return arr;
}

json spec_fragment(const VizSpec& spec, std::string_view path) {
  json j = viz_spec_to_json(spec);
  json* cur = &j;
  for (const auto& part : text::split(path, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return *cur;
}

}  // namespace cvabench::engine
