#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cvabench/io.hpp"
#include "cvabench/model.hpp"

namespace cvabench::engine {

struct CanonicalName {
  std::string source_field;
  std::map<std::string, int> stemmed_tokens;  // bag
  std::set<std::string> trigrams;

  bool empty() const { return stemmed_tokens.empty(); }
  bool operator==(const CanonicalName&) const = default;
};

/// Tokens come from the field's name plus its aliases when the reference
/// resolves against `meta`, otherwise from the raw reference alone.
CanonicalName canon(std::string_view field, const Datasource& meta);

/// 0.5 * token-bag cosine + 0.5 * character-trigram cosine; 0 when either side is empty.
double cos_sim_stems(const CanonicalName& a, const CanonicalName& b);
double token_cosine(const CanonicalName& a, const CanonicalName& b);
double trigram_cosine(const CanonicalName& a, const CanonicalName& b);

double field_similarity(std::string_view a, std::string_view b, const Datasource& meta);

/// Similarity of two channel bindings; field-less count bindings match each other.
double binding_similarity(const EncodingBinding* e, const EncodingBinding* a, const Datasource& meta);

/// Effective data type of a reference: the datasource type when it resolves,
/// quantitative for a field-less count, otherwise unknown.
std::optional<DataType> field_type(std::string_view field, const Datasource& meta);
std::optional<DataType> binding_type(const EncodingBinding& b, const Datasource& meta);
bool types_match(std::string_view e, std::string_view a, const Datasource& meta);
bool binding_types_match(const EncodingBinding* e, const EncodingBinding* a, const Datasource& meta);

inline constexpr double kSwapThreshold = 0.8;

/// Canonical scalar used for filter comparison: trimmed, case-folded,
/// numeric strings as numbers, dates and month names in canonical form.
Scalar normalize_value(const Scalar& v);
bool scalars_equal(const Scalar& a, const Scalar& b);
bool scalar_less(const Scalar& a, const Scalar& b);

struct NormalizedFilters {
  std::vector<FilterClause> clauses;
  std::vector<std::string> issues;  // malformed clauses, excluded from `clauses`
};

NormalizedFilters normalize_filters(const std::vector<FilterClause>& filters);
NormalizedFilters normalize_filters(const VizSpec& spec);

/// Canonical value sets (and top-n measure) agree. Field names are not compared.
bool values_equivalent(const FilterClause& e, const FilterClause& a);
/// 1 for the same op, 0.5 for eq vs in, otherwise 0.
double op_match(const FilterClause& e, const FilterClause& a);

/// True when every expected axis matches the actual opposite axis with
/// similarity >= kSwapThreshold and better than its direct counterpart.
bool axes_swapped(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);
/// Meta-free variant used where no datasource is bound.
bool axes_swapped(const VizSpec& expected, const VizSpec& actual);

/// Canonical form: trimmed field names, explicit "none" aggregates dropped, normalized filters.
VizSpec normalize_spec(const VizSpec& spec);

enum class DiffKind { missing, extra, changed };
std::string_view to_string(DiffKind k);

struct DiffEntry {
  std::string path;
  std::optional<json> expected;
  std::optional<json> actual;
  DiffKind kind = DiffKind::changed;

  bool operator==(const DiffEntry&) const = default;
};

using SpecDiff = std::vector<DiffEntry>;

SpecDiff diff_specs(const VizSpec& expected, const VizSpec& actual);
json diff_to_json(const SpecDiff& diff);

/// Dotted-path fragment of a spec for provenance display (e.g. "encoding.x").
json spec_fragment(const VizSpec& spec, std::string_view path);

}  // namespace cvabench::engine
