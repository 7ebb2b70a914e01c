#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvabench/model.hpp"

namespace cvabench {

using json = nlohmann::json;

enum class Severity { error, warning };

struct Violation {
  Severity severity = Severity::error;
  std::string file;
  std::string path;  // e.g. "fields[2].dataType"
  std::string rule;
  std::string message;

  std::string to_string() const;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

std::string read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Parses JSON or YAML. The format comes from the extension when it is one of
/// .json/.yaml/.yml, otherwise from the first non-blank character.
json parse_document(const std::string& content, const std::filesystem::path& origin);
json load_document(const std::filesystem::path& path);
std::string to_yaml(const json& doc);

// Scalars
json scalar_to_json(const Scalar& v);
Scalar scalar_from_json(const json& j);

// Visualization specs. Parsing is lenient about Vega-Lite spellings
// (transform filters, channel-level sort, encoding.tooltip); problems are
// appended to `issues` with paths relative to `path`.
VizSpec parse_viz_spec(const json& j, std::vector<Violation>& issues, const std::string& path = "");
json viz_spec_to_json(const VizSpec& spec);

json datasource_to_json(const Datasource& ds);
Datasource parse_datasource(const json& j, const std::string& file = "");
Datasource load_datasource(const std::filesystem::path& path);

json test_case_to_json(const TestCase& tc);
json test_suite_to_json(const std::vector<TestCase>& suite);

/// Validates a suite against one datasource. Unknown field references are
/// reported through `warnings`; structural problems throw ValidationError.
std::vector<TestCase> parse_test_suite(const json& j, const Datasource& ds,
                                       std::vector<Violation>* warnings = nullptr,
                                       const std::string& file = "");
std::vector<TestCase> load_test_suite(const std::filesystem::path& path, const Datasource& ds,
                                      std::vector<Violation>* warnings = nullptr);

/// Suites whose conversations use different datasources. Each conversation's
/// datasourceRef is matched against datasource titles (normalized); with a
/// single datasource every reference resolves to it.
std::vector<TestCase> load_test_suite(const std::filesystem::path& path,
                                      const std::vector<Datasource>& sources,
                                      std::vector<Violation>* warnings = nullptr);
std::vector<TestCase> parse_test_suite(const json& j, const std::vector<Datasource>& sources,
                                       std::vector<Violation>* warnings = nullptr,
                                       const std::string& file = "");
const Datasource* resolve_datasource(const std::vector<Datasource>& sources, std::string_view ref);

/// `selection` is blank (all) or a comma list of ids and numeric ranges ("1-3,7").
std::vector<TestCase> select_test_cases(const std::vector<TestCase>& suite,
                                        std::string_view selection);

/// Field references of a spec that do not resolve against `ds`.
std::vector<std::string> unresolved_fields(const VizSpec& spec, const Datasource& ds);

json model_response_to_json(const ModelResponse& r);
ModelResponse model_response_from_json(const json& j);
json metric_score_to_json(const MetricScore& s);
MetricScore metric_score_from_json(const json& j);
json model_ref_to_json(const ModelRef& m);
ModelRef model_ref_from_json(const json& j);
/// Placeholders a system prompt template must contain, in the order checked.
inline constexpr std::string_view kRequiredPlaceholders[] = {"datasource", "utterance",
                                                             "output-schema"};
std::vector<std::string> missing_placeholders(std::string_view tmpl);

json experiment_config_to_json(const ExperimentConfig& c);
/// Throws ValidationError with field-level messages.
ExperimentConfig experiment_config_from_json(const json& j);

}  // namespace cvabench
