#pragma once

#include <string>

#include "cvabench/io.hpp"
#include "cvabench/model.hpp"

namespace testutil {

inline std::string data_path(const std::string& rel) { return std::string(CVABENCH_DATA_DIR) + "/" + rel; }

inline const cvabench::Datasource& superstore() {
  static const cvabench::Datasource ds = cvabench::load_datasource(data_path("datasources/superstore.json"));
  return ds;
}

inline const cvabench::Datasource& accounts() {
  static const cvabench::Datasource ds = cvabench::load_datasource(data_path("datasources/accounts.json"));
  return ds;
}

inline cvabench::VizSpec spec(const std::string& text) {
  std::vector<cvabench::Violation> issues;
  return cvabench::parse_viz_spec(cvabench::json::parse(text), issues);
}

}  // namespace testutil

#include "cvabench/eval.hpp"
#include "cvabench/llm_gateway.hpp"
#include "cvabench/mock_model.hpp"
#include "cvabench/nl_metrics.hpp"

namespace testutil {

inline std::vector<cvabench::Datasource> datasources() { return {superstore(), accounts()}; }

inline std::vector<cvabench::TestCase> reference_suite() {
  return cvabench::load_test_suite(data_path("suites/reference.json"), datasources());
}

inline cvabench::llm::MockModel reference_mock() {
  cvabench::llm::MockModel m;
  m.add_suite(reference_suite());
  m.add_script(cvabench::load_document(data_path("suites/reference_responses.json")));
  return m;
}

inline std::string prompt_text(const std::string& name) {
  return cvabench::read_file(data_path("prompts/" + name));
}

/// Two mock models, both shipped prompts, the first two reference conversations (3 turns).
inline cvabench::eval::EvalInputs grid_inputs(int runs = 3) {
  cvabench::eval::EvalInputs in;
  in.config.models = {{"local", "mock-analyst", "mock", "Mock analyst"}, {"local", "mock-terse", "mock-terse", "Mock terse"}};
  in.config.system_prompts = {prompt_text("analyst.txt"), prompt_text("analyst_with_history.txt")};
  in.config.test_case_selection = "1-2";
  in.config.runs = runs;
  in.config.judge_model = cvabench::ModelRef{"local", "mock-judge", "mock-judge", "Mock judge"};
  in.suite = reference_suite();
  in.datasources = datasources();
  in.rubrics = cvabench::nl::load_rubrics(data_path("rubrics"));
  return in;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("cvabench_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace testutil
