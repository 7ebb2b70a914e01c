#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "cvabench/eval.hpp"

namespace cvabench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitCancelled = 130;

/// Token flipped by the SIGINT handler installed by the executable.
eval::CancelToken& interrupt_token();

/// Entry point shared by the executable and the tests. argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

/// Loads datasources and resolves a suite against them, printing every
/// violation as "severity: file:path: message [rule]".
struct Workspace {
  std::vector<Datasource> datasources;
  std::vector<TestCase> suite;
  std::vector<Violation> warnings;
};
Workspace load_workspace(const std::string& suite_path, const std::vector<std::string>& datasource_paths);

/// Column-aligned plain text table.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace cvabench::cli
