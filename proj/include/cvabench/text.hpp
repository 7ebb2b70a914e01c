#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cvabench::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Lowercase alphanumerics only; "Sales_Region" and "sales region" share a key.
std::string normalize_key(std::string_view s);

/// Splits identifiers and prose into lowercase words. Handles camelCase,
/// underscores, hyphens and punctuation.
std::vector<std::string> words(std::string_view s);

/// Porter (1980) suffix-stripping stemmer. Input must be lowercase ASCII.
std::string porter_stem(std::string_view word);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool equals_ci(std::string_view a, std::string_view b);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace cvabench::text
