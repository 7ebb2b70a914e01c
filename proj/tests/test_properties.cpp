#include <gtest/gtest.h>

#include "helpers.hpp"
#include "properties.hpp"

TEST(MetricProperties, HoldOverFuzzedSpecPairs) {
  auto failures = proptest::run_property_suite(testutil::superstore(), 1000, 20240611);
  std::string report;
  for (const auto& f : failures) report += f + "\n";
  EXPECT_TRUE(failures.empty()) << report;
}

TEST(MetricProperties, HoldOnASecondDatasource) {
  auto failures = proptest::run_property_suite(testutil::accounts(), 300, 7);
  std::string report;
  for (const auto& f : failures) report += f + "\n";
  EXPECT_TRUE(failures.empty()) << report;
}
