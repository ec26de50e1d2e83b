// SPDX-License-Identifier: Apache-2.0
// Built against the double-precision library so central differences are not
// swamped by float rounding.
#include <gtest/gtest.h>

#include "gradient_cases.hpp"

namespace fed {
namespace {

class GradientSuite : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientSuite, FiniteDifferencesOnFiveSeeds) {
  const auto cases = test::gradient_cases();
  const auto& c = cases.at(GetParam());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const test::GradCheck r = c.run(seed);
    EXPECT_TRUE(r.ok) << c.name << " seed " << seed << ": " << r.worst;
    EXPECT_GT(r.checked, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllLayers, GradientSuite, ::testing::Range<std::size_t>(0, test::gradient_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           return test::gradient_cases().at(info.param).name;
                         });

}  // namespace
}  // namespace fed
