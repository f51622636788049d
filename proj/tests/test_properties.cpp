#include "properties.hpp"

#include <gtest/gtest.h>

using rpo::properties::Property;

class Properties : public ::testing::TestWithParam<Property> {};

TEST_P(Properties, HoldOnFiftySeeds)
{
    const Property& p = GetParam();
    for (std::uint64_t seed = 1; seed <= 50; ++seed) EXPECT_LT(p.residual(seed), p.tol) << "seed " << seed;
}

INSTANTIATE_TEST_SUITE_P(All, Properties, ::testing::ValuesIn(rpo::properties::all()),
                         [](const auto& info) { return info.param.name; });
