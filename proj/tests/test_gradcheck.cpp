#include <gtest/gtest.h>

#include <set>
#include <string>

#include "deepfix/gradcheck.hpp"

using namespace deepfix;

TEST(GradCheck, SuitePassesAcrossSeeds) {
    for (uint64_t seed : {1ull, 2ull}) {
        const std::vector<CheckOutcome> results = gradcheck_suite(seed);
        for (const CheckOutcome& r : results) {
            EXPECT_TRUE(r.ok()) << "seed " << seed << " case " << r.name << " max_rel " << r.max_rel;
            EXPECT_LT(r.max_rel, kGradCheckTolerance) << r.name;
            EXPECT_GT(r.probes, 0) << r.name;
        }
    }
}

TEST(GradCheck, SuiteCoversEveryKernel) {
    const std::vector<CheckOutcome> results = gradcheck_suite(1);
    std::set<std::string> names;
    for (const CheckOutcome& r : results) names.insert(r.name);
    const std::set<std::string> expected{"conv3",     "conv3_stride2", "conv3_hole2",
                                         "conv5_hole6", "maxpool",       "relu",
                                         "lbc",       "inception",     "euclidean_loss",
                                         "network_end_to_end"};
    EXPECT_EQ(names, expected);
}

TEST(GradCheck, ProbedReceptiveExtentsAreExact) {
    EXPECT_EQ(probe_receptive_extent(3, 1), 3);
    EXPECT_EQ(probe_receptive_extent(3, 2), 5);
    EXPECT_EQ(probe_receptive_extent(5, 6), 25);
    EXPECT_EQ(probe_receptive_extent(1, 1), 1);
}
