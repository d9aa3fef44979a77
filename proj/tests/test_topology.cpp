// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vascheck/topology.hpp"

using namespace vascheck;

namespace {

VoxelVolume box_mask(int n, Vec3 spacing = {1, 1, 1}) {
    return VoxelVolume(n, n, n, spacing);
}

VoxelVolume solid_cube(int outer, int lo, int hi) {
    VoxelVolume m = box_mask(outer);
    for (int z = lo; z <= hi; ++z)
        for (int y = lo; y <= hi; ++y)
            for (int x = lo; x <= hi; ++x) m(x, y, z) = 1.0f;
    return m;
}

}  // namespace

TEST(ConnectedComponents, TwoDisjointCubes) {
    VoxelVolume m(8, 8, 8, {1, 1, 1});
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                m(x, y, z) = 1.0f;
                m(x + 5, y + 5, z + 5) = 1.0f;
            }
    auto cc = connected_components(m, 26);
    ASSERT_EQ(cc.sizes.size(), 2u);
    EXPECT_EQ(cc.sizes[0], 8u);
    EXPECT_EQ(cc.sizes[1], 8u);
}

TEST(ConnectedComponents, EmptyMask) {
    auto cc = connected_components(box_mask(4), 26);
    EXPECT_TRUE(cc.sizes.empty());
}

TEST(ConnectedComponents, FaceDiagonalPairConnectivity) {
    VoxelVolume m(4, 4, 4, {1, 1, 1});
    m(1, 1, 1) = 1.0f;
    m(2, 2, 1) = 1.0f;  // touching along a face diagonal
    EXPECT_EQ(connected_components(m, 6).sizes.size(), 2u);
    EXPECT_EQ(connected_components(m, 26).sizes.size(), 1u);
}

TEST(ConnectedComponents, LabelsOrderedBySize) {
    VoxelVolume m(10, 4, 4, {1, 1, 1});
    m(0, 0, 0) = 1.0f;  // size 1, seen first
    for (int x = 4; x < 9; ++x) m(x, 2, 2) = 1.0f;  // size 5
    auto cc = connected_components(m, 26);
    ASSERT_EQ(cc.sizes.size(), 2u);
    EXPECT_EQ(cc.sizes[0], 5u);
    EXPECT_EQ(cc.labels(4, 2, 2), 1.0f);
    EXPECT_EQ(cc.labels(0, 0, 0), 2.0f);
}

TEST(BettiNumbers, SolidCube) {
    auto b = betti_numbers(solid_cube(5, 1, 3));
    EXPECT_EQ(b.b0, 1);
    EXPECT_EQ(b.b1, 0);
    EXPECT_EQ(b.b2, 0);
    EXPECT_EQ(b.euler, 1);
}

TEST(BettiNumbers, HollowShell) {
    VoxelVolume m = solid_cube(7, 1, 5);
    m(3, 3, 3) = 0.0f;  // enclosed cavity
    auto b = betti_numbers(m);
    EXPECT_EQ(b.b0, 1);
    EXPECT_EQ(b.b1, 0);
    EXPECT_EQ(b.b2, 1);
    EXPECT_EQ(b.euler, 2);
}

TEST(BettiNumbers, VoxelTorus) {
    // square ring in one slab
    VoxelVolume m(7, 7, 3, {1, 1, 1});
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x)
            if (x == 1 || x == 5 || y == 1 || y == 5) m(x, y, 1) = 1.0f;
    auto b = betti_numbers(m);
    EXPECT_EQ(b.b0, 1);
    EXPECT_EQ(b.b1, 1);
    EXPECT_EQ(b.b2, 0);
    EXPECT_EQ(b.euler, 0);
}

TEST(BettiNumbers, EulerIdentityAndOracleOnRandomMasks) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 120; ++trial) {
        double density = 0.15 + 0.7 * (trial % 10) / 10.0;
        auto m = oracle::random_mask(rng, 6, 6, 6, density);
        auto got = betti_numbers(m);
        auto want = oracle::betti_oracle(m);
        ASSERT_EQ(got.b0, want[0]) << "trial " << trial;
        ASSERT_EQ(got.b1, want[1]) << "trial " << trial;
        ASSERT_EQ(got.b2, want[2]) << "trial " << trial;
        ASSERT_EQ(got.euler, got.b0 - got.b1 + got.b2);
    }
}

TEST(BettiNumbers, TranslationInvariance) {
    std::mt19937 rng(21);
    auto m = oracle::random_mask(rng, 5, 5, 5, 0.4);
    auto base = betti_numbers(m);
    VoxelVolume big(12, 12, 12, {1, 1, 1});
    for (int z = 0; z < 5; ++z)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) big(x + 4, y + 3, z + 5) = m(x, y, z);
    auto moved = betti_numbers(big);
    EXPECT_EQ(base, moved);
    EXPECT_EQ(base.euler, moved.euler);
}

TEST(VtaCheck, CleanSolidPasses) {
    auto verdict = vta_check(solid_cube(6, 1, 4));
    EXPECT_EQ(verdict.vta, 1);
    EXPECT_TRUE(verdict.reasons.empty());
}

TEST(VtaCheck, CavityFails) {
    VoxelVolume m = solid_cube(7, 1, 5);
    m(3, 3, 3) = 0.0f;
    auto verdict = vta_check(m);
    EXPECT_EQ(verdict.vta, 0);
    ASSERT_EQ(verdict.reasons.size(), 1u);
    EXPECT_EQ(verdict.reasons[0], "b2=1");
}

TEST(VtaCheck, EmptyMaskIsRejected) {
    auto verdict = vta_check(box_mask(4));
    EXPECT_EQ(verdict.vta, 0);
    ASSERT_EQ(verdict.reasons.size(), 1u);
    EXPECT_EQ(verdict.reasons[0], "empty");
}

TEST(VtaCheck, LoopPolicyKnob) {
    VoxelVolume m(7, 7, 3, {1, 1, 1});
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x)
            if (x == 1 || x == 5 || y == 1 || y == 5) m(x, y, 1) = 1.0f;
    EXPECT_EQ(vta_check(m).vta, 0);
    TopologyPolicy permissive;
    permissive.max_loops = 1;
    EXPECT_EQ(vta_check(m, permissive).vta, 1);
}
