#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lqlab/grid.hpp"

using lqlab::Grid1D;

TEST(Grid1D, SpacingAndNodes) {
    const Grid1D g(-2.0, 2.0, 401);
    EXPECT_EQ(g.size(), 401u);
    EXPECT_DOUBLE_EQ(g.dx(), 0.01);
    EXPECT_DOUBLE_EQ(g.node(0), -2.0);
    EXPECT_DOUBLE_EQ(g.node(400), 2.0);
    EXPECT_NEAR(g.node(200), 0.0, 1e-15);
    EXPECT_EQ(g.nodes().size(), 401u);
}

TEST(Grid1D, WithSpacingMatchesNodeCount) {
    const auto g = Grid1D::with_spacing(-2.0, 2.0, 0.05);
    EXPECT_EQ(g.size(), 81u);
    EXPECT_EQ(g, Grid1D(-2.0, 2.0, 81));
}

TEST(Grid1D, RejectsDegenerateGrids) {
    EXPECT_THROW(Grid1D(-1.0, 1.0, 2), std::invalid_argument);
    EXPECT_THROW(Grid1D(1.0, 1.0, 5), std::invalid_argument);
    EXPECT_THROW(Grid1D(2.0, -2.0, 5), std::invalid_argument);
}

TEST(Grid1D, NearestClampsAndBreaksTiesLow) {
    const Grid1D g(0.0, 4.0, 5);
    EXPECT_EQ(g.nearest(-10.0), 0u);
    EXPECT_EQ(g.nearest(10.0), 4u);
    EXPECT_EQ(g.nearest(1.4), 1u);
    EXPECT_EQ(g.nearest(1.6), 2u);
    EXPECT_EQ(g.nearest(1.5), 1u);
    EXPECT_EQ(g.nearest(3.0), 3u);
}

TEST(Grid1D, InteriorRangeKeepsCentralShare) {
    const auto r = lqlab::interior_range(401, 2.0 / 3.0);
    EXPECT_EQ(r.first, 66u);
    EXPECT_EQ(r.last, 335u);
    const auto all = lqlab::interior_range(10, 1.0);
    EXPECT_EQ(all.first, 0u);
    EXPECT_EQ(all.last, 10u);
    EXPECT_THROW(lqlab::interior_range(10, 0.0), std::invalid_argument);
}

TEST(NodeField, SampleAndNorms) {
    const Grid1D g(-1.0, 1.0, 5);
    const auto v = lqlab::ValueField::sample(g, [](double x) { return x * x; });
    EXPECT_DOUBLE_EQ(v[0], 1.0);
    EXPECT_DOUBLE_EQ(v[2], 0.0);
    EXPECT_DOUBLE_EQ(lqlab::sup_norm(v.values()), 1.0);
    const lqlab::ValueField zero(g);
    EXPECT_DOUBLE_EQ(lqlab::sup_distance(v.values(), zero.values()), 1.0);
    std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
    EXPECT_TRUE(std::isnan(lqlab::sup_norm(bad)));
}
