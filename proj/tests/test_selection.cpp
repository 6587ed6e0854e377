#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "moc/selection.hpp"
#include "oracles.hpp"

using namespace moc;

namespace {

ObjectiveVector ov(double a, double b, double c, double d) { return ObjectiveVector{{a, b, c, d}}; }

constexpr double inf = std::numeric_limits<double>::infinity();

} // namespace

TEST(NondominatedSort, MatchesPeelingOracle) {
    Rng rng(99);
    for (int t = 0; t < 1000; ++t) {
        const auto pts = oracles::random_pool(rng, 1 + uniform_index(rng, 8));
        const auto fronts = nondominated_sort(pts);
        const auto expect = oracles::front_index(pts);
        std::vector<std::size_t> got(pts.size(), 999);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            EXPECT_TRUE(std::is_sorted(fronts[f].begin(), fronts[f].end()));
            for (auto i : fronts[f]) got[i] = f;
        }
        EXPECT_EQ(got, expect);
    }
}

TEST(NondominatedSort, EqualVectorsShareAFront) {
    const std::vector<ObjectiveVector> pts{ov(0, 1, 1, 1), ov(0, 1, 1, 1), ov(0, 2, 2, 2)};
    const auto f = nondominated_sort(pts);
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(f[0], (std::vector<std::size_t>{0, 1}));
}

TEST(Penalize, ViolatorsTrailByViolation) {
    const std::vector<ObjectiveVector> pts{ov(0.3, 0, 0, 0), ov(0, 0.5, 1, 0.5), ov(0.1, 0.1, 1, 0.1),
                                           ov(0, 0.6, 2, 0.6)};
    const auto fronts = penalize_violators(nondominated_sort(pts), pts, 0.05);
    ASSERT_EQ(fronts.size(), 4u);
    EXPECT_EQ(fronts[0], (std::vector<std::size_t>{1}));
    EXPECT_EQ(fronts[1], (std::vector<std::size_t>{3}));
    EXPECT_EQ(fronts[2], (std::vector<std::size_t>{2}));
    EXPECT_EQ(fronts[3], (std::vector<std::size_t>{0}));
}

TEST(Crowding, SmallFrontsAreInfinite) {
    const FeatureSchema s({fixtures::numeric("a", 0, 10)});
    const std::vector<ObjectiveVector> o{ov(0, 0.1, 1, 0.2), ov(0, 0.2, 2, 0.1)};
    const std::vector<DataPoint> x{DataPoint{{1}}, DataPoint{{2}}};
    EXPECT_EQ(crowding_distance_mixed(o, x, s), (std::vector<double>{inf, inf}));
    EXPECT_EQ(crowding_distance_mixed(std::span(o).first(1), std::span(x).first(1), s), (std::vector<double>{inf}));
}

TEST(Crowding, HandComputedFixture) {
    // Four points, one numeric and one categorical feature. Sorted order
    // along every axis is 0,1,2,3 except where noted.
    const FeatureSchema s({fixtures::numeric("a", 0, 100), fixtures::categorical("c", {"x", "y", "z"})});
    const std::vector<ObjectiveVector> o{ov(0, 0.1, 1, 0.4), ov(0, 0.2, 2, 0.3), ov(0, 0.25, 2, 0.1),
                                         ov(0, 0.4, 3, 0.0)};
    const std::vector<DataPoint> x{DataPoint{{0, 0}}, DataPoint{{10, 0}}, DataPoint{{30, 1}}, DataPoint{{40, 2}}};
    const auto cd = crowding_distance_mixed(o, x, s);
    // o1 constant: adds nothing.
    // o2 span 0.3: point1 (0.25-0.1)/0.3, point2 (0.4-0.2)/0.3
    // o3 span 2: point1 (2-1)/2, point2 (3-2)/2
    // o4 sorted 3,2,1,0, span 0.4: point2 (0.3-0.0)/0.4, point1 (0.4-0.1)/0.4
    // a span 40: point1 30/40, point2 30/40
    // c extremes differ: point1 gap [x vs y] = 1, point2 gap [x vs z] = 1
    const double p1 = 0.15 / 0.3 + 0.5 + 0.75 + 0.75 + 1.0;
    const double p2 = 0.2 / 0.3 + 0.5 + 0.75 + 0.75 + 1.0;
    EXPECT_EQ(cd[0], inf);
    EXPECT_EQ(cd[3], inf);
    EXPECT_NEAR(cd[1], p1, 1e-12);
    EXPECT_NEAR(cd[2], p2, 1e-12);
}

TEST(Crowding, DecisionSpaceBreaksObjectiveTies) {
    // Identical objective vectors; only the feature values differ.
    const FeatureSchema s({fixtures::numeric("a", 0, 100)});
    const std::vector<ObjectiveVector> o(4, ov(0, 0.5, 1, 0.5));
    const std::vector<DataPoint> x{DataPoint{{0}}, DataPoint{{1}}, DataPoint{{50}}, DataPoint{{100}}};
    const auto cd = crowding_distance_mixed(o, x, s);
    EXPECT_EQ(cd[0], inf);
    EXPECT_EQ(cd[3], inf);
    EXPECT_NEAR(cd[1], 0.5, 1e-12);
    EXPECT_NEAR(cd[2], 0.99, 1e-12);
}

TEST(SelectSurvivors, FillsByFrontThenCrowding) {
    const FeatureSchema s({fixtures::numeric("a", 0, 100)});
    const std::vector<ObjectiveVector> o{ov(0, 0.1, 1, 0.4), ov(0, 0.2, 1, 0.3), ov(0, 0.3, 1, 0.2),
                                         ov(0, 0.4, 1, 0.1), ov(0, 0.5, 2, 0.5), ov(0, 0.9, 3, 0.9)};
    const std::vector<DataPoint> x{DataPoint{{0}}, DataPoint{{10}}, DataPoint{{60}}, DataPoint{{100}},
                                   DataPoint{{5}}, DataPoint{{6}}};
    const auto s3 = select_survivors(o, x, 3, s, std::nullopt);
    // Front 0 is {0,1,2,3}; the extremes are infinite, point 2 is less crowded than point 1.
    EXPECT_EQ(s3, (std::vector<std::size_t>{0, 3, 2}));
    const auto s5 = select_survivors(o, x, 5, s, std::nullopt);
    EXPECT_EQ(s5, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_THROW(select_survivors(o, x, 7, s, std::nullopt), ConfigInvalid);
}

TEST(SelectSurvivors, PenalizedAbsentWhenFeasibleSuffice) {
    Rng rng(8);
    const FeatureSchema s({fixtures::numeric("a", 0, 1)});
    for (int t = 0; t < 200; ++t) {
        std::vector<ObjectiveVector> o;
        std::vector<DataPoint> x;
        std::size_t feasible = 0;
        for (int i = 0; i < 16; ++i) {
            const bool ok = bernoulli(rng, 0.5);
            feasible += ok;
            o.push_back(ov(ok ? 0.0 : uniform_real(rng, 0.01, 1), uniform01(rng), 1, uniform01(rng)));
            x.push_back(DataPoint{{uniform01(rng)}});
        }
        const auto surv = select_survivors(o, x, 6, s, 0.0);
        std::size_t violators = 0;
        for (auto i : surv) violators += o[i].o1() > 0.0;
        EXPECT_EQ(violators, feasible >= 6 ? 0u : 6 - feasible);
    }
}

TEST(Tournament, PrefersLowerRankThenCrowding) {
    PoolRanking r;
    r.rank = {0, 1, 0};
    r.crowding = {1.0, inf, 2.0};
    Rng rng(1);
    const auto picks = tournament_select(r, 3000, rng);
    std::array<int, 3> counts{};
    for (auto p : picks) ++counts[p];
    // Point 1 loses every duel; point 2 beats 0 and 1; point 0 beats 1 only.
    EXPECT_EQ(counts[1], 0);
    EXPECT_GT(counts[2], counts[0]);
    EXPECT_NEAR(counts[2] / 3000.0, 2.0 / 3.0, 0.05);
}
