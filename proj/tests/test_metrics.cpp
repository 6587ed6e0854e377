#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "moc/metrics.hpp"
#include "oracles.hpp"

using namespace moc;

namespace {

ObjectiveVector ov(double a, double b, double c, double d) { return ObjectiveVector{{a, b, c, d}}; }

} // namespace

TEST(Dominates, Basics) {
    EXPECT_TRUE(dominates(ov(0, 0, 0, 0), ov(0, 0, 0, 1)));
    EXPECT_FALSE(dominates(ov(0, 0, 0, 0), ov(0, 0, 0, 0)));
    EXPECT_FALSE(dominates(ov(0, 1, 0, 0), ov(1, 0, 0, 0)));
}

TEST(Dominates, MatchesOracleOnRandomPairs) {
    Rng rng(3);
    for (int t = 0; t < 5000; ++t) {
        const auto p = oracles::random_pool(rng, 2, 3);
        EXPECT_EQ(dominates(p[0], p[1]), oracles::dominates(p[0], p[1]));
    }
}

TEST(Hypervolume, SinglePointBox) {
    const ReferencePoint ref{{0.39, 1, 8, 1}};
    const std::vector<ObjectiveVector> pts{ov(0, 0, 0, 0)};
    EXPECT_NEAR(hypervolume(pts, ref), 3.12, 1e-12);
}

TEST(Hypervolume, EmptyAndOutOfBox) {
    const ReferencePoint ref{{1, 1, 1, 1}};
    EXPECT_EQ(hypervolume({}, ref), 0.0);
    const std::vector<ObjectiveVector> out{ov(1.5, 0, 0, 0), ov(0.5, 0.5, 1, 0.5)};
    EXPECT_EQ(hypervolume(out, ref), 0.0);
}

TEST(Hypervolume, TwoOverlappingBoxes) {
    // [0.5,1]x[0,1]^3 union [0,1]x[0.5,1]x[0,1]^2 = 0.5 + 0.5 - 0.25
    const ReferencePoint ref{{1, 1, 1, 1}};
    const std::vector<ObjectiveVector> pts{ov(0.5, 0, 0, 0), ov(0, 0.5, 0, 0)};
    EXPECT_NEAR(hypervolume(pts, ref), 0.75, 1e-15);
}

TEST(Hypervolume, MatchesInclusionExclusion) {
    Rng rng(17);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 10);
        std::vector<ObjectiveVector> pts(n);
        for (auto& p : pts) {
            p[0] = uniform_real(rng, 0, 0.5);
            p[1] = uniform_real(rng, 0, 1);
            p[2] = static_cast<double>(uniform_index(rng, 9));
            p[3] = uniform_real(rng, 0, 1);
        }
        const ReferencePoint ref{{0.4, 1, 8, 1}};
        // Points beyond the box contribute nothing; clip them for the oracle.
        std::vector<ObjectiveVector> clipped;
        for (auto p : pts) {
            for (std::size_t m = 0; m < 4; ++m) p[m] = std::min(p[m], ref[m]);
            clipped.push_back(p);
        }
        const double exact = oracles::hypervolume_inclusion_exclusion(clipped, ref);
        EXPECT_NEAR(hypervolume(pts, ref), exact, 1e-9 * std::max(1.0, exact));
    }
}

TEST(Hypervolume, MonotoneUnderAddition) {
    Rng rng(5);
    const ReferencePoint ref{{1, 1, 5, 1}};
    std::vector<ObjectiveVector> pts;
    double prev = 0.0;
    for (int i = 0; i < 40; ++i) {
        pts.push_back(ov(uniform01(rng), uniform01(rng), static_cast<double>(uniform_index(rng, 6)), uniform01(rng)));
        const double hv = hypervolume(pts, ref);
        EXPECT_GE(hv, prev);
        prev = hv;
    }
}

TEST(Hypervolume, DuplicatesDoNotCount) {
    const ReferencePoint ref{{1, 1, 1, 1}};
    const std::vector<ObjectiveVector> one{ov(0.2, 0.3, 0.4, 0.5)};
    const std::vector<ObjectiveVector> two{ov(0.2, 0.3, 0.4, 0.5), ov(0.2, 0.3, 0.4, 0.5)};
    EXPECT_DOUBLE_EQ(hypervolume(one, ref), hypervolume(two, ref));
}

TEST(Coverage, Examples) {
    const std::vector<ObjectiveVector> ours{ov(0, 0.1, 1, 0.1)};
    const std::vector<ObjectiveVector> theirs{ov(0, 0.2, 2, 0.2), ov(0, 0.05, 1, 0.1)};
    EXPECT_DOUBLE_EQ(coverage_rate(ours, theirs), 0.5);
    EXPECT_DOUBLE_EQ(coverage_rate(ours, ours), 0.0);
    EXPECT_THROW(coverage_rate(ours, {}), EmptyComparisonSet);
}

TEST(Coverage, MatchesOracle) {
    Rng rng(23);
    for (int t = 0; t < 1000; ++t) {
        const auto ours = oracles::random_pool(rng, 1 + uniform_index(rng, 8));
        const auto theirs = oracles::random_pool(rng, 1 + uniform_index(rng, 8));
        EXPECT_DOUBLE_EQ(coverage_rate(ours, theirs), oracles::coverage(ours, theirs));
    }
}

TEST(Truncate, AttainingPointsFirst) {
    const ReferencePoint ref{{0.5, 1, 3, 1}};
    const std::vector<ObjectiveVector> pts{ov(0.1, 0.05, 1, 0.05), ov(0, 0.5, 2, 0.5), ov(0, 0.6, 2, 0.4),
                                           ov(0.2, 0.01, 1, 0.01)};
    const std::vector<double> preds{0.4, 0.6, 0.7, 0.3};
    const auto target = DesiredOutcome::closed(0.5, 1);
    const auto sel = truncate_counterfactuals(pts, preds, target, 2, ref);
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_TRUE(target.contains(preds[sel[0]]));
    EXPECT_TRUE(target.contains(preds[sel[1]]));
    const auto three = truncate_counterfactuals(pts, preds, target, 3, ref);
    // Gains given the two attaining points: 0.722 - 0.116 for point 0,
    // 0.588 - 0.087 for point 3.
    EXPECT_EQ(three[2], 0u);
    EXPECT_THROW(truncate_counterfactuals(pts, preds, target, 0, ref), ConfigInvalid);
    EXPECT_EQ(truncate_counterfactuals(pts, preds, target, 10, ref).size(), 4u);
}

TEST(Truncate, GreedyMatchesExhaustiveFirstPick) {
    Rng rng(41);
    const ReferencePoint ref{{1, 1, 4, 1}};
    for (int t = 0; t < 100; ++t) {
        std::vector<ObjectiveVector> pts;
        std::vector<double> preds;
        for (int i = 0; i < 6; ++i) {
            pts.push_back(ov(0, uniform01(rng), static_cast<double>(uniform_index(rng, 4)), uniform01(rng)));
            preds.push_back(1.0);
        }
        const auto sel = truncate_counterfactuals(pts, preds, DesiredOutcome::closed(0.5, 1), 1, ref);
        double best = -1;
        for (const auto& p : pts) best = std::max(best, oracles::hypervolume_inclusion_exclusion({p}, ref));
        EXPECT_DOUBLE_EQ(hypervolume(std::vector<ObjectiveVector>{pts[sel[0]]}, ref), best);
    }
}

TEST(MidRanks, TiesAveraged) {
    const std::vector<double> v{0.3, 0.1, 0.3, 0.5};
    const auto r = mid_ranks(v);
    EXPECT_EQ(r, (std::vector<double>{2.5, 1, 2.5, 4}));
}

TEST(Nondominated, MatchesOracle) {
    Rng rng(2);
    for (int t = 0; t < 500; ++t) {
        const auto pts = oracles::random_pool(rng, 1 + uniform_index(rng, 8));
        const auto idx = nondominated_indices(pts);
        const auto rank = oracles::front_index(pts);
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] == 0) expect.push_back(i);
        }
        EXPECT_EQ(idx, expect);
    }
}
