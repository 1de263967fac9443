#include "tomo/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tomo/synth.hpp"

#include <gtest/gtest.h>

namespace tomo {
namespace consensus {
namespace {

slicing::SliceSet make_set(double g, double z_min, const std::vector<std::int64_t>& indices) {
    slicing::SliceSet set;
    set.grid_size = g;
    set.z_min = z_min;
    for (std::int64_t k : indices) {
        slicing::SliceEntry e;
        e.height = z_min + static_cast<double>(k) * g;
        set.entries.push_back(std::move(e));
    }
    return set;
}

TEST(EnumerateOffsets, IdenticalLaddersGiveSymmetricRange) {
    const auto set = make_set(0.1, 0.0, {0, 1, 2, 3, 4});
    const auto offsets = enumerate_offsets(set, set);
    ASSERT_EQ(offsets.size(), 9u);
    for (int i = 0; i < 9; ++i) {
        EXPECT_NEAR(offsets[static_cast<std::size_t>(i)], (i - 4) * 0.1, 1e-12);
    }
}

TEST(EnumerateOffsets, DisjointLaddersExample) {
    const double g = 0.1;
    const auto sc = make_set(g, 0.0, {0, 1});
    const auto sd = make_set(g, 10.0 * g, {0});
    const auto offsets = enumerate_offsets(sc, sd);
    ASSERT_EQ(offsets.size(), 2u);
    EXPECT_NEAR(offsets[0], -10.0 * g, 1e-12);
    EXPECT_NEAR(offsets[1], -9.0 * g, 1e-12);
}

TEST(EnumerateOffsets, GridMismatchThrows) {
    const auto a = make_set(0.1, 0.0, {0});
    const auto b = make_set(0.05, 0.0, {0});
    EXPECT_THROW(enumerate_offsets(a, b), GridMismatch);
}

TaggedHypothesis tagged(double x, double y, double theta, int inliers, double rms = 0.01) {
    TaggedHypothesis t;
    t.hypothesis.x = x;
    t.hypothesis.y = y;
    t.hypothesis.theta = theta;
    t.hypothesis.rms_residual = rms;
    t.hypothesis.inlier_indices.resize(static_cast<std::size_t>(inliers));
    return t;
}

TEST(ConsensusCluster, FindsPlantedMajority) {
    OffsetHypotheses oh;
    for (int i = 0; i < 7; ++i) oh.hypotheses.push_back(tagged(1.0, -2.0, 0.5, 12));
    oh.hypotheses.push_back(tagged(4.0, 0.0, -1.0, 12));
    oh.hypotheses.push_back(tagged(-3.0, 5.0, 2.0, 12));
    oh.hypotheses.push_back(tagged(0.0, 9.0, -3.0, 12));
    ConsensusParams params;
    const Cluster c = consensus_cluster(oh, params);
    EXPECT_EQ(c.members.size(), 7u);
    EXPECT_NEAR(c.x, 1.0, 1e-12);
    EXPECT_NEAR(c.y, -2.0, 1e-12);
    EXPECT_NEAR(c.theta, 0.5, 1e-12);
}

TEST(ConsensusCluster, YawAveragesCircularly) {
    OffsetHypotheses oh;
    oh.hypotheses.push_back(tagged(0.0, 0.0, kPi - 0.01, 10));
    oh.hypotheses.push_back(tagged(0.0, 0.0, -kPi + 0.01, 10));
    ConsensusParams params;
    params.t_theta = 0.05;
    params.min_cluster = 2;
    const Cluster c = consensus_cluster(oh, params);
    ASSERT_EQ(c.members.size(), 2u);
    EXPECT_NEAR(std::abs(c.theta), kPi, 1e-9);
}

TEST(ConsensusCluster, AgreementIsComponentwise) {
    OffsetHypotheses oh;
    oh.hypotheses.push_back(tagged(0.0, 0.0, 0.0, 10));
    oh.hypotheses.push_back(tagged(0.09, -0.09, 0.04, 10));  // inside every bound
    // Isolated on one axis each: they cluster with nobody, themselves aside.
    oh.hypotheses.push_back(tagged(0.5, 0.0, 0.0, 10));
    oh.hypotheses.push_back(tagged(0.0, 0.5, 0.0, 10));
    oh.hypotheses.push_back(tagged(0.0, 0.0, 1.0, 10));
    ConsensusParams params;  // t_xy = 0.1, t_theta = 0.05
    params.min_cluster = 1;
    const Cluster c = consensus_cluster(oh, params);
    ASSERT_EQ(c.members.size(), 2u);
    EXPECT_EQ(c.members[0], 0);
    EXPECT_EQ(c.members[1], 1);
}

TEST(ConsensusCluster, BoundsAreInclusive) {
    OffsetHypotheses oh;
    oh.hypotheses.push_back(tagged(0.0, 0.0, 0.0, 10));
    oh.hypotheses.push_back(tagged(0.1, 0.0, 0.05, 10));    // exactly at both bounds
    oh.hypotheses.push_back(tagged(0.201, 0.0, 0.0, 10));   // pairs with nobody
    ConsensusParams params;
    params.min_cluster = 1;
    const Cluster c = consensus_cluster(oh, params);
    ASSERT_EQ(c.members.size(), 2u);
    EXPECT_EQ(c.members[0], 0);
    EXPECT_EQ(c.members[1], 1);
}

TEST(ConsensusCluster, WrapsYawAcrossCut) {
    OffsetHypotheses oh;
    oh.hypotheses.push_back(tagged(0.0, 0.0, kPi - 0.02, 10));
    oh.hypotheses.push_back(tagged(0.0, 0.0, -kPi + 0.02, 10));
    oh.hypotheses.push_back(tagged(0.0, 0.0, 0.0, 10));
    ConsensusParams params;
    params.min_cluster = 1;
    const Cluster c = consensus_cluster(oh, params);
    // The two near the cut agree through the wrap, not with the one at zero.
    EXPECT_EQ(c.members.size(), 2u);
}

TEST(ConsensusCluster, InlierWeightingShiftsAverage) {
    OffsetHypotheses oh;
    oh.hypotheses.push_back(tagged(0.0, 0.0, 0.0, 1));
    oh.hypotheses.push_back(tagged(0.08, 0.0, 0.0, 3));
    ConsensusParams params;
    params.min_cluster = 2;
    const Cluster plain = consensus_cluster(oh, params);
    EXPECT_NEAR(plain.x, 0.04, 1e-12);
    params.weight_by_inliers = true;
    const Cluster weighted = consensus_cluster(oh, params);
    EXPECT_NEAR(weighted.x, 0.06, 1e-12);
}

TEST(ConsensusCluster, EmptyThrows) {
    OffsetHypotheses oh;
    EXPECT_THROW(consensus_cluster(oh, ConsensusParams{}), EmptyHypotheses);
}

// Independent oracle: count agreements for every anchor, first maximum wins.
TEST(ConsensusCluster, MatchesPairwiseCountOracle) {
    Rng rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        OffsetHypotheses oh;
        const int n = 2 + static_cast<int>(rng.next_below(40));
        for (int i = 0; i < n; ++i) {
            oh.hypotheses.push_back(tagged(rng.next_double(-0.3, 0.3),
                                           rng.next_double(-0.3, 0.3), rng.next_angle(),
                                           1 + static_cast<int>(rng.next_below(20))));
        }
        ConsensusParams params;
        params.t_xy = 0.15;
        params.t_theta = 0.4;
        params.min_cluster = 1;
        auto members_for = [&](int a) {
            std::vector<int> out;
            const auto& ha = oh.hypotheses[static_cast<std::size_t>(a)].hypothesis;
            for (int b = 0; b < n; ++b) {
                const auto& hb = oh.hypotheses[static_cast<std::size_t>(b)].hypothesis;
                if (std::abs(ha.x - hb.x) <= params.t_xy &&
                    std::abs(ha.y - hb.y) <= params.t_xy &&
                    angular_distance(ha.theta, hb.theta) <= params.t_theta) {
                    out.push_back(b);
                }
            }
            return out;
        };
        int best_anchor = 0;
        std::size_t best_count = 0;
        for (int a = 0; a < n; ++a) {
            const std::size_t count = members_for(a).size();
            if (count > best_count) {  // ties keep the smaller anchor index
                best_count = count;
                best_anchor = a;
            }
        }
        const Cluster c = consensus_cluster(oh, params);
        EXPECT_EQ(c.members, members_for(best_anchor)) << "trial " << trial;
    }
}

synth::EnvironmentSpec small_room(std::uint64_t seed) {
    return synth::room_spec(seed, 900.0);
}

TEST(CorrelateHeights, SelfMatchIsIdentityAtOffsetZero) {
    const PointCloud cloud = synth::gen_environment(small_room(5));
    MatchConfig cfg;
    cfg.grid = 0.05;
    cfg.seed = 77;
    const PointCloud filtered = voxel_filter(cloud, cfg.grid);
    slicing::SliceOptions opt;
    opt.max_features = cfg.max_features;
    const auto set = slicing::slice_map(filtered, cfg.grid, opt);
    const MatchResult r = correlate_heights(set, set, cfg);
    EXPECT_DOUBLE_EQ(r.transform.z, 0.0);
    EXPECT_NEAR(r.transform.x, 0.0, 0.01);
    EXPECT_NEAR(r.transform.y, 0.0, 0.01);
    EXPECT_NEAR(r.transform.theta, 0.0, 0.005);
    EXPECT_GE(r.consensus_size, cfg.min_cluster);
    // The zero offset wins and strictly dominates every competitor.
    int zero_score = -1, best_other = -1;
    for (const auto& os : r.per_offset_scores) {
        if (os.z_offset == 0.0) {
            zero_score = os.score;
        } else {
            best_other = std::max(best_other, os.score);
        }
    }
    EXPECT_EQ(zero_score, r.consensus_size);
    EXPECT_GT(zero_score, best_other);
    EXPECT_EQ(r.diagnostics.slices_c, static_cast<int>(set.entries.size()));
    EXPECT_GT(r.diagnostics.hypotheses, 0);
}

TEST(MatchMaps, RecoversPlantedTransform) {
    const PointCloud cloud = synth::gen_environment(small_room(8));
    const double g = 0.05;
    const Transform4DoF truth(0.35, -0.2, 3.0 * g, 0.3);
    const PointCloud map_d = apply_transform(cloud, invert(truth));
    MatchConfig cfg;
    cfg.grid = g;
    cfg.seed = 11;
    const MatchResult r = match_maps(cloud, map_d, cfg);
    EXPECT_NEAR(r.transform.z, truth.z, 1e-9);
    EXPECT_NEAR(r.transform.x, truth.x, 5.0 * g);
    EXPECT_NEAR(r.transform.y, truth.y, 5.0 * g);
    EXPECT_NEAR(angular_distance(r.transform.theta, truth.theta), 0.0, 0.1745);
}

TEST(MatchMaps, DeterministicAcrossRunsAndThreads) {
    const PointCloud cloud = synth::gen_environment(small_room(3));
    const Transform4DoF truth(0.1, 0.2, 0.0, -0.15);
    const PointCloud map_d = apply_transform(cloud, invert(truth));
    MatchConfig cfg;
    cfg.grid = 0.05;
    cfg.seed = 21;
    cfg.threads = 1;
    const std::string a = match_maps(cloud, map_d, cfg).to_json(false).dump();
    const std::string b = match_maps(cloud, map_d, cfg).to_json(false).dump();
    EXPECT_EQ(a, b);
    cfg.threads = 4;
    const std::string c = match_maps(cloud, map_d, cfg).to_json(false).dump();
    EXPECT_EQ(a, c);
}

TEST(MatchMaps, UnrelatedMapsThrowNoConsensus) {
    const PointCloud a = synth::gen_environment(small_room(100));
    const PointCloud b = synth::gen_environment(small_room(200));
    MatchConfig cfg;
    cfg.grid = 0.05;
    cfg.min_cluster = 40;
    EXPECT_THROW(match_maps(a, b, cfg), NoConsensus);
}

TEST(MatchResult, JsonShape) {
    const PointCloud cloud = synth::gen_environment(small_room(5));
    MatchConfig cfg;
    cfg.grid = 0.05;
    const MatchResult r = match_maps(cloud, cloud, cfg);
    const auto j = r.to_json(true);
    for (const char* key : {"x", "y", "z", "theta", "consensus_size", "matrix",
                            "per_offset_scores", "diagnostics", "timings"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["matrix"].size(), 16u);
    EXPECT_FALSE(j["timings"].empty());
    const auto stripped = r.to_json(false);
    EXPECT_TRUE(stripped["timings"].empty());
    EXPECT_EQ(stripped["consensus_size"].get<int>(), r.consensus_size);
}

}  // namespace
}  // namespace consensus
}  // namespace tomo
