#pragma once

// Cross-slice consensus: per-height-offset hypothesis collection, clustering
// in (x, y, theta), and the argmax over offsets that yields the final 4-DoF
// transform.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomo/common.hpp"
#include "tomo/core.hpp"
#include "tomo/rigid2d.hpp"
#include "tomo/tomography.hpp"

namespace tomo::consensus {

struct ConsensusParams {
    double t_xy = 0.1;       // translation agreement bound, typically 2g
    double t_theta = 0.05;   // yaw agreement bound, radians
    int min_cluster = 3;
    bool weight_by_inliers = false;
};

// Hypothesis from one slice pair, tagged by the entry indices it came from.
struct TaggedHypothesis {
    int entry_c = 0;
    int entry_d = 0;
    int correspondences = 0;
    rigid2d::Hypothesis2D hypothesis;
};

struct OffsetHypotheses {
    double z_offset = 0.0;
    std::vector<TaggedHypothesis> hypotheses;
};

struct OffsetScore {
    double z_offset = 0.0;
    int score = 0;
};

struct Diagnostics {
    int slices_c = 0;
    int slices_d = 0;
    int offsets = 0;
    int pairs_evaluated = 0;
    std::int64_t correspondences = 0;
    int hypotheses = 0;
    std::map<std::string, double> timings_s;
};

struct MatchResult {
    Transform4DoF transform;
    int consensus_size = 0;
    std::vector<OffsetScore> per_offset_scores;
    Diagnostics diagnostics;

    nlohmann::json to_json(bool include_timings = true) const {
        nlohmann::json j;
        j["x"] = transform.x;
        j["y"] = transform.y;
        j["z"] = transform.z;
        j["theta"] = transform.theta;
        j["consensus_size"] = consensus_size;
        j["matrix"] = transform.matrix();
        nlohmann::json scores = nlohmann::json::array();
        for (const OffsetScore& s : per_offset_scores) {
            scores.push_back({{"z_offset", s.z_offset}, {"score", s.score}});
        }
        j["per_offset_scores"] = scores;
        j["diagnostics"] = {{"slices_c", diagnostics.slices_c},
                            {"slices_d", diagnostics.slices_d},
                            {"offsets", diagnostics.offsets},
                            {"pairs_evaluated", diagnostics.pairs_evaluated},
                            {"correspondences", diagnostics.correspondences},
                            {"hypotheses", diagnostics.hypotheses}};
        if (include_timings) {
            j["timings"] = diagnostics.timings_s;
        } else {
            j["timings"] = nlohmann::json::object();
        }
        return j;
    }
};

// Matching and estimation settings shared by the local and remote paths.
// Optional fields default to multiples of the grid when left unset.
struct MatchConfig {
    double grid = 0.05;
    int max_features = 1000;
    int max_hamming = 40;
    std::optional<double> inlier_threshold;  // default 2 * grid
    double epsilon_scale = 0.05;
    int min_inliers = 10;
    double confidence = 0.99;
    int max_iterations = 2000;
    std::optional<double> t_xy;  // default 2 * grid
    double t_theta = 0.05;
    int min_cluster = 3;
    bool weight_by_inliers = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    rigid2d::RansacParams resolved_ransac(double g) const {
        rigid2d::RansacParams r;
        r.inlier_threshold = inlier_threshold.value_or(2.0 * g);
        r.min_sample_distance = g;
        r.epsilon_scale = epsilon_scale;
        r.min_inliers = min_inliers;
        r.confidence = confidence;
        r.max_iterations = max_iterations;
        r.seed = seed;
        return r;
    }

    ConsensusParams resolved_consensus(double g) const {
        ConsensusParams p;
        p.t_xy = t_xy.value_or(2.0 * g);
        p.t_theta = t_theta;
        p.min_cluster = min_cluster;
        p.weight_by_inliers = weight_by_inliers;
        return p;
    }
};

// Achievable height offsets h_c - h_d between present slices, ascending.
// Offsets are g apart by construction; gaps in either slice set prune the
// corresponding offsets.
inline std::vector<double> enumerate_offsets(const slicing::SliceSet& sc,
                                             const slicing::SliceSet& sd) {
    const double g = sc.grid_size;
    if (std::abs(sc.grid_size - sd.grid_size) >
        1e-9 * std::max({sc.grid_size, sd.grid_size, 1.0})) {
        throw GridMismatch("enumerate_offsets: slice sets use different grid sizes");
    }
    std::set<std::int64_t> deltas;
    for (const auto& ec : sc.entries) {
        for (const auto& ed : sd.entries) {
            deltas.insert(sc.index_of(ec.height) - sd.index_of(ed.height));
        }
    }
    const double base = sc.z_min - sd.z_min;
    std::vector<double> offsets;
    offsets.reserve(deltas.size());
    for (std::int64_t m : deltas) offsets.push_back(base + static_cast<double>(m) * g);
    return offsets;
}

// Rigid hypotheses from every slice pair aligned by z_offset (heights agree
// within g/4). Pairs with fewer than two matches, degenerate geometry or no
// RANSAC consensus contribute nothing. Each pair's RANSAC seed derives from
// params.seed and the pair's position, so results are schedule-independent.
inline OffsetHypotheses hypotheses_at_offset(const slicing::SliceSet& sc,
                                             const slicing::SliceSet& sd, double z_offset,
                                             const rigid2d::RansacParams& params,
                                             int max_hamming,
                                             std::int64_t* correspondence_count = nullptr,
                                             int* pair_count = nullptr) {
    const double g = sc.grid_size;
    OffsetHypotheses out;
    out.z_offset = z_offset;

    std::map<std::int64_t, int> c_by_index;
    for (std::size_t i = 0; i < sc.entries.size(); ++i) {
        c_by_index[sc.index_of(sc.entries[i].height)] = static_cast<int>(i);
    }

    int pair_index = 0;
    for (std::size_t j = 0; j < sd.entries.size(); ++j) {
        const auto& ed = sd.entries[j];
        const double target_height = ed.height + z_offset;
        const auto m = static_cast<std::int64_t>(
            std::llround((target_height - sc.z_min) / g));
        auto it = c_by_index.find(m);
        if (it == c_by_index.end()) continue;
        const auto& ec = sc.entries[static_cast<std::size_t>(it->second)];
        if (std::abs(ec.height - ed.height - z_offset) > 0.25 * g) continue;

        const int this_pair = pair_index++;
        if (pair_count) ++*pair_count;
        if (ec.features.size() < 2 || ed.features.size() < 2) continue;
        const features::CorrespondenceSet matches =
            features::match_descriptors(ec.features, ed.features, max_hamming);
        if (correspondence_count) *correspondence_count += static_cast<std::int64_t>(matches.size());
        if (matches.size() < 2) continue;

        std::vector<rigid2d::PointPair2D> pairs;
        pairs.reserve(matches.size());
        for (const features::Correspondence& mt : matches) {
            const features::Feature& fc = ec.features[static_cast<std::size_t>(mt.a)];
            const features::Feature& fd = ed.features[static_cast<std::size_t>(mt.b)];
            pairs.push_back({static_cast<double>(fd.mx), static_cast<double>(fd.my),
                             static_cast<double>(fc.mx), static_cast<double>(fc.my)});
        }
        rigid2d::RansacParams pp = params;
        pp.seed = mix_seed(params.seed, static_cast<std::uint64_t>(this_pair));
        try {
            rigid2d::Hypothesis2D h = rigid2d::ransac_rigid2d(pairs, pp);
            out.hypotheses.push_back({it->second, static_cast<int>(j),
                                      static_cast<int>(matches.size()), std::move(h)});
        } catch (const NoConsensus&) {
        } catch (const InsufficientData&) {
        } catch (const DegenerateConfiguration&) {
        }
    }
    return out;
}

struct Cluster {
    std::vector<int> members;
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double mean_rms = 0.0;
};

// Largest agreeing subset by anchor scan: every hypothesis is tried as the
// anchor, members agree with it componentwise (|dx| <= t_xy, |dy| <= t_xy,
// wrapped |dtheta| <= t_theta). The winning cluster is averaged parameter-
// wise, the yaw circularly. Anchor ties resolve to the smaller index.
inline Cluster consensus_cluster(const OffsetHypotheses& oh, const ConsensusParams& params) {
    const auto& hs = oh.hypotheses;
    if (hs.empty()) throw EmptyHypotheses("consensus_cluster: no hypotheses");

    const int n = static_cast<int>(hs.size());
    int best_anchor = 0;
    int best_count = -1;
    for (int a = 0; a < n; ++a) {
        int count = 0;
        for (int b = 0; b < n; ++b) {
            const auto& ha = hs[static_cast<std::size_t>(a)].hypothesis;
            const auto& hb = hs[static_cast<std::size_t>(b)].hypothesis;
            if (std::abs(ha.x - hb.x) <= params.t_xy && std::abs(ha.y - hb.y) <= params.t_xy &&
                angular_distance(ha.theta, hb.theta) <= params.t_theta) {
                ++count;
            }
        }
        if (count > best_count) {
            best_count = count;
            best_anchor = a;
        }
    }

    Cluster cl;
    const auto& anchor = hs[static_cast<std::size_t>(best_anchor)].hypothesis;
    double sum_w = 0.0, sum_x = 0.0, sum_y = 0.0, sum_sin = 0.0, sum_cos = 0.0, sum_rms = 0.0;
    for (int b = 0; b < n; ++b) {
        const auto& hb = hs[static_cast<std::size_t>(b)].hypothesis;
        if (std::abs(anchor.x - hb.x) <= params.t_xy && std::abs(anchor.y - hb.y) <= params.t_xy &&
            angular_distance(anchor.theta, hb.theta) <= params.t_theta) {
            cl.members.push_back(b);
            const double w = params.weight_by_inliers
                                 ? static_cast<double>(hb.inlier_indices.size())
                                 : 1.0;
            sum_w += w;
            sum_x += w * hb.x;
            sum_y += w * hb.y;
            sum_sin += w * std::sin(hb.theta);
            sum_cos += w * std::cos(hb.theta);
            sum_rms += hb.rms_residual;
        }
    }
    cl.x = sum_x / sum_w;
    cl.y = sum_y / sum_w;
    cl.theta = std::atan2(sum_sin, sum_cos);
    cl.mean_rms = sum_rms / static_cast<double>(cl.members.size());
    return cl;
}

namespace detail {

struct OffsetOutcome {
    int score = 0;
    double x = 0.0, y = 0.0, theta = 0.0;
    double mean_rms = 0.0;
    int pairs = 0;
    std::int64_t correspondences = 0;
    int hypotheses = 0;
};

}  // namespace detail

// Full cross-slice consensus: hypotheses and a cluster per achievable
// offset, winner by cluster size with deterministic tie-breaks (smaller
// |z_offset|, then smaller mean rms, then smaller z_offset).
inline MatchResult correlate_heights(const slicing::SliceSet& sc, const slicing::SliceSet& sd,
                                     const MatchConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    if (sc.entries.empty() || sd.entries.empty()) {
        throw NoConsensus("correlate_heights: a slice set is empty");
    }
    const double g = sc.grid_size;
    const std::vector<double> offsets = enumerate_offsets(sc, sd);
    const rigid2d::RansacParams base_ransac = cfg.resolved_ransac(g);
    const ConsensusParams cparams = cfg.resolved_consensus(g);

    std::vector<detail::OffsetOutcome> outcomes(offsets.size());
    parallel_for(offsets.size(), cfg.threads, [&](std::size_t i) {
        rigid2d::RansacParams rp = base_ransac;
        rp.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        detail::OffsetOutcome& oc = outcomes[i];
        OffsetHypotheses oh = hypotheses_at_offset(sc, sd, offsets[i], rp, cfg.max_hamming,
                                                   &oc.correspondences, &oc.pairs);
        oc.hypotheses = static_cast<int>(oh.hypotheses.size());
        if (oh.hypotheses.empty()) return;
        const Cluster cl = consensus_cluster(oh, cparams);
        oc.score = static_cast<int>(cl.members.size());
        oc.x = cl.x;
        oc.y = cl.y;
        oc.theta = cl.theta;
        oc.mean_rms = cl.mean_rms;
    });

    MatchResult result;
    result.per_offset_scores.reserve(offsets.size());
    int winner = -1;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        result.per_offset_scores.push_back({offsets[i], outcomes[i].score});
        result.diagnostics.pairs_evaluated += outcomes[i].pairs;
        result.diagnostics.correspondences += outcomes[i].correspondences;
        result.diagnostics.hypotheses += outcomes[i].hypotheses;
        if (outcomes[i].score == 0) continue;
        if (winner < 0) {
            winner = static_cast<int>(i);
            continue;
        }
        const detail::OffsetOutcome& best = outcomes[static_cast<std::size_t>(winner)];
        const detail::OffsetOutcome& cand = outcomes[i];
        const double best_abs = std::abs(offsets[static_cast<std::size_t>(winner)]);
        const double cand_abs = std::abs(offsets[i]);
        bool take = false;
        if (cand.score != best.score) {
            take = cand.score > best.score;
        } else if (cand_abs != best_abs) {
            take = cand_abs < best_abs;
        } else if (cand.mean_rms != best.mean_rms) {
            take = cand.mean_rms < best.mean_rms;
        } else {
            take = offsets[i] < offsets[static_cast<std::size_t>(winner)];
        }
        if (take) winner = static_cast<int>(i);
    }

    result.diagnostics.slices_c = static_cast<int>(sc.entries.size());
    result.diagnostics.slices_d = static_cast<int>(sd.entries.size());
    result.diagnostics.offsets = static_cast<int>(offsets.size());
    result.diagnostics.timings_s["correlate"] =
        std::chrono::duration<double>(clock::now() - t0).count();

    if (winner < 0 || outcomes[static_cast<std::size_t>(winner)].score < cparams.min_cluster) {
        throw NoConsensus("correlate_heights: best cluster size " +
                          std::to_string(winner < 0
                                             ? 0
                                             : outcomes[static_cast<std::size_t>(winner)].score) +
                          " below minimum " + std::to_string(cparams.min_cluster));
    }

    const detail::OffsetOutcome& w = outcomes[static_cast<std::size_t>(winner)];
    result.transform =
        Transform4DoF(w.x, w.y, offsets[static_cast<std::size_t>(winner)], w.theta);
    result.consensus_size = w.score;
    return result;
}

// End-to-end registration of two clouds: grid filtering (when the cloud is
// not already filtered at cfg.grid), slicing with features, and cross-slice
// consensus. The returned transform maps cloud_d coordinates into cloud_c's
// frame.
inline MatchResult match_maps(const PointCloud& cloud_c, const PointCloud& cloud_d,
                              const MatchConfig& cfg) {
    using clock = std::chrono::steady_clock;
    if (!(cfg.grid > 0.0)) throw NonPositiveGrid("match_maps: grid must be positive");
    const auto t0 = clock::now();

    auto ensure_filtered = [&](const PointCloud& c) -> PointCloud {
        if (c.grid_size && *c.grid_size == cfg.grid) return c;
        return voxel_filter(c, cfg.grid);
    };
    const PointCloud fc = ensure_filtered(cloud_c);
    const PointCloud fd = ensure_filtered(cloud_d);
    const auto t1 = clock::now();

    slicing::SliceOptions sopt;
    sopt.max_features = cfg.max_features;
    sopt.threads = cfg.threads;
    const slicing::SliceSet sc = slicing::slice_map(fc, cfg.grid, sopt);
    const slicing::SliceSet sd = slicing::slice_map(fd, cfg.grid, sopt);
    const auto t2 = clock::now();

    MatchResult result = correlate_heights(sc, sd, cfg);
    const auto t3 = clock::now();
    result.diagnostics.timings_s["filter"] = std::chrono::duration<double>(t1 - t0).count();
    result.diagnostics.timings_s["slice"] = std::chrono::duration<double>(t2 - t1).count();
    result.diagnostics.timings_s["total"] = std::chrono::duration<double>(t3 - t0).count();
    return result;
}

}  // namespace tomo::consensus
