#pragma once

// Planar rigid estimation from point correspondences: linear least squares
// over a similarity parameterization (alpha, beta, x, y), RANSAC with a
// scale gate, and damped Gauss-Newton refinement of (x, y, theta).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tomo/common.hpp"

namespace tomo::rigid2d {

// One correspondence: source point (map being transformed) and its match in
// the target frame.
struct PointPair2D {
    double sx = 0.0;
    double sy = 0.0;
    double tx = 0.0;
    double ty = 0.0;
};

// Least-squares solution of rows
//   [dx -dy 1 0] [alpha beta x y]^T = cx
//   [dy  dx 0 1]
// per correspondence (d = source, c = target).
struct Rigid2DSolution {
    double alpha = 1.0;
    double beta = 0.0;
    double x = 0.0;
    double y = 0.0;

    double theta() const { return std::atan2(beta, alpha); }
    double scale() const { return std::hypot(alpha, beta); }
};

// Closed-form normal-equation solution via centroids: centering decouples
// (alpha, beta) from the translation, which then follows from the centroid
// constraint.
inline Rigid2DSolution solve_rigid2d_lsq(const std::vector<PointPair2D>& pairs) {
    if (pairs.size() < 2) throw InsufficientData("solve_rigid2d_lsq: need at least 2 pairs");
    const double n = static_cast<double>(pairs.size());
    double sx_mean = 0.0, sy_mean = 0.0, tx_mean = 0.0, ty_mean = 0.0;
    for (const PointPair2D& p : pairs) {
        sx_mean += p.sx;
        sy_mean += p.sy;
        tx_mean += p.tx;
        ty_mean += p.ty;
    }
    sx_mean /= n;
    sy_mean /= n;
    tx_mean /= n;
    ty_mean /= n;

    double denom = 0.0, dot = 0.0, cross = 0.0;
    for (const PointPair2D& p : pairs) {
        const double dx = p.sx - sx_mean;
        const double dy = p.sy - sy_mean;
        const double cx = p.tx - tx_mean;
        const double cy = p.ty - ty_mean;
        denom += dx * dx + dy * dy;
        dot += dx * cx + dy * cy;
        cross += dx * cy - dy * cx;
    }
    if (!(denom > 1e-24)) {
        throw DegenerateConfiguration("solve_rigid2d_lsq: source points coincide");
    }
    Rigid2DSolution s;
    s.alpha = dot / denom;
    s.beta = cross / denom;
    s.x = tx_mean - (s.alpha * sx_mean - s.beta * sy_mean);
    s.y = ty_mean - (s.beta * sx_mean + s.alpha * sy_mean);
    return s;
}

struct RigidParams2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

// Sum of squared residuals of the rigid (unit-scale) model over the pairs.
inline double rigid_cost(const RigidParams2D& m, const std::vector<PointPair2D>& pairs) {
    const double c = std::cos(m.theta);
    const double s = std::sin(m.theta);
    double cost = 0.0;
    for (const PointPair2D& p : pairs) {
        const double rx = p.tx - (c * p.sx - s * p.sy + m.x);
        const double ry = p.ty - (s * p.sx + c * p.sy + m.y);
        cost += rx * rx + ry * ry;
    }
    return cost;
}

// Analytic gradient of rigid_cost with respect to (x, y, theta).
inline void rigid_cost_gradient(const RigidParams2D& m, const std::vector<PointPair2D>& pairs,
                                double grad[3]) {
    const double c = std::cos(m.theta);
    const double s = std::sin(m.theta);
    grad[0] = grad[1] = grad[2] = 0.0;
    for (const PointPair2D& p : pairs) {
        const double px = c * p.sx - s * p.sy;
        const double py = s * p.sx + c * p.sy;
        const double rx = p.tx - (px + m.x);
        const double ry = p.ty - (py + m.y);
        grad[0] += -2.0 * rx;
        grad[1] += -2.0 * ry;
        // d(rx)/dtheta = py, d(ry)/dtheta = -px
        grad[2] += 2.0 * (rx * py - ry * px);
    }
}

struct LmOptions {
    int max_iterations = 50;
    double tolerance = 1e-12;
    double initial_lambda = 1e-3;
};

// Damped least squares on the rigid cost. Steps that do not decrease the
// cost are rejected (lambda x10); accepted steps relax the damping (/10).
// The returned parameters never cost more than the input.
inline RigidParams2D refine_lm(const RigidParams2D& initial,
                               const std::vector<PointPair2D>& pairs,
                               const LmOptions& opt = {}) {
    if (pairs.empty()) throw InsufficientData("refine_lm: no pairs");
    RigidParams2D cur = initial;
    cur.theta = wrap_angle(cur.theta);
    double cost = rigid_cost(cur, pairs);
    double lambda = opt.initial_lambda;

    for (int it = 0; it < opt.max_iterations; ++it) {
        const double c = std::cos(cur.theta);
        const double s = std::sin(cur.theta);
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (const PointPair2D& p : pairs) {
            const double px = c * p.sx - s * p.sy;
            const double py = s * p.sx + c * p.sy;
            const double rx = p.tx - (px + cur.x);
            const double ry = p.ty - (py + cur.y);
            // Residual Jacobian rows: d(rx)/d(x,y,theta) = (-1, 0, py),
            // d(ry)/d(x,y,theta) = (0, -1, -px).
            const Eigen::Vector3d jx(-1.0, 0.0, py);
            const Eigen::Vector3d jy(0.0, -1.0, -px);
            jtj += jx * jx.transpose() + jy * jy.transpose();
            jtr += jx * rx + jy * ry;
        }
        if (jtr.lpNorm<Eigen::Infinity>() < opt.tolerance) break;

        bool accepted = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            Eigen::Matrix3d damped = jtj;
            for (int k = 0; k < 3; ++k) {
                damped(k, k) += lambda * (jtj(k, k) > 0.0 ? jtj(k, k) : 1.0);
            }
            const Eigen::Vector3d step = damped.ldlt().solve(-jtr);
            RigidParams2D cand{cur.x + step(0), cur.y + step(1),
                               wrap_angle(cur.theta + step(2))};
            const double cand_cost = rigid_cost(cand, pairs);
            if (cand_cost < cost) {
                cur = cand;
                cost = cand_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (step.norm() < opt.tolerance) return cur;
                break;
            }
            lambda = std::min(lambda * 10.0, 1e12);
        }
        if (!accepted) break;
    }
    return cur;
}

struct RansacParams {
    double inlier_threshold = 0.1;     // metric residual bound, typically 2g
    double min_sample_distance = 0.05; // minimal-sample spread, typically g
    double epsilon_scale = 0.05;       // reject |scale - 1| above this
    int min_inliers = 10;
    double confidence = 0.99;
    int max_iterations = 2000;
    std::uint64_t seed = 0;
};

struct Hypothesis2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double scale_estimate = 1.0;
    std::vector<int> inlier_indices;
    double rms_residual = 0.0;
};

namespace detail {

inline std::vector<int> classify_inliers(const RigidParams2D& m,
                                         const std::vector<PointPair2D>& pairs,
                                         double threshold) {
    const double c = std::cos(m.theta);
    const double s = std::sin(m.theta);
    const double t2 = threshold * threshold;
    std::vector<int> inliers;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const PointPair2D& p = pairs[i];
        const double rx = p.tx - (c * p.sx - s * p.sy + m.x);
        const double ry = p.ty - (s * p.sx + c * p.sy + m.y);
        if (rx * rx + ry * ry <= t2) inliers.push_back(static_cast<int>(i));
    }
    return inliers;
}

inline int adaptive_iterations(double inlier_ratio, double confidence, int cap) {
    if (inlier_ratio <= 0.0) return cap;
    const double p_good = inlier_ratio * inlier_ratio;
    if (p_good >= 1.0) return 1;
    const double denom = std::log(1.0 - p_good);
    if (!(denom < 0.0)) return cap;
    const double n = std::log(1.0 - confidence) / denom;
    if (!(n < static_cast<double>(cap))) return cap;
    return std::max(1, static_cast<int>(std::ceil(n)));
}

}  // namespace detail

// Two-point RANSAC with scale gate, followed by a least-squares refit on the
// best inlier set and damped refinement. Inliers are re-classified under the
// refined model; rms_residual is taken over that final set. Deterministic
// for a fixed seed.
inline Hypothesis2D ransac_rigid2d(const std::vector<PointPair2D>& pairs,
                                   const RansacParams& params) {
    const int n = static_cast<int>(pairs.size());
    if (n < 2) throw InsufficientData("ransac_rigid2d: need at least 2 correspondences");

    Rng rng(params.seed);
    std::vector<int> best_inliers;
    int cap = params.max_iterations;
    const double min_dist2 = params.min_sample_distance * params.min_sample_distance;

    for (int it = 0; it < cap; ++it) {
        int i1 = -1, i2 = -1;
        bool sampled = false;
        for (int attempt = 0; attempt < 32; ++attempt) {
            i1 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
            i2 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
            if (i1 == i2) continue;
            const double dx = pairs[static_cast<std::size_t>(i1)].sx -
                              pairs[static_cast<std::size_t>(i2)].sx;
            const double dy = pairs[static_cast<std::size_t>(i1)].sy -
                              pairs[static_cast<std::size_t>(i2)].sy;
            if (dx * dx + dy * dy < min_dist2) continue;
            sampled = true;
            break;
        }
        if (!sampled) continue;

        Rigid2DSolution sol;
        try {
            sol = solve_rigid2d_lsq({pairs[static_cast<std::size_t>(i1)],
                                     pairs[static_cast<std::size_t>(i2)]});
        } catch (const DegenerateConfiguration&) {
            continue;
        }
        if (std::abs(sol.scale() - 1.0) > params.epsilon_scale) continue;

        const RigidParams2D model{sol.x, sol.y, sol.theta()};
        std::vector<int> inliers =
            detail::classify_inliers(model, pairs, params.inlier_threshold);
        if (inliers.size() > best_inliers.size()) {
            best_inliers = std::move(inliers);
            cap = std::min(cap, detail::adaptive_iterations(
                                    static_cast<double>(best_inliers.size()) / n,
                                    params.confidence, params.max_iterations));
        }
    }

    if (static_cast<int>(best_inliers.size()) < params.min_inliers) {
        throw NoConsensus("ransac_rigid2d: best inlier count " +
                          std::to_string(best_inliers.size()) + " below minimum " +
                          std::to_string(params.min_inliers));
    }

    std::vector<PointPair2D> inlier_pairs;
    inlier_pairs.reserve(best_inliers.size());
    for (int idx : best_inliers) inlier_pairs.push_back(pairs[static_cast<std::size_t>(idx)]);
    const Rigid2DSolution refit = solve_rigid2d_lsq(inlier_pairs);
    const RigidParams2D refined =
        refine_lm({refit.x, refit.y, refit.theta()}, inlier_pairs);

    Hypothesis2D h;
    h.x = refined.x;
    h.y = refined.y;
    h.theta = refined.theta;
    h.scale_estimate = refit.scale();
    h.inlier_indices = detail::classify_inliers(refined, pairs, params.inlier_threshold);
    double sse = 0.0;
    const double c = std::cos(refined.theta);
    const double s = std::sin(refined.theta);
    for (int idx : h.inlier_indices) {
        const PointPair2D& p = pairs[static_cast<std::size_t>(idx)];
        const double rx = p.tx - (c * p.sx - s * p.sy + refined.x);
        const double ry = p.ty - (s * p.sx + c * p.sy + refined.y);
        sse += rx * rx + ry * ry;
    }
    h.rms_residual = h.inlier_indices.empty()
                         ? 0.0
                         : std::sqrt(sse / static_cast<double>(h.inlier_indices.size()));
    return h;
}

}  // namespace tomo::rigid2d
