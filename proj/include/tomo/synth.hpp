#pragma once

// Synthetic indoor environments and benchmark fixtures: surface-sampled
// clouds, overlapping pair construction with a planted transform, and
// keyframe-style pose-drift noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/core.hpp"

namespace tomo::synth {

// Vertical wall rectangle over the segment (x0,y0)-(x1,y1).
struct WallSpec {
    double x0 = 0.0, y0 = 0.0;
    double x1 = 0.0, y1 = 0.0;
    double z0 = 0.0;
    double height = 0.0;
};

// Axis-aligned box in its own frame ([-dx/2,dx/2] x [-dy/2,dy/2] x [0,dz])
// placed by a 4-DoF pose.
struct BoxSpec {
    Transform4DoF pose;
    double dx = 0.0, dy = 0.0, dz = 0.0;
};

struct EnvironmentSpec {
    std::vector<WallSpec> walls;
    std::vector<BoxSpec> boxes;
    double density = 1000.0;  // points per square meter of surface
    std::uint64_t seed = 0;
};

inline double surface_area(const EnvironmentSpec& spec) {
    double area = 0.0;
    for (const WallSpec& w : spec.walls) {
        area += std::hypot(w.x1 - w.x0, w.y1 - w.y0) * w.height;
    }
    for (const BoxSpec& b : spec.boxes) {
        area += 2.0 * (b.dx * b.dy + b.dx * b.dz + b.dy * b.dz);
    }
    return area;
}

// Uniform surface sampling, deterministic for a fixed spec. Every surface
// receives round(area * density) points.
inline PointCloud gen_environment(const EnvironmentSpec& spec) {
    if (!(spec.density > 0.0)) throw InvalidSpec("gen_environment: density must be positive");
    for (const WallSpec& w : spec.walls) {
        if (!(std::hypot(w.x1 - w.x0, w.y1 - w.y0) > 0.0) || !(w.height > 0.0)) {
            throw InvalidSpec("gen_environment: wall with non-positive extent");
        }
    }
    for (const BoxSpec& b : spec.boxes) {
        if (!(b.dx > 0.0) || !(b.dy > 0.0) || !(b.dz > 0.0)) {
            throw InvalidSpec("gen_environment: box with non-positive dimension");
        }
    }
    if (spec.walls.empty() && spec.boxes.empty()) {
        throw EmptyCloud("gen_environment: no surfaces");
    }

    Rng rng(spec.seed);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(surface_area(spec) * spec.density) + 64);

    for (const WallSpec& w : spec.walls) {
        const double len = std::hypot(w.x1 - w.x0, w.y1 - w.y0);
        const double ux = (w.x1 - w.x0) / len;
        const double uy = (w.y1 - w.y0) / len;
        const auto n = static_cast<std::size_t>(std::llround(len * w.height * spec.density));
        for (std::size_t i = 0; i < n; ++i) {
            const double t = rng.next_double() * len;
            const double h = rng.next_double() * w.height;
            cloud.points.push_back({w.x0 + t * ux, w.y0 + t * uy, w.z0 + h});
        }
    }
    for (const BoxSpec& b : spec.boxes) {
        const double hx = 0.5 * b.dx;
        const double hy = 0.5 * b.dy;
        // Six faces: local-frame sampler per face, then the box pose.
        struct Face {
            double area;
            int axis;    // fixed axis: 0=x, 1=y, 2=z
            double coord;  // fixed-axis value in the local frame
        };
        const Face faces[6] = {{b.dy * b.dz, 0, -hx}, {b.dy * b.dz, 0, hx},
                               {b.dx * b.dz, 1, -hy}, {b.dx * b.dz, 1, hy},
                               {b.dx * b.dy, 2, 0.0}, {b.dx * b.dy, 2, b.dz}};
        for (const Face& f : faces) {
            const auto n = static_cast<std::size_t>(std::llround(f.area * spec.density));
            for (std::size_t i = 0; i < n; ++i) {
                double lx, ly, lz;
                if (f.axis == 0) {
                    lx = f.coord;
                    ly = rng.next_double(-hy, hy);
                    lz = rng.next_double(0.0, b.dz);
                } else if (f.axis == 1) {
                    lx = rng.next_double(-hx, hx);
                    ly = f.coord;
                    lz = rng.next_double(0.0, b.dz);
                } else {
                    lx = rng.next_double(-hx, hx);
                    ly = rng.next_double(-hy, hy);
                    lz = f.coord;
                }
                cloud.points.push_back(apply(b.pose, {lx, ly, lz}));
            }
        }
    }
    if (cloud.empty()) throw EmptyCloud("gen_environment: sampling produced no points");
    return cloud;
}

// Two rooms joined by a corridor, furnished by seed-dependent boxes. The
// standard benchmark scene; asymmetric furniture breaks the rectangle's
// 180-degree self-similarity.
inline EnvironmentSpec two_rooms_spec(std::uint64_t seed, double density = 1600.0) {
    EnvironmentSpec spec;
    spec.density = density;
    spec.seed = mix_seed(seed, 0xe52);
    const double h = 2.7;

    auto wall = [&](double x0, double y0, double x1, double y1) {
        spec.walls.push_back({x0, y0, x1, y1, 0.0, h});
    };
    // Room A (0,0)-(8,6), room B (12,0)-(19,6), corridor (8,2)-(12,4).
    wall(0, 0, 8, 0);
    wall(0, 0, 0, 6);
    wall(0, 6, 8, 6);
    wall(8, 0, 8, 2);
    wall(8, 4, 8, 6);
    wall(12, 0, 19, 0);
    wall(19, 0, 19, 6);
    wall(12, 6, 19, 6);
    wall(12, 0, 12, 2);
    wall(12, 4, 12, 6);
    wall(8, 2, 12, 2);
    wall(8, 4, 12, 4);

    auto slab = [&](double cx, double cy, double dx, double dy, double z) {
        BoxSpec b;
        b.pose = Transform4DoF(cx, cy, z, 0.0);
        b.dx = dx;
        b.dy = dy;
        b.dz = 0.04;
        spec.boxes.push_back(b);
    };
    slab(4.0, 3.0, 8.0, 6.0, -0.04);   // room A floor
    slab(15.5, 3.0, 7.0, 6.0, -0.04);  // room B floor
    slab(10.0, 3.0, 4.0, 2.0, -0.04);  // corridor floor
    slab(4.0, 3.0, 8.0, 6.0, h);       // ceilings
    slab(15.5, 3.0, 7.0, 6.0, h);
    slab(10.0, 3.0, 4.0, 2.0, h);

    Rng rng(mix_seed(seed, 0xfa7));
    const int n_boxes = 10 + static_cast<int>(rng.next_below(5));
    for (int i = 0; i < n_boxes; ++i) {
        BoxSpec b;
        b.dx = rng.next_double(0.4, 1.6);
        b.dy = rng.next_double(0.4, 1.6);
        b.dz = i % 4 == 0 ? rng.next_double(1.2, 2.2) : rng.next_double(0.4, 1.2);
        const bool room_a = rng.next_below(2) == 0;
        const double margin = 1.0;
        const double x = room_a ? rng.next_double(margin, 8.0 - margin)
                                : rng.next_double(12.0 + margin, 19.0 - margin);
        const double y = rng.next_double(margin, 6.0 - margin);
        b.pose = Transform4DoF(x, y, 0.0, rng.next_angle());
        spec.boxes.push_back(b);
    }
    return spec;
}

// Single furnished room; a cheaper fixture for small tests.
inline EnvironmentSpec room_spec(std::uint64_t seed, double density = 1600.0) {
    EnvironmentSpec spec;
    spec.density = density;
    spec.seed = mix_seed(seed, 0x9a1);
    const double h = 2.6;
    spec.walls.push_back({0, 0, 6, 0, 0.0, h});
    spec.walls.push_back({0, 0, 0, 5, 0.0, h});
    spec.walls.push_back({0, 5, 6, 5, 0.0, h});
    spec.walls.push_back({6, 0, 6, 5, 0.0, h});
    BoxSpec floor;
    floor.pose = Transform4DoF(3.0, 2.5, -0.04, 0.0);
    floor.dx = 6.0;
    floor.dy = 5.0;
    floor.dz = 0.04;
    spec.boxes.push_back(floor);
    Rng rng(mix_seed(seed, 0x77));
    for (int i = 0; i < 6; ++i) {
        BoxSpec b;
        b.dx = rng.next_double(0.4, 1.4);
        b.dy = rng.next_double(0.4, 1.4);
        b.dz = rng.next_double(0.5, 1.8);
        b.pose = Transform4DoF(rng.next_double(1.0, 5.0), rng.next_double(1.0, 4.0), 0.0,
                               rng.next_angle());
        spec.boxes.push_back(b);
    }
    return spec;
}

// Voxel Jaccard overlap of two clouds at grid g.
inline double measure_overlap(const PointCloud& a, const PointCloud& b, double g) {
    if (!(g > 0.0)) throw NonPositiveGrid("measure_overlap: grid must be positive");
    std::unordered_set<std::uint64_t> ka, kb;
    auto key = [&](const Point3& p) {
        VoxelKey k = voxel_key(p, g);
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.ix) * 0x1f1f1f1f1ULL);
        h = splitmix64(h ^ static_cast<std::uint64_t>(k.iy));
        return splitmix64(h ^ static_cast<std::uint64_t>(k.iz));
    };
    for (const Point3& p : a.points) ka.insert(key(p));
    for (const Point3& p : b.points) kb.insert(key(p));
    std::size_t inter = 0;
    for (std::uint64_t k : ka) inter += kb.count(k);
    const std::size_t uni = ka.size() + kb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct MapPair {
    PointCloud map_c;
    PointCloud map_d;
    double measured_overlap = 0.0;
};

// Crops the cloud into two windows along its longer horizontal axis whose
// shared width is searched so the voxel Jaccard overlap approximates the
// request, then moves the second crop by invert(t_gt): matching map_d
// against map_c should recover exactly t_gt.
inline MapPair make_pair(const PointCloud& cloud, const Transform4DoF& t_gt, double overlap,
                         std::uint64_t seed, double measure_grid = 0.0) {
    if (cloud.empty()) throw EmptyCloud("make_pair: empty cloud");
    if (!(overlap > 0.0) || overlap > 1.0) {
        throw OverlapInfeasible("make_pair: overlap must be in (0, 1]");
    }
    // Overlap is scored on a voxel Jaccard at this grid; raw clouds without a
    // filter grid default to the scale the maps are matched at.
    const double g = measure_grid > 0.0 ? measure_grid : cloud.grid_size.value_or(0.05);

    MapPair out;
    if (overlap >= 1.0) {
        out.map_c = cloud;
        out.map_d = apply_transform(cloud, invert(t_gt));
        out.measured_overlap = 1.0;
        return out;
    }

    double lo_x = cloud.points.front().x, hi_x = lo_x;
    double lo_y = cloud.points.front().y, hi_y = lo_y;
    for (const Point3& p : cloud.points) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
    }
    const bool along_x = (hi_x - lo_x) >= (hi_y - lo_y);
    const double lo = along_x ? lo_x : lo_y;
    const double hi = along_x ? hi_x : hi_y;
    const bool c_low_side = Rng(mix_seed(seed, 0x5b)).next_below(2) == 0;

    auto crop = [&](double from, double to) {
        PointCloud c;
        for (const Point3& p : cloud.points) {
            const double v = along_x ? p.x : p.y;
            if (v >= from && v <= to) c.points.push_back(p);
        }
        c.grid_size = cloud.grid_size;
        return c;
    };
    auto split = [&](double w, PointCloud& a, PointCloud& b) {
        const double width = hi - lo;
        const double cover = 0.5 + 0.5 * w;
        a = crop(lo, lo + cover * width);
        b = crop(hi - cover * width, hi);
        if (!c_low_side) std::swap(a, b);
    };

    double w_lo = 0.0, w_hi = 1.0;
    PointCloud crop_c, crop_d;
    double measured = 0.0;
    for (int it = 0; it < 24; ++it) {
        const double w = 0.5 * (w_lo + w_hi);
        split(w, crop_c, crop_d);
        measured = (crop_c.empty() || crop_d.empty())
                       ? 0.0
                       : measure_overlap(crop_c, crop_d, g);
        if (std::abs(measured - overlap) < 0.005) break;
        if (measured < overlap) {
            w_lo = w;
        } else {
            w_hi = w;
        }
    }
    if (crop_c.empty() || crop_d.empty()) {
        throw OverlapInfeasible("make_pair: degenerate crop");
    }
    out.map_c = std::move(crop_c);
    out.map_d = apply_transform(crop_d, invert(t_gt));
    out.measured_overlap = measured;
    return out;
}

struct NoiseSpec {
    double point_sigma = 0.0;   // per-point isotropic jitter, meters
    double pose_sigma_t = 0.0;  // per-chunk translation drift, meters
    double pose_sigma_r = 0.0;  // per-chunk rotation drift, radians
    std::uint64_t seed = 0;
    std::size_t chunk = 1000;   // points per emulated keyframe
};

// Named noise presets matching the benchmark suite.
inline NoiseSpec noise_preset(const std::string& name, std::uint64_t seed = 0) {
    NoiseSpec n;
    n.seed = seed;
    if (name == "none" || name.empty()) return n;
    if (name == "0.02") {
        n.point_sigma = 0.02;
        n.pose_sigma_t = 0.02;
        n.pose_sigma_r = 0.01;
        return n;
    }
    if (name == "0.05") {
        n.point_sigma = 0.05;
        n.pose_sigma_t = 0.05;
        n.pose_sigma_r = 0.025;
        return n;
    }
    throw InvalidSpec("noise_preset: unknown preset '" + name + "'");
}

// Perturbs contiguous chunks (emulated keyframes) by a pose draw about the
// chunk centroid (drift), then each point by isotropic jitter.
inline PointCloud add_noise(const PointCloud& cloud, const NoiseSpec& spec) {
    if (spec.chunk == 0) throw InvalidSpec("add_noise: chunk must be positive");
    PointCloud out;
    out.points = cloud.points;
    if (spec.point_sigma == 0.0 && spec.pose_sigma_t == 0.0 && spec.pose_sigma_r == 0.0) {
        out.grid_size = cloud.grid_size;
        return out;
    }
    Rng rng(spec.seed);
    const std::size_t n = out.points.size();
    for (std::size_t start = 0; start < n; start += spec.chunk) {
        const std::size_t end = std::min(start + spec.chunk, n);
        const double tx = rng.next_gaussian(spec.pose_sigma_t);
        const double ty = rng.next_gaussian(spec.pose_sigma_t);
        const double tz = rng.next_gaussian(spec.pose_sigma_t);
        const double yaw = rng.next_gaussian(spec.pose_sigma_r);
        const double roll = rng.next_gaussian(spec.pose_sigma_r);
        const double pitch = rng.next_gaussian(spec.pose_sigma_r);

        double cx = 0.0, cy = 0.0, cz = 0.0;
        for (std::size_t i = start; i < end; ++i) {
            cx += out.points[i].x;
            cy += out.points[i].y;
            cz += out.points[i].z;
        }
        const double m = static_cast<double>(end - start);
        cx /= m;
        cy /= m;
        cz /= m;

        const double ca = std::cos(yaw), sa = std::sin(yaw);
        const double cb = std::cos(pitch), sb = std::sin(pitch);
        const double cg = std::cos(roll), sg = std::sin(roll);
        // R = Rz(yaw) * Ry(pitch) * Rx(roll)
        const double r00 = ca * cb;
        const double r01 = ca * sb * sg - sa * cg;
        const double r02 = ca * sb * cg + sa * sg;
        const double r10 = sa * cb;
        const double r11 = sa * sb * sg + ca * cg;
        const double r12 = sa * sb * cg - ca * sg;
        const double r20 = -sb;
        const double r21 = cb * sg;
        const double r22 = cb * cg;

        for (std::size_t i = start; i < end; ++i) {
            const double px = out.points[i].x - cx;
            const double py = out.points[i].y - cy;
            const double pz = out.points[i].z - cz;
            out.points[i].x = cx + r00 * px + r01 * py + r02 * pz + tx;
            out.points[i].y = cy + r10 * px + r11 * py + r12 * pz + ty;
            out.points[i].z = cz + r20 * px + r21 * py + r22 * pz + tz;
        }
        for (std::size_t i = start; i < end; ++i) {
            out.points[i].x += rng.next_gaussian(spec.point_sigma);
            out.points[i].y += rng.next_gaussian(spec.point_sigma);
            out.points[i].z += rng.next_gaussian(spec.point_sigma);
        }
    }
    return out;
}

struct RegistrationError {
    double dt = 0.0;     // 3D translation error, meters
    double dt_xy = 0.0;  // horizontal component
    double dr = 0.0;     // absolute yaw error, radians
};

inline RegistrationError compute_errors(const Transform4DoF& estimate,
                                        const Transform4DoF& truth) {
    RegistrationError e;
    const double dx = estimate.x - truth.x;
    const double dy = estimate.y - truth.y;
    const double dz = estimate.z - truth.z;
    e.dt_xy = std::hypot(dx, dy);
    e.dt = std::sqrt(dx * dx + dy * dy + dz * dz);
    e.dr = angular_distance(estimate.theta, truth.theta);
    return e;
}

}  // namespace tomo::synth
