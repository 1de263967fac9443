#pragma once

// Point cloud container, gravity-aligned 4-DoF rigid transform (x, y, z, yaw)
// and the centroid voxel filter.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tomo/common.hpp"

namespace tomo {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline bool is_finite(const Point3& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

struct PointCloud {
    std::vector<Point3> points;
    // Leaf size the cloud was last voxel-filtered at; empty if unfiltered.
    std::optional<double> grid_size;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Rigid transform restricted to translation plus rotation about +z.
// theta is kept in (-pi, pi].
struct Transform4DoF {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double theta = 0.0;

    Transform4DoF() = default;
    Transform4DoF(double tx, double ty, double tz, double yaw)
        : x(tx), y(ty), z(tz), theta(wrap_angle(yaw)) {}

    static Transform4DoF identity() { return {}; }

    // Homogeneous 4x4 matrix, row-major.
    std::array<double, 16> matrix() const {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        return {c, -s, 0.0, x,
                s, c, 0.0, y,
                0.0, 0.0, 1.0, z,
                0.0, 0.0, 0.0, 1.0};
    }
};

inline Point3 apply(const Transform4DoF& t, const Point3& p) {
    const double c = std::cos(t.theta);
    const double s = std::sin(t.theta);
    return {c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y, p.z + t.z};
}

// Rigid motion does not preserve the voxel-disjointness invariant, so the
// result's grid_size is left unset.
inline PointCloud apply_transform(const PointCloud& cloud, const Transform4DoF& t) {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const Point3& p : cloud.points) out.points.push_back(apply(t, p));
    return out;
}

// compose(a, b) maps a point first by b, then by a.
inline Transform4DoF compose(const Transform4DoF& a, const Transform4DoF& b) {
    const double c = std::cos(a.theta);
    const double s = std::sin(a.theta);
    return Transform4DoF(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.z + b.z,
                         a.theta + b.theta);
}

inline Transform4DoF invert(const Transform4DoF& t) {
    const double c = std::cos(t.theta);
    const double s = std::sin(t.theta);
    return Transform4DoF(-(c * t.x + s * t.y), s * t.x - c * t.y, -t.z, -t.theta);
}

// Integer cell coordinates of the half-open voxel [i*g, (i+1)*g)^3
// containing a point; a coordinate exactly on a boundary belongs to the
// higher-index cell.
struct VoxelKey {
    std::int64_t ix = 0;
    std::int64_t iy = 0;
    std::int64_t iz = 0;

    bool operator==(const VoxelKey&) const = default;
};

inline VoxelKey voxel_key(const Point3& p, double g) {
    return {static_cast<std::int64_t>(std::floor(p.x / g)),
            static_cast<std::int64_t>(std::floor(p.y / g)),
            static_cast<std::int64_t>(std::floor(p.z / g))};
}

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.ix));
        h = splitmix64(h ^ static_cast<std::uint64_t>(k.iy));
        h = splitmix64(h ^ static_cast<std::uint64_t>(k.iz));
        return static_cast<std::size_t>(h);
    }
};

// Centroid voxel filter. Output holds one point per occupied cell (the mean
// of the cell's points) and is sorted by cell index so the result is
// independent of hash-map iteration order.
inline PointCloud voxel_filter(const PointCloud& cloud, double g) {
    if (!(g > 0.0)) throw NonPositiveGrid("voxel_filter: grid size must be positive");
    if (cloud.empty()) throw EmptyCloud("voxel_filter: empty input cloud");
    for (const Point3& p : cloud.points) {
        if (!is_finite(p)) throw NonFiniteCoordinate("voxel_filter: non-finite coordinate");
    }

    struct Accum {
        double sx = 0.0, sy = 0.0, sz = 0.0;
        std::size_t n = 0;
    };
    std::unordered_map<VoxelKey, Accum, VoxelKeyHash> cells;
    cells.reserve(cloud.points.size());
    for (const Point3& p : cloud.points) {
        Accum& a = cells[voxel_key(p, g)];
        a.sx += p.x;
        a.sy += p.y;
        a.sz += p.z;
        a.n += 1;
    }

    std::vector<std::pair<VoxelKey, Accum>> sorted(cells.begin(), cells.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.first.ix != b.first.ix) return a.first.ix < b.first.ix;
        if (a.first.iy != b.first.iy) return a.first.iy < b.first.iy;
        return a.first.iz < b.first.iz;
    });

    PointCloud out;
    out.points.reserve(sorted.size());
    for (const auto& [key, a] : sorted) {
        const double n = static_cast<double>(a.n);
        out.points.push_back({a.sx / n, a.sy / n, a.sz / n});
    }
    out.grid_size = g;
    return out;
}

}  // namespace tomo
