#pragma once

// Horizontal slicing of gravity-aligned clouds into binary occupancy images
// plus per-slice feature extraction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/core.hpp"
#include "tomo/features.hpp"
#include "tomo/image.hpp"

namespace tomo::slicing {

struct Slice {
    double height = 0.0;
    double thickness = 0.0;
    std::vector<Point3> points;
};

// Slice heights z_min + k*g. k_max is the smallest count whose half-open
// bands (h - g/2, h + g/2] cover z_max; it equals floor(span/g) except when
// frac(span/g) > 1/2, where one extra height is needed so the bands
// partition the cloud.
inline std::vector<double> slice_heights(const PointCloud& cloud, double g) {
    if (!(g > 0.0)) throw NonPositiveGrid("slice_heights: grid size must be positive");
    if (cloud.empty()) throw EmptyCloud("slice_heights: empty cloud");
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    for (const Point3& p : cloud.points) {
        z_min = std::min(z_min, p.z);
        z_max = std::max(z_max, p.z);
    }
    const double span = z_max - z_min;
    std::int64_t k_max = static_cast<std::int64_t>(std::ceil(span / g - 0.5));
    if (k_max < 0) k_max = 0;
    while (z_max > z_min + static_cast<double>(k_max) * g + 0.5 * g) ++k_max;
    std::vector<double> heights;
    heights.reserve(static_cast<std::size_t>(k_max) + 1);
    for (std::int64_t k = 0; k <= k_max; ++k) {
        heights.push_back(z_min + static_cast<double>(k) * g);
    }
    return heights;
}

// Points of the band h - t < z <= h + t.
inline Slice extract_slice(const PointCloud& cloud, double height, double thickness) {
    if (!(thickness > 0.0)) throw NonPositiveGrid("extract_slice: thickness must be positive");
    if (cloud.empty()) throw EmptyCloud("extract_slice: empty cloud");
    Slice s;
    s.height = height;
    s.thickness = thickness;
    for (const Point3& p : cloud.points) {
        if (p.z > height - thickness && p.z <= height + thickness) s.points.push_back(p);
    }
    return s;
}

// Projects a slice onto a binary image with pixel size g. The image origin
// is the slice's own (min x, min y); a pixel is set when at least one point
// falls into its half-open g x g cell.
inline BinaryImage rasterize(const Slice& slice, double g) {
    if (!(g > 0.0)) throw NonPositiveGrid("rasterize: grid size must be positive");
    if (slice.points.empty()) throw EmptySlice("rasterize: slice has no points");
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    for (const Point3& p : slice.points) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    const int width = static_cast<int>(std::floor((max_x - min_x) / g)) + 1;
    const int height = static_cast<int>(std::floor((max_y - min_y) / g)) + 1;
    BinaryImage img(width, height, min_x, min_y, g);
    for (const Point3& p : slice.points) {
        int u = static_cast<int>(std::floor((p.x - min_x) / g));
        int v = static_cast<int>(std::floor((p.y - min_y) / g));
        u = std::clamp(u, 0, width - 1);
        v = std::clamp(v, 0, height - 1);
        img.set(u, v);
    }
    return img;
}

struct SliceEntry {
    double height = 0.0;
    BinaryImage image;
    features::FeatureSet features;
};

struct SliceSet {
    double grid_size = 0.0;
    double z_min = 0.0;
    std::vector<SliceEntry> entries;  // heights strictly increasing

    // Approximate live size, the memory-use proxy reported by benchmarks.
    std::size_t byte_size() const {
        std::size_t n = sizeof(SliceSet);
        for (const SliceEntry& e : entries) {
            n += sizeof(SliceEntry) + e.image.bits.size() * 8 +
                 e.features.size() * sizeof(features::Feature);
        }
        return n;
    }

    // Band index of a height relative to z_min, rounded to the nearest step.
    std::int64_t index_of(double height) const {
        return static_cast<std::int64_t>(std::llround((height - z_min) / grid_size));
    }
};

struct SliceOptions {
    int max_features = 1000;
    unsigned threads = 1;
};

// Slices the cloud at thickness g/2 around each height, rasterizes every
// non-empty band and extracts its features. Bands with no points are
// dropped; bands whose image yields no keypoints keep an empty FeatureSet.
inline SliceSet slice_map(const PointCloud& cloud, double g, const SliceOptions& opt = {}) {
    const std::vector<double> heights = slice_heights(cloud, g);
    const double z_min = heights.front();
    const double t = 0.5 * g;

    // Single pass: each point lands in the band whose membership test
    // (h - t, h + t] it satisfies. The nearest-height index is corrected by
    // at most one step using exactly the band-edge comparisons, so the
    // assignment agrees with extract_slice on every input.
    std::vector<std::vector<Point3>> bands(heights.size());
    const auto k_last = static_cast<std::int64_t>(heights.size()) - 1;
    for (const Point3& p : cloud.points) {
        std::int64_t k = static_cast<std::int64_t>(std::floor((p.z - z_min) / g + 0.5));
        k = std::clamp<std::int64_t>(k, 0, k_last);
        if (p.z > z_min + static_cast<double>(k) * g + t) {
            k = std::min(k + 1, k_last);
        } else if (p.z <= z_min + static_cast<double>(k) * g - t) {
            k = std::max(k - 1, std::int64_t{0});
        }
        bands[static_cast<std::size_t>(k)].push_back(p);
    }

    SliceSet set;
    set.grid_size = g;
    set.z_min = z_min;
    std::vector<std::size_t> occupied;
    for (std::size_t k = 0; k < bands.size(); ++k) {
        if (!bands[k].empty()) occupied.push_back(k);
    }
    std::vector<SliceEntry> entries(occupied.size());
    parallel_for(occupied.size(), opt.threads, [&](std::size_t i) {
        const std::size_t k = occupied[i];
        Slice s;
        s.height = heights[k];
        s.thickness = t;
        s.points = std::move(bands[k]);
        SliceEntry& e = entries[i];
        e.height = s.height;
        e.image = rasterize(s, g);
        const auto kps = features::detect_keypoints(e.image, opt.max_features);
        e.features = features::compute_descriptors(e.image, kps);
    });
    set.entries = std::move(entries);
    return set;
}

}  // namespace tomo::slicing
