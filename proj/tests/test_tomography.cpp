#include "tomo/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

namespace tomo {
namespace {

PointCloud cloud_from_z(const std::vector<double>& zs) {
    PointCloud c;
    for (double z : zs) c.points.push_back({0.0, 0.0, z});
    return c;
}

TEST(SliceHeights, SpansMultipleCells) {
    const auto h = slicing::slice_heights(cloud_from_z({0.0, 0.4, 1.0}), 0.5);
    ASSERT_EQ(h.size(), 3u);
    EXPECT_DOUBLE_EQ(h[0], 0.0);
    EXPECT_DOUBLE_EQ(h[1], 0.5);
    EXPECT_DOUBLE_EQ(h[2], 1.0);
}

TEST(SliceHeights, SinglePointGivesOneHeight) {
    const auto h = slicing::slice_heights(cloud_from_z({1.25}), 0.1);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_DOUBLE_EQ(h[0], 1.25);
}

TEST(SliceHeights, SpanBelowHalfCellGivesOneHeight) {
    const auto h = slicing::slice_heights(cloud_from_z({2.0, 2.04}), 0.1);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_DOUBLE_EQ(h[0], 2.0);
}

TEST(SliceHeights, SpacingIsGrid) {
    const auto h = slicing::slice_heights(cloud_from_z({-1.3, 2.17}), 0.07);
    ASSERT_GE(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i) {
        EXPECT_NEAR(h[i] - h[i - 1], 0.07, 1e-12);
    }
    EXPECT_DOUBLE_EQ(h.front(), -1.3);
}

TEST(SliceHeights, TopPointAlwaysCovered) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const double z0 = rng.next_double(-10, 10);
        const double span = rng.next_double(0, 5);
        const double g = rng.next_double(0.01, 1.0);
        const auto h = slicing::slice_heights(cloud_from_z({z0, z0 + span}), g);
        ASSERT_FALSE(h.empty());
        // Top of the cloud must fall inside the last band.
        EXPECT_LE(z0 + span, h.back() + 0.5 * g);
        // And the band below the last must not already cover it (no waste).
        if (h.size() >= 2) EXPECT_GT(z0 + span, h[h.size() - 2] + 0.5 * g);
    }
}

TEST(ExtractSlice, HalfOpenBandEdges) {
    PointCloud c;
    const double h = 1.0;
    const double t = 0.05;
    c.points = {{0, 0, h + t},          // upper edge: included
                {0, 0, h - t},          // lower edge: excluded
                {0, 0, h},              // center: included
                {0, 0, h + t + 1e-9},   // above: excluded
                {0, 0, h - t + 1e-9}};  // just above lower edge: included
    const slicing::Slice s = slicing::extract_slice(c, h, t);
    EXPECT_DOUBLE_EQ(s.height, h);
    EXPECT_DOUBLE_EQ(s.thickness, t);
    ASSERT_EQ(s.points.size(), 3u);
}

// Partition: every point lands in exactly one band over the height ladder.
TEST(ExtractSlice, HeightsPartitionTheCloud) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        PointCloud c;
        const int n = 500 + static_cast<int>(rng.next_below(3000));
        const double z0 = rng.next_double(-5, 5);
        const double span = rng.next_double(0.001, 4.0);
        for (int i = 0; i < n; ++i) {
            c.points.push_back({rng.next_double(-1, 1), rng.next_double(-1, 1),
                                z0 + span * rng.next_double()});
        }
        const double g = rng.next_double(0.02, 0.7);
        const auto heights = slicing::slice_heights(c, g);
        const double t = 0.5 * g;
        std::size_t total = 0;
        for (double h : heights) {
            for (const Point3& p : c.points) {
                if (p.z > h - t && p.z <= h + t) ++total;
            }
        }
        EXPECT_EQ(total, c.size()) << "trial " << trial << " g=" << g;
    }
}

TEST(Rasterize, PixelExample) {
    PointCloud c;
    c.points = {{0.0, 0.0, 0.0}, {0.24, 0.24, 0.0}};
    slicing::Slice s{0.0, 0.025, c.points};
    const BinaryImage img = slicing::rasterize(s, 0.05);
    ASSERT_EQ(img.width, 5);
    ASSERT_EQ(img.height, 5);
    EXPECT_TRUE(img.test(0, 0));
    EXPECT_TRUE(img.test(4, 4));
    EXPECT_EQ(img.count(), 2u);
    EXPECT_DOUBLE_EQ(img.origin_x, 0.0);
    EXPECT_DOUBLE_EQ(img.origin_y, 0.0);
}

TEST(Rasterize, SinglePointGivesOnePixel) {
    slicing::Slice s{0.0, 0.025, {{3.7, -2.2, 0.0}}};
    const BinaryImage img = slicing::rasterize(s, 0.05);
    EXPECT_EQ(img.width, 1);
    EXPECT_EQ(img.height, 1);
    EXPECT_TRUE(img.test(0, 0));
}

TEST(Rasterize, EmptySliceThrows) {
    slicing::Slice s{0.0, 0.025, {}};
    EXPECT_THROW(slicing::rasterize(s, 0.05), EmptySlice);
}

TEST(Rasterize, PixelCenterWithinHalfDiagonal) {
    Rng rng(31);
    PointCloud c;
    for (int i = 0; i < 2000; ++i) {
        c.points.push_back({rng.next_double(-8, 8), rng.next_double(-8, 8), 0.0});
    }
    const double g = 0.05;
    slicing::Slice s{0.0, 0.5 * g, c.points};
    const BinaryImage img = slicing::rasterize(s, g);
    const double bound = g / std::numbers::sqrt2_v<double> + 1e-12;
    for (const Point3& p : c.points) {
        const int u = static_cast<int>(std::floor((p.x - img.origin_x) / g));
        const int v = static_cast<int>(std::floor((p.y - img.origin_y) / g));
        ASSERT_GE(u, 0);
        ASSERT_LT(u, img.width);
        ASSERT_GE(v, 0);
        ASSERT_LT(v, img.height);
        EXPECT_TRUE(img.test(u, v));
        double mx = 0, my = 0;
        pixel_to_metric(img, u, v, mx, my);
        EXPECT_LE(std::hypot(mx - p.x, my - p.y), bound);
    }
}

TEST(SliceMap, BandsAgreeWithExtractSlice) {
    Rng rng(41);
    PointCloud c;
    for (int i = 0; i < 4000; ++i) {
        c.points.push_back(
            {rng.next_double(0, 6), rng.next_double(0, 4), rng.next_double(0, 2.5)});
    }
    const double g = 0.1;
    slicing::SliceOptions opt;
    const slicing::SliceSet set = slicing::slice_map(c, g, opt);
    EXPECT_DOUBLE_EQ(set.grid_size, g);
    std::size_t total = 0;
    for (const auto& entry : set.entries) {
        const slicing::Slice ref = slicing::extract_slice(c, entry.height, 0.5 * g);
        EXPECT_FALSE(ref.points.empty());
        EXPECT_EQ(entry.image.count(),
                  slicing::rasterize(ref, g).count());
        total += ref.points.size();
    }
    EXPECT_EQ(total, c.size());
}

TEST(SliceMap, HeightsStrictlyIncreasingOnGrid) {
    Rng rng(51);
    PointCloud c;
    for (int i = 0; i < 1000; ++i) {
        c.points.push_back({rng.next_double(0, 3), rng.next_double(0, 3),
                            rng.next_double(-1.0, 1.5)});
    }
    const double g = 0.07;
    const auto set = slicing::slice_map(c, g, {});
    ASSERT_FALSE(set.entries.empty());
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        const double h = set.entries[i].height;
        const double k = (h - set.z_min) / g;
        EXPECT_NEAR(k, std::round(k), 1e-9);
        if (i > 0) EXPECT_GT(h, set.entries[i - 1].height);
        EXPECT_EQ(set.index_of(h), static_cast<std::int64_t>(std::llround(k)));
    }
}

TEST(SliceMap, SparseBandKeptWithZeroFeatures) {
    PointCloud c;
    // One dense band and one band with a single point (1x1 image, no corners).
    Rng rng(61);
    for (int i = 0; i < 400; ++i) {
        c.points.push_back({rng.next_double(0, 2), rng.next_double(0, 2), 0.0});
    }
    c.points.push_back({1.0, 1.0, 1.0});
    const auto set = slicing::slice_map(c, 0.1, {});
    ASSERT_GE(set.entries.size(), 2u);
    EXPECT_TRUE(set.entries.back().features.empty());
}

TEST(SliceMap, RespectsMaxFeatures) {
    Rng rng(71);
    PointCloud c;
    for (int i = 0; i < 20000; ++i) {
        c.points.push_back({rng.next_double(0, 10), rng.next_double(0, 10), 0.0});
    }
    slicing::SliceOptions opt;
    opt.max_features = 25;
    const auto set = slicing::slice_map(c, 0.05, opt);
    for (const auto& entry : set.entries) {
        EXPECT_LE(entry.features.size(), 25u);
    }
}

TEST(SliceMap, ThreadCountDoesNotChangeResult) {
    Rng rng(81);
    PointCloud c;
    for (int i = 0; i < 5000; ++i) {
        c.points.push_back(
            {rng.next_double(0, 5), rng.next_double(0, 5), rng.next_double(0, 1.5)});
    }
    slicing::SliceOptions a;
    a.threads = 1;
    slicing::SliceOptions b;
    b.threads = 4;
    const auto sa = slicing::slice_map(c, 0.08, a);
    const auto sb = slicing::slice_map(c, 0.08, b);
    ASSERT_EQ(sa.entries.size(), sb.entries.size());
    for (std::size_t i = 0; i < sa.entries.size(); ++i) {
        EXPECT_DOUBLE_EQ(sa.entries[i].height, sb.entries[i].height);
        EXPECT_EQ(sa.entries[i].image.bits, sb.entries[i].image.bits);
        ASSERT_EQ(sa.entries[i].features.size(), sb.entries[i].features.size());
        for (std::size_t f = 0; f < sa.entries[i].features.size(); ++f) {
            EXPECT_EQ(sa.entries[i].features[f].desc.words, sb.entries[i].features[f].desc.words);
            EXPECT_EQ(sa.entries[i].features[f].mx, sb.entries[i].features[f].mx);
        }
    }
}

TEST(Pgm, WritesBinaryGreyscale) {
    BinaryImage img(4, 3, 0.0, 0.0, 0.05);
    img.set(0, 0);
    img.set(3, 2);
    const std::string file =
        (std::filesystem::temp_directory_path() / "tomo_test.pgm").string();
    write_pgm(img, file);
    std::ifstream in(file, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(w, 4);
    EXPECT_EQ(h, 3);
    EXPECT_EQ(maxval, 255);
    in.get();
    std::vector<unsigned char> data(12);
    in.read(reinterpret_cast<char*>(data.data()), 12);
    ASSERT_TRUE(in.good());
    // Rows are written top-down with +y up, so (3,2) is in the first row.
    EXPECT_EQ(data[3], 255);
    EXPECT_EQ(data[8], 255);
    std::filesystem::remove(file);
}

}  // namespace
}  // namespace tomo
