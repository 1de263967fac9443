#include "tomo/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <gtest/gtest.h>

namespace tomo {
namespace features {
namespace {

// Independent oracle for the segment test: canonical 16-pixel Bresenham ring
// of radius 3, longest circular run of pixels differing from the center.
int oracle_score(const BinaryImage& img, int u, int v) {
    static const int ring[16][2] = {{0, 3},   {1, 3},   {2, 2},   {3, 1},  {3, 0},  {3, -1},
                                    {2, -2},  {1, -3},  {0, -3},  {-1, -3}, {-2, -2}, {-3, -1},
                                    {-3, 0},  {-3, 1},  {-2, 2},  {-1, 3}};
    const bool center = img.test_padded(u, v);
    bool diff[16];
    int total = 0;
    for (int i = 0; i < 16; ++i) {
        diff[i] = img.test_padded(u + ring[i][0], v + ring[i][1]) != center;
        total += diff[i] ? 1 : 0;
    }
    if (total == 16) return 16;
    int best = 0;
    for (int start = 0; start < 16; ++start) {
        int run = 0;
        while (run < 16 && diff[(start + run) & 15]) ++run;
        best = std::max(best, run);
    }
    return best;
}

BinaryImage blank(int w, int h) { return BinaryImage(w, h, 0.0, 0.0, 0.05); }

void draw_rect_outline(BinaryImage& img, int x0, int y0, int x1, int y1) {
    for (int u = x0; u <= x1; ++u) {
        img.set(u, y0);
        img.set(u, y1);
    }
    for (int v = y0; v <= y1; ++v) {
        img.set(x0, v);
        img.set(x1, v);
    }
}

TEST(SegmentTest, MatchesOracleEverywhere) {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        BinaryImage img = blank(48, 40);
        for (int i = 0; i < 300; ++i) {
            img.set(static_cast<int>(rng.next_below(48)),
                    static_cast<int>(rng.next_below(40)));
        }
        for (int v = kDetectionMargin; v < img.height - kDetectionMargin; ++v) {
            for (int u = kDetectionMargin; u < img.width - kDetectionMargin; ++u) {
                EXPECT_EQ(detail::max_arc_run(img, u, v), oracle_score(img, u, v))
                    << "pixel (" << u << ", " << v << ")";
            }
        }
    }
}

TEST(Detector, StraightEdgeIsNotACorner) {
    BinaryImage img = blank(40, 20);
    for (int u = 0; u < 40; ++u) img.set(u, 10);
    const auto kps = detect_keypoints(img, 100);
    EXPECT_TRUE(kps.empty());
}

TEST(Detector, RectangleCornersDetected) {
    BinaryImage img = blank(64, 48);
    draw_rect_outline(img, 10, 10, 45, 32);
    const auto kps = detect_keypoints(img, 100);
    ASSERT_FALSE(kps.empty());
    // Every detection must pass the independent segment test with the same
    // score it reports.
    for (const auto& kp : kps) {
        const int s = oracle_score(img, static_cast<int>(kp.u), static_cast<int>(kp.v));
        EXPECT_GE(s, kSegmentArcLength);
        EXPECT_EQ(static_cast<int>(kp.response), s);
    }
    // And each rectangle corner must be found within 2 pixels.
    const int corners[4][2] = {{10, 10}, {45, 10}, {10, 32}, {45, 32}};
    for (const auto& c : corners) {
        bool found = false;
        for (const auto& kp : kps) {
            if (std::abs(kp.u - c[0]) <= 2.0 && std::abs(kp.v - c[1]) <= 2.0) found = true;
        }
        EXPECT_TRUE(found) << "corner (" << c[0] << ", " << c[1] << ")";
    }
}

TEST(Detector, NoTwoKeypointsAdjacent) {
    Rng rng(23);
    BinaryImage img = blank(80, 60);
    for (int i = 0; i < 900; ++i) {
        img.set(static_cast<int>(rng.next_below(80)), static_cast<int>(rng.next_below(60)));
    }
    const auto kps = detect_keypoints(img, 10000);
    for (std::size_t i = 0; i < kps.size(); ++i) {
        for (std::size_t j = i + 1; j < kps.size(); ++j) {
            const bool adjacent = std::abs(kps[i].u - kps[j].u) <= 1.0 &&
                                  std::abs(kps[i].v - kps[j].v) <= 1.0;
            EXPECT_FALSE(adjacent);
        }
    }
}

TEST(Detector, TruncatesToStrongestMaxK) {
    // Isolated filled squares each produce at least one strong corner.
    BinaryImage img = blank(100, 100);
    for (int by = 0; by < 6; ++by) {
        for (int bx = 0; bx < 6; ++bx) {
            for (int dv = 0; dv < 3; ++dv) {
                for (int du = 0; du < 3; ++du) {
                    img.set(8 + bx * 14 + du, 8 + by * 14 + dv);
                }
            }
        }
    }
    const auto all = detect_keypoints(img, 100000);
    ASSERT_GT(all.size(), 10u);
    const auto kps = detect_keypoints(img, 10);
    ASSERT_EQ(kps.size(), 10u);
    for (std::size_t i = 1; i < kps.size(); ++i) {
        EXPECT_LE(kps[i].response, kps[i - 1].response);
    }
    // The kept ten are the head of the full ranking.
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(kps[i].u, all[i].u);
        EXPECT_EQ(kps[i].v, all[i].v);
    }
}

TEST(Orientation, PointsAtMass) {
    BinaryImage img = blank(40, 40);
    img.set(20, 20);
    img.set(23, 20);  // mass to the +x side
    EXPECT_NEAR(detail::intensity_centroid_angle(img, 20, 20), 0.0f, 1e-6f);
    BinaryImage up = blank(40, 40);
    up.set(20, 20);
    up.set(20, 24);  // mass to the +y side
    EXPECT_NEAR(detail::intensity_centroid_angle(up, 20, 20), kPi / 2.0, 1e-6);
    BinaryImage lone = blank(40, 40);
    lone.set(20, 20);
    EXPECT_EQ(detail::intensity_centroid_angle(lone, 20, 20), 0.0f);
}

TEST(BoxBlur, CountsScaledTo255) {
    BinaryImage img = blank(8, 8);
    img.set(4, 4);
    const auto b = detail::box_blur(img);
    auto at = [&](int u, int v) { return static_cast<int>(b[v * 8 + u]); };
    EXPECT_EQ(at(4, 4), 255 / 9);  // one of nine neighbors set
    EXPECT_EQ(at(0, 0), 0);
    BinaryImage full = blank(8, 8);
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) full.set(u, v);
    const auto bf = detail::box_blur(full);
    EXPECT_EQ(static_cast<int>(bf[3 * 8 + 3]), 255);
    // Border pixels see the zero padding.
    EXPECT_EQ(static_cast<int>(bf[0]), 4 * 255 / 9);
}

TEST(Descriptors, Deterministic) {
    Rng rng(29);
    BinaryImage img = blank(96, 96);
    for (int i = 0; i < 1200; ++i) {
        img.set(static_cast<int>(rng.next_below(96)), static_cast<int>(rng.next_below(96)));
    }
    const auto kps = detect_keypoints(img, 50);
    ASSERT_FALSE(kps.empty());
    const FeatureSet a = compute_descriptors(img, kps);
    const FeatureSet b = compute_descriptors(img, kps);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].desc.words, b[i].desc.words);
        EXPECT_EQ(a[i].mx, b[i].mx);
        EXPECT_EQ(a[i].my, b[i].my);
    }
}

TEST(Descriptors, TranslationEquivariant) {
    auto draw = [](BinaryImage& img, int ox, int oy) {
        draw_rect_outline(img, ox, oy, ox + 30, oy + 22);
        draw_rect_outline(img, ox + 8, oy + 6, ox + 14, oy + 12);
        for (int i = 0; i < 10; ++i) img.set(ox + 18 + i, oy + 6 + i);
    };
    BinaryImage a = blank(96, 96);
    draw(a, 24, 24);
    BinaryImage b = blank(96, 96);
    draw(b, 31, 29);  // content shifted by (7, 5)
    const auto ka = detect_keypoints(a, 200);
    const auto kb = detect_keypoints(b, 200);
    ASSERT_FALSE(ka.empty());
    ASSERT_EQ(ka.size(), kb.size());
    const FeatureSet fa = compute_descriptors(a, ka);
    const FeatureSet fb = compute_descriptors(b, kb);
    // Same content, so keypoints correspond under the (7, 5) shift with
    // identical responses, orientations, and descriptor bits.
    for (std::size_t i = 0; i < fa.size(); ++i) {
        bool matched = false;
        for (std::size_t j = 0; j < fb.size(); ++j) {
            if (fb[j].kp.u == fa[i].kp.u + 7.0 && fb[j].kp.v == fa[i].kp.v + 5.0) {
                EXPECT_EQ(fb[j].kp.response, fa[i].kp.response);
                EXPECT_EQ(fb[j].kp.orientation, fa[i].kp.orientation);
                EXPECT_EQ(fb[j].desc.words, fa[i].desc.words);
                matched = true;
            }
        }
        EXPECT_TRUE(matched) << "keypoint " << i;
    }
}

// Rotating the image by 90 degrees rotates each keypoint's patch exactly;
// orientation steering must hold descriptor drift to a small hamming radius.
TEST(Descriptors, QuarterTurnHammingBounded) {
    BinaryImage img = blank(120, 120);
    draw_rect_outline(img, 24, 24, 82, 70);
    draw_rect_outline(img, 36, 34, 52, 48);
    for (int i = 0; i < 16; ++i) img.set(60 + i, 34 + i);
    for (int i = 0; i < 12; ++i) img.set(60 + i, 60);
    BinaryImage rot(img.height, img.width, 0.0, 0.0, img.pixel_size);
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            if (img.test(u, v)) rot.set(img.height - 1 - v, u);
        }
    }
    const auto ka = detect_keypoints(img, 500);
    const auto kb = detect_keypoints(rot, 500);
    ASSERT_FALSE(ka.empty());
    const FeatureSet fa = compute_descriptors(img, ka);
    const FeatureSet fb = compute_descriptors(rot, kb);
    // Tie plateaus may keep a different pixel after rotation, so compare the
    // keypoints that re-detect at the exactly mapped position.
    std::vector<int> dists;
    for (const Feature& f : fa) {
        const double ru = img.height - 1 - f.kp.v;
        const double rv = f.kp.u;
        for (const Feature& g : fb) {
            if (g.kp.u == ru && g.kp.v == rv) {
                dists.push_back(hamming(f.desc, g.desc));
            }
        }
    }
    ASSERT_GE(dists.size(), fa.size() / 2);
    std::sort(dists.begin(), dists.end());
    const int median = dists[dists.size() / 2];
    EXPECT_LE(median, 24) << "median quarter-turn hamming drift";
    RecordProperty("median_hamming", median);
    RecordProperty("max_hamming", dists.back());
}

Descriptor random_descriptor(Rng& rng) {
    Descriptor d;
    d.words[0] = rng.next_u64();
    d.words[1] = rng.next_u64();
    return d;
}

// Independent mutual-nearest-neighbour matcher used as the oracle.
std::vector<Correspondence> oracle_match(const FeatureSet& fa, const FeatureSet& fb,
                                         int max_hamming) {
    std::vector<Correspondence> out;
    for (int i = 0; i < static_cast<int>(fa.size()); ++i) {
        int best_j = -1, best_d = max_hamming + 1;
        for (int j = 0; j < static_cast<int>(fb.size()); ++j) {
            const int d = hamming(fa[i].desc, fb[j].desc);
            if (d < best_d) {
                best_d = d;
                best_j = j;
            }
        }
        if (best_j < 0) continue;
        int back_i = -1, back_d = max_hamming + 1;
        for (int k = 0; k < static_cast<int>(fa.size()); ++k) {
            const int d = hamming(fa[k].desc, fb[best_j].desc);
            if (d < back_d) {
                back_d = d;
                back_i = k;
            }
        }
        if (back_i == i) out.push_back({i, best_j, best_d});
    }
    return out;
}

TEST(Matching, MatchesOracleOnRandomSets) {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        FeatureSet fa(20 + rng.next_below(60));
        FeatureSet fb(20 + rng.next_below(60));
        for (auto& f : fa) f.desc = random_descriptor(rng);
        for (auto& f : fb) f.desc = random_descriptor(rng);
        const auto got = match_descriptors(fa, fb, 64);
        const auto want = oracle_match(fa, fb, 64);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].a, want[i].a);
            EXPECT_EQ(got[i].b, want[i].b);
            EXPECT_EQ(got[i].distance, want[i].distance);
        }
    }
}

TEST(Matching, IdenticalSetsMatchIdentically) {
    Rng rng(43);
    FeatureSet fa(40);
    for (auto& f : fa) f.desc = random_descriptor(rng);
    const auto m = match_descriptors(fa, fa, 40);
    ASSERT_EQ(m.size(), fa.size());
    for (const auto& c : m) {
        EXPECT_EQ(c.a, c.b);
        EXPECT_EQ(c.distance, 0);
    }
}

TEST(Matching, ThresholdExcludesDistantPairs) {
    FeatureSet fa(1), fb(1);
    fa[0].desc.words = {0x0, 0x0};
    fb[0].desc.words = {~std::uint64_t{0}, ~std::uint64_t{0}};  // distance 128
    EXPECT_TRUE(match_descriptors(fa, fb, 40).empty());
    fb[0].desc.words = {0xff, 0x0};  // distance 8
    const auto m = match_descriptors(fa, fb, 40);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].distance, 8);
}

TEST(Matching, OneToOneAndSymmetric) {
    Rng rng(47);
    FeatureSet fa(50), fb(35);
    for (auto& f : fa) f.desc = random_descriptor(rng);
    for (auto& f : fb) f.desc = random_descriptor(rng);
    const auto ab = match_descriptors(fa, fb, 64);
    const auto ba = match_descriptors(fb, fa, 64);
    std::vector<int> seen_a, seen_b;
    for (const auto& c : ab) {
        seen_a.push_back(c.a);
        seen_b.push_back(c.b);
    }
    std::sort(seen_a.begin(), seen_a.end());
    std::sort(seen_b.begin(), seen_b.end());
    EXPECT_TRUE(std::adjacent_find(seen_a.begin(), seen_a.end()) == seen_a.end());
    EXPECT_TRUE(std::adjacent_find(seen_b.begin(), seen_b.end()) == seen_b.end());
    // Mutual nearest neighbours are direction independent.
    ASSERT_EQ(ab.size(), ba.size());
    for (const auto& c : ab) {
        const bool mirrored = std::any_of(ba.begin(), ba.end(), [&](const Correspondence& d) {
            return d.a == c.b && d.b == c.a && d.distance == c.distance;
        });
        EXPECT_TRUE(mirrored);
    }
}

TEST(Hamming, CountsBitDifferences) {
    Descriptor a, b;
    EXPECT_EQ(hamming(a, b), 0);
    b.set_bit(0);
    b.set_bit(77);
    b.set_bit(127);
    EXPECT_EQ(hamming(a, b), 3);
    a.set_bit(77);
    EXPECT_EQ(hamming(a, b), 2);
}

}  // namespace
}  // namespace features
}  // namespace tomo
