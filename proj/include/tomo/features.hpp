#pragma once

// Corner detection and binary descriptors on occupancy slices: segment-test
// corners with intensity-centroid orientation, 128-bit steered point-pair
// descriptors, and mutual nearest-neighbour Hamming matching.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/image.hpp"

namespace tomo::features {

struct Keypoint {
    double u = 0.0;
    double v = 0.0;
    double response = 0.0;
    float orientation = 0.0f;  // radians, intensity-centroid direction
};

struct Descriptor {
    std::array<std::uint64_t, 2> words = {0, 0};

    bool operator==(const Descriptor&) const = default;

    bool bit(int i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
    void set_bit(int i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }
};

inline int hamming(const Descriptor& a, const Descriptor& b) {
    return __builtin_popcountll(a.words[0] ^ b.words[0]) +
           __builtin_popcountll(a.words[1] ^ b.words[1]);
}

// Metric coordinates are float32: they travel over the wire in that width,
// and keeping the in-memory value identical makes remote and local matching
// produce bit-equal results.
struct Feature {
    Keypoint kp;
    Descriptor desc;
    float mx = 0.0f;
    float my = 0.0f;
};

using FeatureSet = std::vector<Feature>;

struct Correspondence {
    int a = 0;
    int b = 0;
    int distance = 0;
};

using CorrespondenceSet = std::vector<Correspondence>;

inline constexpr int kDescriptorBits = 128;
inline constexpr int kSegmentArcLength = 9;
inline constexpr int kOrientationBins = 30;  // 12 degree quantization
inline constexpr int kPatchHalf = 15;
inline constexpr int kDetectionMargin = 3;
inline constexpr int kPatternVersion = 1;

namespace detail {

// Radius-3 discretized circle, 16 pixels, clockwise from (0, +3).
inline constexpr int kCircle[16][2] = {
    {0, 3},   {1, 3},   {2, 2},   {3, 1},   {3, 0},   {3, -1},  {2, -2},  {1, -3},
    {0, -3},  {-1, -3}, {-2, -2}, {-3, -1}, {-3, 0},  {-3, 1},  {-2, 2},  {-1, 3},
};

// Fixed sampling pattern, version 1: 128 point pairs (x1, y1, x2, y2) drawn
// once from a clipped Gaussian over the 31x31 patch and frozen here.
inline constexpr int kPattern[kDescriptorBits * 4] = {
     -2,   8, -11,  -7,  -5,  -7,   1,  -2,  10,   3,  -6,  -3,   5,  -1,   4,   2,
     -3,   2,  -2,   5, -10,  -1,   4,  -9,   0, -14,   1, -12,  -1,  -4,  -5,  -9,
     -4,   8,   0,   7,   6,  -8,  -4,  -7, -10,   1,  -1,  -6,  -8,  -8,  -6,  -2,
      4,  13,   8,  -4,   9, -11,  -1,   1,  -5,   3,   3,  -3,  11,  -8,   2,   4,
     -4,   0,   4,   9,   9,   1,   2,   6,  -9,  10,   4,  -8,  -8,   5,   5,  -6,
      6,  -9,  -5,  -2,  -8,   0,  -6, -10,   0,   1,  -2,  -9,  -4,   5,   6,   8,
     -5,  -2,  -5,  10,  12,   1,  -7,   8,   0,  -1,  -5,   3, -12,   6,   7,  -6,
     -3,  -4,   6,   2,   4,  -7,  -5,  -3,  -5,   2,  -4,  -3,  -3,   0,   2,   0,
      1,  11,  10,   1,   7,  -2,   3,  -8,   2,  -5,  -6,   2,  -3,   8, -10,  -1,
      1,  -5, -13,  11,  -7,  -6,  11,   7,   4,  -6,  13,   8,   0,  -9,  -7,   2,
     -4,  -9,  -3,  -2,   1,   4,   3,  -4,  -4,   3,  -2,  13,   0, -11,   4,  -1,
      5,   2,  -2,   2,  -6,  -4,   1,  -1,  -1,   0,  -6,   1,  -8,  -3,   5,   3,
      0,  -5,  12,  -6,  -5,   3,   1,   6,   6,   0,   5,   1,   7,  -2,   0,  -8,
     -3,  -2,  -1,   2,  -8,   0,   7,  12,  -4,  -2,  -8,  13,   1,  -7,  -2,   2,
      7, -14,  -5,  -4,  -3,   6,   0,   3,   5,   8,   1,  -6,   0,  -7,   6,   2,
     -6,   1,   4,  -8,   2,  -1, -14,  -8,   4,  -2,  -5,  -1,  -1,   7,   2,   3,
     -3, -10,   3,  10,   3,  -7,   0,  -6,   0,  -2,   4,   5,   0,  -3,   3,   6,
     -1,  -3,   2,  -2,  -2,   6,   2,   9,  -1,  -2,  13,   3,   3,   9,  -2,   5,
      2,  -1,   4,  -1,  -3,   8,  -2,  -3,  -4,   3,   8,  11,   0,  -4,  -4, -11,
      0,  -7,   3,   3,   6,  -2,  -3,  -9,   1,   4,   4,  -2,   1,  -1,  -1,   8,
      3,  -3,   0,   5,  -2,   4,  -6,  -2,  -4,  -6,  -4,  -3,  -1,  -4,  11,   1,
      0,  -6,   1,  -2,  -4,  -2,  11,   4,  -7,   7,   3,  -2,  -6,  -3,   4,  -2,
      0,   5,  -4,  -4,  -2,  -3,   2,  -3,  -1,   4,  14,  -5,   0,  -3,  -1,   3,
     -2,  -3,   2,  -1,  -6,   5,   5,   8,   3,  -3,   8,   9, -10,   1,   8,  -3,
      3,  -8,  11,  -1,   4,  -2, -15,  -1,  -7,   5,  -3,   1,   5,   0,   3,   3,
     14,  -6,   3,  -5,  -3,   4,  -2, -13,   7,  -6,   4, -11,   3,   0,   1,  -5,
      9,  11,   9,  -5, -12,   7,  -5,   6,   3,  -1,  -1,   5,   0,   0,   5,   0,
     -2,  -5,   1,  13,   5,   2,  -1,   6,   2,   5, -11,  -1,   8,   4,   5,  -7,
     -2,   8,  -2,  -4,  12,  -2,   8,   1,  -2,  -1,   7,   3,   4,  -5,  -2,   5,
     -5,  -6, -11,   2,   0,   6,  -5,  -3,  -2,  -8,   5,   5,  -4,  -4, -14,   0,
    -10,   0,  -9,   5,  -1,  -6,  -8,  -4,  -1,  -1,  -4,   8,  -1,   8,   5,  -6,
      5,   5,  -1,  -5,  -3,  -7,  -1,   7,   2,   8,   4,   0,   1,  -9,  -3,  -9,
};

// Length of the longest circular run of circle pixels differing from the
// center. On a two-level image "differs" is the full segment-test contrast.
inline int max_arc_run(const BinaryImage& img, int u, int v) {
    const bool center = img.test(u, v);
    unsigned mask = 0;
    for (int i = 0; i < 16; ++i) {
        const bool px = img.test_padded(u + kCircle[i][0], v + kCircle[i][1]);
        if (px != center) mask |= 1u << i;
    }
    if (mask == 0xffffu) return 16;
    int best = 0, run = 0;
    for (int i = 0; i < 32; ++i) {
        if (mask & (1u << (i & 15))) {
            ++run;
            best = std::max(best, run);
        } else {
            run = 0;
        }
    }
    return std::min(best, 16);
}

inline float intensity_centroid_angle(const BinaryImage& img, int u, int v) {
    long m10 = 0, m01 = 0;
    for (int dv = -kPatchHalf; dv <= kPatchHalf; ++dv) {
        for (int du = -kPatchHalf; du <= kPatchHalf; ++du) {
            if (du * du + dv * dv > kPatchHalf * kPatchHalf) continue;
            if (img.test_padded(u + du, v + dv)) {
                m10 += du;
                m01 += dv;
            }
        }
    }
    if (m10 == 0 && m01 == 0) return 0.0f;
    return static_cast<float>(std::atan2(static_cast<double>(m01), static_cast<double>(m10)));
}

// 3x3 box blur of the bitmap, one byte per pixel, zero-padded borders.
inline std::vector<std::uint8_t> box_blur(const BinaryImage& img) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width) * img.height, 0);
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
            int n = 0;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du)
                    if (img.test_padded(u + du, v + dv)) ++n;
            out[static_cast<std::size_t>(v) * img.width + u] =
                static_cast<std::uint8_t>(n * 255 / 9);
        }
    }
    return out;
}

}  // namespace detail

// Segment-test corners: a pixel is a candidate when at least
// kSegmentArcLength contiguous circle pixels differ from it (on a 0/255
// image the 128-level threshold reduces to inequality). Candidates are
// 3x3 non-maximum suppressed and truncated to the max_k strongest.
// Ordering and tie-breaks are deterministic.
inline std::vector<Keypoint> detect_keypoints(const BinaryImage& img, int max_k) {
    std::vector<Keypoint> out;
    if (max_k <= 0) return out;
    const int m = kDetectionMargin;
    if (img.width < 2 * m + 1 || img.height < 2 * m + 1) return out;

    std::vector<std::uint8_t> score(static_cast<std::size_t>(img.width) * img.height, 0);
    auto score_at = [&](int u, int v) -> std::uint8_t {
        return score[static_cast<std::size_t>(v) * img.width + u];
    };
    for (int v = m; v < img.height - m; ++v) {
        for (int u = m; u < img.width - m; ++u) {
            int run = detail::max_arc_run(img, u, v);
            if (run >= kSegmentArcLength)
                score[static_cast<std::size_t>(v) * img.width + u] =
                    static_cast<std::uint8_t>(run);
        }
    }
    for (int v = m; v < img.height - m; ++v) {
        for (int u = m; u < img.width - m; ++u) {
            const std::uint8_t s = score_at(u, v);
            if (s == 0) continue;
            bool keep = true;
            for (int dv = -1; dv <= 1 && keep; ++dv) {
                for (int du = -1; du <= 1 && keep; ++du) {
                    if (du == 0 && dv == 0) continue;
                    if (!img.in_bounds(u + du, v + dv)) continue;
                    const std::uint8_t sn = score_at(u + du, v + dv);
                    // Equal-score ties survive only at the lexicographically
                    // smallest (v, u) of the tied plateau.
                    if (sn > s || (sn == s && (dv < 0 || (dv == 0 && du < 0)))) keep = false;
                }
            }
            if (keep) {
                Keypoint kp;
                kp.u = u;
                kp.v = v;
                kp.response = s;
                out.push_back(kp);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });
    if (static_cast<int>(out.size()) > max_k) out.resize(static_cast<std::size_t>(max_k));
    for (Keypoint& kp : out) {
        kp.orientation = detail::intensity_centroid_angle(img, static_cast<int>(kp.u),
                                                          static_cast<int>(kp.v));
    }
    return out;
}

// Steered point-pair descriptors sampled from the blurred bitmap. The
// keypoint orientation is quantized to kOrientationBins before steering, so
// equal bins give bit-identical descriptors.
inline FeatureSet compute_descriptors(const BinaryImage& img, const std::vector<Keypoint>& kps) {
    FeatureSet out;
    out.reserve(kps.size());
    if (kps.empty()) return out;
    const std::vector<std::uint8_t> blurred = detail::box_blur(img);
    auto sample = [&](int u, int v) -> int {
        if (!img.in_bounds(u, v)) return 0;
        return blurred[static_cast<std::size_t>(v) * img.width + u];
    };
    const double bin_width = 2.0 * kPi / kOrientationBins;
    for (const Keypoint& kp : kps) {
        double a = static_cast<double>(kp.orientation);
        if (a < 0.0) a += 2.0 * kPi;
        int bin = static_cast<int>(std::lround(a / bin_width)) % kOrientationBins;
        const double ca = std::cos(bin * bin_width);
        const double sa = std::sin(bin * bin_width);
        const int cu = static_cast<int>(kp.u);
        const int cv = static_cast<int>(kp.v);
        Feature f;
        f.kp = kp;
        for (int i = 0; i < kDescriptorBits; ++i) {
            const int* p = &detail::kPattern[i * 4];
            const int u1 = cu + static_cast<int>(std::lround(ca * p[0] - sa * p[1]));
            const int v1 = cv + static_cast<int>(std::lround(sa * p[0] + ca * p[1]));
            const int u2 = cu + static_cast<int>(std::lround(ca * p[2] - sa * p[3]));
            const int v2 = cv + static_cast<int>(std::lround(sa * p[2] + ca * p[3]));
            if (sample(u1, v1) < sample(u2, v2)) f.desc.set_bit(i);
        }
        double mx, my;
        pixel_to_metric(img, kp.u, kp.v, mx, my);
        f.mx = static_cast<float>(mx);
        f.my = static_cast<float>(my);
        out.push_back(f);
    }
    return out;
}

// Mutual nearest neighbours under the Hamming metric, distance capped at
// max_hamming. Nearest-neighbour ties resolve to the smaller index, so the
// result is symmetric in its arguments and one-to-one.
inline CorrespondenceSet match_descriptors(const FeatureSet& fa, const FeatureSet& fb,
                                           int max_hamming) {
    CorrespondenceSet out;
    if (fa.empty() || fb.empty()) return out;
    const int na = static_cast<int>(fa.size());
    const int nb = static_cast<int>(fb.size());
    std::vector<int> best_b(static_cast<std::size_t>(na), -1);
    std::vector<int> best_b_dist(static_cast<std::size_t>(na), kDescriptorBits + 1);
    std::vector<int> best_a(static_cast<std::size_t>(nb), -1);
    std::vector<int> best_a_dist(static_cast<std::size_t>(nb), kDescriptorBits + 1);
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            const int d = hamming(fa[static_cast<std::size_t>(i)].desc,
                                  fb[static_cast<std::size_t>(j)].desc);
            if (d < best_b_dist[static_cast<std::size_t>(i)]) {
                best_b_dist[static_cast<std::size_t>(i)] = d;
                best_b[static_cast<std::size_t>(i)] = j;
            }
            if (d < best_a_dist[static_cast<std::size_t>(j)]) {
                best_a_dist[static_cast<std::size_t>(j)] = d;
                best_a[static_cast<std::size_t>(j)] = i;
            }
        }
    }
    for (int i = 0; i < na; ++i) {
        const int j = best_b[static_cast<std::size_t>(i)];
        if (j < 0) continue;
        if (best_a[static_cast<std::size_t>(j)] != i) continue;
        const int d = best_b_dist[static_cast<std::size_t>(i)];
        if (d > max_hamming) continue;
        out.push_back({i, j, d});
    }
    return out;
}

}  // namespace tomo::features
