#pragma once

// Bit-packed binary occupancy image produced by slice rasterization.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tomo/common.hpp"

namespace tomo {

struct BinaryImage {
    int width = 0;
    int height = 0;
    double origin_x = 0.0;  // metric coordinate of pixel (0, 0)'s lower corner
    double origin_y = 0.0;
    double pixel_size = 0.0;
    std::vector<std::uint64_t> bits;  // row-major, 64 pixels per word

    BinaryImage() = default;
    BinaryImage(int w, int h, double ox, double oy, double px)
        : width(w),
          height(h),
          origin_x(ox),
          origin_y(oy),
          pixel_size(px),
          bits((static_cast<std::size_t>(w) * h + 63) / 64, 0) {}

    bool in_bounds(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }

    bool test(int u, int v) const {
        std::size_t i = static_cast<std::size_t>(v) * width + u;
        return (bits[i >> 6] >> (i & 63)) & 1u;
    }

    // Zero outside the image; descriptor and orientation sampling rely on it.
    bool test_padded(int u, int v) const { return in_bounds(u, v) && test(u, v); }

    void set(int u, int v) {
        std::size_t i = static_cast<std::size_t>(v) * width + u;
        bits[i >> 6] |= std::uint64_t{1} << (i & 63);
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint64_t w : bits) n += static_cast<std::size_t>(__builtin_popcountll(w));
        return n;
    }

    std::size_t byte_size() const { return sizeof(BinaryImage) + bits.size() * 8; }
};

// Metric coordinates of a pixel's center.
inline void pixel_to_metric(const BinaryImage& img, double u, double v, double& x, double& y) {
    if (u < 0.0 || v < 0.0 || u >= static_cast<double>(img.width) ||
        v >= static_cast<double>(img.height)) {
        throw OutOfBounds("pixel_to_metric: pixel outside image");
    }
    x = img.origin_x + (u + 0.5) * img.pixel_size;
    y = img.origin_y + (v + 0.5) * img.pixel_size;
}

// Debug export, binary PGM (P5): occupied pixels white, free black.
// Row 0 is written last so the image displays with +y up.
inline void write_pgm(const BinaryImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<char> row(static_cast<std::size_t>(img.width));
    for (int v = img.height - 1; v >= 0; --v) {
        for (int u = 0; u < img.width; ++u) {
            row[static_cast<std::size_t>(u)] = img.test(u, v) ? static_cast<char>(255) : 0;
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace tomo
