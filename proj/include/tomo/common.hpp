#pragma once

// Shared error types, angle helpers, deterministic RNG and a small
// thread-pool-free parallel_for used across the library.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tomo {

inline constexpr double kPi = 3.14159265358979323846;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define TOMO_ERROR_TYPE(Name)                                                 \
    struct Name : Error {                                                     \
        using Error::Error;                                                   \
    }

TOMO_ERROR_TYPE(NonPositiveGrid);
TOMO_ERROR_TYPE(EmptyCloud);
TOMO_ERROR_TYPE(IoError);
TOMO_ERROR_TYPE(ParseError);
TOMO_ERROR_TYPE(NonFiniteCoordinate);
TOMO_ERROR_TYPE(EmptySlice);
TOMO_ERROR_TYPE(OutOfBounds);
TOMO_ERROR_TYPE(DegenerateConfiguration);
TOMO_ERROR_TYPE(InsufficientData);
TOMO_ERROR_TYPE(NoConsensus);
TOMO_ERROR_TYPE(GridMismatch);
TOMO_ERROR_TYPE(EmptyHypotheses);
TOMO_ERROR_TYPE(InvalidSpec);
TOMO_ERROR_TYPE(OverlapInfeasible);
TOMO_ERROR_TYPE(InvalidConfig);
TOMO_ERROR_TYPE(VersionMismatch);
TOMO_ERROR_TYPE(TruncatedPayload);
TOMO_ERROR_TYPE(CorruptHeader);
TOMO_ERROR_TYPE(ConnectionFailed);
TOMO_ERROR_TYPE(RemoteError);
TOMO_ERROR_TYPE(Timeout);

#undef TOMO_ERROR_TYPE

// Wraps an angle to (-pi, pi]. remainder() lands in [-pi, pi]; the lone
// -pi endpoint is folded up so the interval is half-open as documented.
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

// Absolute angular distance, shortest way around the circle.
inline double angular_distance(double a, double b) {
    return std::abs(wrap_angle(a - b));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable combination of a seed with task indices. Used to derive
// independent per-task streams so parallel and serial runs agree.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
    return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + a));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

// Deterministic RNG. Only raw engine output is consumed: the standard pins
// mt19937_64 bit-exactly but not the <random> distributions, and identical
// draws across builds are part of the library's contract.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n). Modulo bias is below 2^-50 for any n that
    // occurs here (n < 2^13).
    std::uint64_t next_below(std::uint64_t n) { return engine_() % n; }

    // Uniform integer in [lo, hi], inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform angle in (-pi, pi].
    double next_angle() { return kPi - 2.0 * kPi * next_double(); }

    // Standard normal via Box-Muller; one spare value cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double next_gaussian(double sigma) { return sigma * next_gaussian(); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Runs fn(i) for i in [0, n). Tasks must be independent and write only to
// their own slots; the split is static so results never depend on timing.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    unsigned workers = threads == 0 ? hw : threads;
    if (workers > n) workers = static_cast<unsigned>(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Little-endian scalar encode/decode for file formats and the wire protocol.
namespace le {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline float get_f32(const std::uint8_t* p) {
    std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace le

}  // namespace tomo
