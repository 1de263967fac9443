#pragma once

// Benchmark harness: seeded synthetic pairs, end-to-end matching, error
// metrics and a versioned CSV report.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/consensus.hpp"
#include "tomo/core.hpp"
#include "tomo/synth.hpp"
#include "tomo/tomography.hpp"
#include "tomo/wire.hpp"

namespace tomo::bench {

// Success thresholds: translation within 5 grid cells, yaw within 10 degrees.
inline constexpr double kSuccessDtGridFactor = 5.0;
inline constexpr double kSuccessDrRadians = 0.1745;

struct BenchConfig {
    int pairs = 20;
    std::string environment = "two_rooms";  // or "room"
    double density = 1600.0;
    double grid = 0.05;
    std::string noise = "none";  // none | 0.02 | 0.05
    std::uint64_t seed = 1;
    double overlap_min = 0.6;
    double overlap_max = 0.9;
    int z_shift_max_cells = 20;
    double xy_max = 5.0;
    int max_features = 1000;
    int max_hamming = 40;
    unsigned threads = 1;
    bool timings = true;  // off: wall-time columns written as 0 for byte-stable output
    std::string out = "benchmark.csv";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw InvalidConfig("config: key '" + key + "' expects on/off, got '" + v + "'");
}

}  // namespace detail

// Applies one "key = value" assignment. Unknown keys are rejected.
inline void apply_config_entry(BenchConfig& cfg, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "pairs") {
            cfg.pairs = std::stoi(value);
        } else if (key == "environment") {
            if (value != "two_rooms" && value != "room") {
                throw InvalidConfig("config: unknown environment '" + value + "'");
            }
            cfg.environment = value;
        } else if (key == "density") {
            cfg.density = std::stod(value);
        } else if (key == "grid") {
            cfg.grid = std::stod(value);
        } else if (key == "noise") {
            synth::noise_preset(value);  // validates the name
            cfg.noise = value;
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "overlap_min") {
            cfg.overlap_min = std::stod(value);
        } else if (key == "overlap_max") {
            cfg.overlap_max = std::stod(value);
        } else if (key == "z_shift_max_cells") {
            cfg.z_shift_max_cells = std::stoi(value);
        } else if (key == "xy_max") {
            cfg.xy_max = std::stod(value);
        } else if (key == "max_features") {
            cfg.max_features = std::stoi(value);
        } else if (key == "max_hamming") {
            cfg.max_hamming = std::stoi(value);
        } else if (key == "threads") {
            cfg.threads = static_cast<unsigned>(std::stoul(value));
        } else if (key == "timings") {
            cfg.timings = detail::parse_bool(value, key);
        } else if (key == "out") {
            cfg.out = value;
        } else {
            throw InvalidConfig("config: unknown key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw InvalidConfig("config: bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw InvalidConfig("config: value out of range for key '" + key + "'");
    }
}

// Key-value config: one "key = value" per line, '#' starts a comment.
inline BenchConfig parse_config(std::istream& in) {
    BenchConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_config_entry(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    return cfg;
}

inline BenchConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return parse_config(in);
}

// Environment variables TOMO_<KEY> override file values, e.g. TOMO_GRID,
// TOMO_PAIRS, TOMO_TIMINGS.
inline void apply_env_overrides(BenchConfig& cfg) {
    static const char* keys[] = {"pairs",      "environment", "density",     "grid",
                                 "noise",      "seed",        "overlap_min", "overlap_max",
                                 "z_shift_max_cells", "xy_max", "max_features", "max_hamming",
                                 "threads",    "timings",     "out"};
    for (const char* key : keys) {
        std::string env_name = "TOMO_";
        for (const char* p = key; *p; ++p) {
            env_name.push_back(static_cast<char>(std::toupper(*p)));
        }
        if (const char* v = std::getenv(env_name.c_str())) {
            apply_config_entry(cfg, key, v);
        }
    }
}

struct BenchmarkRecord {
    int pair_id = 0;
    std::uint64_t env_seed = 0;
    std::string noise;
    double overlap_requested = 0.0;
    double overlap_measured = 0.0;
    double grid = 0.0;
    std::size_t points_c = 0;
    std::size_t points_d = 0;
    bool no_consensus = false;
    synth::RegistrationError error;
    bool success = false;
    int consensus_size = 0;
    double z_offset = 0.0;
    std::size_t payload_bytes = 0;
    std::size_t raw_cloud_bytes = 0;   // sender map as packed float32 xyz
    std::size_t sliceset_bytes = 0;    // live slice sets, both maps
    double filter_s = 0.0;
    double slice_s = 0.0;
    double correlate_s = 0.0;
    double total_s = 0.0;
};

// One seeded benchmark pair, end to end. Timed stages mirror match_maps;
// the slice sets are kept so payload and memory proxies can be measured.
// Everything a benchmark pair feeds into the matcher, reproducible from the
// config seed and pair id alone.
struct PairInputs {
    PointCloud map_c;
    PointCloud map_d;
    Transform4DoF truth;
    double overlap_requested = 0.0;
    double overlap_measured = 0.0;
    std::uint64_t pair_seed = 0;
};

inline PairInputs build_pair_inputs(const BenchConfig& cfg, int pair_id) {
    PairInputs out;
    out.pair_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(pair_id));
    Rng rng(mix_seed(out.pair_seed, 0x01));

    const synth::EnvironmentSpec env =
        cfg.environment == "room" ? synth::room_spec(out.pair_seed, cfg.density)
                                  : synth::two_rooms_spec(out.pair_seed, cfg.density);
    // The crops stay at raw sensor density; each agent's map is grid-filtered
    // by the matching pipeline itself, the same way a live map would be.
    const PointCloud raw = synth::gen_environment(env);

    const double theta = rng.next_angle();
    const double tx = rng.next_double(-cfg.xy_max, cfg.xy_max);
    const double ty = rng.next_double(-cfg.xy_max, cfg.xy_max);
    const auto z_cells = rng.next_int(-cfg.z_shift_max_cells, cfg.z_shift_max_cells);
    out.truth = Transform4DoF(tx, ty, static_cast<double>(z_cells) * cfg.grid, theta);

    out.overlap_requested = rng.next_double(cfg.overlap_min, cfg.overlap_max);
    synth::MapPair pair =
        synth::make_pair(raw, out.truth, out.overlap_requested,
                         mix_seed(out.pair_seed, 0x02), cfg.grid);
    out.overlap_measured = pair.measured_overlap;

    const synth::NoiseSpec noise_c =
        synth::noise_preset(cfg.noise, mix_seed(out.pair_seed, 0x03));
    const synth::NoiseSpec noise_d =
        synth::noise_preset(cfg.noise, mix_seed(out.pair_seed, 0x04));
    out.map_c = synth::add_noise(pair.map_c, noise_c);
    out.map_d = synth::add_noise(pair.map_d, noise_d);
    return out;
}

inline BenchmarkRecord run_pair(const BenchConfig& cfg, int pair_id) {
    using clock = std::chrono::steady_clock;
    BenchmarkRecord rec;
    rec.pair_id = pair_id;
    rec.noise = cfg.noise;
    rec.grid = cfg.grid;

    PairInputs in = build_pair_inputs(cfg, pair_id);
    const std::uint64_t pair_seed = in.pair_seed;
    rec.env_seed = pair_seed;
    rec.overlap_requested = in.overlap_requested;
    rec.overlap_measured = in.overlap_measured;
    const Transform4DoF truth = in.truth;
    PointCloud map_c = std::move(in.map_c);
    PointCloud map_d = std::move(in.map_d);

    consensus::MatchConfig mc;
    mc.grid = cfg.grid;
    mc.max_features = cfg.max_features;
    mc.max_hamming = cfg.max_hamming;
    mc.seed = mix_seed(pair_seed, 0x05);
    mc.threads = cfg.threads;

    const auto t0 = clock::now();
    const PointCloud fc =
        (map_c.grid_size && *map_c.grid_size == cfg.grid) ? map_c : voxel_filter(map_c, cfg.grid);
    const PointCloud fd =
        (map_d.grid_size && *map_d.grid_size == cfg.grid) ? map_d : voxel_filter(map_d, cfg.grid);
    const auto t1 = clock::now();
    rec.points_c = fc.size();
    rec.points_d = fd.size();
    // What the sender would have shipped without slicing: its raw map as
    // three float32 per point.
    rec.raw_cloud_bytes = map_d.size() * 12;

    slicing::SliceOptions sopt;
    sopt.max_features = cfg.max_features;
    sopt.threads = cfg.threads;
    const slicing::SliceSet sc = slicing::slice_map(fc, cfg.grid, sopt);
    const slicing::SliceSet sd = slicing::slice_map(fd, cfg.grid, sopt);
    const auto t2 = clock::now();
    rec.sliceset_bytes = sc.byte_size() + sd.byte_size();
    rec.payload_bytes = wire::serialize_payload(sd, 0).size();

    try {
        const consensus::MatchResult result = consensus::correlate_heights(sc, sd, mc);
        rec.error = synth::compute_errors(result.transform, truth);
        rec.consensus_size = result.consensus_size;
        rec.z_offset = result.transform.z;
        rec.success = rec.error.dt <= kSuccessDtGridFactor * cfg.grid &&
                      rec.error.dr <= kSuccessDrRadians;
    } catch (const NoConsensus&) {
        rec.no_consensus = true;
        rec.error.dt = rec.error.dt_xy = rec.error.dr =
            std::numeric_limits<double>::quiet_NaN();
    }
    const auto t3 = clock::now();
    rec.filter_s = std::chrono::duration<double>(t1 - t0).count();
    rec.slice_s = std::chrono::duration<double>(t2 - t1).count();
    rec.correlate_s = std::chrono::duration<double>(t3 - t2).count();
    rec.total_s = std::chrono::duration<double>(t3 - t0).count();
    return rec;
}

inline std::vector<BenchmarkRecord> run_benchmark(const BenchConfig& cfg) {
    if (cfg.pairs < 0) throw InvalidConfig("config: pairs must not be negative");
    if (!(cfg.grid > 0.0)) throw NonPositiveGrid("config: grid must be positive");
    if (cfg.environment != "two_rooms" && cfg.environment != "room") {
        throw InvalidConfig("config: unknown environment '" + cfg.environment + "'");
    }
    synth::noise_preset(cfg.noise);  // rejects unknown preset names early
    if (!(cfg.overlap_min > 0.0) || cfg.overlap_max > 1.0 || cfg.overlap_min > cfg.overlap_max) {
        throw InvalidConfig("config: overlap range must satisfy 0 < min <= max <= 1");
    }
    std::vector<BenchmarkRecord> records(static_cast<std::size_t>(cfg.pairs));
    for (int i = 0; i < cfg.pairs; ++i) {
        records[static_cast<std::size_t>(i)] = run_pair(cfg, i);
    }
    return records;
}

// CSV schema v1. With cfg.timings off the wall-time columns are written as
// zeros, making the file byte-stable across runs and thread counts.
inline void write_csv(const std::vector<BenchmarkRecord>& records, const BenchConfig& cfg,
                      std::ostream& out) {
    out << "# tomomap benchmark csv v1\n";
    out << "# timings=" << (cfg.timings ? "on" : "off") << " grid=";
    char num[64];
    std::snprintf(num, sizeof(num), "%.9g", cfg.grid);
    out << num << " noise=" << cfg.noise << " seed=" << cfg.seed << "\n";
    out << "pair_id,env_seed,noise,overlap_requested,overlap_measured,grid,points_c,points_d,"
           "dt,dt_xy,dr,success,consensus_size,z_offset,payload_bytes,raw_cloud_bytes,"
           "sliceset_bytes,filter_s,slice_s,correlate_s,total_s\n";
    for (const BenchmarkRecord& r : records) {
        char line[640];
        const double filter_s = cfg.timings ? r.filter_s : 0.0;
        const double slice_s = cfg.timings ? r.slice_s : 0.0;
        const double correlate_s = cfg.timings ? r.correlate_s : 0.0;
        const double total_s = cfg.timings ? r.total_s : 0.0;
        std::snprintf(line, sizeof(line),
                      "%d,%llu,%s,%.9g,%.9g,%.9g,%zu,%zu,%.9g,%.9g,%.9g,%d,%d,%.9g,%zu,%zu,%zu,"
                      "%.6f,%.6f,%.6f,%.6f\n",
                      r.pair_id, static_cast<unsigned long long>(r.env_seed), r.noise.c_str(),
                      r.overlap_requested, r.overlap_measured, r.grid, r.points_c, r.points_d,
                      r.error.dt, r.error.dt_xy, r.error.dr, r.success ? 1 : 0,
                      r.consensus_size, r.z_offset, r.payload_bytes, r.raw_cloud_bytes,
                      r.sliceset_bytes, filter_s, slice_s, correlate_s, total_s);
        out << line;
    }
}

inline std::string csv_string(const std::vector<BenchmarkRecord>& records,
                              const BenchConfig& cfg) {
    std::ostringstream ss;
    write_csv(records, cfg, ss);
    return ss.str();
}

}  // namespace tomo::bench
