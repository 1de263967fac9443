// Command-line frontend: generate synthetic maps, inspect slices, match map
// pairs locally, run benchmarks, and exchange maps over TCP.
//
// Exit codes: 0 success, 2 no consensus, 3 input/transport error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomo/tomo.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoConsensus = 2;
constexpr int kExitInputError = 3;

tomo::PointCloud load_filtered(const std::string& path, double grid) {
    tomo::PointCloud cloud = tomo::io::load_cloud(path);
    if (cloud.empty()) throw tomo::EmptyCloud(path + ": no points");
    return tomo::voxel_filter(cloud, grid);
}

void write_json_output(const nlohmann::json& j, const std::string& out_path) {
    const std::string text = j.dump(2);
    if (out_path.empty() || out_path == "-") {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw tomo::IoError("cannot open " + out_path + " for writing");
    out << text << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"tomographic registration of gravity-aligned point-cloud maps"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a synthetic indoor point cloud");
    std::string gen_preset = "two_rooms";
    std::uint64_t gen_seed = 1;
    double gen_density = 1600.0;
    std::string gen_out;
    double gen_filter = 0.0;
    gen->add_option("--preset", gen_preset, "scene preset: two_rooms or room")
        ->check(CLI::IsMember({"two_rooms", "room"}));
    gen->add_option("--seed", gen_seed, "scene seed");
    gen->add_option("--density", gen_density, "surface sampling density, points per m^2");
    gen->add_option("--out", gen_out, "output file (.ply binary, otherwise ascii x y z)")
        ->required();
    gen->add_option("--filter", gen_filter, "voxel-filter the cloud at this leaf size");

    // ---- slice ----
    auto* slice = app.add_subcommand("slice", "export occupancy slices as PGM images");
    std::string slice_map_path, slice_out_dir;
    double slice_grid = 0.05;
    int slice_k = 1000;
    slice->add_option("--map", slice_map_path, "input cloud")->required();
    slice->add_option("--grid", slice_grid, "grid size g, meters");
    slice->add_option("--out-dir", slice_out_dir, "output directory")->required();
    slice->add_option("--k", slice_k, "max features per slice");

    // ---- match ----
    auto* match = app.add_subcommand("match", "register map D against map C locally");
    std::string match_c, match_d, match_out;
    tomo::consensus::MatchConfig mc;
    double match_t_xy = 0.0, match_inlier_threshold = 0.0;
    match->add_option("map_c", match_c, "target map (defines the output frame)")->required();
    match->add_option("map_d", match_d, "source map to be registered")->required();
    match->add_option("--grid", mc.grid, "grid size g, meters");
    match->add_option("--seed", mc.seed, "estimation seed");
    match->add_option("--k", mc.max_features, "max features per slice");
    match->add_option("--t-xy", match_t_xy, "consensus translation bound (default 2g)");
    match->add_option("--t-theta", mc.t_theta, "consensus yaw bound, radians");
    match->add_option("--min-cluster", mc.min_cluster, "minimum winning cluster size");
    match->add_option("--inlier-threshold", match_inlier_threshold,
                      "RANSAC inlier radius (default 2g)");
    match->add_option("--max-hamming", mc.max_hamming, "descriptor match distance cap");
    match->add_option("--threads", mc.threads, "worker threads");
    match->add_option("--out", match_out, "write the result JSON here instead of stdout");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "run the synthetic benchmark suite");
    std::string eval_config, eval_out_override;
    eval->add_option("--config", eval_config, "key = value config file");
    eval->add_option("--out", eval_out_override, "override the CSV output path");

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "serve a map for remote registration");
    std::string serve_bind = "0.0.0.0:7600", serve_map;
    double serve_grid = 0.05;
    tomo::consensus::MatchConfig serve_cfg;
    std::uint32_t serve_id = 1;
    bool serve_once = false;
    serve->add_option("--bind", serve_bind, "HOST:PORT to listen on");
    serve->add_option("--map", serve_map, "local map file")->required();
    serve->add_option("--grid", serve_grid, "grid size g, meters");
    serve->add_option("--seed", serve_cfg.seed, "estimation seed");
    serve->add_option("--k", serve_cfg.max_features, "max features per slice");
    serve->add_option("--id", serve_id, "agent id");
    serve->add_option("--threads", serve_cfg.threads, "worker threads");
    serve->add_flag("--once", serve_once, "exit after the first session");

    // ---- send ----
    auto* send = app.add_subcommand("send", "send a map to a serving peer");
    std::string send_peer, send_map_path;
    double send_grid = 0.05;
    double send_timeout = 300.0;
    std::uint32_t send_id = 2;
    int send_k = 1000;
    std::string send_out;
    send->add_option("--peer", send_peer, "HOST:PORT of the serving agent")->required();
    send->add_option("--map", send_map_path, "map file to send")->required();
    send->add_option("--grid", send_grid, "grid size g, meters");
    send->add_option("--k", send_k, "max features per slice");
    send->add_option("--id", send_id, "agent id");
    send->add_option("--timeout", send_timeout, "seconds to wait for the result");
    send->add_option("--out", send_out, "write the result JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    if (*gen) {
        tomo::synth::EnvironmentSpec spec = gen_preset == "room"
                                                ? tomo::synth::room_spec(gen_seed, gen_density)
                                                : tomo::synth::two_rooms_spec(gen_seed, gen_density);
        tomo::PointCloud cloud = tomo::synth::gen_environment(spec);
        if (gen_filter > 0.0) cloud = tomo::voxel_filter(cloud, gen_filter);
        tomo::io::save_cloud(cloud, gen_out);
        std::cerr << "wrote " << cloud.size() << " points to " << gen_out << "\n";
        return kExitOk;
    }

    if (*slice) {
        const tomo::PointCloud cloud = load_filtered(slice_map_path, slice_grid);
        tomo::slicing::SliceOptions opt;
        opt.max_features = slice_k;
        const tomo::slicing::SliceSet set = tomo::slicing::slice_map(cloud, slice_grid, opt);
        std::filesystem::create_directories(slice_out_dir);
        nlohmann::json index = nlohmann::json::array();
        for (std::size_t i = 0; i < set.entries.size(); ++i) {
            const auto& e = set.entries[i];
            char name[32];
            std::snprintf(name, sizeof(name), "slice_%04zu.pgm", i);
            tomo::write_pgm(e.image, slice_out_dir + "/" + name);
            index.push_back({{"file", name},
                             {"height", e.height},
                             {"origin", {e.image.origin_x, e.image.origin_y}},
                             {"dims", {e.image.width, e.image.height}},
                             {"pixel_size", e.image.pixel_size},
                             {"features", e.features.size()}});
        }
        std::ofstream idx(slice_out_dir + "/slices.json");
        if (!idx) throw tomo::IoError("cannot write slice index");
        idx << index.dump(2) << "\n";
        std::cerr << "wrote " << set.entries.size() << " slices to " << slice_out_dir << "\n";
        return kExitOk;
    }

    if (*match) {
        if (match_t_xy > 0.0) mc.t_xy = match_t_xy;
        if (match_inlier_threshold > 0.0) mc.inlier_threshold = match_inlier_threshold;
        const tomo::PointCloud cloud_c = load_filtered(match_c, mc.grid);
        const tomo::PointCloud cloud_d = load_filtered(match_d, mc.grid);
        const tomo::consensus::MatchResult result = tomo::consensus::match_maps(cloud_c, cloud_d, mc);
        write_json_output(result.to_json(true), match_out);
        return kExitOk;
    }

    if (*eval) {
        tomo::bench::BenchConfig cfg =
            eval_config.empty() ? tomo::bench::BenchConfig{} : tomo::bench::load_config(eval_config);
        tomo::bench::apply_env_overrides(cfg);
        if (!eval_out_override.empty()) cfg.out = eval_out_override;
        const auto records = tomo::bench::run_benchmark(cfg);
        std::ofstream out(cfg.out);
        if (!out) throw tomo::IoError("cannot open " + cfg.out + " for writing");
        tomo::bench::write_csv(records, cfg, out);
        int successes = 0;
        for (const auto& r : records) successes += r.success ? 1 : 0;
        std::cerr << "pairs: " << records.size() << ", successes: " << successes << " ("
                  << (100.0 * successes / static_cast<double>(records.size())) << "%), csv: "
                  << cfg.out << "\n";
        return kExitOk;
    }

    if (*serve) {
        const tomo::net::Endpoint ep = tomo::net::parse_endpoint(serve_bind);
        serve_cfg.grid = serve_grid;
        const tomo::PointCloud cloud = load_filtered(serve_map, serve_grid);
        tomo::slicing::SliceOptions opt;
        opt.max_features = serve_cfg.max_features;
        opt.threads = serve_cfg.threads;
        tomo::slicing::SliceSet set = tomo::slicing::slice_map(cloud, serve_grid, opt);
        tomo::net::Server server(std::move(set), serve_cfg, serve_id);
        server.bind(ep.host, ep.port);
        std::cerr << "serving " << serve_map << " on " << ep.host << ":" << server.port() << "\n";
        server.run(serve_once);
        return kExitOk;
    }

    if (*send) {
        const tomo::net::Endpoint ep = tomo::net::parse_endpoint(send_peer);
        const tomo::PointCloud cloud = load_filtered(send_map_path, send_grid);
        tomo::slicing::SliceOptions opt;
        opt.max_features = send_k;
        const tomo::slicing::SliceSet set = tomo::slicing::slice_map(cloud, send_grid, opt);
        const tomo::net::RemoteMatch result = tomo::net::send_map(ep, set, send_id, send_timeout);
        write_json_output(nlohmann::json::parse(result.result_json), send_out);
        return kExitOk;
    }

    return kExitInputError;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tomo::NoConsensus& e) {
        std::cerr << "no consensus: " << e.what() << "\n";
        return kExitNoConsensus;
    } catch (const tomo::RemoteError& e) {
        std::cerr << "remote error: " << e.what() << "\n";
        const std::string what = e.what();
        return what.rfind("no-consensus", 0) == 0 ? kExitNoConsensus : kExitInputError;
    } catch (const tomo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}
