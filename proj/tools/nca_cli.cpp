// Command-line front end: train a model, simulate it under the hardware
// constraints, run the scale-robustness experiments, and export weights.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "nca/quantize.hpp"
#include "nca/shapes.hpp"
#include "nca/sim.hpp"
#include "nca/train.hpp"

namespace {

using namespace nca;

std::vector<ShapeGrid> catalog_by_name(const std::string& name) {
    if (name == "canonical") return canonical_shapes();
    if (name == "scaled_down") return scaled_down_shapes();
    if (name == "scaled_up") return scaled_up_shapes();
    throw CLI::ValidationError("unknown catalog '" + name +
                               "' (valid: canonical, scaled_down, scaled_up)");
}

// Shape references: canonical:<d>, down:<d>, up:<d>, or a shape file path.
ShapeGrid resolve_shape(const std::string& ref) {
    auto colon = ref.find(':');
    if (colon != std::string::npos) {
        std::string cat = ref.substr(0, colon);
        std::string digit = ref.substr(colon + 1);
        std::vector<ShapeGrid> shapes;
        if (cat == "canonical")
            shapes = canonical_shapes();
        else if (cat == "down")
            shapes = scaled_down_shapes();
        else if (cat == "up")
            shapes = scaled_up_shapes();
        else
            throw CLI::ValidationError("unknown shape catalog '" + cat +
                                       "' (valid: canonical:<d>, down:<d>, up:<d>)");
        int label = -1;
        try {
            label = std::stoi(digit);
        } catch (const std::exception&) {
        }
        for (auto& s : shapes)
            if (s.label == label) return s;
        throw CLI::ValidationError("no shape '" + digit + "' in catalog '" + cat + "'");
    }
    return load_shape_file(ref);
}

RunReport run_mode(const std::string& mode, const ShapeGrid& shape, const ModelParams& params,
                   const Quantizer& q, const SimClockConfig& clock, int max_updates,
                   std::uint64_t seed) {
    if (mode == "sync") return sync_run(shape, params, max_updates);
    if (mode == "listing1") return listing1_validate(shape, params, max_updates, seed);
    if (mode == "firmware") return firmware_run(shape, params, q, clock, seed);
    throw CLI::ValidationError("unknown mode '" + mode + "' (valid: sync, listing1, firmware)");
}

double median(std::vector<int> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n == 0) return 0.0;
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

int cmd_train(std::uint64_t seed, int iterations, const std::string& out_path, int threads,
              bool clip, bool quiet) {
    TrainConfig config;
    config.rng_seed = seed;
    config.iterations = iterations;
    config.threads = threads;
    config.clip_gradients = clip;
    config.log_progress = !quiet;
    auto shapes = canonical_shapes();
    auto [params, report] = train(config, shapes);

    Quantizer q{-1.0, 1.0};
    try {
        q = calibrate(params, shapes);
    } catch (const CalibrationError&) {
        // untrained identity model has a degenerate state range; keep default
    }
    save_weights(params, q, out_path);

    int classified = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        std::printf("shape %d accuracy %.3f\n", shapes[i].label, report.final_accuracy[i]);
        if (report.final_accuracy[i] == 1.0) ++classified;
    }
    std::printf("classified %d/%zu shapes, %.1fs, weights -> %s\n", classified, shapes.size(),
                report.wall_seconds, out_path.c_str());
    return 0;
}

int cmd_simulate(const std::string& weights_path, const std::string& shape_ref,
                 const std::string& mode, std::uint64_t seed, int max_updates,
                 const SimClockConfig& clock) {
    auto [params, q] = load_weights(weights_path);
    ShapeGrid shape = resolve_shape(shape_ref);
    RunReport report = run_mode(mode, shape, params, q, clock, max_updates, seed);
    std::cout << export_report(report);
    std::cout << render_trace(report);
    if (report.convergence_update)
        std::cout << "converged at update " << *report.convergence_update << "\n";
    else
        std::cout << "did not converge\n";
    return 0;
}

int cmd_experiment(const std::string& name, std::string mode, const std::string& weights_path,
                   std::vector<std::uint64_t> seeds, int max_updates,
                   const SimClockConfig& clock) {
    if (mode.empty()) mode = (name == "scaled_up") ? "listing1" : "firmware";
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
    auto [params, q] = load_weights(weights_path);
    auto shapes = catalog_by_name(name);

    int successes = 0, total = 0;
    std::vector<int> convergences;
    for (const auto& shape : shapes) {
        for (std::uint64_t seed : seeds) {
            RunReport report = run_mode(mode, shape, params, q, clock, max_updates, seed);
            ++total;
            if (report.convergence_update) {
                ++successes;
                convergences.push_back(*report.convergence_update);
                std::printf("shape %d seed %llu converged %d\n", shape.label,
                            static_cast<unsigned long long>(seed), *report.convergence_update);
            } else {
                std::printf("shape %d seed %llu FAIL\n", shape.label,
                            static_cast<unsigned long long>(seed));
            }
        }
    }
    std::printf("%s/%s: %d/%d runs succeeded, median convergence %.1f\n", name.c_str(),
                mode.c_str(), successes, total, median(convergences));
    return successes == total ? 0 : 1;
}

int cmd_export(const std::string& weights_path, const std::string& out_path) {
    auto [params, q] = load_weights(weights_path);
    std::string text = export_firmware_array(params, q);
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write: " + out_path);
        out << text;
    }
    return 0;
}

int cmd_render(const std::string& shape_ref) {
    ShapeGrid shape = resolve_shape(shape_ref);
    std::printf("label %d (%dx%d, %d cells)\n", shape.label, shape.width, shape.height,
                shape.active_count());
    std::cout << render_shape(shape);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-classifying tile NCA toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int iterations = 2500;
    int max_updates = 30;
    int threads = 0;
    bool clip = false;
    bool quiet = false;
    std::string out_path, weights_path, shape_ref, mode, name;
    std::vector<std::uint64_t> seeds;
    nca::SimClockConfig clock;

    auto* train_cmd = app.add_subcommand("train", "train on the canonical shapes");
    train_cmd->add_option("--seed", seed, "training RNG seed");
    train_cmd->add_option("--iterations", iterations, "training iterations");
    train_cmd->add_option("--out", out_path, "output weight file")->required();
    train_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    train_cmd->add_flag("--clip", clip, "clip gradients at global norm 1.0");
    train_cmd->add_flag("--quiet", quiet, "suppress per-iteration log lines");

    auto* sim_cmd = app.add_subcommand("simulate", "run one shape through a simulation mode");
    sim_cmd->add_option("weights", weights_path, "weight file")->required();
    sim_cmd->add_option("shape", shape_ref, "canonical:<d>, down:<d>, up:<d>, or file")->required();
    sim_cmd->add_option("mode", mode, "sync, listing1, or firmware")->required();
    sim_cmd->add_option("--seed", seed, "simulation RNG seed");
    sim_cmd->add_option("--max-updates", max_updates, "update cap");
    sim_cmd->add_option("--timeout-ms", clock.update_timeout_ms, "firmware update period");
    sim_cmd->add_option("--loss-rate", clock.message_loss_rate, "message loss probability");

    auto* exp_cmd = app.add_subcommand("experiment", "run a catalog across seeds");
    exp_cmd->add_option("name", name, "canonical, scaled_down, or scaled_up")->required();
    exp_cmd->add_option("weights", weights_path, "weight file")->required();
    exp_cmd->add_option("--mode", mode, "sync, listing1, or firmware");
    exp_cmd->add_option("--seeds", seeds, "seed list (default 1 2 3 4 5)");
    exp_cmd->add_option("--max-updates", max_updates, "update cap");
    exp_cmd->add_option("--timeout-ms", clock.update_timeout_ms, "firmware update period");
    exp_cmd->add_option("--loss-rate", clock.message_loss_rate, "message loss probability");

    auto* export_cmd = app.add_subcommand("export", "emit the firmware constant arrays");
    export_cmd->add_option("weights", weights_path, "weight file")->required();
    export_cmd->add_option("--out", out_path, "output path (default stdout)");

    auto* render_cmd = app.add_subcommand("render", "print a shape's mask");
    render_cmd->add_option("shape", shape_ref, "shape reference")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(seed, iterations, out_path, threads, clip, quiet);
        if (sim_cmd->parsed())
            return cmd_simulate(weights_path, shape_ref, mode, seed, max_updates, clock);
        if (exp_cmd->parsed())
            return cmd_experiment(name, mode, weights_path, seeds, max_updates, clock);
        if (export_cmd->parsed()) return cmd_export(weights_path, out_path);
        if (render_cmd->parsed()) return cmd_render(shape_ref);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
