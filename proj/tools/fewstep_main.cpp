// Experiment runner: seeded, config-driven runs of the toy training /
// sampling studies and the tiling / fusion demos. Every run writes a
// manifest.json that can be fed back through --config to replay it.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fewstep/experiments.hpp"
#include "fewstep/io.hpp"
#include "fewstep/mmd.hpp"

namespace fs = std::filesystem;
using fewstep::format_double;
using nlohmann::json;

namespace {

// Accepts either a plain config file or a previously written manifest (the
// manifest embeds the resolved config under "config").
json load_config(const std::string& path) {
    json j = fewstep::read_json(path);
    if (j.contains("subcommand") && j.contains("config")) return j.at("config");
    return j;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int steps = 0;
    bool steps_set = false;
    std::string variant;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_variant) {
    cmd->add_option("--config", f.config_path, "JSON config file (or a manifest to replay)");
    cmd->add_option("--out", f.out_dir, "output directory")->required();
    cmd->add_option("--seed", f.seed, "run seed")->each([&f](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--steps", f.steps, "step count override")->each([&f](const std::string&) {
        f.steps_set = true;
    });
    if (with_variant) {
        cmd->add_option("--variant", f.variant,
                        "training recipe: baseline, shortcut-uniform, shortcut-nonuniform");
    }
}

json base_config(const CommonFlags& f) {
    return f.config_path.empty() ? json::object() : load_config(f.config_path);
}

void write_manifest(const std::string& out_dir, const std::string& subcommand, const json& config,
                    std::uint64_t seed, const json& extra) {
    json manifest{{"subcommand", subcommand},
                  {"version", fewstep::kVersionString},
                  {"seed", seed},
                  {"config", config}};
    for (const auto& [key, value] : extra.items()) manifest[key] = value;
    fewstep::write_json(out_dir + "/manifest.json", manifest);
}

// ---------------------------------------------------------------------------

int cmd_train_toy(const CommonFlags& f) {
    json j = base_config(f);
    if (!f.variant.empty()) j["variant"] = f.variant;
    if (f.seed_set) j["seed"] = f.seed;
    if (f.steps_set) j["train"]["total_steps"] = f.steps;

    const fewstep::ToyRunConfig cfg = fewstep::toy_config_from_json(j);
    const fewstep::TrainedToy run = fewstep::train_toy(cfg);
    fewstep::write_train_outputs(f.out_dir, run);
    std::printf("train-toy: %s seed=%llu steps=%d flow=%s sc=%s (%.1fs)\n",
                fewstep::variant_name(cfg.variant).c_str(),
                static_cast<unsigned long long>(cfg.seed), cfg.train.total_steps,
                format_double(fewstep::trailing_loss(run.report, 'f', 50)).c_str(),
                format_double(fewstep::trailing_loss(run.report, 's', 50)).c_str(),
                run.report.wall_seconds);
    return 0;
}

int cmd_ablate(const CommonFlags& f) {
    if (f.config_path.empty()) {
        throw CLI::ValidationError("--config", "ablate-shortcut needs a config listing parameter files");
    }
    json cfg = base_config(f);
    if (f.seed_set) cfg["eval_seed"] = f.seed;
    if (f.steps_set) cfg["steps"] = json::array({f.steps});

    fewstep::AblationSettings settings;
    settings.step_counts = cfg.value("steps", settings.step_counts);
    settings.n_samples = cfg.value("n_samples", settings.n_samples);
    settings.eval_seed = cfg.value("eval_seed", settings.eval_seed);

    std::vector<fewstep::AblationEntry> entries;
    for (const json& e : cfg.at("entries")) {
        const std::string path = e.at("params").get<std::string>();
        json descriptor;
        fewstep::AblationEntry entry;
        try {
            entry.params = fewstep::read_params(path, &descriptor);
        } catch (const std::exception& ex) {
            throw std::runtime_error("ablate-shortcut: parameter file '" + path +
                                     "' unusable: " + ex.what());
        }
        entry.config = fewstep::toy_config_from_json(descriptor);
        entry.label = e.value("label", fewstep::variant_name(entry.config.variant));
        entries.push_back(std::move(entry));
    }

    const auto rows = fewstep::run_ablation(entries, settings);

    fs::create_directories(f.out_dir);
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.variant, std::to_string(r.steps), format_double(r.mmd)});
    }
    fewstep::write_csv_text(f.out_dir + "/metrics.csv", {"variant", "steps", "mmd"}, cells);
    write_manifest(f.out_dir, "ablate-shortcut", cfg, settings.eval_seed,
                   json{{"outputs", {{"metrics", "metrics.csv"}}}, {"rows", rows.size()}});
    for (const auto& r : rows) {
        std::printf("ablate: %-20s steps=%-2d mmd=%s\n", r.variant.c_str(), r.steps,
                    format_double(r.mmd).c_str());
    }
    return 0;
}

int cmd_tile_demo(const CommonFlags& f) {
    json cfg = base_config(f);
    if (f.seed_set) cfg["seed"] = f.seed;
    if (f.steps_set) cfg["n_steps"] = f.steps;

    fewstep::TileDemoConfig demo;
    demo.extent_h = cfg.value("extent_h", demo.extent_h);
    demo.extent_w = cfg.value("extent_w", demo.extent_w);
    demo.channels = cfg.value("channels", demo.channels);
    demo.tile = cfg.value("tile", demo.tile);
    demo.min_overlap = cfg.value("min_overlap", demo.min_overlap);
    demo.sigma = cfg.value("sigma", demo.sigma);
    demo.n_steps = cfg.value("n_steps", demo.n_steps);
    demo.seed = cfg.value("seed", demo.seed);
    const std::string mode = cfg.value("noise_mode", std::string("shared_tile"));
    if (mode == "shared_tile") {
        demo.noise_mode = fewstep::NoiseMode::shared_tile;
    } else if (mode == "cropped_field") {
        demo.noise_mode = fewstep::NoiseMode::cropped_field;
    } else {
        throw std::runtime_error("tile-demo: unknown noise_mode '" + mode + "'");
    }

    const fewstep::TileDemoResult result = fewstep::run_tile_demo(demo);

    fs::create_directories(f.out_dir);
    json tiles = json::array();
    for (const auto& rect : result.plan.tiles) {
        tiles.push_back({{"y", rect.y}, {"x", rect.x}, {"h", rect.h}, {"w", rect.w}});
    }
    fewstep::write_json(f.out_dir + "/plan.json",
                        json{{"tiles", tiles},
                             {"extent", {result.plan.extent_h, result.plan.extent_w}},
                             {"tile", {result.plan.tile_h, result.plan.tile_w}}});
    fewstep::write_tensor(f.out_dir + "/fused.bin", result.tiled);
    fewstep::write_csv(f.out_dir + "/metrics.csv", {"n_tiles", "n_steps", "max_abs_diff"},
                       {{static_cast<double>(result.plan.tiles.size()),
                         static_cast<double>(demo.n_steps), result.max_abs_diff}});
    write_manifest(f.out_dir, "tile-demo", cfg, demo.seed,
                   json{{"outputs",
                         {{"plan", "plan.json"}, {"fused", "fused.bin"}, {"metrics", "metrics.csv"}}},
                        {"max_abs_diff", result.max_abs_diff}});
    std::printf("tile-demo: %zu tiles, max |tiled - untiled| = %s\n", result.plan.tiles.size(),
                format_double(result.max_abs_diff).c_str());
    return 0;
}

int cmd_fuse_demo(const CommonFlags& f) {
    json cfg = base_config(f);
    if (f.seed_set) cfg["seed"] = f.seed;

    fewstep::FuseDemoConfig demo;
    demo.frames = cfg.value("frames", demo.frames);
    demo.segment_length = cfg.value("segment_length", demo.segment_length);
    demo.height = cfg.value("height", demo.height);
    demo.width = cfg.value("width", demo.width);
    demo.channels = cfg.value("channels", demo.channels);
    demo.codec.spatial_factor = cfg.value("spatial_factor", demo.codec.spatial_factor);
    demo.codec.channel_expand = cfg.value("channel_expand", demo.codec.channel_expand);
    demo.seed = cfg.value("seed", demo.seed);
    const std::string merge = cfg.value("merge", std::string("linear_ramp"));
    if (merge == "linear_ramp") {
        demo.merge = fewstep::OverlapMerge::linear_ramp;
    } else if (merge == "plain_average") {
        demo.merge = fewstep::OverlapMerge::plain_average;
    } else {
        throw std::runtime_error("fuse-demo: unknown merge '" + merge + "'");
    }

    const fewstep::FuseDemoResult result = fewstep::run_fuse_demo(demo);

    fs::create_directories(f.out_dir);
    fewstep::write_tensor(f.out_dir + "/fused.bin", result.report.fused);
    std::vector<std::vector<double>> coverage;
    for (std::size_t pos = 0; pos < result.report.contributors.size(); ++pos) {
        for (const auto& c : result.report.contributors[pos]) {
            coverage.push_back({static_cast<double>(pos), static_cast<double>(c.segment),
                                static_cast<double>(c.source_position), c.weight});
        }
    }
    fewstep::write_csv(f.out_dir + "/coverage.csv",
                       {"position", "segment", "source_position", "weight"}, coverage);
    json starts = json::array();
    for (int s : result.plan.starts) starts.push_back(s);
    write_manifest(f.out_dir, "fuse-demo", cfg, demo.seed,
                   json{{"outputs", {{"fused", "fused.bin"}, {"coverage", "coverage.csv"}}},
                        {"segment_starts", starts},
                        {"max_abs_err", result.max_abs_err}});
    std::printf("fuse-demo: %zu segments over %d frames, max |fused - whole| = %s\n",
                result.plan.starts.size(), demo.frames, format_double(result.max_abs_err).c_str());
    return 0;
}

int cmd_sample(const CommonFlags& f) {
    if (f.config_path.empty()) {
        throw CLI::ValidationError("--config", "sample needs a config naming a parameter file");
    }
    json cfg = base_config(f);
    if (f.seed_set) cfg["seed"] = f.seed;
    if (f.steps_set) cfg["steps"] = f.steps;

    const std::string params_path = cfg.at("params").get<std::string>();
    json descriptor;
    const Eigen::VectorXd params = fewstep::read_params(params_path, &descriptor);
    const fewstep::ToyRunConfig run_cfg = fewstep::toy_config_from_json(descriptor);
    fewstep::ToyNet net(run_cfg.net);
    net.set_params(params);

    const int n_samples = cfg.value("n_samples", 4096);
    const int steps = cfg.value("steps", 4);
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{123});

    fewstep::Rng rng(seed);
    fewstep::Rng noise_rng = rng.fork(1);
    const Eigen::MatrixXd samples =
        fewstep::sample_with_recipe(net, run_cfg, steps, n_samples, noise_rng);

    fewstep::Rng data_rng = rng.fork(2);
    const auto mix = fewstep::GaussianMixture2D::two_modes();
    const Eigen::MatrixXd reference = fewstep::mixture_data_matrix(mix, n_samples, data_rng);
    const double mmd = fewstep::mmd_against_reference(samples, reference);

    fs::create_directories(f.out_dir);
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(samples.cols()));
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        rows.push_back({samples(0, i), samples(1, i)});
    }
    fewstep::write_csv(f.out_dir + "/samples.csv", {"x", "y"}, rows);
    fewstep::LatentTensor tensor(
        fewstep::Shape{1, 1, static_cast<int>(samples.cols()), static_cast<int>(samples.rows())});
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        for (Eigen::Index k = 0; k < samples.rows(); ++k) {
            tensor.at(0, 0, static_cast<int>(i), static_cast<int>(k)) = samples(k, i);
        }
    }
    fewstep::write_tensor(f.out_dir + "/samples.bin", tensor);
    write_manifest(f.out_dir, "sample", cfg, seed,
                   json{{"outputs", {{"samples", "samples.csv"}, {"tensor", "samples.bin"}}},
                        {"steps", steps},
                        {"mmd", mmd}});
    std::printf("sample: %d points, %d steps, mmd=%s\n", n_samples, steps,
                format_double(mmd).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-step latent sampling toolkit"};
    app.require_subcommand(1);

    CommonFlags train_f, ablate_f, tile_f, fuse_f, sample_f;
    add_common(app.add_subcommand("train-toy", "train a toy velocity model on the 2-D mixture"),
               train_f, true);
    add_common(app.add_subcommand("ablate-shortcut", "MMD across step counts for saved models"),
               ablate_f, false);
    add_common(app.add_subcommand("tile-demo", "tiled sampling vs. the untiled reference"),
               tile_f, false);
    add_common(app.add_subcommand("fuse-demo", "segment fusion vs. whole-clip encode"), fuse_f,
               false);
    add_common(app.add_subcommand("sample", "draw samples from a saved model"), sample_f, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("train-toy")) return cmd_train_toy(train_f);
        if (app.got_subcommand("ablate-shortcut")) return cmd_ablate(ablate_f);
        if (app.got_subcommand("tile-demo")) return cmd_tile_demo(tile_f);
        if (app.got_subcommand("fuse-demo")) return cmd_fuse_demo(fuse_f);
        if (app.got_subcommand("sample")) return cmd_sample(sample_f);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
