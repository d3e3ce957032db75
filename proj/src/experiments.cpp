#include "fewstep/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <utility>

#include "fewstep/conditioning.hpp"
#include "fewstep/mmd.hpp"

namespace fewstep {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Variants and config plumbing

std::string variant_name(ToyVariant v) {
    switch (v) {
        case ToyVariant::baseline: return "baseline";
        case ToyVariant::shortcut_uniform: return "shortcut-uniform";
        case ToyVariant::shortcut_nonuniform: return "shortcut-nonuniform";
    }
    throw std::logic_error("variant_name: unknown variant");
}

ToyVariant parse_variant(const std::string& name) {
    if (name == "baseline") return ToyVariant::baseline;
    if (name == "shortcut-uniform") return ToyVariant::shortcut_uniform;
    if (name == "shortcut-nonuniform" || name == "shortcut") return ToyVariant::shortcut_nonuniform;
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected baseline, shortcut-uniform, shortcut-nonuniform)");
}

ToyRunConfig make_toy_config(ToyVariant v, std::uint64_t seed) {
    ToyRunConfig cfg;
    cfg.variant = v;
    cfg.seed = seed;
    cfg.train.seed = seed;
    switch (v) {
        case ToyVariant::baseline:
            cfg.train.mix = LossMix::flow_only;
            cfg.train.mode = SamplerMode::uniform;
            cfg.scales = {1.0};
            cfg.shift = 1.0;
            break;
        case ToyVariant::shortcut_uniform:
            cfg.train.mix = LossMix::alternating;
            cfg.train.mode = SamplerMode::uniform;
            cfg.scales = {1.0};
            cfg.shift = 1.0;
            break;
        case ToyVariant::shortcut_nonuniform:
            cfg.train.mix = LossMix::alternating;
            cfg.train.mode = SamplerMode::nonuniform;
            cfg.scales = {0.6, 0.7, 0.8, 0.9, 1.0};
            cfg.shift = 3.0;
            break;
    }
    return cfg;
}

StepSizeSet config_step_set(const ToyRunConfig& cfg) {
    return StepSizeSet::make(cfg.scales, cfg.max_exponent);
}

ShiftConfig config_shift(const ToyRunConfig& cfg) { return ShiftConfig{cfg.shift}; }

namespace {

const char* mix_name(LossMix m) { return m == LossMix::flow_only ? "flow_only" : "alternating"; }
LossMix parse_mix(const std::string& s) {
    if (s == "flow_only") return LossMix::flow_only;
    if (s == "alternating") return LossMix::alternating;
    throw std::invalid_argument("unknown loss mix '" + s + "'");
}

const char* mode_name(SamplerMode m) {
    return m == SamplerMode::uniform ? "uniform" : "nonuniform";
}
SamplerMode parse_mode(const std::string& s) {
    if (s == "uniform") return SamplerMode::uniform;
    if (s == "nonuniform") return SamplerMode::nonuniform;
    throw std::invalid_argument("unknown sampler mode '" + s + "'");
}

const char* orientation_name(StepOrientation o) {
    return o == StepOrientation::toward_noise ? "toward_noise" : "toward_data";
}
StepOrientation parse_orientation(const std::string& s) {
    if (s == "toward_noise") return StepOrientation::toward_noise;
    if (s == "toward_data") return StepOrientation::toward_data;
    throw std::invalid_argument("unknown bootstrap orientation '" + s + "'");
}

const char* scaling_name(InjectScaling s) {
    return s == InjectScaling::divide_sqrt2 ? "divide_sqrt2" : "multiply_sqrt2";
}
InjectScaling parse_scaling(const std::string& s) {
    if (s == "divide_sqrt2") return InjectScaling::divide_sqrt2;
    if (s == "multiply_sqrt2") return InjectScaling::multiply_sqrt2;
    throw std::invalid_argument("unknown injection scaling '" + s + "'");
}

}  // namespace

nlohmann::json toy_config_to_json(const ToyRunConfig& cfg) {
    return nlohmann::json{
        {"variant", variant_name(cfg.variant)},
        {"seed", cfg.seed},
        {"net",
         {{"dim", cfg.net.dim},
          {"hidden", cfg.net.hidden},
          {"hidden_layers", cfg.net.hidden_layers},
          {"time_features", cfg.net.time_features},
          {"cond_dim", cfg.net.cond_dim},
          {"inject_scaling", scaling_name(cfg.net.inject_scaling)}}},
        {"train",
         {{"batch_size", cfg.train.batch_size},
          {"flow_fraction", cfg.train.flow_fraction},
          {"total_steps", cfg.train.total_steps},
          {"lr", cfg.train.lr},
          {"lr_final", cfg.train.lr_final},
          {"mix", mix_name(cfg.train.mix)},
          {"mode", mode_name(cfg.train.mode)},
          {"bootstrap", orientation_name(cfg.train.bootstrap)}}},
        {"schedule",
         {{"scales", cfg.scales}, {"max_exponent", cfg.max_exponent}, {"shift", cfg.shift}}}};
}

ToyRunConfig toy_config_from_json(const nlohmann::json& j) {
    const ToyVariant v = parse_variant(j.value("variant", std::string("shortcut-nonuniform")));
    const auto seed = j.value("seed", std::uint64_t{7});
    ToyRunConfig cfg = make_toy_config(v, seed);
    if (j.contains("net")) {
        const auto& n = j.at("net");
        cfg.net.dim = n.value("dim", cfg.net.dim);
        cfg.net.hidden = n.value("hidden", cfg.net.hidden);
        cfg.net.hidden_layers = n.value("hidden_layers", cfg.net.hidden_layers);
        cfg.net.time_features = n.value("time_features", cfg.net.time_features);
        cfg.net.cond_dim = n.value("cond_dim", cfg.net.cond_dim);
        if (n.contains("inject_scaling")) {
            cfg.net.inject_scaling = parse_scaling(n.at("inject_scaling").get<std::string>());
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.flow_fraction = t.value("flow_fraction", cfg.train.flow_fraction);
        cfg.train.total_steps = t.value("total_steps", cfg.train.total_steps);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.lr_final = t.value("lr_final", cfg.train.lr_final);
        if (t.contains("mix")) cfg.train.mix = parse_mix(t.at("mix").get<std::string>());
        if (t.contains("mode")) cfg.train.mode = parse_mode(t.at("mode").get<std::string>());
        if (t.contains("bootstrap")) {
            cfg.train.bootstrap = parse_orientation(t.at("bootstrap").get<std::string>());
        }
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        if (s.contains("scales")) cfg.scales = s.at("scales").get<std::vector<double>>();
        cfg.max_exponent = s.value("max_exponent", cfg.max_exponent);
        cfg.shift = s.value("shift", cfg.shift);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Populations and batched samplers

Eigen::MatrixXd mixture_data_matrix(const GaussianMixture2D& mix, int n, Rng& rng) {
    Eigen::MatrixXd out(2, n);
    for (int i = 0; i < n; ++i) out.col(i) = mix.draw_data(rng);
    return out;
}

Eigen::MatrixXd standard_normal_matrix(int dim, int n, Rng& rng) {
    Eigen::MatrixXd out(dim, n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < dim; ++k) out(k, i) = rng.normal();
    }
    return out;
}

Eigen::MatrixXd batched_shortcut_sample(const TrainableVelocityModel& model,
                                        const Eigen::MatrixXd& noise, int n_steps,
                                        const StepSizeSet& set, const ShiftConfig& shift) {
    const auto path = plan_shortcut_path(n_steps, set, shift);
    const Eigen::Index n = noise.cols();
    Eigen::MatrixXd x = noise;
    for (const PathStep& step : path) {
        const Eigen::VectorXd t = Eigen::VectorXd::Constant(n, step.t);
        const Eigen::VectorXd d = Eigen::VectorXd::Constant(n, step.d_cond);
        x.noalias() -= step.d_step * model.forward_batch(x, t, d);
        if (!x.allFinite()) {
            throw std::runtime_error("batched_shortcut_sample: non-finite state");
        }
    }
    return x;
}

Eigen::MatrixXd batched_euler_sample(const TrainableVelocityModel& model,
                                     const Eigen::MatrixXd& noise, int n_steps, double d_cond) {
    if (n_steps < 1) throw std::invalid_argument("batched_euler_sample: n_steps must be >= 1");
    const Eigen::Index n = noise.cols();
    const double width = 1.0 / n_steps;
    const Eigen::VectorXd d = Eigen::VectorXd::Constant(n, d_cond);
    Eigen::MatrixXd x = noise;
    for (int k = 0; k < n_steps; ++k) {
        const double t = 1.0 - k * width;
        const Eigen::VectorXd tv = Eigen::VectorXd::Constant(n, t);
        x.noalias() -= width * model.forward_batch(x, tv, d);
        if (!x.allFinite()) throw std::runtime_error("batched_euler_sample: non-finite state");
    }
    return x;
}

Eigen::MatrixXd sample_with_recipe(const TrainableVelocityModel& model, const ToyRunConfig& cfg,
                                   int n_steps, const Eigen::MatrixXd& noise) {
    if (cfg.variant == ToyVariant::baseline) {
        return batched_euler_sample(model, noise, n_steps, config_step_set(cfg).min());
    }
    return batched_shortcut_sample(model, noise, n_steps, config_step_set(cfg),
                                   config_shift(cfg));
}

Eigen::MatrixXd sample_with_recipe(const TrainableVelocityModel& model, const ToyRunConfig& cfg,
                                   int n_steps, int n_samples, Rng& rng) {
    return sample_with_recipe(model, cfg, n_steps,
                              standard_normal_matrix(cfg.net.dim, n_samples, rng));
}

double mmd_against_reference(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference) {
    return mmd_biased(samples, reference, median_heuristic_bandwidth(reference));
}

double trailing_loss(const TrainReport& report, char kind, int count) {
    double sum = 0.0;
    int seen = 0;
    for (auto it = report.trace.rbegin(); it != report.trace.rend() && seen < count; ++it) {
        if (it->kind != kind) continue;
        sum += it->loss;
        ++seen;
    }
    return seen > 0 ? sum / seen : 0.0;
}

// ---------------------------------------------------------------------------
// Training runs

TrainedToy train_toy(const ToyRunConfig& cfg_in) {
    ToyRunConfig cfg = cfg_in;
    cfg.train.seed = cfg.seed;
    ToyNet net(cfg.net);
    Rng root(cfg.seed);
    Rng init_rng = root.fork(1);
    net.init(init_rng);
    const GaussianMixture2D mix = GaussianMixture2D::two_modes();
    TrainReport report = train(net, mix, cfg.train, config_step_set(cfg), config_shift(cfg));
    return TrainedToy{cfg, std::move(net), std::move(report)};
}

void write_train_outputs(const std::string& out_dir, const TrainedToy& run) {
    fs::create_directories(out_dir);

    std::vector<std::vector<double>> rows;
    rows.reserve(run.report.trace.size());
    for (const StepRecord& r : run.report.trace) {
        rows.push_back({static_cast<double>(r.step), r.kind == 'f' ? 1.0 : 0.0, r.loss});
    }
    write_csv(out_dir + "/trace.csv", {"step", "kind_flow", "loss"}, rows);

    nlohmann::json descriptor = toy_config_to_json(run.config);
    descriptor["kind"] = "toy-velocity-net";
    write_params(out_dir + "/params.bin", run.model.params(), descriptor);

    const nlohmann::json manifest{
        {"subcommand", "train-toy"},
        {"version", kVersionString},
        {"seed", run.config.seed},
        {"config", toy_config_to_json(run.config)},
        {"outputs", {{"trace", "trace.csv"}, {"params", "params.bin"}}},
        {"trace_records", run.report.trace.size()},
        {"final_flow_loss", run.report.final_flow_loss},
        {"final_sc_loss", run.report.final_sc_loss},
        {"trailing_flow_loss", trailing_loss(run.report, 'f', 50)},
        {"trailing_sc_loss", trailing_loss(run.report, 's', 50)},
        {"wall_seconds", run.report.wall_seconds}};
    write_json(out_dir + "/manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Step-count ablation

std::vector<AblationRow> run_ablation(const std::vector<AblationEntry>& entries,
                                      const AblationSettings& settings) {
    if (entries.empty()) throw std::invalid_argument("run_ablation: no entries");

    const GaussianMixture2D mix = GaussianMixture2D::two_modes();
    Rng data_rng = Rng(settings.eval_seed).fork(1);
    const Eigen::MatrixXd reference = mixture_data_matrix(mix, settings.n_samples, data_rng);
    const double bandwidth = median_heuristic_bandwidth(reference);

    std::vector<ToyNet> nets;
    nets.reserve(entries.size());
    for (const AblationEntry& e : entries) {
        nets.emplace_back(e.config.net);
        nets.back().set_params(e.params);
    }

    std::vector<AblationRow> rows;
    for (int steps : settings.step_counts) {
        // One noise batch per step count, shared by every entry: identical
        // parameters and recipes then give identical metrics.
        Rng noise_rng = Rng(settings.eval_seed).fork(1000 + static_cast<std::uint64_t>(steps));
        const Eigen::MatrixXd noise = standard_normal_matrix(2, settings.n_samples, noise_rng);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const Eigen::MatrixXd samples =
                sample_with_recipe(nets[i], entries[i].config, steps, noise);
            rows.push_back({entries[i].label, steps, mmd_biased(samples, reference, bandwidth)});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Conditioning ablation

CondAblationResult run_cond_ablation(const CondAblationConfig& cfg) {
    cfg.codec.validate();
    const Shape video_shape{cfg.frames, cfg.height, cfg.width, cfg.channels};
    const Shape lat = latent_shape(video_shape, cfg.codec);
    const int dim = static_cast<int>(lat.total());
    const int n_total = cfg.train_clips + cfg.held_out_clips;

    Rng root(cfg.seed);
    Rng clip_rng = root.fork(1);

    Eigen::MatrixXd x0(dim, n_total);          // clean clip latents
    Eigen::MatrixXd cond_fact(dim, n_total);   // degraded latents, clean first frame at 0
    Eigen::MatrixXd cond_whole(dim, n_total);  // degraded latents only
    for (int i = 0; i < n_total; ++i) {
        const VideoClip clip =
            synth_moving_clip(cfg.frames, cfg.height, cfg.width, cfg.channels, clip_rng);
        x0.col(i) = flatten_tensor(encode(clip, cfg.codec));
        // Two copies of one stream so both conditions see the same degraded
        // content; the only difference is the first-frame replacement.
        Rng deg_a = root.fork(100 + static_cast<std::uint64_t>(i));
        Rng deg_b = deg_a;
        const ConditionPacket pkt =
            assemble_condition(clip, CondTask::video_sr, cfg.codec, cfg.degrade_strength, deg_a);
        cond_fact.col(i) = flatten_tensor(pkt.cond_latent);
        cond_whole.col(i) =
            flatten_tensor(encode(degrade(clip, cfg.degrade_strength, deg_b), cfg.codec));
    }

    const ShiftConfig shift{cfg.shift};
    const double d_cond = std::ldexp(1.0, -7);
    const int batch = cfg.batch_size;
    const int eval_repeats = 4;
    const int eval_cols = eval_repeats * cfg.held_out_clips;

    // Same init and the same draw streams for both condition variants.
    auto run_variant = [&](const Eigen::MatrixXd& cond_pool) -> double {
        ToyNetConfig nc;
        nc.dim = dim;
        nc.cond_dim = dim;
        nc.hidden = cfg.hidden;
        nc.hidden_layers = cfg.hidden_layers;
        ToyNet net(nc);
        Rng init_rng = root.fork(7);
        net.init(init_rng);

        Adam opt;
        opt.lr = cfg.lr;
        Rng idx_rng = root.fork(4);
        Rng noise_rng = root.fork(5);
        Rng t_rng = root.fork(6);

        Eigen::MatrixXd xt(dim, batch), cond(dim, batch), target(dim, batch);
        Eigen::VectorXd tv(batch);
        const Eigen::VectorXd dv = Eigen::VectorXd::Constant(batch, d_cond);
        const std::vector<bool> active(batch, true);
        Eigen::VectorXd grad(net.param_count());
        Eigen::VectorXd x1(dim);

        for (int step = 0; step < cfg.total_steps; ++step) {
            for (int j = 0; j < batch; ++j) {
                const int i = static_cast<int>(idx_rng.uniform_int(cfg.train_clips));
                const double t = sample_flow_t(t_rng, shift, SamplerMode::nonuniform);
                for (int k = 0; k < dim; ++k) x1[k] = noise_rng.normal();
                xt.col(j) = (1.0 - t) * x0.col(i) + t * x1;
                target.col(j) = x1 - x0.col(i);
                cond.col(j) = cond_pool.col(i);
                tv[j] = t;
            }
            const double loss = net.mse_loss_grad_cond(xt, cond, active, tv, dv, target, grad);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("run_cond_ablation: non-finite loss at step " +
                                         std::to_string(step));
            }
            Eigen::VectorXd p = net.params();
            opt.step(p, grad);
            net.set_params(p);
        }

        // Held-out loss over fixed draws shared by both variants.
        Rng et_rng = root.fork(8);
        Rng en_rng = root.fork(9);
        Eigen::MatrixXd ext(dim, eval_cols), econd(dim, eval_cols), etarget(dim, eval_cols);
        Eigen::VectorXd et(eval_cols);
        const Eigen::VectorXd ed = Eigen::VectorXd::Constant(eval_cols, d_cond);
        const std::vector<bool> eactive(eval_cols, true);
        for (int r = 0; r < eval_repeats; ++r) {
            for (int i = 0; i < cfg.held_out_clips; ++i) {
                const int col = r * cfg.held_out_clips + i;
                const int clip_i = cfg.train_clips + i;
                const double t = sample_flow_t(et_rng, shift, SamplerMode::nonuniform);
                for (int k = 0; k < dim; ++k) x1[k] = en_rng.normal();
                ext.col(col) = (1.0 - t) * x0.col(clip_i) + t * x1;
                etarget.col(col) = x1 - x0.col(clip_i);
                econd.col(col) = cond_pool.col(clip_i);
                et[col] = t;
            }
        }
        const Eigen::MatrixXd v = net.forward_batch_cond(ext, econd, eactive, et, ed);
        return (v - etarget).squaredNorm() / (static_cast<double>(eval_cols) * dim);
    };

    CondAblationResult result;
    result.factorized_loss = run_variant(cond_fact);
    result.whole_video_loss = run_variant(cond_whole);
    return result;
}

// ---------------------------------------------------------------------------
// Demos

namespace {

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TileDemoResult run_tile_demo(const TileDemoConfig& cfg) {
    const Shape global_shape{1, cfg.extent_h, cfg.extent_w, cfg.channels};
    const TilePlan plan = plan_tiles(cfg.extent_h, cfg.extent_w, cfg.tile, cfg.tile,
                                     cfg.min_overlap, cfg.min_overlap);
    const double sigma = cfg.sigma > 0.0 ? cfg.sigma : cfg.tile / 4.0;
    const BlendKernel kernel = gaussian_kernel(cfg.tile, cfg.tile, sigma);

    const GaussianOracle oracle(1.0);
    const TileVelocityFn fn = [&oracle](const LatentTensor& x, const LatentTensor*, double t,
                                        double d) { return oracle.evaluate(x, t, d); };

    std::vector<double> times;
    for (int k = 0; k <= cfg.n_steps; ++k) {
        times.push_back(1.0 - static_cast<double>(k) / cfg.n_steps);
    }

    TiledSampleConfig scfg;
    scfg.n_steps = cfg.n_steps;
    scfg.noise_mode = cfg.noise_mode;

    Rng tiled_rng(cfg.seed);
    LatentTensor tiled =
        tiled_sample(fn, nullptr, global_shape, plan, kernel, times, scfg, tiled_rng);

    // The untiled reference starts from the identical initial state: replay
    // the run's draws with a same-seeded generator.
    Rng ref_rng(cfg.seed);
    const Shape tile_shape{1, cfg.tile, cfg.tile, cfg.channels};
    const LatentTensor noise_tile = ref_rng.normal_tensor(tile_shape);
    LatentTensor state(global_shape);
    if (cfg.noise_mode == NoiseMode::shared_tile) {
        std::vector<std::pair<TileRect, LatentTensor>> copies;
        for (const TileRect& rect : plan.tiles) copies.emplace_back(rect, noise_tile);
        state = fuse_tiles(copies, plan, kernel);
    } else {
        state = ref_rng.normal_tensor(global_shape);
    }
    for (int k = 0; k < cfg.n_steps; ++k) {
        const double t = times[k];
        const double width = times[k] - times[k + 1];
        const LatentTensor v = oracle.evaluate(state, t, width);
        axpy(state, -width, v);
    }

    TileDemoResult result{plan, std::move(tiled), std::move(state), 0.0};
    result.max_abs_diff = max_abs_diff(result.tiled, result.untiled);
    return result;
}

FuseDemoResult run_fuse_demo(const FuseDemoConfig& cfg) {
    cfg.codec.validate();
    Rng rng(cfg.seed);
    const VideoClip clip =
        synth_moving_clip(cfg.frames, cfg.height, cfg.width, cfg.channels, rng);
    const SegmentPlan plan = plan_segments(cfg.frames, cfg.segment_length);

    std::vector<LatentTensor> segment_latents;
    segment_latents.reserve(plan.starts.size());
    for (int start : plan.starts) {
        const VideoClip segment(clip.frames.time_slice(start, start + cfg.segment_length),
                                cfg.codec);
        segment_latents.push_back(encode(segment, cfg.codec));
    }

    FuseDemoResult result{plan, fuse_segments(segment_latents, plan, cfg.codec, cfg.merge),
                          encode(clip, cfg.codec), 0.0};
    result.max_abs_err = max_abs_diff(result.report.fused, result.whole);
    return result;
}

}  // namespace fewstep
