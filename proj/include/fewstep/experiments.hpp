#ifndef FEWSTEP_EXPERIMENTS_HPP
#define FEWSTEP_EXPERIMENTS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fewstep/codec.hpp"
#include "fewstep/data.hpp"
#include "fewstep/io.hpp"
#include "fewstep/models.hpp"
#include "fewstep/schedule.hpp"
#include "fewstep/shortcut.hpp"
#include "fewstep/tiling.hpp"

namespace fewstep {

// Recorded in every manifest so a replay can detect mismatched binaries.
inline constexpr const char* kVersionString = "fewstep-0.1.0";

// ---------------------------------------------------------------------------
// Toy sampling runs (2-D mixture)

// Training recipes compared by the sampling experiments. "baseline" is plain
// flow matching sampled with small Euler steps; the shortcut recipes add the
// self-consistency loss and sample along the planned step-size path, with
// either uniform or shifted/scaled (t, d) draws.
enum class ToyVariant { baseline, shortcut_uniform, shortcut_nonuniform };

std::string variant_name(ToyVariant v);
// Accepts the three canonical names plus "shortcut" for the non-uniform recipe.
ToyVariant parse_variant(const std::string& name);

struct ToyRunConfig {
    ToyVariant variant = ToyVariant::shortcut_nonuniform;
    std::uint64_t seed = 7;
    ToyNetConfig net;
    TrainConfig train;
    std::vector<double> scales{0.6, 0.7, 0.8, 0.9, 1.0};
    int max_exponent = 7;
    double shift = 3.0;
};

// Recipe defaults for a variant (schedule, loss mix, draw mode).
ToyRunConfig make_toy_config(ToyVariant v, std::uint64_t seed);

StepSizeSet config_step_set(const ToyRunConfig& cfg);
ShiftConfig config_shift(const ToyRunConfig& cfg);

// Round trip used for config files and for the parameter-file descriptor, so
// a saved model carries its own sampling recipe.
nlohmann::json toy_config_to_json(const ToyRunConfig& cfg);
ToyRunConfig toy_config_from_json(const nlohmann::json& j);

// Columns are points.
Eigen::MatrixXd mixture_data_matrix(const GaussianMixture2D& mix, int n, Rng& rng);
Eigen::MatrixXd standard_normal_matrix(int dim, int n, Rng& rng);

// Batched samplers: one column per sample, stepped together.
Eigen::MatrixXd batched_shortcut_sample(const TrainableVelocityModel& model,
                                        const Eigen::MatrixXd& noise, int n_steps,
                                        const StepSizeSet& set, const ShiftConfig& shift);
Eigen::MatrixXd batched_euler_sample(const TrainableVelocityModel& model,
                                     const Eigen::MatrixXd& noise, int n_steps, double d_cond);

// Dispatch on the recipe: baseline integrates n uniform Euler steps
// conditioned on the smallest trained width, shortcut recipes follow the
// planned path.
Eigen::MatrixXd sample_with_recipe(const TrainableVelocityModel& model, const ToyRunConfig& cfg,
                                   int n_steps, const Eigen::MatrixXd& noise);
Eigen::MatrixXd sample_with_recipe(const TrainableVelocityModel& model, const ToyRunConfig& cfg,
                                   int n_steps, int n_samples, Rng& rng);

// Kernel two-sample distance of samples against a reference population; the
// bandwidth is the median heuristic on the reference side only, so it is
// shared by every comparison against the same population.
double mmd_against_reference(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference);

// Mean loss of the trailing `count` trace records of one kind ('f' or 's');
// single-batch losses are too noisy to read off the last record alone.
double trailing_loss(const TrainReport& report, char kind, int count);

struct TrainedToy {
    ToyRunConfig config;
    ToyNet model;
    TrainReport report;
};

// Initializes and trains a toy model on the two-mode mixture.
TrainedToy train_toy(const ToyRunConfig& cfg);

// Writes manifest.json, trace.csv and params.bin under out_dir.
void write_train_outputs(const std::string& out_dir, const TrainedToy& run);

// ---------------------------------------------------------------------------
// Step-count ablation

struct AblationEntry {
    std::string label;    // CSV "variant" column
    ToyRunConfig config;  // recipe; from the parameter-file descriptor when loaded
    Eigen::VectorXd params;
};

struct AblationSettings {
    std::vector<int> step_counts{1, 2, 4, 10};
    int n_samples = 4096;
    std::uint64_t eval_seed = 99;
};

struct AblationRow {
    std::string variant;
    int steps = 0;
    double mmd = 0.0;
};

// Shared evaluation: one reference draw and one noise batch per step count,
// reused across entries, so identical parameters give identical metrics.
std::vector<AblationRow> run_ablation(const std::vector<AblationEntry>& entries,
                                      const AblationSettings& settings);

// ---------------------------------------------------------------------------
// Conditioning ablation (factorized vs. whole-video condition content)

struct CondAblationConfig {
    int frames = 9;
    int height = 16;
    int width = 16;
    int channels = 1;
    CodecConfig codec{4, 8, 2};
    int train_clips = 192;
    int held_out_clips = 48;
    int batch_size = 32;
    int total_steps = 600;
    double lr = 3e-4;
    double degrade_strength = 0.6;
    double shift = 3.0;
    int hidden = 64;
    int hidden_layers = 3;
    std::uint64_t seed = 0;
};

struct CondAblationResult {
    double factorized_loss = 0.0;   // held-out denoising loss
    double whole_video_loss = 0.0;
};

// Trains the same conditional net twice from identical init and identical
// draw streams; only the condition content differs (clean-first-frame
// replacement vs. fully degraded clip).
CondAblationResult run_cond_ablation(const CondAblationConfig& cfg);

// ---------------------------------------------------------------------------
// Tiling / fusion demos

struct TileDemoConfig {
    int extent_h = 32;
    int extent_w = 48;
    int channels = 4;
    int tile = 16;
    int min_overlap = 8;
    double sigma = 0.0;  // 0 = kernel default (tile/4)
    int n_steps = 8;
    NoiseMode noise_mode = NoiseMode::shared_tile;
    std::uint64_t seed = 5;
};

struct TileDemoResult {
    TilePlan plan;
    LatentTensor tiled;
    LatentTensor untiled;
    double max_abs_diff = 0.0;
};

// Tiled few-step run with a spatially invariant model against the untiled
// reference started from the identical initial state.
TileDemoResult run_tile_demo(const TileDemoConfig& cfg);

struct FuseDemoConfig {
    int frames = 89;
    int segment_length = 49;
    int height = 16;
    int width = 16;
    int channels = 1;
    CodecConfig codec{4, 8, 4};
    OverlapMerge merge = OverlapMerge::linear_ramp;
    std::uint64_t seed = 11;
};

struct FuseDemoResult {
    SegmentPlan plan;
    FusionReport report;
    LatentTensor whole;  // direct whole-clip encode
    double max_abs_err = 0.0;
};

// Per-segment encode + fusion of a synthetic clip against the whole-clip
// encode.
FuseDemoResult run_fuse_demo(const FuseDemoConfig& cfg);

}  // namespace fewstep

#endif
