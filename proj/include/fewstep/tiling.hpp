#ifndef FEWSTEP_TILING_HPP
#define FEWSTEP_TILING_HPP

#include <functional>
#include <vector>

#include "fewstep/codec.hpp"
#include "fewstep/flow.hpp"
#include "fewstep/rng.hpp"
#include "fewstep/tensor.hpp"

namespace fewstep {

struct TileRect {
    int y = 0;
    int x = 0;
    int h = 0;
    int w = 0;

    bool operator==(const TileRect& o) const {
        return y == o.y && x == o.x && h == o.h && w == o.w;
    }
};

struct TilePlan {
    std::vector<TileRect> tiles;
    int extent_h = 0;
    int extent_w = 0;
    int tile_h = 0;
    int tile_w = 0;
    int min_overlap_y = 0;
    int min_overlap_x = 0;
};

// Regular grid with stride = tile - min_overlap; the last row/column is
// shifted inward to end flush with the extent, so actual overlaps can exceed
// the minimum.
TilePlan plan_tiles(int extent_h, int extent_w, int tile_h, int tile_w, int min_overlap_y,
                    int min_overlap_x);

// Unnormalized Gaussian bump over a tile, maximal at the tile center.
// Normalization happens position-wise during fusion.
struct BlendKernel {
    std::vector<double> weights;  // row-major h x w
    int h = 0;
    int w = 0;
    double sigma = 0.0;

    double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * w + x]; }
};

BlendKernel gaussian_kernel(int h, int w, double sigma);

// Position-wise kernel-weighted average of per-tile tensors. Values are
// matched to plan tiles by rectangle and accumulated in canonical plan
// order, so permuting the input list cannot change the result.
LatentTensor fuse_tiles(const std::vector<std::pair<TileRect, LatentTensor>>& values,
                        const TilePlan& plan, const BlendKernel& kernel);

// Velocity on a tile crop; cond_tile is null for unconditional models.
using TileVelocityFn =
    std::function<LatentTensor(const LatentTensor& x_tile, const LatentTensor* cond_tile,
                               double t, double d)>;

// One sampler step applied to every tile crop independently, then fused.
// fixed_noise_tile is the run-level shared initial-noise tile; the step
// validates its shape and carries it through but only the run setup consumes
// it. d_step defaults to the conditioning width d_cond.
LatentTensor tiled_denoise_step(const TileVelocityFn& model, const LatentTensor* cond,
                                const LatentTensor& global_latent, const TilePlan& plan,
                                const BlendKernel& kernel, const LatentTensor& fixed_noise_tile,
                                double t, double d_cond, double d_step = -1.0);

// How the initial noise state is constructed for a tiled run: every tile
// starts from one shared tile-shaped draw (fused into a global state), or a
// global noise field is drawn and cropped per tile.
enum class NoiseMode { shared_tile, cropped_field };

struct TiledSampleConfig {
    int n_steps = 8;
    NoiseMode noise_mode = NoiseMode::shared_tile;
    double d_cond = 0.0;  // conditioning width per step; 0 = use the step width
};

// Full Euler-style run over a descending time grid with per-step tiling.
LatentTensor tiled_sample(const TileVelocityFn& model, const LatentTensor* cond,
                          const Shape& global_shape, const TilePlan& plan,
                          const BlendKernel& kernel, const std::vector<double>& times,
                          const TiledSampleConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Temporal segments

struct SegmentPlan {
    std::vector<int> starts;  // frame indices, multiples of 8
    int frames = 0;           // F
    int segment_length = 0;   // L
    int min_overlap = 9;
};

// Starts at multiples of 8, stride = largest multiple of 8 that keeps at
// least min_overlap frames shared; the final segment is shifted inward to
// end at F.
SegmentPlan plan_segments(int frames, int segment_length, int min_overlap = 9);

// One (segment, latent position, weight) contribution to a fused position.
struct SegmentContribution {
    int segment = 0;
    int source_position = 0;
    double weight = 0.0;
};

struct FusionReport {
    LatentTensor fused;
    // Per fused latent position, every contribution that reached it.
    std::vector<std::vector<SegmentContribution>> contributors;
};

enum class OverlapMerge { linear_ramp, plain_average };

// Merge per-segment latents into the whole-video latent. Position 0 comes
// from segment 0 alone; every later segment's first-frame latent is
// discarded and its video latents crossfade into the accumulated result over
// the overlapping positions (a single-position overlap is a plain average).
FusionReport fuse_segments(const std::vector<LatentTensor>& segment_latents,
                           const SegmentPlan& plan, const CodecConfig& cfg,
                           OverlapMerge merge = OverlapMerge::linear_ramp);

}  // namespace fewstep

#endif
