#include "fewstep/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fewstep {

namespace {

std::vector<int> axis_positions(int extent, int tile, int min_overlap) {
    std::vector<int> pos;
    const int stride = tile - min_overlap;
    int p = 0;
    while (true) {
        if (p + tile >= extent) {
            pos.push_back(extent - tile);  // flush with the far edge
            break;
        }
        pos.push_back(p);
        p += stride;
    }
    return pos;
}

}  // namespace

TilePlan plan_tiles(int extent_h, int extent_w, int tile_h, int tile_w, int min_overlap_y,
                    int min_overlap_x) {
    if (tile_h < 1 || tile_w < 1) throw std::invalid_argument("plan_tiles: tile must be positive");
    if (tile_h > extent_h || tile_w > extent_w) {
        throw std::invalid_argument("plan_tiles: tile exceeds extent");
    }
    if (min_overlap_y < 0 || min_overlap_y >= tile_h || min_overlap_x < 0 ||
        min_overlap_x >= tile_w) {
        throw std::invalid_argument("plan_tiles: overlap must lie in [0, tile)");
    }
    TilePlan plan;
    plan.extent_h = extent_h;
    plan.extent_w = extent_w;
    plan.tile_h = tile_h;
    plan.tile_w = tile_w;
    plan.min_overlap_y = min_overlap_y;
    plan.min_overlap_x = min_overlap_x;
    for (int y : axis_positions(extent_h, tile_h, min_overlap_y)) {
        for (int x : axis_positions(extent_w, tile_w, min_overlap_x)) {
            plan.tiles.push_back({y, x, tile_h, tile_w});
        }
    }
    return plan;
}

BlendKernel gaussian_kernel(int h, int w, double sigma) {
    if (h < 1 || w < 1) throw std::invalid_argument("gaussian_kernel: size must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    BlendKernel k;
    k.h = h;
    k.w = w;
    k.sigma = sigma;
    k.weights.resize(static_cast<std::size_t>(h) * w);
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            k.weights[static_cast<std::size_t>(y) * w + x] = std::exp(-r2 / (2.0 * sigma * sigma));
        }
    }
    return k;
}

LatentTensor fuse_tiles(const std::vector<std::pair<TileRect, LatentTensor>>& values,
                        const TilePlan& plan, const BlendKernel& kernel) {
    if (kernel.h != plan.tile_h || kernel.w != plan.tile_w) {
        throw std::invalid_argument("fuse_tiles: kernel does not match tile size");
    }
    if (values.empty()) throw std::invalid_argument("fuse_tiles: no tile values");
    const Shape tile_shape = values.front().second.shape();
    if (tile_shape.h != plan.tile_h || tile_shape.w != plan.tile_w) {
        throw std::invalid_argument("fuse_tiles: tile tensor does not match tile size");
    }

    Shape out_shape{tile_shape.t, plan.extent_h, plan.extent_w, tile_shape.c};
    LatentTensor acc = LatentTensor::zeros(out_shape);
    LatentTensor wsum = LatentTensor::zeros({1, plan.extent_h, plan.extent_w, 1});

    // Walk the plan's canonical order and look the matching value up by rect,
    // so the caller's list order cannot perturb the floating-point reduction.
    for (const TileRect& rect : plan.tiles) {
        const LatentTensor* value = nullptr;
        for (const auto& [r, v] : values) {
            if (r == rect) {
                value = &v;
                break;
            }
        }
        if (value == nullptr) {
            throw std::invalid_argument("fuse_tiles: missing value for tile at y=" +
                                        std::to_string(rect.y) + " x=" + std::to_string(rect.x));
        }
        if (!(value->shape() == tile_shape)) {
            throw std::invalid_argument("fuse_tiles: inconsistent tile tensor shape");
        }
        for (int t = 0; t < tile_shape.t; ++t) {
            for (int y = 0; y < rect.h; ++y) {
                for (int x = 0; x < rect.w; ++x) {
                    const double wgt = kernel.at(y, x);
                    for (int c = 0; c < tile_shape.c; ++c) {
                        acc.at(t, rect.y + y, rect.x + x, c) += wgt * value->at(t, y, x, c);
                    }
                    if (t == 0) wsum.at(0, rect.y + y, rect.x + x, 0) += wgt;
                }
            }
        }
    }

    for (int t = 0; t < out_shape.t; ++t) {
        for (int y = 0; y < out_shape.h; ++y) {
            for (int x = 0; x < out_shape.w; ++x) {
                const double wgt = wsum.at(0, y, x, 0);
                if (!(wgt > 0.0)) {
                    throw std::runtime_error("fuse_tiles: uncovered position y=" +
                                             std::to_string(y) + " x=" + std::to_string(x));
                }
                for (int c = 0; c < out_shape.c; ++c) acc.at(t, y, x, c) /= wgt;
            }
        }
    }
    return acc;
}

namespace {

LatentTensor crop_tile(const LatentTensor& global, const TileRect& rect) {
    return global.crop(rect.y, rect.x, rect.h, rect.w);
}

}  // namespace

LatentTensor tiled_denoise_step(const TileVelocityFn& model, const LatentTensor* cond,
                                const LatentTensor& global_latent, const TilePlan& plan,
                                const BlendKernel& kernel, const LatentTensor& fixed_noise_tile,
                                double t, double d_cond, double d_step) {
    if (d_step < 0.0) d_step = d_cond;
    const Shape gs = global_latent.shape();
    if (gs.h != plan.extent_h || gs.w != plan.extent_w) {
        throw std::invalid_argument("tiled_denoise_step: state does not match plan extent");
    }
    if (fixed_noise_tile.shape().h != plan.tile_h || fixed_noise_tile.shape().w != plan.tile_w) {
        throw std::invalid_argument("tiled_denoise_step: fixed noise is not tile-shaped");
    }
    std::vector<std::pair<TileRect, LatentTensor>> advanced;
    advanced.reserve(plan.tiles.size());
    for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
        const TileRect& rect = plan.tiles[i];
        LatentTensor x_tile = crop_tile(global_latent, rect);
        LatentTensor cond_tile;
        const LatentTensor* cond_ptr = nullptr;
        if (cond != nullptr) {
            cond_tile = crop_tile(*cond, rect);
            cond_ptr = &cond_tile;
        }
        LatentTensor v = model(x_tile, cond_ptr, t, d_cond);
        axpy(x_tile, -d_step, v);
        if (!x_tile.all_finite()) {
            throw std::runtime_error("tiled_denoise_step: non-finite tile state at tile " +
                                     std::to_string(i));
        }
        advanced.emplace_back(rect, std::move(x_tile));
    }
    return fuse_tiles(advanced, plan, kernel);
}

LatentTensor tiled_sample(const TileVelocityFn& model, const LatentTensor* cond,
                          const Shape& global_shape, const TilePlan& plan,
                          const BlendKernel& kernel, const std::vector<double>& times,
                          const TiledSampleConfig& cfg, Rng& rng) {
    if (times.size() < 2) throw std::invalid_argument("tiled_sample: need at least two times");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] < times[i - 1])) {
            throw std::invalid_argument("tiled_sample: times must strictly decrease");
        }
    }
    if (global_shape.h != plan.extent_h || global_shape.w != plan.extent_w) {
        throw std::invalid_argument("tiled_sample: shape does not match plan extent");
    }

    const Shape tile_shape{global_shape.t, plan.tile_h, plan.tile_w, global_shape.c};
    LatentTensor noise_tile = rng.normal_tensor(tile_shape);

    LatentTensor state(global_shape);
    if (cfg.noise_mode == NoiseMode::shared_tile) {
        // Every tile starts from the same draw; fusing the copies yields the
        // global initial state.
        std::vector<std::pair<TileRect, LatentTensor>> copies;
        copies.reserve(plan.tiles.size());
        for (const TileRect& rect : plan.tiles) copies.emplace_back(rect, noise_tile);
        state = fuse_tiles(copies, plan, kernel);
    } else {
        state = rng.normal_tensor(global_shape);
    }

    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double t = times[k];
        const double width = times[k] - times[k + 1];
        const double d_cond = cfg.d_cond > 0.0 ? cfg.d_cond : width;
        state = tiled_denoise_step(model, cond, state, plan, kernel, noise_tile, t, d_cond, width);
    }
    return state;
}

// ---------------------------------------------------------------------------

SegmentPlan plan_segments(int frames, int segment_length, int min_overlap) {
    if (segment_length < 9 || segment_length % 8 != 1) {
        throw std::invalid_argument("plan_segments: segment length must be 8k + 1, k >= 1");
    }
    if (frames % 8 != 1) throw std::invalid_argument("plan_segments: frame count must be 8k + 1");
    if (frames < segment_length) {
        throw std::invalid_argument("plan_segments: clip shorter than one segment");
    }
    if (min_overlap < 1) throw std::invalid_argument("plan_segments: overlap must be >= 1");

    SegmentPlan plan;
    plan.frames = frames;
    plan.segment_length = segment_length;
    plan.min_overlap = min_overlap;

    if (frames == segment_length) {
        plan.starts = {0};
        return plan;
    }
    const int stride = (segment_length - min_overlap) / 8 * 8;
    if (stride < 8) {
        throw std::invalid_argument("plan_segments: overlap leaves no room to advance");
    }
    int s = 0;
    while (true) {
        if (s + segment_length >= frames) {
            const int last = frames - segment_length;  // 8k+1 - 8m+1 = multiple of 8
            if (plan.starts.empty() || last > plan.starts.back()) plan.starts.push_back(last);
            break;
        }
        plan.starts.push_back(s);
        s += stride;
    }
    for (std::size_t i = 1; i < plan.starts.size(); ++i) {
        const int overlap = plan.starts[i - 1] + segment_length - plan.starts[i];
        if (overlap < min_overlap) {
            throw std::logic_error("plan_segments: produced overlap below the minimum");
        }
    }
    return plan;
}

FusionReport fuse_segments(const std::vector<LatentTensor>& segment_latents,
                           const SegmentPlan& plan, const CodecConfig& cfg, OverlapMerge merge) {
    cfg.validate();
    if (segment_latents.size() != plan.starts.size()) {
        throw std::invalid_argument("fuse_segments: segment count does not match plan");
    }
    const int seg_positions = 1 + (plan.segment_length - 1) / 8;
    const int out_positions = 1 + (plan.frames - 1) / 8;
    const Shape seg_shape = segment_latents.front().shape();
    if (seg_shape.t != seg_positions) {
        throw std::invalid_argument("fuse_segments: segment latent has wrong time extent");
    }
    for (const LatentTensor& seg : segment_latents) {
        if (!(seg.shape() == seg_shape)) {
            throw std::invalid_argument("fuse_segments: inconsistent segment latent shapes");
        }
    }

    Shape out_shape = seg_shape;
    out_shape.t = out_positions;
    LatentTensor fused = LatentTensor::zeros(out_shape);
    std::vector<char> filled(static_cast<std::size_t>(out_positions), 0);
    std::vector<std::vector<SegmentContribution>> contributors(
        static_cast<std::size_t>(out_positions));

    // Segment k's video latent j (j >= 1) holds frames start + 8(j-1)+1 ..
    // start + 8j, i.e. global group start/8 + j. Position 0 of segment 0 is
    // the whole video's first-frame latent; later segments' position 0 is
    // discarded.
    for (std::size_t k = 0; k < segment_latents.size(); ++k) {
        const int base = plan.starts[k] / 8;
        const int j_lo = k == 0 ? 0 : 1;

        // The run of already-filled positions this segment overlaps.
        std::vector<int> overlap_positions;
        for (int j = j_lo; j < seg_positions; ++j) {
            const int pos = j == 0 ? 0 : base + j;
            if (filled[static_cast<std::size_t>(pos)]) overlap_positions.push_back(pos);
        }
        const int n_overlap = static_cast<int>(overlap_positions.size());

        for (int j = j_lo; j < seg_positions; ++j) {
            const int pos = j == 0 ? 0 : base + j;
            if (pos >= out_positions) throw std::logic_error("fuse_segments: position out of range");
            LatentTensor slice = segment_latents[k].time_slice(j, j + 1);
            if (!filled[static_cast<std::size_t>(pos)]) {
                fused.set_time_slice(pos, slice);
                filled[static_cast<std::size_t>(pos)] = 1;
                contributors[static_cast<std::size_t>(pos)].push_back(
                    {static_cast<int>(k), j, 1.0});
                continue;
            }
            // Crossfade into the accumulated value: ramp weight grows with
            // the index inside the overlap run.
            int rank = 0;
            for (int i = 0; i < n_overlap; ++i) {
                if (overlap_positions[i] == pos) rank = i;
            }
            double w_new = merge == OverlapMerge::plain_average
                               ? 0.5
                               : static_cast<double>(rank + 1) / (n_overlap + 1);
            // old + w*(new - old): exact when both sides agree, unlike the
            // two-product form (1-w)*old + w*new.
            LatentTensor mixed = fused.time_slice(pos, pos + 1);
            LatentTensor diff = slice - mixed;
            axpy(mixed, w_new, diff);
            fused.set_time_slice(pos, mixed);
            for (auto& contrib : contributors[static_cast<std::size_t>(pos)]) {
                contrib.weight *= 1.0 - w_new;
            }
            contributors[static_cast<std::size_t>(pos)].push_back(
                {static_cast<int>(k), j, w_new});
        }
    }

    for (int pos = 0; pos < out_positions; ++pos) {
        if (!filled[static_cast<std::size_t>(pos)]) {
            throw std::logic_error("fuse_segments: uncovered latent position " +
                                   std::to_string(pos));
        }
    }
    FusionReport report;
    report.fused = std::move(fused);
    report.contributors = std::move(contributors);
    return report;
}

}  // namespace fewstep
