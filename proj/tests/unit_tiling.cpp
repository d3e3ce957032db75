#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fewstep/data.hpp"
#include "fewstep/tiling.hpp"

using namespace fewstep;

namespace {

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<int> ys_of(const TilePlan& plan) {
    std::vector<int> ys;
    for (const TileRect& r : plan.tiles)
        if (std::find(ys.begin(), ys.end(), r.y) == ys.end()) ys.push_back(r.y);
    return ys;
}

}  // namespace

TEST_CASE("plan_tiles geometry") {
    SUBCASE("tile equal to extent: one tile") {
        TilePlan plan = plan_tiles(16, 16, 16, 16, 8, 8);
        REQUIRE(plan.tiles.size() == 1);
        CHECK(plan.tiles[0] == TileRect{0, 0, 16, 16});
    }
    SUBCASE("24 rows, overlap 8: rows 0 and 8") {
        TilePlan plan = plan_tiles(24, 16, 16, 16, 8, 8);
        CHECK(ys_of(plan) == std::vector<int>{0, 8});
    }
    SUBCASE("20 rows, overlap 4: last row shifted inward to 4") {
        TilePlan plan = plan_tiles(20, 16, 16, 16, 4, 4);
        CHECK(ys_of(plan) == std::vector<int>{0, 4});
    }
    SUBCASE("containment, coverage, uniform size, minimum overlap") {
        TilePlan plan = plan_tiles(40, 52, 16, 16, 4, 8);
        std::vector<std::vector<char>> hit(40, std::vector<char>(52, 0));
        for (const TileRect& r : plan.tiles) {
            CHECK(r.h == 16);
            CHECK(r.w == 16);
            CHECK(r.y >= 0);
            CHECK(r.x >= 0);
            CHECK(r.y + r.h <= 40);
            CHECK(r.x + r.w <= 52);
            for (int y = r.y; y < r.y + r.h; ++y)
                for (int x = r.x; x < r.x + r.w; ++x) hit[y][x] = 1;
        }
        for (const auto& row : hit)
            for (char c : row) CHECK(c == 1);
        std::vector<int> ys = ys_of(plan);
        for (std::size_t i = 1; i < ys.size(); ++i) CHECK(ys[i - 1] + 16 - ys[i] >= 4);
    }
    SUBCASE("rejects impossible requests") {
        CHECK_THROWS(plan_tiles(8, 8, 16, 16, 4, 4));    // tile exceeds extent
        CHECK_THROWS(plan_tiles(32, 32, 16, 16, 16, 4));  // overlap >= tile
        CHECK_THROWS(plan_tiles(32, 32, 16, 16, -1, 4));
        CHECK_THROWS(plan_tiles(32, 32, 0, 16, 0, 0));
    }
}

TEST_CASE("gaussian blend kernel") {
    BlendKernel one = gaussian_kernel(1, 1, 2.0);
    CHECK(one.at(0, 0) == 1.0);

    BlendKernel k = gaussian_kernel(3, 3, 1.0);
    CHECK(k.at(1, 1) == 1.0);
    CHECK(k.at(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(k.at(2, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(k.at(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
            CHECK(k.at(y, x) == k.at(2 - y, 2 - x));
            CHECK(k.at(y, x) == k.at(x, y));
            CHECK(k.at(y, x) <= k.at(1, 1));
        }

    // even size: the four middle cells share the maximum
    BlendKernel e = gaussian_kernel(4, 4, 1.5);
    CHECK(e.at(1, 1) == e.at(2, 2));
    CHECK(e.at(1, 2) == e.at(2, 1));
    CHECK(e.at(0, 0) < e.at(1, 1));

    CHECK_THROWS(gaussian_kernel(3, 3, 0.0));
    CHECK_THROWS(gaussian_kernel(0, 3, 1.0));
}

TEST_CASE("fuse_tiles") {
    TilePlan plan = plan_tiles(24, 16, 16, 16, 8, 8);  // tiles at y = 0 and 8
    BlendKernel kernel = gaussian_kernel(16, 16, 8.0);

    SUBCASE("two constant tiles blend by kernel weight") {
        std::vector<std::pair<TileRect, LatentTensor>> values;
        values.emplace_back(TileRect{0, 0, 16, 16}, LatentTensor::full({1, 16, 16, 1}, 1.0));
        values.emplace_back(TileRect{8, 0, 16, 16}, LatentTensor::full({1, 16, 16, 1}, 3.0));
        LatentTensor fused = fuse_tiles(values, plan, kernel);
        REQUIRE(fused.shape() == Shape{1, 24, 16, 1});
        // exclusive regions keep their tile's value
        CHECK(fused.at(0, 2, 5, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fused.at(0, 20, 5, 0) == doctest::Approx(3.0).epsilon(1e-12));
        // overlap rows: weighted average of the two kernel columns
        for (int y = 8; y < 16; ++y) {
            const double w0 = kernel.at(y, 5);
            const double w1 = kernel.at(y - 8, 5);
            const double want = (w0 * 1.0 + w1 * 3.0) / (w0 + w1);
            CHECK(fused.at(0, y, 5, 0) == doctest::Approx(want).epsilon(1e-12));
        }
    }

    SUBCASE("crops of one field fuse back to the field") {
        Rng rng(50);
        LatentTensor global = rng.normal_tensor(Shape{2, 24, 16, 3});
        std::vector<std::pair<TileRect, LatentTensor>> values;
        for (const TileRect& r : plan.tiles) values.emplace_back(r, global.crop(r.y, r.x, r.h, r.w));
        LatentTensor fused = fuse_tiles(values, plan, kernel);
        CHECK(max_abs_diff(fused, global) < 1e-12);
    }

    SUBCASE("all-ones tiles give exactly one everywhere") {
        std::vector<std::pair<TileRect, LatentTensor>> values;
        for (const TileRect& r : plan.tiles)
            values.emplace_back(r, LatentTensor::full({1, 16, 16, 2}, 1.0));
        LatentTensor fused = fuse_tiles(values, plan, kernel);
        for (std::int64_t i = 0; i < fused.size(); ++i) CHECK(std::abs(fused[i] - 1.0) < 1e-9);
    }

    SUBCASE("input order cannot perturb the result") {
        TilePlan grid = plan_tiles(24, 24, 16, 16, 8, 8);  // 4 tiles
        Rng rng(51);
        std::vector<std::pair<TileRect, LatentTensor>> values;
        for (const TileRect& r : grid.tiles)
            values.emplace_back(r, rng.normal_tensor(Shape{1, 16, 16, 2}));
        LatentTensor a = fuse_tiles(values, grid, kernel);
        std::reverse(values.begin(), values.end());
        LatentTensor b = fuse_tiles(values, grid, kernel);
        std::swap(values[0], values[2]);
        LatentTensor c = fuse_tiles(values, grid, kernel);
        CHECK(max_abs_diff(a, b) == 0.0);
        CHECK(max_abs_diff(a, c) == 0.0);
    }

    SUBCASE("bad inputs") {
        std::vector<std::pair<TileRect, LatentTensor>> values;
        values.emplace_back(TileRect{0, 0, 16, 16}, LatentTensor::full({1, 16, 16, 1}, 1.0));
        CHECK_THROWS(fuse_tiles(values, plan, kernel));  // tile at y = 8 missing
        values.emplace_back(TileRect{8, 0, 16, 16}, LatentTensor::full({1, 16, 8, 1}, 1.0));
        CHECK_THROWS(fuse_tiles(values, plan, kernel));  // wrong tensor shape
        CHECK_THROWS(fuse_tiles({}, plan, kernel));
        BlendKernel wrong = gaussian_kernel(8, 8, 4.0);
        values[1].second = LatentTensor::full({1, 16, 16, 1}, 1.0);
        CHECK_THROWS(fuse_tiles(values, plan, wrong));
    }
}

TEST_CASE("tiled_denoise_step") {
    BlendKernel kernel = gaussian_kernel(16, 16, 8.0);
    Rng rng(52);
    // pointwise-affine velocity commutes with cropping
    TileVelocityFn model = [](const LatentTensor& x, const LatentTensor*, double t, double) {
        LatentTensor v = 0.8 * x;
        for (std::int64_t i = 0; i < v.size(); ++i) v[i] += 0.1 * t;
        return v;
    };

    SUBCASE("single tile equals the plain Euler step") {
        TilePlan plan = plan_tiles(16, 16, 16, 16, 8, 8);
        LatentTensor x = rng.normal_tensor(Shape{1, 16, 16, 2});
        LatentTensor noise = rng.normal_tensor(Shape{1, 16, 16, 2});
        LatentTensor got = tiled_denoise_step(model, nullptr, x, plan, kernel, noise, 0.8, 0.25);
        LatentTensor want = x;
        axpy(want, -0.25, model(x, nullptr, 0.8, 0.25));
        CHECK(max_abs_diff(got, want) < 1e-12);
    }

    SUBCASE("spatially invariant model: tiled equals untiled") {
        TilePlan plan = plan_tiles(24, 24, 16, 16, 8, 8);
        LatentTensor x = rng.normal_tensor(Shape{2, 24, 24, 1});
        LatentTensor noise = rng.normal_tensor(Shape{2, 16, 16, 1});
        LatentTensor got = tiled_denoise_step(model, nullptr, x, plan, kernel, noise, 0.6, 0.5);
        LatentTensor want = x;
        axpy(want, -0.5, model(x, nullptr, 0.6, 0.5));
        CHECK(max_abs_diff(got, want) <= 1e-9);
    }

    SUBCASE("conditioning tiles are cropped alongside the state") {
        TilePlan plan = plan_tiles(24, 24, 16, 16, 8, 8);
        TileVelocityFn uses_cond = [](const LatentTensor& x, const LatentTensor* c, double, double) {
            REQUIRE(c != nullptr);
            REQUIRE(c->shape() == x.shape());
            LatentTensor v = x;
            axpy(v, -1.0, *c);  // v = x - cond, still pointwise
            return v;
        };
        LatentTensor x = rng.normal_tensor(Shape{1, 24, 24, 1});
        LatentTensor cond = rng.normal_tensor(Shape{1, 24, 24, 1});
        LatentTensor noise = rng.normal_tensor(Shape{1, 16, 16, 1});
        LatentTensor got = tiled_denoise_step(uses_cond, &cond, x, plan, kernel, noise, 0.5, 0.5);
        LatentTensor want = x;
        LatentTensor v = x;
        axpy(v, -1.0, cond);
        axpy(want, -0.5, v);
        CHECK(max_abs_diff(got, want) <= 1e-9);
    }

    SUBCASE("separate step and conditioning widths") {
        TilePlan plan = plan_tiles(16, 16, 16, 16, 8, 8);
        double seen_d = -1.0;
        TileVelocityFn probe = [&](const LatentTensor& x, const LatentTensor*, double, double d) {
            seen_d = d;
            return LatentTensor::zeros(x.shape());
        };
        LatentTensor x = rng.normal_tensor(Shape{1, 16, 16, 1});
        LatentTensor noise = rng.normal_tensor(Shape{1, 16, 16, 1});
        tiled_denoise_step(probe, nullptr, x, plan, kernel, noise, 0.9, 0.25, 0.1);
        CHECK(seen_d == 0.25);  // model sees d_cond, the state moves by d_step
    }

    SUBCASE("shape validation") {
        TilePlan plan = plan_tiles(24, 24, 16, 16, 8, 8);
        LatentTensor x = rng.normal_tensor(Shape{1, 16, 16, 1});  // wrong extent
        LatentTensor noise = rng.normal_tensor(Shape{1, 16, 16, 1});
        CHECK_THROWS(tiled_denoise_step(model, nullptr, x, plan, kernel, noise, 0.5, 0.5));
        LatentTensor ok = rng.normal_tensor(Shape{1, 24, 24, 1});
        LatentTensor bad_noise = rng.normal_tensor(Shape{1, 8, 8, 1});
        CHECK_THROWS(tiled_denoise_step(model, nullptr, ok, plan, kernel, bad_noise, 0.5, 0.5));
    }
}

TEST_CASE("tiled_sample") {
    TilePlan plan = plan_tiles(24, 24, 16, 16, 8, 8);
    BlendKernel kernel = gaussian_kernel(16, 16, 8.0);
    TileVelocityFn model = [](const LatentTensor& x, const LatentTensor*, double, double) {
        return 0.5 * x;
    };
    const Shape shape{1, 24, 24, 2};
    const std::vector<double> times{1.0, 0.5, 0.25, 0.0};
    TiledSampleConfig cfg;

    SUBCASE("deterministic under the seed") {
        Rng ra(60), rb(60), rc(61);
        LatentTensor a = tiled_sample(model, nullptr, shape, plan, kernel, times, cfg, ra);
        LatentTensor b = tiled_sample(model, nullptr, shape, plan, kernel, times, cfg, rb);
        LatentTensor c = tiled_sample(model, nullptr, shape, plan, kernel, times, cfg, rc);
        CHECK(max_abs_diff(a, b) == 0.0);
        CHECK(max_abs_diff(a, c) > 0.0);
    }

    SUBCASE("noise modes produce different runs") {
        TiledSampleConfig cropped = cfg;
        cropped.noise_mode = NoiseMode::cropped_field;
        Rng ra(60), rb(60);
        LatentTensor shared = tiled_sample(model, nullptr, shape, plan, kernel, times, cfg, ra);
        LatentTensor field = tiled_sample(model, nullptr, shape, plan, kernel, times, cropped, rb);
        CHECK(max_abs_diff(shared, field) > 0.0);
    }

    SUBCASE("time grid validation") {
        Rng r(62);
        CHECK_THROWS(tiled_sample(model, nullptr, shape, plan, kernel, {1.0}, cfg, r));
        CHECK_THROWS(tiled_sample(model, nullptr, shape, plan, kernel, {0.5, 0.5}, cfg, r));
    }
}

TEST_CASE("plan_segments") {
    SUBCASE("whole clip fits in one segment") {
        CHECK(plan_segments(49, 49).starts == std::vector<int>{0});
    }
    SUBCASE("89 frames: starts 0 and 40, overlap exactly the minimum 9") {
        SegmentPlan plan = plan_segments(89, 49);
        CHECK(plan.starts == std::vector<int>{0, 40});
        CHECK(plan.starts[0] + 49 - plan.starts[1] == 9);
    }
    SUBCASE("97 frames: final segment shifted inward") {
        SegmentPlan plan = plan_segments(97, 49);
        CHECK(plan.starts == std::vector<int>{0, 40, 48});
    }
    SUBCASE("structural invariants across clip lengths") {
        for (int frames : {49, 57, 89, 97, 137, 201}) {
            SegmentPlan plan = plan_segments(frames, 49);
            CHECK(plan.starts.front() == 0);
            CHECK(plan.starts.back() + 49 == frames);
            for (std::size_t i = 0; i < plan.starts.size(); ++i) {
                CHECK(plan.starts[i] % 8 == 0);
                if (i > 0) {
                    CHECK(plan.starts[i] > plan.starts[i - 1]);
                    CHECK(plan.starts[i - 1] + 49 - plan.starts[i] >= 9);
                }
            }
        }
    }
    SUBCASE("rejects malformed inputs") {
        CHECK_THROWS(plan_segments(41, 49));   // shorter than one segment
        CHECK_THROWS(plan_segments(90, 49));   // F not 8k + 1
        CHECK_THROWS(plan_segments(89, 48));   // L not 8k + 1
        CHECK_THROWS(plan_segments(89, 49, 48));  // overlap leaves no stride
        CHECK_THROWS(plan_segments(89, 49, 0));
    }
}

namespace {

// encode each planned segment of a clip separately
std::vector<LatentTensor> encode_segments(const VideoClip& clip, const SegmentPlan& plan,
                                          const CodecConfig& cfg) {
    std::vector<LatentTensor> out;
    for (int start : plan.starts) {
        LatentTensor part = clip.frames.time_slice(start, start + plan.segment_length);
        out.push_back(encode(VideoClip(std::move(part), cfg), cfg));
    }
    return out;
}

}  // namespace

TEST_CASE("segment fusion reproduces the whole-clip encode exactly") {
    CodecConfig cfg;
    for (int frames : {49, 89, 97}) {
        CAPTURE(frames);
        Rng rng(70 + frames);
        VideoClip clip = synth_moving_clip(frames, 8, 8, 1, rng);
        LatentTensor whole = encode(clip, cfg);
        SegmentPlan plan = plan_segments(frames, 49);
        std::vector<LatentTensor> segments = encode_segments(clip, plan, cfg);
        for (OverlapMerge merge : {OverlapMerge::linear_ramp, OverlapMerge::plain_average}) {
            FusionReport report = fuse_segments(segments, plan, cfg, merge);
            CHECK(max_abs_diff(report.fused, whole) == 0.0);
        }
    }
}

TEST_CASE("segment fusion bookkeeping for 89 frames") {
    CodecConfig cfg;
    Rng rng(71);
    VideoClip clip = synth_moving_clip(89, 8, 8, 1, rng);
    SegmentPlan plan = plan_segments(89, 49);
    FusionReport report = fuse_segments(encode_segments(clip, plan, cfg), plan, cfg);

    REQUIRE(report.fused.shape().t == 12);
    REQUIRE(report.contributors.size() == 12);

    // positions 0..5: segment 0 alone
    for (int pos = 0; pos <= 5; ++pos) {
        REQUIRE(report.contributors[pos].size() == 1);
        CHECK(report.contributors[pos][0].segment == 0);
        CHECK(report.contributors[pos][0].source_position == pos);
        CHECK(report.contributors[pos][0].weight == 1.0);
    }
    // position 6 (frames 41..48): shared, plain 50/50 crossfade
    REQUIRE(report.contributors[6].size() == 2);
    CHECK(report.contributors[6][0].segment == 0);
    CHECK(report.contributors[6][0].source_position == 6);
    CHECK(report.contributors[6][0].weight == 0.5);
    CHECK(report.contributors[6][1].segment == 1);
    CHECK(report.contributors[6][1].source_position == 1);
    CHECK(report.contributors[6][1].weight == 0.5);
    // positions 7..11: segment 1's video latents 2..6
    for (int pos = 7; pos <= 11; ++pos) {
        REQUIRE(report.contributors[pos].size() == 1);
        CHECK(report.contributors[pos][0].segment == 1);
        CHECK(report.contributors[pos][0].source_position == pos - 5);
        CHECK(report.contributors[pos][0].weight == 1.0);
    }
    // a later segment's first-frame latent never reaches the output
    for (const auto& entries : report.contributors)
        for (const SegmentContribution& contrib : entries)
            CHECK((contrib.segment == 0 || contrib.source_position >= 1));
}

TEST_CASE("overlap merge modes differ only where the ramp is uneven") {
    CodecConfig cfg;
    SegmentPlan plan = plan_segments(97, 49);
    // three independent random "latents" so the overlap values disagree
    Rng rng(72);
    std::vector<LatentTensor> segments;
    for (int i = 0; i < 3; ++i) segments.push_back(rng.normal_tensor(Shape{7, 2, 2, 4}));

    FusionReport ramp = fuse_segments(segments, plan, cfg, OverlapMerge::linear_ramp);
    FusionReport plain = fuse_segments(segments, plan, cfg, OverlapMerge::plain_average);

    // segment 2 (start 48) overlaps positions 7..11; the ramp weights there
    // are k/6 and only the middle one coincides with the plain 1/2
    for (int pos : {0, 1, 2, 3, 4, 5, 6, 9, 12}) {
        CAPTURE(pos);
        CHECK(max_abs_diff(ramp.fused.time_slice(pos, pos + 1),
                           plain.fused.time_slice(pos, pos + 1)) == 0.0);
    }
    for (int pos : {7, 8, 10, 11}) {
        CAPTURE(pos);
        CHECK(max_abs_diff(ramp.fused.time_slice(pos, pos + 1),
                           plain.fused.time_slice(pos, pos + 1)) > 0.0);
    }

    // ramp weights at the five overlapping positions
    for (int pos = 7; pos <= 11; ++pos) {
        const auto& entries = ramp.contributors[pos];
        REQUIRE(entries.size() == 2);
        CHECK(entries.back().weight == doctest::Approx((pos - 6) / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("fuse_segments input validation") {
    CodecConfig cfg;
    SegmentPlan plan = plan_segments(89, 49);
    Rng rng(73);
    std::vector<LatentTensor> one{rng.normal_tensor(Shape{7, 2, 2, 4})};
    CHECK_THROWS(fuse_segments(one, plan, cfg));  // needs two segments
    std::vector<LatentTensor> wrong{rng.normal_tensor(Shape{6, 2, 2, 4}),
                                    rng.normal_tensor(Shape{6, 2, 2, 4})};
    CHECK_THROWS(fuse_segments(wrong, plan, cfg));  // wrong time extent
    std::vector<LatentTensor> mixed{rng.normal_tensor(Shape{7, 2, 2, 4}),
                                    rng.normal_tensor(Shape{7, 2, 2, 2})};
    CHECK_THROWS(fuse_segments(mixed, plan, cfg));  // inconsistent shapes
}
