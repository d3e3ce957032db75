// Python bindings for the main operations: codec, schedules, tiling/fusion,
// conditioning and the toy training loop. Tensors cross the boundary as 4-D
// (t, h, w, c) float64 numpy arrays; sample populations as (n, dim) arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fewstep/conditioning.hpp"
#include "fewstep/experiments.hpp"
#include "fewstep/mmd.hpp"
#include "fewstep/models.hpp"
#include "fewstep/tiling.hpp"

namespace py = pybind11;
using namespace fewstep;

namespace {

LatentTensor tensor_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 4)
        throw std::invalid_argument("expected a 4-D (t, h, w, c) array, got ndim=" +
                                    std::to_string(arr.ndim()));
    Shape shape{static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3))};
    LatentTensor out(shape);
    std::copy(arr.data(), arr.data() + out.size(), out.data());
    return out;
}

py::array_t<double> tensor_to_numpy(const LatentTensor& t) {
    const Shape& s = t.shape();
    py::array_t<double> arr({s.t, s.h, s.w, s.c});
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

Eigen::MatrixXd points_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected an (n, dim) array");
    const int n = static_cast<int>(arr.shape(0));
    const int dim = static_cast<int>(arr.shape(1));
    Eigen::MatrixXd m(dim, n);  // columns are points internally
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) m(j, i) = arr.at(i, j);
    return m;
}

py::array_t<double> points_to_numpy(const Eigen::MatrixXd& m) {
    py::array_t<double> arr({static_cast<int>(m.cols()), static_cast<int>(m.rows())});
    for (int i = 0; i < m.cols(); ++i)
        for (int j = 0; j < m.rows(); ++j) arr.mutable_at(i, j) = m(j, i);
    return arr;
}

}  // namespace

PYBIND11_MODULE(fewstep, m) {
    m.doc() = "few-step latent sampling toolkit";
    m.attr("__version__") = kVersionString;

    // ---- codec ----
    py::class_<CodecConfig>(m, "CodecConfig")
        .def(py::init([](int spatial_factor, int channel_expand) {
                 CodecConfig cfg;
                 cfg.spatial_factor = spatial_factor;
                 cfg.channel_expand = channel_expand;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("spatial_factor") = 4, py::arg("channel_expand") = 4)
        .def_readonly("spatial_factor", &CodecConfig::spatial_factor)
        .def_readonly("temporal_factor", &CodecConfig::temporal_factor)
        .def_readonly("channel_expand", &CodecConfig::channel_expand);

    m.def("latent_frames", &latent_frames, py::arg("input_frames"), py::arg("config"));
    m.def("pixels_per_latent", &pixels_per_latent, py::arg("config"));
    m.def(
        "encode",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           const CodecConfig& cfg) {
            return tensor_to_numpy(encode(VideoClip(tensor_from_numpy(clip), cfg), cfg));
        },
        py::arg("clip"), py::arg("config"));
    m.def(
        "decode",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& latent,
           const CodecConfig& cfg) { return tensor_to_numpy(decode(tensor_from_numpy(latent), cfg).frames); },
        py::arg("latent"), py::arg("config"));
    m.def(
        "degrade",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clip,
           const CodecConfig& cfg, double strength, std::uint64_t seed) {
            Rng rng(seed);
            return tensor_to_numpy(degrade(VideoClip(tensor_from_numpy(clip), cfg), strength, rng).frames);
        },
        py::arg("clip"), py::arg("config"), py::arg("strength"), py::arg("seed") = 0);

    // ---- schedules ----
    py::class_<StepSizeSet>(m, "StepSizeSet")
        .def_static("make", &StepSizeSet::make,
                    py::arg("scales") = std::vector<double>{0.6, 0.7, 0.8, 0.9, 1.0},
                    py::arg("max_exponent") = 7)
        .def_static("dyadic", &StepSizeSet::dyadic, py::arg("max_exponent") = 7)
        .def_readonly("members", &StepSizeSet::members)
        .def("min", &StepSizeSet::min)
        .def("max", &StepSizeSet::max);

    m.def(
        "shift_time", [](double u, double shift) { return shift_time(u, ShiftConfig{shift}); },
        py::arg("u"), py::arg("shift") = 3.0);
    m.def(
        "shift_time_inverse",
        [](double t, double shift) { return shift_time_inverse(t, ShiftConfig{shift}); },
        py::arg("t"), py::arg("shift") = 3.0);
    m.def("nearest_step", &nearest_step, py::arg("d_requested"), py::arg("step_set"));
    m.def(
        "plan_shortcut_path",
        [](int n_steps, const StepSizeSet& set, double shift) {
            std::vector<std::tuple<double, double, double>> out;
            for (const PathStep& s : plan_shortcut_path(n_steps, set, ShiftConfig{shift}))
                out.emplace_back(s.t, s.d_cond, s.d_step);
            return out;
        },
        py::arg("n_steps"), py::arg("step_set"), py::arg("shift") = 3.0,
        "Planned (t, d_cond, d_step) rows of the few-step sampling path.");

    // ---- tiling / segments ----
    m.def(
        "plan_tiles",
        [](int extent_h, int extent_w, int tile, int min_overlap) {
            std::vector<std::tuple<int, int, int, int>> out;
            for (const TileRect& r : plan_tiles(extent_h, extent_w, tile, tile, min_overlap, min_overlap).tiles)
                out.emplace_back(r.y, r.x, r.h, r.w);
            return out;
        },
        py::arg("extent_h"), py::arg("extent_w"), py::arg("tile"), py::arg("min_overlap"),
        "Tile rectangles as (y, x, h, w) rows.");
    m.def(
        "plan_segments",
        [](int frames, int segment_length, int min_overlap) {
            return plan_segments(frames, segment_length, min_overlap).starts;
        },
        py::arg("frames"), py::arg("segment_length"), py::arg("min_overlap") = 9);
    m.def(
        "fuse_segments",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& latents,
           int frames, int segment_length, const CodecConfig& cfg) {
            std::vector<LatentTensor> ts;
            ts.reserve(latents.size());
            for (const auto& a : latents) ts.push_back(tensor_from_numpy(a));
            const SegmentPlan plan = plan_segments(frames, segment_length);
            return tensor_to_numpy(fuse_segments(ts, plan, cfg).fused);
        },
        py::arg("segment_latents"), py::arg("frames"), py::arg("segment_length"), py::arg("config"));

    // ---- conditioning ----
    m.def(
        "cross_normalize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& cond, double mean,
           double std) {
            return tensor_to_numpy(cross_normalize(tensor_from_numpy(cond), HiddenStats{mean, std}));
        },
        py::arg("cond"), py::arg("mean"), py::arg("std"));
    m.def(
        "inject",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& hidden,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& cond) {
            return tensor_to_numpy(inject(tensor_from_numpy(hidden), tensor_from_numpy(cond)));
        },
        py::arg("hidden"), py::arg("cond_normalized"));
    m.def("cosine_alpha_bar", &cosine_alpha_bar, py::arg("level"));

    // ---- oracles ----
    py::class_<GaussianOracle>(m, "GaussianOracle")
        .def(py::init<double>(), py::arg("sigma"))
        .def("alpha", &GaussianOracle::alpha, py::arg("t"))
        .def("marginal_var", &GaussianOracle::marginal_var, py::arg("t"))
        .def(
            "evaluate",
            [](const GaussianOracle& o,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double t,
               double d) { return tensor_to_numpy(o.evaluate(tensor_from_numpy(x), t, d)); },
            py::arg("x"), py::arg("t"), py::arg("d") = 0.0);

    // ---- toy training / sampling ----
    py::class_<TrainedToy>(m, "TrainedToy")
        .def_property_readonly("variant",
                               [](const TrainedToy& r) { return variant_name(r.config.variant); })
        .def_property_readonly("final_flow_loss",
                               [](const TrainedToy& r) { return r.report.final_flow_loss; })
        .def_property_readonly("final_sc_loss",
                               [](const TrainedToy& r) { return r.report.final_sc_loss; })
        .def(
            "sample",
            [](const TrainedToy& r, int n_steps, int n_samples, std::uint64_t seed) {
                Rng rng(seed);
                return points_to_numpy(sample_with_recipe(r.model, r.config, n_steps, n_samples, rng));
            },
            py::arg("n_steps"), py::arg("n_samples"), py::arg("seed") = 123,
            "Few-step samples as an (n, 2) array.");

    m.def(
        "train_toy",
        [](const std::string& variant, std::uint64_t seed, int total_steps) {
            ToyRunConfig cfg = make_toy_config(parse_variant(variant), seed);
            if (total_steps >= 0) cfg.train.total_steps = total_steps;
            return train_toy(cfg);
        },
        py::arg("variant") = "shortcut", py::arg("seed") = 7, py::arg("total_steps") = -1,
        "Train a toy mixture model; total_steps < 0 keeps the recipe default.");

    // ---- metrics ----
    m.def(
        "median_bandwidth",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points) {
            return median_heuristic_bandwidth(points_from_numpy(points));
        },
        py::arg("points"));
    m.def(
        "mmd",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
           double bandwidth) { return mmd_biased(points_from_numpy(x), points_from_numpy(y), bandwidth); },
        py::arg("x"), py::arg("y"), py::arg("bandwidth"));
}
