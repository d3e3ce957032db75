#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "fewstep/data.hpp"
#include "fewstep/experiments.hpp"
#include "fewstep/io.hpp"
#include "fewstep/mmd.hpp"
#include "fewstep/rng.hpp"
#include "fewstep/tensor.hpp"

using namespace fewstep;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("fewstep_misc_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("tensor layout: channels fastest, then x, y, t") {
    LatentTensor t(Shape{2, 3, 4, 5});
    REQUIRE(t.size() == 2 * 3 * 4 * 5);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    CHECK(t.at(0, 0, 0, 0) == 0.0);
    CHECK(t.at(0, 0, 0, 1) == 1.0);
    CHECK(t.at(0, 0, 1, 0) == 5.0);
    CHECK(t.at(0, 1, 0, 0) == 20.0);
    CHECK(t.at(1, 0, 0, 0) == 60.0);
    CHECK(t.at(1, 2, 3, 4) == 119.0);
}

TEST_CASE("tensor slicing and pasting") {
    Rng rng(1);
    LatentTensor t = rng.normal_tensor(Shape{3, 4, 4, 2});

    LatentTensor mid = t.time_slice(1, 3);
    REQUIRE(mid.shape() == Shape{2, 4, 4, 2});
    CHECK(mid.at(0, 2, 3, 1) == t.at(1, 2, 3, 1));
    CHECK(mid.at(1, 0, 0, 0) == t.at(2, 0, 0, 0));

    LatentTensor f = t.frame(2);
    REQUIRE(f.shape().t == 1);
    CHECK(f.at(0, 1, 1, 0) == t.at(2, 1, 1, 0));

    LatentTensor patched = t;
    patched.set_time_slice(0, LatentTensor::full(Shape{1, 4, 4, 2}, 7.0));
    CHECK(patched.at(0, 3, 3, 1) == 7.0);
    CHECK(patched.at(1, 3, 3, 1) == t.at(1, 3, 3, 1));

    LatentTensor corner = t.crop(1, 2, 3, 2);
    REQUIRE(corner.shape() == Shape{3, 3, 2, 2});
    CHECK(corner.at(0, 0, 0, 0) == t.at(0, 1, 2, 0));
    CHECK(corner.at(2, 2, 1, 1) == t.at(2, 3, 3, 1));

    LatentTensor back = t;
    back.paste(1, 2, corner);
    double diff = 0.0;
    for (std::int64_t i = 0; i < t.size(); ++i) diff = std::max(diff, std::abs(back[i] - t[i]));
    CHECK(diff == 0.0);

    CHECK_THROWS(t.time_slice(2, 1));
    CHECK_THROWS(t.time_slice(0, 4));
    CHECK_THROWS(t.crop(2, 2, 3, 2));  // overruns the height
}

TEST_CASE("tensor arithmetic and statistics") {
    LatentTensor a(Shape{1, 1, 2, 2});
    LatentTensor b(Shape{1, 1, 2, 2});
    for (int i = 0; i < 4; ++i) {
        a[i] = i + 1.0;  // 1 2 3 4
        b[i] = 10.0;
    }

    LatentTensor sum = a + b;
    CHECK(sum[3] == 14.0);
    LatentTensor diff = a - b;
    CHECK(diff[0] == -9.0);
    LatentTensor scaled = 0.5 * a;
    CHECK(scaled[1] == 1.0);

    LatentTensor acc = a;
    acc += b;
    CHECK(acc[2] == 13.0);
    axpy(acc, -2.0, b);
    CHECK(acc[2] == -7.0);

    CHECK(a.mean() == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(a.variance() == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(a.max_abs() == 4.0);
    CHECK(a.all_finite());
    LatentTensor bad = a;
    bad[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(bad.all_finite());

    LatentTensor other(Shape{1, 1, 4, 1});
    CHECK_THROWS(a + other);
    CHECK_THROWS(require_same_shape(a, other, "test"));
}

TEST_CASE("rng streams") {
    SUBCASE("deterministic per seed") {
        Rng a(7), b(7), c(8);
        for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
        bool differs = false;
        Rng a2(7);
        for (int i = 0; i < 100; ++i) differs = differs || (a2.normal() != c.normal());
        CHECK(differs);
    }
    SUBCASE("uniform range and integer draws") {
        Rng r(9);
        for (int i = 0; i < 10000; ++i) {
            const double u = r.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
        }
        for (int i = 0; i < 1000; ++i) CHECK(r.uniform_int(6) < 6);
    }
    SUBCASE("normal moments") {
        Rng r(10);
        double sum = 0.0, sq = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double v = r.normal();
            sum += v;
            sq += v * v;
        }
        const double mean = sum / n;
        CHECK(std::abs(mean) < 0.02);
        CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("forks ignore the parent's draw position") {
        Rng parent(20);
        Rng early = parent.fork(3);
        for (int i = 0; i < 57; ++i) parent.normal();
        Rng late = parent.fork(3);
        for (int i = 0; i < 20; ++i) CHECK(early.normal() == late.normal());
    }
    SUBCASE("distinct streams decorrelate") {
        Rng parent(20);
        Rng s1 = parent.fork(1);
        Rng s2 = parent.fork(2);
        bool differs = false;
        for (int i = 0; i < 20; ++i) differs = differs || (s1.normal() != s2.normal());
        CHECK(differs);
    }
    SUBCASE("normal_tensor matches sequential draws") {
        Rng a(21), b(21);
        LatentTensor t = a.normal_tensor(Shape{1, 2, 2, 1});
        for (int i = 0; i < 4; ++i) CHECK(t[i] == b.normal());
    }
}

TEST_CASE("tensor files round-trip bitwise with a shape sidecar") {
    fs::path dir = fresh_dir("tensor");
    Rng rng(30);
    LatentTensor t = rng.normal_tensor(Shape{3, 5, 4, 2});
    const std::string path = (dir / "a.bin").string();
    write_tensor(path, t);

    nlohmann::json sidecar = read_json(path + ".json");
    CHECK(sidecar.at("shape") == nlohmann::json({3, 5, 4, 2}));
    CHECK(sidecar.at("dtype") == "float64");

    LatentTensor back = read_tensor(path);
    REQUIRE(back.shape() == t.shape());
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);

    // truncated payload is rejected
    const std::string cut = (dir / "b.bin").string();
    write_tensor(cut, t);
    atomic_write_bytes(cut, std::string(16, '\0'));
    CHECK_THROWS(read_tensor(cut));
    fs::remove_all(dir);
}

TEST_CASE("format_double survives the round trip") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1.7976931348623157e308, 3.0, 0.0,
                     0.30000000000000004}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(3.0) == "3");
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("csv writes are byte-stable") {
    fs::path dir = fresh_dir("csv");
    const std::vector<std::string> header{"step", "loss"};
    const std::vector<std::vector<double>> rows{{1.0, 0.125}, {2.0, 1.0 / 3.0}};
    const std::string a = (dir / "a.csv").string();
    const std::string b = (dir / "b.csv").string();
    write_csv(a, header, rows);
    write_csv(b, header, rows);
    const std::string bytes = slurp(a);
    CHECK(bytes == slurp(b));
    CHECK(bytes.rfind("step,loss\n", 0) == 0);
    CHECK(bytes.find("0.3333333333333333") != std::string::npos);

    CHECK_THROWS(write_csv(a, header, {{1.0}}));  // ragged row

    write_csv_text(a, {"name", "value"}, {{"x", "1"}, {"y", "two"}});
    CHECK(slurp(a) == "name,value\nx,1\ny,two\n");
    fs::remove_all(dir);
}

TEST_CASE("atomic writers leave no temp litter") {
    fs::path dir = fresh_dir("atomic");
    atomic_write_text((dir / "t.txt").string(), "hello\n");
    CHECK(slurp(dir / "t.txt") == "hello\n");
    atomic_write_text((dir / "t.txt").string(), "rewritten\n");
    CHECK(slurp(dir / "t.txt") == "rewritten\n");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    fs::remove_all(dir);
}

TEST_CASE("json files round trip") {
    fs::path dir = fresh_dir("json");
    nlohmann::json j{{"name", "run"}, {"steps", 400}, {"lr", 3e-4}, {"tags", {"a", "b"}}};
    const std::string path = (dir / "m.json").string();
    write_json(path, j);
    CHECK(read_json(path) == j);
    CHECK_THROWS(read_json((dir / "missing.json").string()));
    fs::remove_all(dir);
}

TEST_CASE("parameter files carry their descriptor") {
    fs::path dir = fresh_dir("params");
    Eigen::VectorXd p(5);
    p << 0.1, -2.0, 1.0 / 3.0, 4.0, -5.5;
    nlohmann::json desc{{"layers", 3}, {"dim", 2}};
    const std::string path = (dir / "params.bin").string();
    write_params(path, p, desc);

    nlohmann::json got_desc;
    Eigen::VectorXd back = read_params(path, &got_desc);
    REQUIRE(back.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(back[i] == p[i]);
    CHECK(got_desc.at("layers") == 3);
    CHECK(got_desc.at("dim") == 2);

    atomic_write_text(path, "not a parameter file");
    CHECK_THROWS(read_params(path));
    fs::remove_all(dir);
}

TEST_CASE("mmd basics") {
    Rng rng(40);
    Eigen::MatrixXd x(2, 500);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Eigen::MatrixXd y(2, 500);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();

    const double h = median_heuristic_bandwidth(x);
    CHECK(h > 0.0);
    CHECK(h == median_heuristic_bandwidth(x));  // deterministic

    CHECK(mmd_biased(x, x, h) < 1e-8);
    CHECK(mmd_biased(x, y, h) == doctest::Approx(mmd_biased(y, x, h)).epsilon(1e-12));

    // same distribution: small; shifted clone: large
    CHECK(mmd_biased(x, y, h) < 0.2);
    Eigen::MatrixXd far = x;
    far.row(0).array() += 10.0;
    CHECK(mmd_biased(x, far, h) > 0.5);

    // median of pairwise distances for three 1-D points 0, 1, 3: {1, 2, 3}
    Eigen::MatrixXd tiny(1, 3);
    tiny << 0.0, 1.0, 3.0;
    CHECK(median_heuristic_bandwidth(tiny) == 2.0);
}

TEST_CASE("two-mode mixture population") {
    GaussianMixture2D mix = GaussianMixture2D::two_modes();
    REQUIRE(mix.means().size() == 2);
    CHECK(mix.means()[0].cwiseAbs()(0) == 1.2);
    CHECK(mix.means()[1].cwiseAbs()(1) == 1.2);
    CHECK(mix.std_dev() == 0.3);

    Rng rng(41);
    const int n = 20000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d v = mix.draw_data(rng);
        sum += v;
        sq += v.cwiseProduct(v);
    }
    Eigen::Vector2d mean = sum / n;
    Eigen::Vector2d var = sq / n - mean.cwiseProduct(mean);
    for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(mean[k]) < 0.05);
        // mixture variance per coordinate: 0.3^2 + 1.2^2
        CHECK(var[k] == doctest::Approx(1.53).epsilon(0.05));
    }

    auto [data, noise] = mix.draw(rng);
    CHECK(data.shape() == Shape{1, 1, 1, 2});
    CHECK(noise.shape() == Shape{1, 1, 1, 2});
    double nsq = 0.0;
    for (int i = 0; i < 5000; ++i) {
        auto [d2, n2] = mix.draw(rng);
        nsq += n2[0] * n2[0] + n2[1] * n2[1];
    }
    CHECK(nsq / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("synthetic clips are deterministic and finite") {
    Rng a(42), b(42);
    VideoClip ca = synth_moving_clip(17, 12, 8, 2, a);
    VideoClip cb = synth_moving_clip(17, 12, 8, 2, b);
    REQUIRE(ca.frames.shape() == Shape{17, 12, 8, 2});
    CHECK(ca.frames.all_finite());
    double diff = 0.0;
    for (std::int64_t i = 0; i < ca.frames.size(); ++i)
        diff = std::max(diff, std::abs(ca.frames[i] - cb.frames[i]));
    CHECK(diff == 0.0);
    CHECK(ca.frames.variance() > 0.0);
}

TEST_CASE("variant names round trip") {
    for (ToyVariant v : {ToyVariant::baseline, ToyVariant::shortcut_uniform,
                         ToyVariant::shortcut_nonuniform}) {
        CHECK(parse_variant(variant_name(v)) == v);
    }
    CHECK(parse_variant("shortcut") == ToyVariant::shortcut_nonuniform);
    CHECK_THROWS(parse_variant("unknown-variant"));
}

TEST_CASE("toy run config round trips through json") {
    for (ToyVariant v : {ToyVariant::baseline, ToyVariant::shortcut_uniform,
                         ToyVariant::shortcut_nonuniform}) {
        ToyRunConfig cfg = make_toy_config(v, 17);
        cfg.seed = 17;
        cfg.train.total_steps = 123;
        cfg.train.flow_fraction = 0.5;
        cfg.shift = 2.25;
        ToyRunConfig back = toy_config_from_json(toy_config_to_json(cfg));
        CHECK(back.variant == cfg.variant);
        CHECK(back.seed == 17);
        CHECK(back.train.total_steps == 123);
        CHECK(back.train.flow_fraction == 0.5);
        CHECK(back.shift == 2.25);
        CHECK(back.scales == cfg.scales);
        CHECK(back.net.hidden == cfg.net.hidden);
    }
}

TEST_CASE("trailing_loss averages the last records of one kind") {
    TrainReport report;
    report.trace = {{0, 'f', 4.0}, {1, 's', 10.0}, {2, 'f', 2.0},
                    {3, 's', 20.0}, {4, 'f', 1.0}};
    CHECK(trailing_loss(report, 'f', 2) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(trailing_loss(report, 'f', 10) == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
    CHECK(trailing_loss(report, 's', 1) == 20.0);
    CHECK(trailing_loss(report, 'x', 3) == 0.0);
}
