#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fewstep/schedule.hpp"

using namespace fewstep;

TEST_CASE("step size set members match brute-force enumeration") {
    StepSizeSet set = StepSizeSet::make();
    // independent enumeration
    std::set<double> expect;
    for (double T : {0.6, 0.7, 0.8, 0.9, 1.0})
        for (int k = 0; k <= 7; ++k) expect.insert(T * std::pow(2.0, -k));
    CHECK(set.members.size() == expect.size());
    CHECK(std::is_sorted(set.members.begin(), set.members.end()));
    auto it = expect.begin();
    for (double m : set.members) {
        CHECK(m == doctest::Approx(*it).epsilon(1e-12));
        ++it;
    }
    CHECK(set.min() == doctest::Approx(0.6 / 128.0));
    CHECK(set.max() == 1.0);
}

TEST_CASE("degenerate scale set collapses to the dyadic family") {
    StepSizeSet uni = StepSizeSet::make({1.0}, 7);
    StepSizeSet dyadic = StepSizeSet::dyadic(7);
    REQUIRE(uni.members.size() == 8);
    REQUIRE(dyadic.members.size() == 8);
    for (int k = 0; k < 8; ++k) {
        CHECK(uni.members[k] == dyadic.members[k]);
        CHECK(uni.members[k] == std::pow(2.0, k - 7));
    }
}

TEST_CASE("near-duplicate members collapse") {
    // 0.5*2^0 == 1.0*2^-1
    StepSizeSet set = StepSizeSet::make({0.5, 1.0}, 2);
    std::set<double> expect;
    for (double T : {0.5, 1.0})
        for (int k = 0; k <= 2; ++k) expect.insert(T * std::pow(2.0, -k));
    CHECK(set.members.size() == expect.size());
}

TEST_CASE("uniform_time_grid") {
    CHECK(uniform_time_grid(1) == std::vector<double>{0.0});
    CHECK(uniform_time_grid(4) == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    std::vector<double> g8 = uniform_time_grid(8);
    REQUIRE(g8.size() == 8);
    for (int m = 0; m < 8; ++m) CHECK(g8[m] == doctest::Approx(m / 8.0));
    CHECK_THROWS(uniform_time_grid(0));
}

TEST_CASE("shift_time map") {
    ShiftConfig s3{3.0};
    CHECK(shift_time(0.5, s3) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(shift_time(0.0, s3) == 0.0);
    CHECK(shift_time(1.0, s3) == 1.0);

    // strictly increasing and above the identity for s > 1
    double prev = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double u = i / 100.0;
        const double t = shift_time(u, s3);
        CHECK(t > prev);
        CHECK(t >= u);
        CHECK(shift_time_inverse(t, s3) == doctest::Approx(u).epsilon(1e-12));
        prev = t;
    }
    // s = 1 is the identity
    CHECK(shift_time(0.37, ShiftConfig{1.0}) == doctest::Approx(0.37));
    CHECK_THROWS(shift_time(-0.1, s3));
    CHECK_THROWS(shift_time(1.1, s3));
}

TEST_CASE("nearest_step selection and tie break") {
    StepSizeSet set = StepSizeSet::make();
    CHECK(nearest_step(0.3, set) == doctest::Approx(0.3));    // 0.6 * 2^-1
    CHECK(nearest_step(1.0, set) == 1.0);
    CHECK(nearest_step(0.33, set) == doctest::Approx(0.35));  // 0.7 * 2^-1

    // exact tie resolves to the smaller member
    StepSizeSet dyadic = StepSizeSet::dyadic();
    CHECK(nearest_step(0.375, dyadic) == doctest::Approx(0.25));

    // idempotent
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double d = 1e-3 + 0.999 * rng.uniform();
        const double once = nearest_step(d, set);
        CHECK(nearest_step(once, set) == once);
    }
}

TEST_CASE("sample_t_d uniform mode invariants") {
    StepSizeSet set = StepSizeSet::dyadic();
    ShiftConfig shift{1.0};
    Rng rng(11);
    std::set<double> dyadic(set.members.begin(), set.members.end());
    for (int i = 0; i < 20000; ++i) {
        TdSample s = sample_t_d(rng, set, shift, SamplerMode::uniform);
        CHECK(s.t >= 0.0);
        CHECK(s.t + 2.0 * s.d <= 1.0 + 1e-12);
        CHECK(dyadic.count(s.d) == 1);
    }
}

TEST_CASE("sample_t_d nonuniform mode invariants") {
    StepSizeSet set = StepSizeSet::make();
    ShiftConfig shift{3.0};
    Rng rng(12);
    auto is_member = [&](double d) {
        for (double m : set.members)
            if (std::abs(m - d) < 1e-12) return true;
        return false;
    };
    for (int i = 0; i < 100000; ++i) {
        TdSample s = sample_t_d(rng, set, shift, SamplerMode::nonuniform);
        CHECK(s.t >= 0.0);
        CHECK(s.t + 2.0 * s.d <= 1.0 + 1e-12);
        CHECK(is_member(s.d));
    }
}

TEST_CASE("sample_t_d mirrored orientation invariants") {
    StepSizeSet set = StepSizeSet::make();
    ShiftConfig shift{3.0};
    Rng rng(13);
    for (int i = 0; i < 20000; ++i) {
        TdSample s = sample_t_d(rng, set, shift, SamplerMode::nonuniform,
                                StepOrientation::toward_data);
        CHECK(s.t <= 1.0);
        CHECK(s.t - 2.0 * s.d >= -1e-12);
    }
}

TEST_CASE("sample_t_d replays bit-exactly") {
    StepSizeSet set = StepSizeSet::make();
    ShiftConfig shift{3.0};
    Rng a(99), b(99);
    for (int i = 0; i < 500; ++i) {
        TdSample sa = sample_t_d(a, set, shift, SamplerMode::nonuniform);
        TdSample sb = sample_t_d(b, set, shift, SamplerMode::nonuniform);
        CHECK(sa.t == sb.t);
        CHECK(sa.d == sb.d);
    }
}

TEST_CASE("degenerate scales make the nonuniform d-marginal match uniform mode") {
    StepSizeSet uni = StepSizeSet::dyadic();
    StepSizeSet degen = StepSizeSet::make({1.0}, 7);
    ShiftConfig none{1.0};

    auto histogram = [&](SamplerMode mode, const StepSizeSet& set, std::uint64_t seed) {
        std::map<double, int> h;
        Rng rng(seed);
        const int n = 100000;
        for (int i = 0; i < n; ++i) h[sample_t_d(rng, set, none, mode).d]++;
        std::map<double, double> freq;
        for (auto& [d, c] : h) freq[d] = static_cast<double>(c) / n;
        return freq;
    };

    auto fu = histogram(SamplerMode::uniform, uni, 5);
    auto fn = histogram(SamplerMode::nonuniform, degen, 6);
    CHECK(fu.size() == fn.size());
    for (auto& [d, p] : fu) {
        REQUIRE(fn.count(d) == 1);
        CHECK(std::abs(fn[d] - p) < 0.01);
    }
}

TEST_CASE("sample_flow_t draws from the configured grid") {
    ShiftConfig s3{3.0};
    Rng rng(21);
    // uniform mode: values are multiples of 1/128
    for (int i = 0; i < 2000; ++i) {
        const double t = sample_flow_t(rng, s3, SamplerMode::uniform);
        const double scaled = t * 128.0;
        CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
    }
    // nonuniform mode: values are shifted grid points
    for (int i = 0; i < 2000; ++i) {
        const double t = sample_flow_t(rng, s3, SamplerMode::nonuniform);
        const double u = shift_time_inverse(t, s3);
        const double scaled = u * 128.0;
        CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-6));
    }
}
