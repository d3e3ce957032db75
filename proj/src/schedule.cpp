#include "fewstep/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fewstep {

namespace {
constexpr int kGridPoints = 128;
constexpr int kMaxRedraws = 1000;
constexpr double kDedupTol = 1e-12;
}  // namespace

StepSizeSet StepSizeSet::make(std::vector<double> scales, int max_exponent) {
    if (scales.empty()) throw std::invalid_argument("StepSizeSet: empty scale list");
    if (max_exponent < 0) throw std::invalid_argument("StepSizeSet: negative max_exponent");
    for (double s : scales) {
        if (!(s > 0.0) || s > 1.0) throw std::invalid_argument("StepSizeSet: scales must lie in (0, 1]");
    }
    StepSizeSet set;
    set.scales = std::move(scales);
    set.max_exponent = max_exponent;
    for (double s : set.scales) {
        for (int k = 0; k <= max_exponent; ++k) {
            set.members.push_back(std::ldexp(s, -k));
        }
    }
    std::sort(set.members.begin(), set.members.end());
    std::vector<double> dedup;
    for (double m : set.members) {
        if (dedup.empty() || m - dedup.back() > kDedupTol) dedup.push_back(m);
    }
    set.members = std::move(dedup);
    return set;
}

StepSizeSet StepSizeSet::dyadic(int max_exponent) { return make({1.0}, max_exponent); }

double StepSizeSet::min() const { return members.front(); }
double StepSizeSet::max() const { return members.back(); }

double shift_time(double u, const ShiftConfig& cfg) {
    if (cfg.shift <= 0.0) throw std::invalid_argument("shift_time: shift must be positive");
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("shift_time: u must lie in [0, 1]");
    return cfg.shift * u / (1.0 + (cfg.shift - 1.0) * u);
}

double shift_time_inverse(double t, const ShiftConfig& cfg) {
    if (cfg.shift <= 0.0) throw std::invalid_argument("shift_time_inverse: shift must be positive");
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("shift_time_inverse: t must lie in [0, 1]");
    }
    return t / (cfg.shift - (cfg.shift - 1.0) * t);
}

std::vector<double> uniform_time_grid(int points) {
    if (points <= 0) throw std::invalid_argument("uniform_time_grid: points must be positive");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / points;
    return grid;
}

double nearest_step(double d_requested, const StepSizeSet& set) {
    if (set.members.empty()) throw std::invalid_argument("nearest_step: empty set");
    double best = set.members.front();
    double best_dist = std::abs(d_requested - best);
    for (std::size_t i = 1; i < set.members.size(); ++i) {
        double dist = std::abs(d_requested - set.members[i]);
        if (dist < best_dist) {  // ties keep the earlier (smaller) member
            best = set.members[i];
            best_dist = dist;
        }
    }
    return best;
}

TdSample sample_t_d(Rng& rng, const StepSizeSet& set, const ShiftConfig& cfg, SamplerMode mode,
                    StepOrientation orientation) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        TdSample out;
        if (mode == SamplerMode::uniform) {
            const int grid_index = static_cast<int>(rng.uniform_int(kGridPoints));
            const int k = static_cast<int>(rng.uniform_int(set.max_exponent + 1));
            out.t = static_cast<double>(grid_index) / kGridPoints;
            out.d = std::ldexp(1.0, -k);
        } else {
            const double scale = set.scales[rng.uniform_int(set.scales.size())];
            const int k = static_cast<int>(rng.uniform_int(set.max_exponent + 1));
            const int grid_index = static_cast<int>(rng.uniform_int(kGridPoints));
            out.d = std::ldexp(scale, -k);
            out.t = shift_time(static_cast<double>(grid_index) / kGridPoints, cfg);
        }
        // The self-consistency target spans a 2d window, so t is quantized
        // onto the boundary when the drawn value would push the window out of
        // [0, 1]. The boundary atoms also train the full-remaining-width
        // queries the sampling planner emits (t exactly one window away from
        // the end). Step sizes too wide for any window are redrawn.
        if (2.0 * out.d > 1.0) continue;
        if (orientation == StepOrientation::toward_noise) {
            out.t = std::min(out.t, 1.0 - 2.0 * out.d);
        } else {
            out.t = std::max(out.t, 2.0 * out.d);
        }
        return out;
    }
    throw std::runtime_error("sample_t_d: no workable step size after 1000 redraws");
}

double sample_flow_t(Rng& rng, const ShiftConfig& cfg, SamplerMode mode) {
    double u = static_cast<double>(rng.uniform_int(kGridPoints)) / kGridPoints;
    return mode == SamplerMode::uniform ? u : shift_time(u, cfg);
}

}  // namespace fewstep
