#ifndef FEWSTEP_SCHEDULE_HPP
#define FEWSTEP_SCHEDULE_HPP

#include <vector>

#include "fewstep/rng.hpp"

namespace fewstep {

// Trained step sizes: 2^-k * T for every scale T and k = 0..max_exponent,
// sorted ascending with near-duplicates (1e-12) merged.
struct StepSizeSet {
    std::vector<double> scales;
    int max_exponent = 7;
    std::vector<double> members;

    static StepSizeSet make(std::vector<double> scales = {0.6, 0.7, 0.8, 0.9, 1.0},
                            int max_exponent = 7);
    // Powers of two only: the uniform-ablation set.
    static StepSizeSet dyadic(int max_exponent = 7);

    double min() const;
    double max() const;
};

// t = s*u / (1 + (s-1)*u). s = 1 is the identity; s > 1 biases toward t = 1.
struct ShiftConfig {
    double shift = 3.0;
};

double shift_time(double u, const ShiftConfig& cfg);
double shift_time_inverse(double t, const ShiftConfig& cfg);

// {0, 1/points, ..., (points-1)/points}: the discrete u-grid training draws
// from before the shift map.
std::vector<double> uniform_time_grid(int points);

// Nearest member of the set; exact ties resolve to the smaller member.
double nearest_step(double d_requested, const StepSizeSet& set);

enum class SamplerMode { uniform, nonuniform };

// Which way a shortcut update moves in time. toward_noise advances t, which
// is how the training equations are written; toward_data is the mirrored
// direction the sampler walks.
enum class StepOrientation { toward_noise, toward_data };

struct TdSample {
    double t = 0.0;
    double d = 0.0;
};

// Joint draw of interpolation time and half step size for the bootstrap.
// uniform mode: t on the raw grid, d dyadic. nonuniform mode: d = T * 2^-k
// over the set's scales, t on the shifted grid. t is then quantized so the
// doubled step stays inside [0, 1] along the orientation (clamped so
// t + 2d <= 1 toward noise, t - 2d >= 0 toward data). Draws with 2d > 1 have
// no workable t at all and are redrawn; throws after 1000 redraws.
TdSample sample_t_d(Rng& rng, const StepSizeSet& set, const ShiftConfig& cfg, SamplerMode mode,
                    StepOrientation orientation = StepOrientation::toward_noise);

// Interpolation time for the plain flow loss: raw grid in uniform mode,
// shifted grid in nonuniform mode. No feasibility constraint.
double sample_flow_t(Rng& rng, const ShiftConfig& cfg, SamplerMode mode);

}  // namespace fewstep

#endif
