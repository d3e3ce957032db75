#ifndef FEWSTEP_SHORTCUT_HPP
#define FEWSTEP_SHORTCUT_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fewstep/flow.hpp"
#include "fewstep/schedule.hpp"

namespace fewstep {

// Which end of the bootstrap interval the self-consistency target is anchored
// at. toward_noise composes two half steps t -> t+d -> t+2d, which is how the
// training equations are written; toward_data composes t -> t-d -> t-2d,
// which matches the direction the sampler walks.
using BootstrapOrientation = StepOrientation;

// x + d*v(x,t,d) toward noise, x - d*v(x,t,d) toward data.
LatentTensor shortcut_step(const VelocityModel& model, const LatentTensor& x, double t,
                           double d, StepOrientation orientation = StepOrientation::toward_noise);

// Bootstrap target: the average of two half-size predictions along the
// orientation. Treated as a constant by every consumer (stop gradient).
struct ShortcutTarget {
    LatentTensor v_star;
    double t = 0.0;
    double d = 0.0;
};

// literal_second_time replays the flow equations verbatim, evaluating the
// second half-step prediction at time t instead of the stepped time.
ShortcutTarget shortcut_target(const VelocityModel& model, const LatentTensor& x, double t,
                               double d,
                               BootstrapOrientation orientation = StepOrientation::toward_noise,
                               bool literal_second_time = false);

// One self-consistency training term: the state, the doubled step size the
// prediction conditions on, and the frozen target.
struct ScTerm {
    LatentTensor xt;
    double t = 0.0;
    double d = 0.0;  // half step; prediction conditions on 2d
    LatentTensor v_star;
};

// Draw (t, d) per pair, interpolate, and build frozen targets.
std::vector<ScTerm> shortcut_batch_targets(
    const VelocityModel& model, Rng& rng, const StepSizeSet& set, const ShiftConfig& shift,
    const std::vector<std::pair<LatentTensor, LatentTensor>>& pairs, SamplerMode mode,
    BootstrapOrientation orientation = StepOrientation::toward_noise);

// Mean over terms of the per-term mean squared error
// |v(xt, t, 2d) - v_star|^2. Pure in the model given the terms.
double sc_prediction_loss(const VelocityModel& model, const std::vector<ScTerm>& terms);

// Draws + targets + prediction loss in one call.
double shortcut_loss(const VelocityModel& model, Rng& rng, const StepSizeSet& set,
                     const ShiftConfig& shift,
                     const std::vector<std::pair<LatentTensor, LatentTensor>>& pairs,
                     SamplerMode mode,
                     BootstrapOrientation orientation = StepOrientation::toward_noise);

// ---------------------------------------------------------------------------
// Training

struct ParamBlock {
    std::string name;
    int offset = 0;
    int size = 0;
};

// A velocity model with a flat parameter vector and reverse-mode gradients of
// the mean squared error against given targets. Columns of the matrix
// arguments are flattened samples.
class TrainableVelocityModel : public VelocityModel {
public:
    virtual int param_count() const = 0;
    virtual const Eigen::VectorXd& params() const = 0;
    virtual void set_params(const Eigen::VectorXd& p) = 0;
    virtual std::vector<ParamBlock> param_blocks() const = 0;

    virtual Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                          const Eigen::VectorXd& d) const = 0;

    // Returns the loss and accumulates dLoss/dparams into grad (grad is
    // overwritten). Targets enter as constants.
    virtual double mse_loss_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                 const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                                 Eigen::VectorXd& grad) const = 0;
};

struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    Eigen::VectorXd m, v;
    std::int64_t step_count = 0;

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

enum class LossMix { flow_only, alternating };

struct TrainConfig {
    int batch_size = 128;
    double flow_fraction = 0.75;  // fraction of alternating steps using the flow loss
    int total_steps = 4000;
    double lr = 3e-4;
    double lr_final = -1.0;  // >= 0: cosine-decay the rate to this value
    std::uint64_t seed = 0;
    LossMix mix = LossMix::alternating;
    SamplerMode mode = SamplerMode::nonuniform;
    BootstrapOrientation bootstrap = StepOrientation::toward_data;

    void validate() const;
};

struct StepRecord {
    int step = 0;
    char kind = 'f';  // 'f' flow, 's' shortcut
    double loss = 0.0;
};

struct TrainReport {
    std::vector<StepRecord> trace;
    double wall_seconds = 0.0;
    double final_flow_loss = 0.0;  // last recorded value of each kind
    double final_sc_loss = 0.0;
};

// Yields (data, noise) pairs.
class PairSource {
public:
    virtual ~PairSource() = default;
    virtual std::pair<LatentTensor, LatentTensor> draw(Rng& rng) const = 0;
};

// Alternating flow / self-consistency training with Adam. Deterministic given
// cfg.seed; aborts with the step index on a non-finite loss.
TrainReport train(TrainableVelocityModel& model, const PairSource& data, const TrainConfig& cfg,
                  const StepSizeSet& set, const ShiftConfig& shift);

// ---------------------------------------------------------------------------
// Few-step sampling

struct PathStep {
    double t = 0.0;       // time before the step
    double d_cond = 0.0;  // step size the model is conditioned on
    double d_step = 0.0;  // actual advance (equals d_cond except a final partial step)
};

// Decreasing path from 1 to 0: uniform in u mapped through the shift, each
// requested width snapped to the nearest trained step size, remaining
// intervals re-divided after every selection so the path lands exactly at 0.
// Throws if more than 4*n_steps selections are needed.
std::vector<PathStep> plan_shortcut_path(int n_steps, const StepSizeSet& set,
                                         const ShiftConfig& shift);

LatentTensor shortcut_sample(const VelocityModel& model, const LatentTensor& x1, int n_steps,
                             const StepSizeSet& set, const ShiftConfig& shift);

}  // namespace fewstep

#endif
