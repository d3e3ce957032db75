#ifndef FEWSTEP_MODELS_HPP
#define FEWSTEP_MODELS_HPP

#include <Eigen/Dense>
#include <vector>

#include "fewstep/conditioning.hpp"
#include "fewstep/flow.hpp"
#include "fewstep/schedule.hpp"
#include "fewstep/shortcut.hpp"

namespace fewstep {

// Marginal velocity for x0 ~ N(0, sigma^2 I), x1 ~ N(0, I):
// v(x, t) = alpha(t) x with alpha = (t - (1-t) sigma^2) / m(t),
// m(t) = (1-t)^2 sigma^2 + t^2. Step-size input is ignored.
class GaussianOracle final : public VelocityModel {
public:
    explicit GaussianOracle(double sigma);

    double alpha(double t) const;
    // Marginal variance per dimension at time t.
    double marginal_var(double t) const;

    LatentTensor evaluate(const LatentTensor& x, double t, double d) const override;

private:
    double sigma_;
};

// Average velocity of the exact probability-flow map over a width-d window
// anchored at t: trajectories satisfy x(t2) = x(t1) sqrt(m(t2)/m(t1)), so the
// average is available in closed form and satisfies the two-half-step
// identity exactly. Window direction follows the orientation.
class FlowMapOracle final : public VelocityModel {
public:
    FlowMapOracle(double sigma, StepOrientation orientation = StepOrientation::toward_noise);

    LatentTensor evaluate(const LatentTensor& x, double t, double d) const override;

private:
    double sigma_;
    StepOrientation orientation_;
};

// Fills the input's shape with one value regardless of (x, t, d).
class ConstantModel final : public VelocityModel {
public:
    explicit ConstantModel(double value) : value_(value) {}
    LatentTensor evaluate(const LatentTensor& x, double /*t*/, double /*d*/) const override {
        return LatentTensor::full(x.shape(), value_);
    }

private:
    double value_;
};

Eigen::VectorXd flatten_tensor(const LatentTensor& x);
LatentTensor unflatten_tensor(const Eigen::VectorXd& v, const Shape& shape);

// ---------------------------------------------------------------------------

struct ToyNetConfig {
    int dim = 2;
    int hidden = 64;
    int hidden_layers = 3;
    // Sinusoidal features per conditioning scalar (t and d); frequencies
    // pi * 2^i. Must be even.
    int time_features = 8;
    // > 0 enables the condition branch: a linear map to hidden width whose
    // output is cross-normalized to the first hidden block's per-sample
    // statistics and added in after block 1.
    int cond_dim = 0;
    InjectScaling inject_scaling = InjectScaling::divide_sqrt2;

    void validate() const;
};

// Small dense velocity network: [x, embed(t), embed(d)] -> tanh MLP -> v.
// Parameters live in one flat vector; gradients are exact reverse-mode,
// written out by hand so tests can check them against finite differences.
class ToyNet final : public TrainableVelocityModel {
public:
    explicit ToyNet(const ToyNetConfig& cfg);

    const ToyNetConfig& config() const { return cfg_; }

    // Xavier-uniform weights (output layer scaled down 10x), zero biases.
    void init(Rng& rng);

    int param_count() const override;
    const Eigen::VectorXd& params() const override;
    void set_params(const Eigen::VectorXd& p) override;
    std::vector<ParamBlock> param_blocks() const override;

    // Unconditional interface (cond_dim must be 0).
    LatentTensor evaluate(const LatentTensor& x, double t, double d) const override;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& d) const override;
    double mse_loss_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                         const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                         Eigen::VectorXd& grad) const override;

    // Conditional interface (cond_dim > 0). active[j] = false skips the
    // injection for that column (dropped condition).
    LatentTensor evaluate_cond(const LatentTensor& x, const LatentTensor& cond, bool active,
                               double t, double d) const;
    Eigen::MatrixXd forward_batch_cond(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                                       const std::vector<bool>& active, const Eigen::VectorXd& t,
                                       const Eigen::VectorXd& d) const;
    double mse_loss_grad_cond(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                              const std::vector<bool>& active, const Eigen::VectorXd& t,
                              const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                              Eigen::VectorXd& grad) const;

    // First-block hidden state before and after injection for one sample;
    // used to cross-check the injection against the standalone conditioning
    // ops.
    void first_block_states(const Eigen::VectorXd& x, const Eigen::VectorXd& cond, double t,
                            double d, Eigen::VectorXd& pre, Eigen::VectorXd& post) const;

private:
    struct Views;  // mutable matrix views over the flat vector, models.cpp

    Eigen::MatrixXd run_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd* cond,
                                const std::vector<bool>* active, const Eigen::VectorXd& t,
                                const Eigen::VectorXd& d, struct ToyNetCache* cache) const;
    double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd* cond,
                         const std::vector<bool>* active, const Eigen::VectorXd& t,
                         const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                         Eigen::VectorXd& grad) const;

    ToyNetConfig cfg_;
    Eigen::VectorXd params_;
    std::vector<ParamBlock> blocks_;
};

}  // namespace fewstep

#endif
