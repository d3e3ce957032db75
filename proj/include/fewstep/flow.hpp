#ifndef FEWSTEP_FLOW_HPP
#define FEWSTEP_FLOW_HPP

#include <functional>
#include <vector>

#include "fewstep/tensor.hpp"

namespace fewstep {

// Velocity predictor v(x, t, d). d is the step size the caller intends to
// take; models that were never conditioned on d simply ignore it.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;
    virtual LatentTensor evaluate(const LatentTensor& x, double t, double d) const = 0;
};

// Adapter for lambdas and test stubs.
class FnModel final : public VelocityModel {
public:
    using Fn = std::function<LatentTensor(const LatentTensor&, double, double)>;
    explicit FnModel(Fn fn) : fn_(std::move(fn)) {}
    LatentTensor evaluate(const LatentTensor& x, double t, double d) const override {
        return fn_(x, t, d);
    }

private:
    Fn fn_;
};

// One training tuple. xt and v are derived from (x0, x1, t) on construction,
// so the interpolation invariants hold by construction.
struct FlowSample {
    LatentTensor x0;  // data point
    LatentTensor x1;  // noise draw
    double t = 0.0;
    LatentTensor xt;  // (1-t) x0 + t x1
    LatentTensor v;   // x1 - x0

    static FlowSample make(LatentTensor x0, LatentTensor x1, double t);
};

// Strictly increasing times in [0, 1].
struct TimeGrid {
    std::vector<double> times;

    void validate() const;  // throws on violation
};

// (1-t) x0 + t x1. Endpoints are exact.
LatentTensor interpolate(const LatentTensor& x0, const LatentTensor& x1, double t);

// x1 - x0.
LatentTensor velocity_target(const LatentTensor& x0, const LatentTensor& x1);

// Mean over the batch of the per-sample mean squared error
// |v(xt, t, d_cond) - (x1 - x0)|^2. d_cond is the step size the flow branch
// conditions on (the smallest member of the active step set).
double flow_loss(const VelocityModel& model, const std::vector<FlowSample>& batch,
                 double d_cond);

// Multi-step Euler along a strictly decreasing time path ending at 0:
// x <- x - (t_k - t_{k+1}) * v(x, t_k, d_cond). Returns the state at the last
// grid time. Throws on a non-monotone path or a non-finite intermediate
// (the error names the step index).
LatentTensor euler_sample(const VelocityModel& model, const LatentTensor& x1,
                          const std::vector<double>& descending_times, double d_cond);

}  // namespace fewstep

#endif
