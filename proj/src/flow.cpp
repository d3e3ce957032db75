#include "fewstep/flow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fewstep {

FlowSample FlowSample::make(LatentTensor x0, LatentTensor x1, double t) {
    FlowSample s;
    s.xt = interpolate(x0, x1, t);
    s.v = velocity_target(x0, x1);
    s.x0 = std::move(x0);
    s.x1 = std::move(x1);
    s.t = t;
    return s;
}

void TimeGrid::validate() const {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || times[i] > 1.0) {
            throw std::invalid_argument("TimeGrid: entry outside [0,1]");
        }
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw std::invalid_argument("TimeGrid: not strictly increasing");
        }
    }
}

LatentTensor interpolate(const LatentTensor& x0, const LatentTensor& x1, double t) {
    require_same_shape(x0, x1, "interpolate");
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("interpolate: t outside [0,1]");
    }
    LatentTensor out(x0.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 - t) * x0[i] + t * x1[i];
    }
    return out;
}

LatentTensor velocity_target(const LatentTensor& x0, const LatentTensor& x1) {
    require_same_shape(x0, x1, "velocity_target");
    return x1 - x0;
}

double flow_loss(const VelocityModel& model, const std::vector<FlowSample>& batch,
                 double d_cond) {
    if (batch.empty()) {
        throw std::invalid_argument("flow_loss: empty batch");
    }
    double acc = 0.0;
    for (const FlowSample& s : batch) {
        const LatentTensor pred = model.evaluate(s.xt, s.t, d_cond);
        require_same_shape(pred, s.v, "flow_loss");
        double se = 0.0;
        for (std::int64_t i = 0; i < pred.size(); ++i) {
            const double e = pred[i] - s.v[i];
            se += e * e;
        }
        acc += se / static_cast<double>(pred.size());
    }
    return acc / static_cast<double>(batch.size());
}

LatentTensor euler_sample(const VelocityModel& model, const LatentTensor& x1,
                          const std::vector<double>& descending_times, double d_cond) {
    if (descending_times.size() < 2) {
        throw std::invalid_argument("euler_sample: need at least two grid times");
    }
    for (std::size_t i = 0; i + 1 < descending_times.size(); ++i) {
        if (!(descending_times[i] > descending_times[i + 1])) {
            throw std::invalid_argument("euler_sample: grid not strictly decreasing");
        }
    }
    if (descending_times.front() > 1.0 || descending_times.back() < 0.0) {
        throw std::invalid_argument("euler_sample: grid outside [0,1]");
    }
    LatentTensor x = x1;
    for (std::size_t k = 0; k + 1 < descending_times.size(); ++k) {
        const double t = descending_times[k];
        const double d = t - descending_times[k + 1];
        const LatentTensor v = model.evaluate(x, t, d_cond);
        require_same_shape(v, x, "euler_sample");
        axpy(x, -d, v);
        if (!x.all_finite()) {
            throw std::runtime_error("euler_sample: non-finite state at step " +
                                     std::to_string(k));
        }
    }
    return x;
}

}  // namespace fewstep
