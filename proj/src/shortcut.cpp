#include "fewstep/shortcut.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fewstep {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_step_domain(double t, double d, StepOrientation orientation, const char* where) {
    if (!(d > 0.0)) throw std::invalid_argument(std::string(where) + ": step size must be positive");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument(std::string(where) + ": t outside [0, 1]");
    if (orientation == StepOrientation::toward_noise) {
        if (t + d > 1.0 + 1e-12) throw std::invalid_argument(std::string(where) + ": t + d exceeds 1");
    } else {
        if (t - d < -1e-12) throw std::invalid_argument(std::string(where) + ": t - d below 0");
    }
}

}  // namespace

LatentTensor shortcut_step(const VelocityModel& model, const LatentTensor& x, double t, double d,
                           StepOrientation orientation) {
    check_step_domain(t, d, orientation, "shortcut_step");
    LatentTensor v = model.evaluate(x, t, d);
    double sign = orientation == StepOrientation::toward_noise ? 1.0 : -1.0;
    LatentTensor out = x;
    axpy(out, sign * d, v);
    return out;
}

ShortcutTarget shortcut_target(const VelocityModel& model, const LatentTensor& x, double t,
                               double d, BootstrapOrientation orientation,
                               bool literal_second_time) {
    check_step_domain(t, 2.0 * d, orientation, "shortcut_target");
    double sign = orientation == StepOrientation::toward_noise ? 1.0 : -1.0;
    LatentTensor v1 = model.evaluate(x, t, d);
    LatentTensor stepped = x;
    axpy(stepped, sign * d, v1);
    double t2 = literal_second_time ? t : t + sign * d;
    LatentTensor v2 = model.evaluate(stepped, t2, d);
    ShortcutTarget target;
    target.t = t;
    target.d = d;
    target.v_star = v1;
    target.v_star += v2;
    target.v_star = 0.5 * target.v_star;
    return target;
}

std::vector<ScTerm> shortcut_batch_targets(
    const VelocityModel& model, Rng& rng, const StepSizeSet& set, const ShiftConfig& shift,
    const std::vector<std::pair<LatentTensor, LatentTensor>>& pairs, SamplerMode mode,
    BootstrapOrientation orientation) {
    std::vector<ScTerm> terms;
    terms.reserve(pairs.size());
    for (const auto& [x0, x1] : pairs) {
        TdSample td = sample_t_d(rng, set, shift, mode, orientation);
        ScTerm term;
        term.t = td.t;
        term.d = td.d;
        term.xt = interpolate(x0, x1, td.t);
        term.v_star = shortcut_target(model, term.xt, td.t, td.d, orientation).v_star;
        terms.push_back(std::move(term));
    }
    return terms;
}

double sc_prediction_loss(const VelocityModel& model, const std::vector<ScTerm>& terms) {
    if (terms.empty()) throw std::invalid_argument("sc_prediction_loss: empty term list");
    double total = 0.0;
    for (const ScTerm& term : terms) {
        LatentTensor pred = model.evaluate(term.xt, term.t, 2.0 * term.d);
        double se = 0.0;
        const std::size_t n = pred.shape().total();
        for (std::size_t i = 0; i < n; ++i) {
            double diff = pred[i] - term.v_star[i];
            se += diff * diff;
        }
        total += se / static_cast<double>(n);
    }
    return total / static_cast<double>(terms.size());
}

double shortcut_loss(const VelocityModel& model, Rng& rng, const StepSizeSet& set,
                     const ShiftConfig& shift,
                     const std::vector<std::pair<LatentTensor, LatentTensor>>& pairs,
                     SamplerMode mode, BootstrapOrientation orientation) {
    return sc_prediction_loss(model,
                              shortcut_batch_targets(model, rng, set, shift, pairs, mode, orientation));
}

// ---------------------------------------------------------------------------

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (m.size() != params.size()) {
        m = Eigen::VectorXd::Zero(params.size());
        v = Eigen::VectorXd::Zero(params.size());
        step_count = 0;
    }
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad).eval();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    params.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (total_steps < 0) throw std::invalid_argument("TrainConfig: total_steps must be >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (mix == LossMix::alternating && !(flow_fraction > 0.0 && flow_fraction < 1.0)) {
        throw std::invalid_argument("TrainConfig: flow_fraction must lie in (0, 1)");
    }
}

namespace {

Eigen::VectorXd flatten(const LatentTensor& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(x.shape().total()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = x[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace

TrainReport train(TrainableVelocityModel& model, const PairSource& data, const TrainConfig& cfg,
                  const StepSizeSet& set, const ShiftConfig& shift) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    Rng rng(cfg.seed);
    Adam opt;
    opt.lr = cfg.lr;
    Eigen::VectorXd params = model.params();
    Eigen::VectorXd grad(model.param_count());
    TrainReport report;
    report.trace.reserve(cfg.total_steps);

    for (int i = 0; i < cfg.total_steps; ++i) {
        if (cfg.lr_final >= 0.0 && cfg.total_steps > 1) {
            const double phase = static_cast<double>(i) / (cfg.total_steps - 1);
            opt.lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(phase * kPi));
        }
        const bool flow_step =
            cfg.mix == LossMix::flow_only ||
            std::floor((i + 1) * cfg.flow_fraction) > std::floor(i * cfg.flow_fraction);

        std::vector<std::pair<LatentTensor, LatentTensor>> pairs;
        pairs.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) pairs.push_back(data.draw(rng));

        const int dim = static_cast<int>(pairs.front().first.shape().total());
        Eigen::MatrixXd x(dim, cfg.batch_size), targets(dim, cfg.batch_size);
        Eigen::VectorXd t(cfg.batch_size), d(cfg.batch_size);
        double loss = 0.0;
        char kind = 'f';

        if (flow_step) {
            const double d_min = set.min();
            for (int b = 0; b < cfg.batch_size; ++b) {
                const auto& [x0, x1] = pairs[b];
                t[b] = sample_flow_t(rng, shift, cfg.mode);
                d[b] = d_min;
                x.col(b) = flatten(interpolate(x0, x1, t[b]));
                targets.col(b) = flatten(velocity_target(x0, x1));
            }
            loss = model.mse_loss_grad(x, t, d, targets, grad);
        } else {
            kind = 's';
            auto terms = shortcut_batch_targets(model, rng, set, shift, pairs, cfg.mode, cfg.bootstrap);
            for (int b = 0; b < cfg.batch_size; ++b) {
                x.col(b) = flatten(terms[b].xt);
                t[b] = terms[b].t;
                d[b] = 2.0 * terms[b].d;
                targets.col(b) = flatten(terms[b].v_star);
            }
            loss = model.mse_loss_grad(x, t, d, targets, grad);
        }

        if (!std::isfinite(loss)) {
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(i) +
                                     " (kind " + kind + ")");
        }
        opt.step(params, grad);
        model.set_params(params);
        report.trace.push_back({i, kind, loss});
        if (kind == 'f') {
            report.final_flow_loss = loss;
        } else {
            report.final_sc_loss = loss;
        }
    }

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------

std::vector<PathStep> plan_shortcut_path(int n_steps, const StepSizeSet& set,
                                         const ShiftConfig& shift) {
    if (n_steps < 1) throw std::invalid_argument("plan_shortcut_path: n_steps must be >= 1");
    std::vector<PathStep> path;
    double t = 1.0;
    int selections = 0;
    for (int remaining = n_steps; remaining >= 1 && t > 1e-12; --remaining) {
        if (++selections > 4 * n_steps) {
            throw std::runtime_error("plan_shortcut_path: schedule failed to land at 0");
        }
        if (remaining == 1) {
            // Land exactly at 0; the conditioning width snaps to the set.
            path.push_back({t, nearest_step(t, set), t});
            t = 0.0;
            break;
        }
        const double u_next = shift_time_inverse(t, shift) * (remaining - 1) / remaining;
        const double width = t - shift_time(u_next, shift);
        double d = nearest_step(width, set);
        if (d > t) {
            // Snapped past 0: fall back to the largest member that fits, or
            // finish with a raw partial step.
            double fit = -1.0;
            for (double m : set.members) {
                if (m <= t + 1e-12) fit = m;
            }
            if (fit < 0.0) {
                path.push_back({t, nearest_step(t, set), t});
                t = 0.0;
                break;
            }
            d = fit;
        }
        path.push_back({t, d, d});
        t -= d;
    }
    return path;
}

LatentTensor shortcut_sample(const VelocityModel& model, const LatentTensor& x1, int n_steps,
                             const StepSizeSet& set, const ShiftConfig& shift) {
    const auto path = plan_shortcut_path(n_steps, set, shift);
    LatentTensor x = x1;
    for (std::size_t k = 0; k < path.size(); ++k) {
        LatentTensor v = model.evaluate(x, path[k].t, path[k].d_cond);
        axpy(x, -path[k].d_step, v);
        if (!x.all_finite()) {
            throw std::runtime_error("shortcut_sample: non-finite state after step " +
                                     std::to_string(k));
        }
    }
    return x;
}

}  // namespace fewstep
