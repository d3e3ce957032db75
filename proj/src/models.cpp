#include "fewstep/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fewstep {

GaussianOracle::GaussianOracle(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("GaussianOracle: sigma must be positive");
}

double GaussianOracle::marginal_var(double t) const {
    return (1.0 - t) * (1.0 - t) * sigma_ * sigma_ + t * t;
}

double GaussianOracle::alpha(double t) const {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("GaussianOracle: t outside [0, 1]");
    return (t - (1.0 - t) * sigma_ * sigma_) / marginal_var(t);
}

LatentTensor GaussianOracle::evaluate(const LatentTensor& x, double t, double /*d*/) const {
    return alpha(t) * x;
}

FlowMapOracle::FlowMapOracle(double sigma, StepOrientation orientation)
    : sigma_(sigma), orientation_(orientation) {
    if (!(sigma > 0.0)) throw std::invalid_argument("FlowMapOracle: sigma must be positive");
}

LatentTensor FlowMapOracle::evaluate(const LatentTensor& x, double t, double d) const {
    if (!(d > 0.0)) throw std::invalid_argument("FlowMapOracle: step size must be positive");
    auto m = [this](double s) { return (1.0 - s) * (1.0 - s) * sigma_ * sigma_ + s * s; };
    double t_far = orientation_ == StepOrientation::toward_noise ? t + d : t - d;
    if (t_far < -1e-12 || t_far > 1.0 + 1e-12) {
        throw std::invalid_argument("FlowMapOracle: window leaves [0, 1]");
    }
    double ratio = std::sqrt(m(t_far) / m(t));
    double coeff = orientation_ == StepOrientation::toward_noise ? (ratio - 1.0) / d
                                                                 : (1.0 - ratio) / d;
    return coeff * x;
}

Eigen::VectorXd flatten_tensor(const LatentTensor& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(x.shape().total()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = x[static_cast<std::size_t>(i)];
    return out;
}

LatentTensor unflatten_tensor(const Eigen::VectorXd& v, const Shape& shape) {
    if (v.size() != static_cast<Eigen::Index>(shape.total())) {
        throw std::invalid_argument("unflatten_tensor: size mismatch");
    }
    LatentTensor out(shape);
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i];
    return out;
}

// ---------------------------------------------------------------------------

void ToyNetConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("ToyNetConfig: dim must be >= 1");
    if (hidden < 1) throw std::invalid_argument("ToyNetConfig: hidden must be >= 1");
    if (hidden_layers < 2) throw std::invalid_argument("ToyNetConfig: need at least 2 hidden layers");
    if (time_features < 2 || time_features % 2 != 0) {
        throw std::invalid_argument("ToyNetConfig: time_features must be even and >= 2");
    }
    if (cond_dim < 0) throw std::invalid_argument("ToyNetConfig: cond_dim must be >= 0");
}

namespace {

// Sinusoidal features of one scalar: [sin(pi 2^i s), cos(pi 2^i s)], i = 0...
void embed_scalar(double s, int features, double* out) {
    for (int i = 0; i < features / 2; ++i) {
        const double f = M_PI * std::ldexp(1.0, i) * s;
        out[2 * i] = std::sin(f);
        out[2 * i + 1] = std::cos(f);
    }
}

}  // namespace

struct ToyNetCache {
    Eigen::MatrixXd z;                // input features
    std::vector<Eigen::MatrixXd> h;   // post-tanh hidden states
    Eigen::MatrixXd h0_post;          // block-1 output after injection
    Eigen::MatrixXd c;                // cond projection
    Eigen::MatrixXd c_til;            // normalized cond projection
    Eigen::VectorXd mu_c, sd_c_raw, sd_c_used;
    Eigen::VectorXd mu_h, sd_h_raw, sd_h_used;
    std::vector<bool> active;
    Eigen::MatrixXd y;
};

ToyNet::ToyNet(const ToyNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int in_dim = cfg_.dim + 2 * cfg_.time_features;
    int offset = 0;
    auto add = [&](const std::string& name, int rows, int cols) {
        blocks_.push_back({name, offset, rows * cols});
        offset += rows * cols;
    };
    add("layer1.W", cfg_.hidden, in_dim);
    add("layer1.b", cfg_.hidden, 1);
    if (cfg_.cond_dim > 0) {
        add("cond.W", cfg_.hidden, cfg_.cond_dim);
        add("cond.b", cfg_.hidden, 1);
    }
    for (int l = 1; l < cfg_.hidden_layers; ++l) {
        add("layer" + std::to_string(l + 1) + ".W", cfg_.hidden, cfg_.hidden);
        add("layer" + std::to_string(l + 1) + ".b", cfg_.hidden, 1);
    }
    add("out.W", cfg_.dim, cfg_.hidden);
    add("out.b", cfg_.dim, 1);
    params_ = Eigen::VectorXd::Zero(offset);
}

int ToyNet::param_count() const { return static_cast<int>(params_.size()); }
const Eigen::VectorXd& ToyNet::params() const { return params_; }

void ToyNet::set_params(const Eigen::VectorXd& p) {
    if (p.size() != params_.size()) throw std::invalid_argument("ToyNet: parameter size mismatch");
    params_ = p;
}

std::vector<ParamBlock> ToyNet::param_blocks() const { return blocks_; }

namespace {

int find_block(const std::vector<ParamBlock>& blocks, const std::string& name) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].name == name) return static_cast<int>(i);
    }
    throw std::logic_error("ToyNet: missing parameter block " + name);
}

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutMap = Eigen::Map<Eigen::MatrixXd>;

ConstMap map_block(const Eigen::VectorXd& flat, const ParamBlock& b, int rows) {
    return ConstMap(flat.data() + b.offset, rows, b.size / rows);
}

MutMap map_block_mut(Eigen::VectorXd& flat, const ParamBlock& b, int rows) {
    return MutMap(flat.data() + b.offset, rows, b.size / rows);
}

}  // namespace

void ToyNet::init(Rng& rng) {
    for (const ParamBlock& b : blocks_) {
        const bool is_bias = b.name.size() >= 2 && b.name.substr(b.name.size() - 2) == ".b";
        if (is_bias) {
            params_.segment(b.offset, b.size).setZero();
            continue;
        }
        int rows;
        if (b.name == "layer1.W") {
            rows = cfg_.hidden;
        } else if (b.name == "cond.W") {
            rows = cfg_.hidden;
        } else if (b.name == "out.W") {
            rows = cfg_.dim;
        } else {
            rows = cfg_.hidden;
        }
        const int cols = b.size / rows;
        double a = std::sqrt(6.0 / (rows + cols));
        if (b.name == "out.W") a *= 0.1;
        for (int i = 0; i < b.size; ++i) {
            params_[b.offset + i] = (2.0 * rng.uniform() - 1.0) * a;
        }
    }
}

Eigen::MatrixXd ToyNet::run_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd* cond,
                                    const std::vector<bool>* active, const Eigen::VectorXd& t,
                                    const Eigen::VectorXd& d, ToyNetCache* cache) const {
    const int batch = static_cast<int>(x.cols());
    if (x.rows() != cfg_.dim) throw std::invalid_argument("ToyNet: input dimension mismatch");
    if (t.size() != batch || d.size() != batch) {
        throw std::invalid_argument("ToyNet: time/step vector length mismatch");
    }
    if (cond == nullptr && cfg_.cond_dim > 0) {
        throw std::invalid_argument("ToyNet: conditional net requires a condition batch");
    }
    if (cond != nullptr && (cond->rows() != cfg_.cond_dim || cond->cols() != batch)) {
        throw std::invalid_argument("ToyNet: condition dimension mismatch");
    }

    const int e = cfg_.time_features;
    const int in_dim = cfg_.dim + 2 * e;
    Eigen::MatrixXd z(in_dim, batch);
    z.topRows(cfg_.dim) = x;
    for (int j = 0; j < batch; ++j) {
        embed_scalar(t[j], e, z.col(j).data() + cfg_.dim);
        embed_scalar(d[j], e, z.col(j).data() + cfg_.dim + e);
    }

    const int hid = cfg_.hidden;
    const auto w1 = map_block(params_, blocks_[find_block(blocks_, "layer1.W")], hid);
    const auto b1 = map_block(params_, blocks_[find_block(blocks_, "layer1.b")], hid);
    Eigen::MatrixXd h0 = ((w1 * z).colwise() + b1.col(0)).array().tanh().matrix();

    Eigen::MatrixXd h0_post = h0;
    ToyNetCache local;
    ToyNetCache& cc = cache ? *cache : local;
    if (cfg_.cond_dim > 0) {
        const auto wc = map_block(params_, blocks_[find_block(blocks_, "cond.W")], hid);
        const auto bc = map_block(params_, blocks_[find_block(blocks_, "cond.b")], hid);
        cc.c = (wc * (*cond)).colwise() + bc.col(0);
        cc.c_til.resize(hid, batch);
        cc.mu_c.resize(batch);
        cc.sd_c_raw.resize(batch);
        cc.sd_c_used.resize(batch);
        cc.mu_h.resize(batch);
        cc.sd_h_raw.resize(batch);
        cc.sd_h_used.resize(batch);
        cc.active.assign(batch, true);
        const double gamma = cfg_.inject_scaling == InjectScaling::divide_sqrt2
                                 ? 1.0 / std::sqrt(2.0)
                                 : std::sqrt(2.0);
        for (int j = 0; j < batch; ++j) {
            const bool on = active == nullptr || (*active)[j];
            cc.active[j] = on;
            if (!on) {
                cc.c_til.col(j).setZero();
                cc.mu_c[j] = cc.sd_c_raw[j] = 0.0;
                cc.sd_c_used[j] = kStdFloor;
                cc.mu_h[j] = cc.sd_h_raw[j] = 0.0;
                cc.sd_h_used[j] = kStdFloor;
                continue;
            }
            const double mu_c = cc.c.col(j).mean();
            const double var_c = std::max(0.0, cc.c.col(j).squaredNorm() / hid - mu_c * mu_c);
            const double sd_c_raw = std::sqrt(var_c);
            const double sd_c = std::max(sd_c_raw, kStdFloor);
            const double mu_h = h0.col(j).mean();
            const double var_h = std::max(0.0, h0.col(j).squaredNorm() / hid - mu_h * mu_h);
            const double sd_h_raw = std::sqrt(var_h);
            const double sd_h = std::max(sd_h_raw, kStdFloor);
            cc.mu_c[j] = mu_c;
            cc.sd_c_raw[j] = sd_c_raw;
            cc.sd_c_used[j] = sd_c;
            cc.mu_h[j] = mu_h;
            cc.sd_h_raw[j] = sd_h_raw;
            cc.sd_h_used[j] = sd_h;
            cc.c_til.col(j) = (cc.c.col(j).array() - mu_c) / sd_c;
            h0_post.col(j) =
                gamma * (h0.col(j).array() + (cc.c_til.col(j).array() * sd_h + mu_h)).matrix();
        }
    }

    std::vector<Eigen::MatrixXd> h;
    h.push_back(std::move(h0));
    Eigen::MatrixXd cur = h0_post;
    for (int l = 1; l < cfg_.hidden_layers; ++l) {
        const auto wl =
            map_block(params_, blocks_[find_block(blocks_, "layer" + std::to_string(l + 1) + ".W")], hid);
        const auto bl =
            map_block(params_, blocks_[find_block(blocks_, "layer" + std::to_string(l + 1) + ".b")], hid);
        cur = ((wl * cur).colwise() + bl.col(0)).array().tanh().matrix();
        h.push_back(cur);
    }
    const auto wo = map_block(params_, blocks_[find_block(blocks_, "out.W")], cfg_.dim);
    const auto bo = map_block(params_, blocks_[find_block(blocks_, "out.b")], cfg_.dim);
    Eigen::MatrixXd y = (wo * cur).colwise() + bo.col(0);

    if (cache) {
        cache->z = std::move(z);
        cache->h = std::move(h);
        cache->h0_post = std::move(h0_post);
        cache->y = y;
    }
    return y;
}

double ToyNet::loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd* cond,
                             const std::vector<bool>* active, const Eigen::VectorXd& t,
                             const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                             Eigen::VectorXd& grad) const {
    const int batch = static_cast<int>(x.cols());
    const int hid = cfg_.hidden;
    ToyNetCache cache;
    Eigen::MatrixXd y = run_forward(x, cond, active, t, d, &cache);
    if (targets.rows() != cfg_.dim || targets.cols() != batch) {
        throw std::invalid_argument("ToyNet: target dimension mismatch");
    }

    const double denom = static_cast<double>(batch) * cfg_.dim;
    Eigen::MatrixXd diff = y - targets;
    const double loss = diff.squaredNorm() / denom;

    grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd dy = (2.0 / denom) * diff;

    const int last = cfg_.hidden_layers - 1;
    auto gwo = map_block_mut(grad, blocks_[find_block(blocks_, "out.W")], cfg_.dim);
    auto gbo = map_block_mut(grad, blocks_[find_block(blocks_, "out.b")], cfg_.dim);
    const auto wo = map_block(params_, blocks_[find_block(blocks_, "out.W")], cfg_.dim);
    gwo = dy * cache.h[last].transpose();
    gbo.col(0) = dy.rowwise().sum();
    Eigen::MatrixXd g = wo.transpose() * dy;  // dL/d h[last]

    for (int l = last; l >= 1; --l) {
        Eigen::MatrixXd da = (g.array() * (1.0 - cache.h[l].array().square())).matrix();
        const Eigen::MatrixXd& input = l == 1 ? cache.h0_post : cache.h[l - 1];
        auto gwl = map_block_mut(grad, blocks_[find_block(blocks_, "layer" + std::to_string(l + 1) + ".W")], hid);
        auto gbl = map_block_mut(grad, blocks_[find_block(blocks_, "layer" + std::to_string(l + 1) + ".b")], hid);
        const auto wl = map_block(params_, blocks_[find_block(blocks_, "layer" + std::to_string(l + 1) + ".W")], hid);
        gwl = da * input.transpose();
        gbl.col(0) = da.rowwise().sum();
        g = wl.transpose() * da;
    }

    // g is now dL/d h0_post; push it through the injection to dL/d h[0].
    if (cfg_.cond_dim > 0) {
        auto gwc = map_block_mut(grad, blocks_[find_block(blocks_, "cond.W")], hid);
        auto gbc = map_block_mut(grad, blocks_[find_block(blocks_, "cond.b")], hid);
        const double gamma = cfg_.inject_scaling == InjectScaling::divide_sqrt2
                                 ? 1.0 / std::sqrt(2.0)
                                 : std::sqrt(2.0);
        Eigen::MatrixXd g_h0(hid, batch);
        for (int j = 0; j < batch; ++j) {
            if (!cache.active[j]) {
                g_h0.col(j) = g.col(j);
                continue;
            }
            Eigen::VectorXd dh0 = gamma * g.col(j);
            Eigen::VectorXd dcn = gamma * g.col(j);
            const double dmu_h = dcn.sum();
            const double dsd_h = dcn.dot(cache.c_til.col(j));
            Eigen::VectorXd dc_til = cache.sd_h_used[j] * dcn;
            const double mean_dc_til = dc_til.mean();
            Eigen::VectorXd dc(hid);
            if (cache.sd_c_raw[j] > kStdFloor) {
                const double mean_cross = dc_til.cwiseProduct(cache.c_til.col(j)).mean();
                dc = (((dc_til.array() - mean_dc_til) -
                       cache.c_til.col(j).array() * mean_cross) /
                      cache.sd_c_used[j])
                         .matrix();
            } else {
                dc = ((dc_til.array() - mean_dc_til) / cache.sd_c_used[j]).matrix();
            }
            gwc += dc * cond->col(j).transpose();
            gbc.col(0) += dc;
            dh0.array() += dmu_h / hid;
            if (cache.sd_h_raw[j] > kStdFloor) {
                dh0.array() += dsd_h * (cache.h[0].col(j).array() - cache.mu_h[j]) /
                               (hid * cache.sd_h_raw[j]);
            }
            g_h0.col(j) = dh0;
        }
        g = std::move(g_h0);
    }

    Eigen::MatrixXd da0 = (g.array() * (1.0 - cache.h[0].array().square())).matrix();
    auto gw1 = map_block_mut(grad, blocks_[find_block(blocks_, "layer1.W")], hid);
    auto gb1 = map_block_mut(grad, blocks_[find_block(blocks_, "layer1.b")], hid);
    gw1 = da0 * cache.z.transpose();
    gb1.col(0) = da0.rowwise().sum();
    return loss;
}

LatentTensor ToyNet::evaluate(const LatentTensor& x, double t, double d) const {
    if (cfg_.cond_dim > 0) {
        throw std::invalid_argument("ToyNet: conditional net needs evaluate_cond");
    }
    Eigen::MatrixXd xin = flatten_tensor(x);
    Eigen::VectorXd tv(1), dv(1);
    tv[0] = t;
    dv[0] = d;
    Eigen::MatrixXd y = run_forward(xin, nullptr, nullptr, tv, dv, nullptr);
    return unflatten_tensor(y.col(0), x.shape());
}

Eigen::MatrixXd ToyNet::forward_batch(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                      const Eigen::VectorXd& d) const {
    if (cfg_.cond_dim > 0) {
        throw std::invalid_argument("ToyNet: conditional net needs forward_batch_cond");
    }
    return run_forward(x, nullptr, nullptr, t, d, nullptr);
}

double ToyNet::mse_loss_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                             const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                             Eigen::VectorXd& grad) const {
    if (cfg_.cond_dim > 0) {
        throw std::invalid_argument("ToyNet: conditional net needs mse_loss_grad_cond");
    }
    return loss_and_grad(x, nullptr, nullptr, t, d, targets, grad);
}

LatentTensor ToyNet::evaluate_cond(const LatentTensor& x, const LatentTensor& cond, bool active,
                                   double t, double d) const {
    Eigen::MatrixXd xin = flatten_tensor(x);
    Eigen::MatrixXd cin = flatten_tensor(cond);
    Eigen::VectorXd tv(1), dv(1);
    tv[0] = t;
    dv[0] = d;
    std::vector<bool> mask{active};
    Eigen::MatrixXd y = run_forward(xin, &cin, &mask, tv, dv, nullptr);
    return unflatten_tensor(y.col(0), x.shape());
}

Eigen::MatrixXd ToyNet::forward_batch_cond(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                                           const std::vector<bool>& active,
                                           const Eigen::VectorXd& t,
                                           const Eigen::VectorXd& d) const {
    return run_forward(x, &cond, &active, t, d, nullptr);
}

double ToyNet::mse_loss_grad_cond(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                                  const std::vector<bool>& active, const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& d, const Eigen::MatrixXd& targets,
                                  Eigen::VectorXd& grad) const {
    return loss_and_grad(x, &cond, &active, t, d, targets, grad);
}

void ToyNet::first_block_states(const Eigen::VectorXd& x, const Eigen::VectorXd& cond, double t,
                                double d, Eigen::VectorXd& pre, Eigen::VectorXd& post) const {
    Eigen::MatrixXd xin = x;
    Eigen::MatrixXd cin = cond;
    Eigen::VectorXd tv(1), dv(1);
    tv[0] = t;
    dv[0] = d;
    std::vector<bool> mask{true};
    ToyNetCache cache;
    run_forward(xin, cfg_.cond_dim > 0 ? &cin : nullptr, &mask, tv, dv, &cache);
    pre = cache.h[0].col(0);
    post = cache.h0_post.col(0);
}

}  // namespace fewstep
