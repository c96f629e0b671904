#include "vdm/nets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vdm/errors.hpp"

namespace vdm {

namespace {

// Fan-in-scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor w({rows, cols});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    return w;
}

Tensor lambda_features(double lambda) {
    Tensor f({Graph::kTimeFeatureDim});
    const double q = lambda / 4.0;
    f[0] = q;
    for (int j = 0; j < 4; ++j) {
        const double freq = std::ldexp(1.0, j);
        f[static_cast<std::size_t>(1 + 2 * j)] = std::sin(freq * q);
        f[static_cast<std::size_t>(2 + 2 * j)] = std::cos(freq * q);
    }
    return f;
}

}  // namespace

DenoiserNet::DenoiserNet(Config cfg, ParamStore* params, Rng& rng) : cfg_(cfg), params_(params) {
    const std::size_t in_dim = cfg_.dim + Graph::kTimeFeatureDim;
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        pids_.push_back(params_->add("denoiser.W" + std::to_string(l), init_matrix(cfg_.hidden, prev, rng)));
        pids_.push_back(params_->add("denoiser.b" + std::to_string(l), Tensor({cfg_.hidden})));
        prev = cfg_.hidden;
    }
    pids_.push_back(params_->add("denoiser.Wout", init_matrix(cfg_.dim, prev, rng)));
    pids_.push_back(params_->add("denoiser.bout", Tensor({cfg_.dim})));
}

int DenoiserNet::build(Graph& g, int z_node, int lambda_node) const {
    if (g.value(z_node).size() != cfg_.dim) {
        throw DimensionError("denoiser forward: latent size does not match configured dimension");
    }
    int h = g.concat(z_node, g.time_features(lambda_node));
    std::size_t p = 0;
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        h = g.tanh_(g.add(g.matvec(g.param(pids_[p]), h), g.param(pids_[p + 1])));
        p += 2;
    }
    int out = g.add(g.matvec(g.param(pids_[p]), h), g.param(pids_[p + 1]));
    if (cfg_.residual) out = g.add(out, z_node);
    return out;
}

Tensor DenoiserNet::eval(const Tensor& z, double lambda) const {
    if (z.size() != cfg_.dim) {
        throw DimensionError("denoiser forward: latent size does not match configured dimension");
    }
    if (!z.all_finite() || !std::isfinite(lambda)) throw NumericError("denoiser forward: non-finite input");
    // Mirror of build(): concat -> [matvec + bias + tanh]* -> matvec + bias.
    const Tensor feats = lambda_features(lambda);
    Tensor h({cfg_.dim + Graph::kTimeFeatureDim});
    for (std::size_t i = 0; i < z.size(); ++i) h[i] = z[i];
    for (std::size_t i = 0; i < feats.size(); ++i) h[z.size() + i] = feats[i];

    std::size_t p = 0;
    for (std::size_t l = 0; l <= cfg_.depth; ++l) {
        const bool last = (l == cfg_.depth);
        const Tensor& W = (*params_)[pids_[p]].value;
        const Tensor& b = (*params_)[pids_[p + 1]].value;
        Tensor next({W.rows()});
        for (std::size_t r = 0; r < W.rows(); ++r) {
            double s = 0.0;
            const double* row = W.data() + r * W.cols();
            for (std::size_t c = 0; c < W.cols(); ++c) s += row[c] * h[c];
            s += b[r];
            next[r] = last ? s : std::tanh(s);
        }
        h = std::move(next);
        p += 2;
    }
    if (cfg_.residual) {
        for (std::size_t i = 0; i < cfg_.dim; ++i) h[i] += z[i];
    }
    h.require_finite("denoiser output");
    return h;
}

MonotonicNet::MonotonicNet(ParamStore* params, Rng& rng, double gmin, double gmax, std::size_t hidden)
    : params_(params), gmin_(gmin), gmax_(gmax), hidden_(hidden) {
    if (!(gmin < gmax)) throw OrderingError("monotone net: need gmin < gmax");
    Tensor u1({hidden_}), b1({hidden_}), u2({hidden_});
    for (std::size_t i = 0; i < hidden_; ++i) {
        u1[i] = (2.0 * rng.uniform() - 1.0) * 0.5;
        // Spread hidden-unit transition points across [0,1].
        b1[i] = -std::exp(u1[i]) * ((static_cast<double>(i) + 0.5) / static_cast<double>(hidden_));
        u2[i] = (2.0 * rng.uniform() - 1.0) * 0.5;
    }
    pids_.push_back(params_->add("schedule.u1", std::move(u1)));
    pids_.push_back(params_->add("schedule.b1", std::move(b1)));
    pids_.push_back(params_->add("schedule.u2", std::move(u2)));
}

double MonotonicNet::raw(double t) const {
    const Tensor& u1 = (*params_)[pids_[0]].value;
    const Tensor& b1 = (*params_)[pids_[1]].value;
    const Tensor& u2 = (*params_)[pids_[2]].value;
    double s = 0.0;
    for (std::size_t i = 0; i < hidden_; ++i) {
        s += std::exp(u2[i]) * std::tanh(std::exp(u1[i]) * t + b1[i]);
    }
    return s;
}

double MonotonicNet::eval(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("monotone net: t outside [0,1]");
    const double m0 = raw(0.0), m1 = raw(1.0), mt = raw(t);
    // Affine endpoint map; exp weights make raw() strictly increasing, so
    // m1 > m0 and the normalized value stays in [0,1]. The ratio is formed
    // before scaling so t = 1 maps to gmax exactly (and the arithmetic order
    // mirrors the tape path bitwise).
    return gmin_ + (gmax_ - gmin_) * ((mt - m0) / (m1 - m0));
}

int MonotonicNet::build(Graph& g, int t_node) const {
    auto hidden_sum = [&](int t) {
        // sum_i exp(u2_i) * tanh(exp(u1_i)*t + b1_i)
        const int w1 = g.exp_(g.param(pids_[0]));
        const int act = g.tanh_(g.add(g.smul(t, w1), g.param(pids_[1])));
        return g.sum(g.mul(g.exp_(g.param(pids_[2])), act));
    };
    const int m0 = hidden_sum(g.input_scalar(0.0));
    const int m1 = hidden_sum(g.input_scalar(1.0));
    const int mt = hidden_sum(t_node);
    const int norm = g.div(g.sub(mt, m0), g.sub(m1, m0));
    return g.addc(g.scale(norm, gmax_ - gmin_), gmin_);
}

void SgdMomentum::step() {
    if (velocity_.empty()) {
        for (int i = 0; i < params_->count(); ++i) velocity_.push_back(Tensor((*params_)[i].value.shape()));
    }
    for (int i = 0; i < params_->count(); ++i) {
        auto& e = (*params_)[i];
        Tensor& v = velocity_[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = momentum_ * v[k] - lr_ * e.grad[k];
            e.value[k] += v[k];
        }
        e.value.require_finite(("parameter " + e.name).c_str());
    }
}

void save_checkpoint(const ParamStore& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << "checkpoint-v1," << params.count() << "\n";
    char buf[64];
    for (int i = 0; i < params.count(); ++i) {
        const auto& e = params[i];
        out << e.name << "," << e.value.shape().size();
        for (std::size_t d : e.value.shape()) out << "," << d;
        for (double v : e.value.values()) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("checkpoint write failed: " + path);
}

void load_checkpoint(ParamStore& params, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string header;
    std::getline(in, header);
    if (header.rfind("checkpoint-v1,", 0) != 0) throw IoError("unknown checkpoint version in " + path);
    const int n = std::stoi(header.substr(header.find(',') + 1));
    if (n != params.count()) throw IoError("checkpoint parameter count mismatch");
    std::string line;
    for (int i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw IoError("truncated checkpoint: " + path);
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        auto& e = params[i];
        if (field != e.name) throw IoError("checkpoint name mismatch: got " + field + ", want " + e.name);
        std::getline(ss, field, ',');
        const std::size_t ndim = std::stoul(field);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) {
            std::getline(ss, field, ',');
            d = std::stoul(field);
        }
        if (shape != e.value.shape()) throw IoError("checkpoint shape mismatch for " + e.name);
        for (auto& v : e.value.values()) {
            std::getline(ss, field, ',');
            v = std::stod(field);
        }
    }
}

}  // namespace vdm
