#include "vdm/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "vdm/diffusion.hpp"

namespace vdm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLog2Pi = 1.8378770664093454836;

Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor w({rows, cols});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    return w;
}

double normal_log_density(double z, double mean, double var) {
    const double d = z - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace

FiveClusters five_clusters(std::size_t n, std::uint64_t seed) {
    if (n < 5) throw ContractError("five_clusters: need at least five points");
    FiveClusters out;
    out.data.points.resize(n);
    out.component.resize(n);
    Rng rng(seed);
    std::array<std::array<double, 2>, 5> raw_centers{};
    for (int k = 0; k < 5; ++k) {
        const double theta = 2.0 * kPi * static_cast<double>(k) / 5.0;
        raw_centers[static_cast<std::size_t>(k)] = {2.0 * std::cos(theta), 2.0 * std::sin(theta)};
    }
    const double comp_std = 0.2;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = static_cast<int>(rng.integer(0, 4));
        out.component[i] = k;
        for (int d = 0; d < 2; ++d) {
            out.data.points[i][static_cast<std::size_t>(d)] =
                raw_centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] + comp_std * rng.normal();
        }
    }
    // Standardize each coordinate to mean 0, variance 1 (population moments).
    for (std::size_t d = 0; d < 2; ++d) {
        double mean = 0.0;
        for (const auto& p : out.data.points) mean += p[d];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& p : out.data.points) var += (p[d] - mean) * (p[d] - mean);
        var /= static_cast<double>(n);
        const double scale = std::sqrt(var);
        out.data.mean_applied[d] = mean;
        out.data.scale_applied[d] = scale;
        for (auto& p : out.data.points) p[d] = (p[d] - mean) / scale;
        out.component_std[d] = comp_std / scale;
    }
    for (std::size_t k = 0; k < 5; ++k) {
        for (std::size_t d = 0; d < 2; ++d) {
            out.centers[k][d] = (raw_centers[k][d] - out.data.mean_applied[d]) / out.data.scale_applied[d];
        }
    }
    return out;
}

VaeModel::VaeModel(Config cfg, ParamStore* params, Rng& rng) : cfg_(cfg), params_(params) {
    auto add_layer = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        pids_.push_back(params_->add("vae." + name + ".W", init_matrix(rows, cols, rng)));
        pids_.push_back(params_->add("vae." + name + ".b", Tensor({rows})));
    };
    add_layer("enc0", cfg_.hidden, cfg_.data_dim);
    add_layer("enc_mean", cfg_.latent_dim, cfg_.hidden);
    add_layer("enc_logvar", cfg_.latent_dim, cfg_.hidden);
    add_layer("dec0", cfg_.hidden, cfg_.latent_dim);
    add_layer("dec_mean", cfg_.data_dim, cfg_.hidden);
}

int VaeModel::build_mlp(Graph& g, int in, const int* pids, std::size_t) const {
    const int h = g.tanh_(g.add(g.matvec(g.param(pids[0]), in), g.param(pids[1])));
    return g.add(g.matvec(g.param(pids[2]), h), g.param(pids[3]));
}

Tensor VaeModel::eval_mlp(const Tensor& in, const int* pids, std::size_t) const {
    auto affine = [&](const Tensor& v, int wid, int bid, bool act) {
        const Tensor& W = (*params_)[wid].value;
        const Tensor& b = (*params_)[bid].value;
        Tensor out({W.rows()});
        for (std::size_t r = 0; r < W.rows(); ++r) {
            double s = 0.0;
            const double* row = W.data() + r * W.cols();
            for (std::size_t c = 0; c < W.cols(); ++c) s += row[c] * v[c];
            s += b[r];
            out[r] = act ? std::tanh(s) : s;
        }
        return out;
    };
    return affine(affine(in, pids[0], pids[1], true), pids[2], pids[3], false);
}

VaeModel::Posterior VaeModel::encode(const Tensor& x) const {
    if (x.size() != cfg_.data_dim) throw DimensionError("vae encode: data size mismatch");
    // Shared trunk, then mean / log-variance heads.
    const int trunk[4] = {pids_[0], pids_[1], pids_[2], pids_[3]};
    const int lv[4] = {pids_[0], pids_[1], pids_[4], pids_[5]};
    Posterior p;
    p.mean = eval_mlp(x, trunk, 2);
    p.log_var = eval_mlp(x, lv, 2);
    return p;
}

Tensor VaeModel::decode(const Tensor& z) const {
    if (z.size() != cfg_.latent_dim) throw DimensionError("vae decode: latent size mismatch");
    const int dec[4] = {pids_[6], pids_[7], pids_[8], pids_[9]};
    return eval_mlp(z, dec, 2);
}

int VaeModel::build_elbo(Graph& g, const Tensor& x, const Tensor& eps) const {
    if (x.size() != cfg_.data_dim || eps.size() != cfg_.latent_dim) {
        throw DimensionError("vae elbo: input shape mismatch");
    }
    const int xin = g.input(x);
    const int h = g.tanh_(g.add(g.matvec(g.param(pids_[0]), xin), g.param(pids_[1])));
    const int mu = g.add(g.matvec(g.param(pids_[2]), h), g.param(pids_[3]));
    const int logvar = g.add(g.matvec(g.param(pids_[4]), h), g.param(pids_[5]));

    // z = mu + exp(logvar/2) * eps
    const int std_dev = g.exp_(g.scale(logvar, 0.5));
    const int z = g.add(mu, g.mul(std_dev, g.input(eps)));

    const int hd = g.tanh_(g.add(g.matvec(g.param(pids_[6]), z), g.param(pids_[7])));
    const int xhat = g.add(g.matvec(g.param(pids_[8]), hd), g.param(pids_[9]));

    // log p(x|z) = -||x - xhat||^2 / (2 v) - (D/2) log(2 pi v)
    const double v = cfg_.obs_variance;
    const double log_norm = 0.5 * static_cast<double>(cfg_.data_dim) * (kLog2Pi + std::log(v));
    const int recon = g.addc(g.scale(g.sqsum(g.sub(xin, xhat)), -0.5 / v), -log_norm);

    // KL(q || N(0,I)) = 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)
    const int kl_terms = g.sub(g.add(g.exp_(logvar), g.mul(mu, mu)), g.addc(logvar, 1.0));
    const int kl = g.scale(g.sum(kl_terms), 0.5);

    return g.sub(recon, kl);
}

double vae_vlb(const VaeModel& model, const Tensor& x, std::size_t n_mc, Rng& rng) {
    if (n_mc < 1) throw ContractError("vae_vlb: n_mc >= 1 required");
    const auto post = model.encode(x);
    const std::size_t L = model.config().latent_dim;
    const double v = model.config().obs_variance;

    // Divergence from the prior in closed form.
    double kl = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        const double var = std::exp(post.log_var[i]);
        kl += 0.5 * (var + post.mean[i] * post.mean[i] - 1.0 - post.log_var[i]);
    }

    double recon = 0.0;
    const double log_norm = 0.5 * static_cast<double>(x.size()) * (kLog2Pi + std::log(v));
    for (std::size_t k = 0; k < n_mc; ++k) {
        Tensor z({L});
        for (std::size_t i = 0; i < L; ++i) z[i] = post.mean[i] + std::exp(0.5 * post.log_var[i]) * rng.normal();
        const Tensor xhat = model.decode(z);
        recon += -squared_norm(x - xhat) / (2.0 * v) - log_norm;
    }
    recon /= static_cast<double>(n_mc);
    const double vlb = recon - kl;
    if (!std::isfinite(vlb)) throw NumericError("vae_vlb produced a non-finite value");
    return vlb;
}

double AggregatePosterior::density(double z0, double z1) const {
    if (components.empty()) throw ContractError("aggregate posterior over an empty dataset");
    double acc = 0.0;
    for (const auto& c : components) {
        acc += std::exp(normal_log_density(z0, c.mean[0], c.var[0]) +
                        normal_log_density(z1, c.mean[1], c.var[1]));
    }
    return acc / static_cast<double>(components.size());
}

AggregatePosterior aggregate_from_vae(const VaeModel& model, const Dataset2D& dataset) {
    if (dataset.size() == 0) throw ContractError("aggregate posterior over an empty dataset");
    AggregatePosterior agg;
    agg.components.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto post = model.encode(dataset.tensor_at(i));
        agg.components.push_back({{post.mean[0], post.mean[1]},
                                  {std::exp(post.log_var[0]), std::exp(post.log_var[1])}});
    }
    return agg;
}

AggregatePosterior aggregate_from_diffusion(const Dataset2D& dataset, const ScheduleSample& at) {
    if (dataset.size() == 0) throw ContractError("aggregate posterior over an empty dataset");
    AggregatePosterior agg;
    agg.components.reserve(dataset.size());
    for (const auto& p : dataset.points) {
        agg.components.push_back({{at.alpha * p[0], at.alpha * p[1]}, {at.sigma2, at.sigma2}});
    }
    return agg;
}

std::vector<double> aggregate_posterior_density(const AggregatePosterior& agg,
                                                const std::vector<double>& grid_z0,
                                                const std::vector<double>& grid_z1) {
    std::vector<double> field;
    field.reserve(grid_z0.size() * grid_z1.size());
    for (double z1 : grid_z1) {
        for (double z0 : grid_z0) field.push_back(agg.density(z0, z1));
    }
    return field;
}

double hole_metric(const AggregatePosterior& agg, std::size_t n_prior_samples, Rng& rng) {
    // Reference level: 1st percentile of aggregate density over draws from
    // the aggregate itself (one draw per mixture component, component picked
    // uniformly, repeated to a stable count).
    const std::size_t n_ref = std::max<std::size_t>(2000, agg.components.size());
    std::vector<double> ref;
    ref.reserve(n_ref);
    for (std::size_t i = 0; i < n_ref; ++i) {
        const auto& c = agg.components[rng.integer(0, agg.components.size() - 1)];
        const double z0 = c.mean[0] + std::sqrt(c.var[0]) * rng.normal();
        const double z1 = c.mean[1] + std::sqrt(c.var[1]) * rng.normal();
        ref.push_back(agg.density(z0, z1));
    }
    std::sort(ref.begin(), ref.end());
    const double threshold = ref[ref.size() / 100];

    std::size_t below = 0;
    for (std::size_t i = 0; i < n_prior_samples; ++i) {
        if (agg.density(rng.normal(), rng.normal()) < threshold) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(n_prior_samples);
}

Prediction optimal_denoiser(const AnalyticGaussianOracle& oracle, const Tensor& z_t,
                            const ScheduleSample& sample) {
    if (!(oracle.variance > 0.0)) throw DomainError("oracle variance must be positive");
    // Posterior mean of x ~ N(m, V) given z = alpha x + sigma eps:
    // x_hat = m + alpha V (z - alpha m) / (alpha^2 V + sigma^2).
    const double a = sample.alpha, V = oracle.variance, m = oracle.mean;
    const double gain = a * V / (a * a * V + sample.sigma2);
    Prediction pred;
    pred.kind = PredictionKind::X;
    pred.lambda = sample.lambda;
    pred.value = Tensor(z_t.shape());
    for (std::size_t i = 0; i < z_t.size(); ++i) pred.value[i] = m + gain * (z_t[i] - a * m);
    return pred;
}

GridPosterior grid_bayes_posterior(double x, double z_t, const ScheduleSample& s,
                                   const ScheduleSample& t, std::size_t grid_points) {
    const TransitionParams tr = transition_params(s, t);
    // Generous coverage: span both plausible centers plus six total-std units.
    const double c1 = s.alpha * x, c2 = z_t / tr.alpha_ts;
    const double lo = std::min(c1, c2) - 6.0, hi = std::max(c1, c2) + 6.0;
    const double dz = (hi - lo) / static_cast<double>(grid_points - 1);

    std::vector<double> logp(grid_points);
    double max_log = -1e300;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double zs = lo + dz * static_cast<double>(i);
        logp[i] = normal_log_density(z_t, tr.alpha_ts * zs, tr.sigma2_ts) +
                  normal_log_density(zs, s.alpha * x, s.sigma2);
        max_log = std::max(max_log, logp[i]);
    }
    double total = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double p = std::exp(logp[i] - max_log);
        total += p;
        mean += p * (lo + dz * static_cast<double>(i));
    }
    if (std::exp(logp.front() - max_log) / total > 1e-6 || std::exp(logp.back() - max_log) / total > 1e-6) {
        throw DomainError("grid posterior: mass at grid edges; widen the grid");
    }
    mean /= total;
    double var = 0.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double zs = lo + dz * static_cast<double>(i);
        var += std::exp(logp[i] - max_log) * (zs - mean) * (zs - mean);
    }
    var /= total;
    return {mean, var};
}

double ks_normal_pvalue(std::vector<double> samples) {
    if (samples.size() < 2) throw ContractError("ks test needs at least two samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-samples[i] / std::sqrt(2.0));
        const double lo = static_cast<double>(i) / n, hi = (static_cast<double>(i) + 1.0) / n;
        d = std::max({d, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    // Asymptotic two-sided p-value with the small-sample correction.
    const double x = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * x * x * static_cast<double>(k) * static_cast<double>(k));
        p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace vdm
