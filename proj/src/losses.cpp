#include "vdm/losses.hpp"

#include <cmath>

namespace vdm {

LossEstimate LossEstimate::from_samples(std::vector<double> samples) {
    LossEstimate est;
    est.n_samples = samples.size();
    if (samples.empty()) throw ContractError("loss estimate needs at least one sample");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    if (samples.size() > 1) var /= static_cast<double>(samples.size() - 1);
    est.value = mean;
    est.std_error = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size())) : 0.0;
    est.per_sample = std::move(samples);
    return est;
}

double kl_term(const Tensor& x, const Tensor& z_t, const Prediction& pred,
               const ScheduleSample& s, const ScheduleSample& t) {
    if (!(s.t < t.t)) throw OrderingError("kl_term: need s < t");
    const Tensor x_hat = convert(pred, z_t, t, PredictionKind::X).value;
    return 0.5 * (s.snr() - t.snr()) * squared_norm(x - x_hat);
}

double discrete_loss_constant(const ScheduleSample& s, const ScheduleSample& t, bool stable) {
    if (stable) return std::expm1(t.gamma() - s.gamma());
    return s.snr() / t.snr() - 1.0;
}

LossEstimate discrete_loss(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                           std::size_t T, std::size_t n_mc, Rng& rng, bool stable) {
    if (T < 1 || n_mc < 1) throw ContractError("discrete_loss: T >= 1 and n_mc >= 1 required");
    std::vector<double> samples;
    samples.reserve(n_mc);
    const double Td = static_cast<double>(T);
    for (std::size_t k = 0; k < n_mc; ++k) {
        const std::size_t i = (T == 1) ? 1 : rng.integer(1, T);
        const ScheduleSample s = sched.sample_at((static_cast<double>(i) - 1.0) / Td);
        const ScheduleSample t = sched.sample_at(static_cast<double>(i) / Td);
        const Tensor eps = rng.normal_vec(x.size());
        const Tensor z = diffuse(x, t, eps);
        const Tensor eps_hat = convert(denoiser(z, t.lambda), z, t, PredictionKind::EPS).value;
        samples.push_back(0.5 * Td * discrete_loss_constant(s, t, stable) * squared_norm(eps - eps_hat));
    }
    return LossEstimate::from_samples(std::move(samples));
}

double discrete_loss_expected_unit_gaussian(const NoiseSchedule& sched, std::size_t T) {
    // Ideal-denoiser expectation: for 1-D unit-variance Gaussian data the
    // Bayes denoiser is x_hat = alpha z, so eps - eps_hat = alpha(alpha eps -
    // sigma x) and E||eps - eps_hat||^2 = alpha^2 = sigmoid(lambda).
    double total = 0.0;
    const double Td = static_cast<double>(T);
    for (std::size_t i = 1; i <= T; ++i) {
        const ScheduleSample s = sched.sample_at((static_cast<double>(i) - 1.0) / Td);
        const ScheduleSample t = sched.sample_at(static_cast<double>(i) / Td);
        total += 0.5 * discrete_loss_constant(s, t) * sigmoid(t.lambda);
    }
    return total;
}

TimeDist time_dist_from_name(const std::string& name) {
    if (name == "uniform-t") return TimeDist::UniformT;
    if (name == "importance-lambda") return TimeDist::ImportanceLambda;
    throw LookupError("unknown time distribution: " + name);
}

LossEstimate continuous_loss(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                             const WeightingFn& weighting, std::size_t n_mc, Rng& rng,
                             TimeDist time_dist) {
    if (n_mc < 1) throw ContractError("continuous_loss: n_mc >= 1 required");
    std::vector<double> samples;
    samples.reserve(n_mc);
    const double span = sched.lambda_max() - sched.lambda_min();
    for (std::size_t k = 0; k < n_mc; ++k) {
        ScheduleSample smp;
        double inv_density;  // 1 / density of the drawn lambda
        if (time_dist == TimeDist::UniformT) {
            const double t = rng.uniform();
            smp = sched.sample_at(t);
            inv_density = -sched.dlambda_dt(t);
            if (!(inv_density > 0.0)) throw DomainError("schedule slope must be negative everywhere");
        } else {
            const double lam = sched.lambda_min() + span * rng.uniform();
            smp = sched.sample_at_lambda(lam);
            inv_density = span;
        }
        const double wl = weighting.eval(smp.lambda);
        const Tensor eps = rng.normal_vec(x.size());
        const Tensor z = diffuse(x, smp, eps);
        const Tensor eps_hat = convert(denoiser(z, smp.lambda), z, smp, PredictionKind::EPS).value;
        samples.push_back(0.5 * wl * inv_density * squared_norm(eps - eps_hat));
    }
    return LossEstimate::from_samples(std::move(samples));
}

LossEstimate partial_kl(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                        double t0, std::size_t n_mc, Rng& rng) {
    if (!(t0 >= 0.0 && t0 <= 1.0)) throw DomainError("partial_kl: t0 outside [0,1]");
    if (n_mc < 1) throw ContractError("partial_kl: n_mc >= 1 required");
    const double lam_hi = sched.lambda_of(t0);  // t0 = 0 covers the full interval
    const double span = lam_hi - sched.lambda_min();
    std::vector<double> samples;
    samples.reserve(n_mc);
    for (std::size_t k = 0; k < n_mc; ++k) {
        if (span <= 0.0) {
            samples.push_back(0.0);
            continue;
        }
        const double lam = sched.lambda_min() + span * rng.uniform();
        const ScheduleSample smp = sched.sample_at_lambda(lam);
        const Tensor eps = rng.normal_vec(x.size());
        const Tensor z = diffuse(x, smp, eps);
        const Tensor eps_hat = convert(denoiser(z, smp.lambda), z, smp, PredictionKind::EPS).value;
        samples.push_back(0.5 * span * squared_norm(eps - eps_hat));
    }
    return LossEstimate::from_samples(std::move(samples));
}

WeightingIdentityResult monotone_weighting_identity_check(const Tensor& x, const DenoiserFn& denoiser,
                                                          const NoiseSchedule& sched, const WeightingFn& w,
                                                          std::size_t n_mc, Rng& rng) {
    const WeightingCdfReport rep = weighting_cdf_check(w, sched);
    if (!rep.valid && !rep.cdf_after_renormalization) {
        throw ContractError("weighting is not usable as a time distribution: " + rep.classification);
    }
    const double w0 = rep.w_at_t0, w1 = rep.w_at_t1;
    const double spread = w1 - w0;

    // LHS: weighted loss under the renormalized weighting w~ = (w - w0)/spread.
    std::vector<double> lhs_samples;
    lhs_samples.reserve(n_mc);
    for (std::size_t k = 0; k < n_mc; ++k) {
        const double t = rng.uniform();
        const ScheduleSample smp = sched.sample_at(t);
        const double wl = (w.eval(smp.lambda) - w0) / spread;
        const double inv_density = -sched.dlambda_dt(t);
        const Tensor eps = rng.normal_vec(x.size());
        const Tensor z = diffuse(x, smp, eps);
        const Tensor eps_hat = convert(denoiser(z, smp.lambda), z, smp, PredictionKind::EPS).value;
        lhs_samples.push_back(0.5 * wl * inv_density * squared_norm(eps - eps_hat));
    }
    const LossEstimate lhs = LossEstimate::from_samples(std::move(lhs_samples));

    // RHS: E_{t ~ p_w} of the remaining-interval divergence, drawing t by
    // inverting the renormalized weighting (which is the CDF of p_w in t).
    std::vector<double> rhs_samples;
    rhs_samples.reserve(n_mc);
    for (std::size_t k = 0; k < n_mc; ++k) {
        const double u = rng.uniform();
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double cdf = (w.eval(sched.lambda_of(mid)) - w0) / spread;
            (cdf < u ? lo : hi) = mid;
        }
        const double t = 0.5 * (lo + hi);
        rhs_samples.push_back(partial_kl(x, denoiser, sched, t, 1, rng).value);
    }
    const LossEstimate rhs = LossEstimate::from_samples(std::move(rhs_samples));

    WeightingIdentityResult res;
    res.lhs = lhs.value;
    res.rhs = rhs.value;
    res.lhs_se = lhs.std_error;
    res.rhs_se = rhs.std_error;
    res.residual = std::abs(lhs.value - rhs.value);
    return res;
}

AdaptiveScheduleState AdaptiveScheduleState::make(double lambda_min, double lambda_max, std::size_t bins) {
    if (!(lambda_min < lambda_max)) throw OrderingError("adaptive state: need lambda_min < lambda_max");
    AdaptiveScheduleState st;
    st.lambda_min = lambda_min;
    st.lambda_max = lambda_max;
    st.ema_loss.assign(bins, 1.0);
    return st;
}

std::size_t AdaptiveScheduleState::bin_of(double lambda) const {
    if (!(lambda >= lambda_min && lambda <= lambda_max)) throw DomainError("lambda outside adaptive range");
    const double f = (lambda - lambda_min) / (lambda_max - lambda_min);
    const std::size_t n = ema_loss.size();
    const std::size_t b = static_cast<std::size_t>(f * static_cast<double>(n));
    return b >= n ? n - 1 : b;
}

std::vector<double> AdaptiveScheduleState::density() const {
    double total = 0.0;
    for (double v : ema_loss) total += v;
    std::vector<double> d(ema_loss.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ema_loss[i] / total;
    return d;
}

AdaptiveScheduleState adaptive_update(AdaptiveScheduleState state, double lambda,
                                      double observed_weighted_loss) {
    if (!(observed_weighted_loss >= 0.0)) throw DomainError("observed loss must be non-negative");
    const std::size_t b = state.bin_of(lambda);
    state.ema_loss[b] = state.decay * state.ema_loss[b] + (1.0 - state.decay) * observed_weighted_loss;
    return state;
}

double variance_gap(const std::vector<double>& lambdas, const std::vector<double>& h_samples,
                    const std::vector<double>& quad_weights, const WeightingFn& w,
                    const std::function<double(double)>& p) {
    if (lambdas.size() != h_samples.size() || lambdas.size() != quad_weights.size()) {
        throw DimensionError("variance_gap: grid arrays must have equal length");
    }
    double gap = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const double wl = w.eval(lambdas[i]);
        const double pl = p(lambdas[i]);
        const double mass = wl * h_samples[i] * h_samples[i];
        if (pl <= 0.0) {
            if (mass != 0.0) throw DomainError("importance density vanishes where the integrand does not");
            continue;
        }
        gap += quad_weights[i] * wl * (1.0 - wl / pl) * h_samples[i] * h_samples[i];
    }
    return gap;
}

}  // namespace vdm
