#include "vdm/diffusion.hpp"

#include <cmath>

namespace vdm {

namespace {

void require_ordered(const ScheduleSample& s, const ScheduleSample& t) {
    if (!(s.t < t.t)) throw OrderingError("need s < t on the time axis");
}

}  // namespace

Tensor diffuse(const Tensor& x, const ScheduleSample& sample, const Tensor& eps) {
    if (!x.same_shape(eps)) throw DimensionError("diffuse: data/noise shape mismatch");
    return sample.alpha * x + sample.sigma() * eps;
}

TransitionParams transition_params(const ScheduleSample& s, const ScheduleSample& t) {
    if (s.t == t.t) return {1.0, 0.0};  // identity transition
    require_ordered(s, t);
    TransitionParams p;
    p.alpha_ts = t.alpha / s.alpha;
    p.sigma2_ts = t.sigma2 - p.alpha_ts * p.alpha_ts * s.sigma2;
    if (!(p.sigma2_ts > 0.0)) {
        throw OrderingError("transition variance not positive: schedule is not strictly noisier at t");
    }
    return p;
}

PosteriorParams posterior_params(const ScheduleSample& s, const ScheduleSample& t) {
    const TransitionParams tr = transition_params(s, t);
    PosteriorParams p;
    p.coef_z = tr.alpha_ts * s.sigma2 / t.sigma2;
    p.coef_x = s.alpha * tr.sigma2_ts / t.sigma2;
    p.sigma2_Q = tr.sigma2_ts * s.sigma2 / t.sigma2;
    return p;
}

PosteriorParams posterior_params_stable(double gamma_s, double gamma_t,
                                        const ScheduleSample& s, const ScheduleSample& t) {
    if (!(gamma_s < gamma_t)) throw OrderingError("need gamma_s < gamma_t");
    // c = sigma2_{t|s} / sigma2_t computed without cancellation.
    const double c = -std::expm1(gamma_s - gamma_t);
    PosteriorParams p;
    p.sigma2_Q = s.sigma2 * c;
    p.coef_z = (t.alpha / s.alpha) * s.sigma2 / t.sigma2;
    p.coef_x = s.alpha * c;
    return p;
}

Tensor generative_mean(const Prediction& pred, const Tensor& z_t,
                       const ScheduleSample& s, const ScheduleSample& t) {
    require_ordered(s, t);
    if (!pred.value.same_shape(z_t)) throw DimensionError("generative mean: shape mismatch");
    const TransitionParams tr = transition_params(s, t);
    const double a_ts = tr.alpha_ts, s2_ts = tr.sigma2_ts, sig_t = t.sigma();

    switch (pred.kind) {
        case PredictionKind::X: {
            const PosteriorParams q = posterior_params(s, t);
            return q.coef_z * z_t + q.coef_x * pred.value;
        }
        case PredictionKind::EPS:
            return (1.0 / a_ts) * z_t - (s2_ts / (a_ts * sig_t)) * pred.value;
        case PredictionKind::SCORE:
            return (1.0 / a_ts) * z_t + (s2_ts / a_ts) * pred.value;
        case PredictionKind::V:
            // The transition is itself variance preserving
            // (alpha_ts^2 + sigma2_ts = 1), so the z coefficient is alpha_ts.
            return a_ts * z_t - (s.alpha * s2_ts / sig_t) * pred.value;
        case PredictionKind::U: {
            const double denom = sig_t * (t.alpha + sig_t);
            return (1.0 / a_ts) * (1.0 - s2_ts / denom) * z_t - (s.alpha * s2_ts / denom) * pred.value;
        }
        case PredictionKind::ENERGY_GRAD:
            throw ContractError("energy kind requires a gradient evaluation hook; none is configured");
    }
    throw ContractError("unreachable prediction kind");
}

Tensor ancestral_step(const Prediction& pred, const Tensor& z_t,
                      const ScheduleSample& s, const ScheduleSample& t,
                      const Tensor& noise, bool use_printed_noise_variant) {
    require_ordered(s, t);
    if (!noise.same_shape(z_t)) throw DimensionError("ancestral step: noise shape mismatch");
    const Tensor eps_hat = convert(pred, z_t, t, PredictionKind::EPS).value;
    const double c = -std::expm1(s.gamma() - t.gamma());
    const Tensor mean = (s.alpha / t.alpha) * (z_t - (t.sigma() * c) * eps_hat);
    const double sigma_Q = use_printed_noise_variant
                               ? std::sqrt(1.0 - s.alpha2() * c)
                               : std::sqrt(s.sigma2 * c);
    return mean + sigma_Q * noise;
}

Tensor rescale_latent(const Tensor& z_B, double alpha_A, double alpha_B) {
    if (alpha_B == 0.0) throw SingularityError("rescale at the zero-signal endpoint");
    return (alpha_A / alpha_B) * z_B;
}

}  // namespace vdm
