#pragma once

#include "vdm/parameterization.hpp"
#include "vdm/schedule.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

// Parameters of the conditional q(z_t | z_s) for s < t on a shared schedule:
// z_t = alpha_ts * z_s + sqrt(sigma2_ts) * eps.
struct TransitionParams {
    double alpha_ts = 0.0;   // alpha_t / alpha_s, in (0,1)
    double sigma2_ts = 0.0;  // sigma2_t - alpha_ts^2 * sigma2_s, > 0
};

// Parameters of the conjugate Gaussian posterior q(z_s | z_t, x):
// mean = coef_z * z_t + coef_x * x, variance sigma2_Q. The coefficients
// satisfy coef_z * alpha_t + coef_x = alpha_s (noise-free fixed point).
struct PosteriorParams {
    double coef_z = 0.0;   // alpha_ts * sigma2_s / sigma2_t
    double coef_x = 0.0;   // alpha_s * sigma2_ts / sigma2_t
    double sigma2_Q = 0.0;  // sigma2_ts * sigma2_s / sigma2_t

    Tensor mean(const Tensor& z_t, const Tensor& x) const {
        if (!z_t.same_shape(x)) throw DimensionError("posterior mean: shape mismatch");
        return coef_z * z_t + coef_x * x;
    }
};

// Latents on an ascending time grid; every latent shares the data shape.
struct LatentPath {
    std::vector<double> times;
    std::vector<Tensor> latents;
};

// Forward marginal draw: z_t = alpha_t x + sigma_t eps.
Tensor diffuse(const Tensor& x, const ScheduleSample& sample, const Tensor& eps);

TransitionParams transition_params(const ScheduleSample& s, const ScheduleSample& t);

// Direct evaluation of the posterior coefficient formulas.
PosteriorParams posterior_params(const ScheduleSample& s, const ScheduleSample& t);

// Cancellation-free form via c = -expm1(gamma_s - gamma_t):
// sigma2_Q = sigma2_s * c; remains accurate as gamma_t - gamma_s -> 0.
PosteriorParams posterior_params_stable(double gamma_s, double gamma_t,
                                        const ScheduleSample& s, const ScheduleSample& t);

// Mean of the generative transition p(z_s | z_t): the posterior mean with x
// replaced by the model's prediction, written directly in each prediction
// kind's own coefficients (all kinds agree to 1e-12 when predictions are
// linked by the exact conversions).
Tensor generative_mean(const Prediction& pred, const Tensor& z_t,
                       const ScheduleSample& s, const ScheduleSample& t);

// One reverse-chain step: z_s = (alpha_s/alpha_t)(z_t - sigma_t c eps_hat) + sigma_Q * noise
// with c = -expm1(gamma_s - gamma_t) and sigma_Q = sqrt(sigma2_s * c).
// `use_printed_noise_variant` swaps in sigma_Q = sqrt(1 - alpha_s^2 c), an
// alternative scale sometimes quoted for this update; it is not
// self-consistent with the posterior variance and exists only for comparison.
Tensor ancestral_step(const Prediction& pred, const Tensor& z_t,
                      const ScheduleSample& s, const ScheduleSample& t,
                      const Tensor& noise, bool use_printed_noise_variant = false);

// Latents of two process specifications at equal SNR differ only by an
// elementwise rescaling: z_A = (alpha_A / alpha_B) z_B.
Tensor rescale_latent(const Tensor& z_B, double alpha_A, double alpha_B);

}  // namespace vdm
