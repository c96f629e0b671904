#pragma once

#include <functional>
#include <vector>

#include "vdm/diffusion.hpp"
#include "vdm/parameterization.hpp"
#include "vdm/schedule.hpp"

namespace vdm {

// Any denoising model: maps a noisy latent and its log-SNR to a Prediction.
using DenoiserFn = std::function<Prediction(const Tensor& z, double lambda)>;

// Monte Carlo estimate with per-sample terms kept for variance diagnostics.
struct LossEstimate {
    double value = 0.0;
    std::size_t n_samples = 0;
    std::vector<double> per_sample;
    double std_error = 0.0;

    static LossEstimate from_samples(std::vector<double> samples);
};

// Per-step divergence between the conditional over the less-noisy latent and
// the generative transition, in closed form:
// 0.5 * (SNR(s) - SNR(t)) * ||x - x_hat||^2.
double kl_term(const Tensor& x, const Tensor& z_t, const Prediction& pred,
               const ScheduleSample& s, const ScheduleSample& t);

// The per-sample constant (SNR(s)/SNR(t) - 1), either via the
// cancellation-free expm1(gamma_t - gamma_s) route (default) or the naive
// SNR ratio (kept for the dual-path equality check).
double discrete_loss_constant(const ScheduleSample& s, const ScheduleSample& t, bool stable = true);

// T-step diffusion loss: (T/2) * E_{eps, i~U{1..T}} [const(s,t) ||eps - eps_hat||^2]
// with s = (i-1)/T, t = i/T. T = 1 enumerates the single term exactly.
LossEstimate discrete_loss(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                           std::size_t T, std::size_t n_mc, Rng& rng, bool stable = true);

// Expected T-step loss for 1-D unit-variance Gaussian data under the ideal
// denoiser, enumerated exactly: per-level expected squared noise error is
// alpha_t^2 = sigmoid(lambda_t), so the sum has no Monte Carlo error.
double discrete_loss_expected_unit_gaussian(const NoiseSchedule& sched, std::size_t T);

enum class TimeDist {
    UniformT,    // t ~ U(0,1); density over lambda is the schedule's own
    ImportanceLambda,  // lambda ~ U(lambda_min, lambda_max) as importance density
};
TimeDist time_dist_from_name(const std::string& name);

// Weighted continuous loss 0.5 * Int w(lambda) E||eps - eps_hat||^2 dlambda,
// estimated under either time distribution (identical expectation).
LossEstimate continuous_loss(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                             const WeightingFn& weighting, std::size_t n_mc, Rng& rng,
                             TimeDist time_dist = TimeDist::UniformT);

// Remaining-interval divergence 0.5 * Int_{lambda_min}^{lambda(t0)} E||eps - eps_hat||^2 dlambda,
// non-increasing in t0; t0 = 1 gives 0, t0 = 0 gives the full-interval loss.
LossEstimate partial_kl(const Tensor& x, const DenoiserFn& denoiser, const NoiseSchedule& sched,
                        double t0, std::size_t n_mc, Rng& rng);

// Checks that a monotone weighting's loss equals the p_w(t)-average of
// remaining-interval divergences (both sides under the affinely renormalized
// weighting, whose boundary terms vanish identically).
struct WeightingIdentityResult {
    double lhs = 0.0, rhs = 0.0;
    double lhs_se = 0.0, rhs_se = 0.0;
    double residual = 0.0;
};
WeightingIdentityResult monotone_weighting_identity_check(const Tensor& x, const DenoiserFn& denoiser,
                                                          const NoiseSchedule& sched, const WeightingFn& w,
                                                          std::size_t n_mc, Rng& rng);

// Running histogram of observed weighted losses per noise level, usable as a
// self-tuning importance density proportional to the loss magnitude.
struct AdaptiveScheduleState {
    double lambda_min = -6.0, lambda_max = 6.0;
    std::vector<double> ema_loss;  // 64 uniform bins
    double decay = 0.99;

    static AdaptiveScheduleState make(double lambda_min, double lambda_max, std::size_t bins = 64);
    std::size_t bin_of(double lambda) const;
    std::vector<double> density() const;  // non-negative, sums to 1
};

AdaptiveScheduleState adaptive_update(AdaptiveScheduleState state, double lambda,
                                      double observed_weighted_loss);

// Variance reduction of importance density p against sampling from w itself:
// Int w(lambda) (1 - w(lambda)/p(lambda)) h(lambda)^2 dlambda over a
// quadrature grid. Positive means p is the lower-variance choice.
double variance_gap(const std::vector<double>& lambdas, const std::vector<double>& h_samples,
                    const std::vector<double>& quad_weights, const WeightingFn& w,
                    const std::function<double(double)>& p);

}  // namespace vdm
