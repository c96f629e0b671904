#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vdm/errors.hpp"
#include "vdm/nets.hpp"

namespace vdm {

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// One point of a variance-preserving noise process: signal scale alpha_t,
// noise variance sigma2_t, and the log signal-to-noise ratio
// lambda = log(alpha^2 / sigma^2). alpha^2 + sigma^2 = 1 within 1e-12.
struct ScheduleSample {
    double t = 0.0;
    double alpha = 0.0;
    double sigma2 = 0.0;
    double lambda = 0.0;

    double sigma() const { return std::sqrt(sigma2); }
    double alpha2() const { return alpha * alpha; }
    double snr() const { return std::exp(lambda); }
    double gamma() const { return -lambda; }  // gamma(t) = -log SNR(t)
};

enum class ScheduleKind { LinearLambda, Cosine, FlowLinear, Learned };

// Monotone map t in [0,1] -> lambda in [lambda_min, lambda_max], strictly
// decreasing, with lambda(0) = lambda_max and lambda(1) = lambda_min.
//
// Kinds:
//  - linear-lambda: lambda affine in t.
//  - cosine: alpha_t = cos(pi t / 2) (a common external convention, not
//    derived here), endpoint-clamped by restricting raw time to the interior
//    interval that spans exactly [lambda_min, lambda_max].
//  - flow-linear: time warp of the linear data->noise interpolant
//    (signal 1-t, noise t), endpoint-clamped the same way; emitted samples
//    are always VP-normalized at the resulting lambda (equivalent latents up
//    to elementwise rescaling).
//  - learned: lambda(t) = -gamma(t) from a MonotonicNet whose endpoint affine
//    pins gamma(0) = -lambda_max, gamma(1) = -lambda_min.
class NoiseSchedule {
  public:
    static NoiseSchedule linear_lambda(double lambda_min = -6.0, double lambda_max = 6.0);
    static NoiseSchedule cosine(double lambda_min = -6.0, double lambda_max = 6.0);
    static NoiseSchedule flow_linear(double lambda_min = -6.0, double lambda_max = 6.0);
    static NoiseSchedule learned(const MonotonicNet* net, double lambda_min = -6.0, double lambda_max = 6.0);
    static NoiseSchedule make(const std::string& kind_name, double lambda_min, double lambda_max,
                              const MonotonicNet* net = nullptr);

    double lambda_of(double t) const;     // t in [0,1], else DomainError
    double dlambda_dt(double t) const;    // analytic for fixed kinds; central diff (h=1e-5) for learned
    double t_of_lambda(double lam) const; // inverse map, lam in [lambda_min, lambda_max]
    ScheduleSample sample_at(double t) const;
    ScheduleSample sample_at_lambda(double lam) const;

    // Density over noise levels implied by uniform time: p(lambda) = -dt/dlambda.
    double density(double lam) const;

    ScheduleKind kind() const { return kind_; }
    double lambda_min() const { return lambda_min_; }
    double lambda_max() const { return lambda_max_; }
    const char* kind_name() const;

  private:
    NoiseSchedule(ScheduleKind k, double lmin, double lmax) : kind_(k), lambda_min_(lmin), lambda_max_(lmax) {}

    ScheduleKind kind_;
    double lambda_min_, lambda_max_;
    // Interior raw-time interval for the endpoint-clamped kinds.
    double u0_ = 0.0, u1_ = 1.0;
    const MonotonicNet* net_ = nullptr;
};

// alpha from a target latent variance: alpha^2 = 1 - sigma^2 / Var[x]
// (reduces to alpha^2 = 1 - sigma^2 for standardized data).
double vp_alpha_from_sigma(double sigma2, double data_variance);

// Per-noise-level weighting function w(lambda) distinguishing practical
// objectives from the plain uniform-weight bound.
class WeightingFn {
  public:
    enum class Kind { Uniform, SimpleImplied, Snr, SigmoidMonotone, CustomTable };

    static WeightingFn uniform() { return WeightingFn(Kind::Uniform); }
    // Weighting implied by the plain squared noise-prediction objective:
    // w = 1/gamma'(t) evaluated at t(lambda), i.e. the schedule's own density.
    static WeightingFn simple_implied(const NoiseSchedule* sched) {
        WeightingFn w(Kind::SimpleImplied);
        w.sched_ = sched;
        return w;
    }
    // Noise-prediction loss measured in data space: w = SNR = exp(lambda).
    static WeightingFn snr() { return WeightingFn(Kind::Snr); }
    static WeightingFn sigmoid_monotone() { return WeightingFn(Kind::SigmoidMonotone); }
    // Piecewise-linear table of (lambda, w) points, ascending in lambda.
    static WeightingFn custom_table(std::vector<std::pair<double, double>> table);

    double eval(double lambda) const;
    Kind kind() const { return kind_; }

  private:
    explicit WeightingFn(Kind k) : kind_(k) {}
    Kind kind_;
    const NoiseSchedule* sched_ = nullptr;
    std::vector<std::pair<double, double>> table_;
};

// Named-objective lookup: which w(lambda) does the given training objective
// secretly optimize? Names: "uniform-vlb", "simple-eps", "eps-in-x-space".
WeightingFn implied_weighting(const std::string& objective, const NoiseSchedule* sched = nullptr);

// Validity report for using w as a cumulative distribution over time:
// (i) w(lambda_t) in [0,1]; (ii) non-decreasing in t; (iii) endpoints
// w(lambda(0)) -> 0 and w(lambda(1)) -> 1 (tolerance 1e-3).
struct WeightingCdfReport {
    bool in_unit_interval = false;
    bool nondecreasing_in_t = false;
    bool endpoint_normalized = false;
    bool valid = false;                  // all three conditions
    bool cdf_after_renormalization = false;  // monotone, renormalizable endpoints
    double w_at_t0 = 0.0, w_at_t1 = 0.0;
    std::string classification;
};

WeightingCdfReport weighting_cdf_check(const WeightingFn& w, const NoiseSchedule& sched);

// Time density p_w(t) = d/dt w~(lambda_t) of the affinely renormalized
// weighting w~ = (w - w(t=0)) / (w(t=1) - w(t=0)), by central differences
// with h = 1e-4 (one-sided at the interval ends).
double pw_density(const WeightingFn& w, const NoiseSchedule& sched, double t);

}  // namespace vdm
