#pragma once

#include <array>
#include <vector>

#include "vdm/nets.hpp"
#include "vdm/parameterization.hpp"
#include "vdm/schedule.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

// Standardized 2-D point cloud: per-coordinate mean 0 and variance 1 after
// the stored affine standardization (a variance-preserving process needs
// unit-variance inputs).
struct Dataset2D {
    std::vector<std::array<double, 2>> points;
    std::array<double, 2> mean_applied{};   // subtracted
    std::array<double, 2> scale_applied{};  // divided by

    std::size_t size() const { return points.size(); }
    Tensor tensor_at(std::size_t i) const { return Tensor({2}, {points[i][0], points[i][1]}); }
};

// Equal-weight mixture of five Gaussians on a circle of radius 2 with
// component std 0.2, then standardized. Also records which component each
// point came from (for generation-quality checks).
struct FiveClusters {
    Dataset2D data;
    std::vector<int> component;                       // per point
    std::array<std::array<double, 2>, 5> centers{};   // standardized coordinates
    std::array<double, 2> component_std{};            // standardized coordinates
};
FiveClusters five_clusters(std::size_t n, std::uint64_t seed);

// Two-latent variational autoencoder baseline: Gaussian encoder q(z|x),
// Gaussian decoder mean with fixed observation variance, standard-normal
// prior with no learnable parameters.
class VaeModel {
  public:
    struct Config {
        std::size_t data_dim = 2;
        std::size_t latent_dim = 2;
        std::size_t hidden = 32;
        double obs_variance = 0.1;
    };

    VaeModel(Config cfg, ParamStore* params, Rng& rng);

    struct Posterior {
        Tensor mean;
        Tensor log_var;
    };
    Posterior encode(const Tensor& x) const;
    Tensor decode(const Tensor& z) const;

    // Tape path for training: returns the scalar evidence-bound node
    // (reconstruction log-likelihood minus closed-form Gaussian divergence),
    // with the reparameterized draw z = mu + exp(logvar/2) * eps.
    int build_elbo(Graph& g, const Tensor& x, const Tensor& eps) const;

    const Config& config() const { return cfg_; }
    ParamStore* params() const { return params_; }

  private:
    int build_mlp(Graph& g, int in, const int* pids, std::size_t n_layers) const;
    Tensor eval_mlp(const Tensor& in, const int* pids, std::size_t n_layers) const;

    Config cfg_;
    ParamStore* params_;
    // encoder trunk (W,b), mean head (W,b), logvar head (W,b); decoder trunk + head
    std::vector<int> pids_;
};

// Monte Carlo evidence bound for one datapoint:
// E_q[log p(x|z)] - KL(q(z|x) || N(0,I)), divergence in closed form.
double vae_vlb(const VaeModel& model, const Tensor& x, std::size_t n_mc, Rng& rng);

// Dataset-averaged posterior as an explicit Gaussian mixture over latents.
struct AggregatePosterior {
    struct Component {
        std::array<double, 2> mean;
        std::array<double, 2> var;
    };
    std::vector<Component> components;

    double density(double z0, double z1) const;
};

AggregatePosterior aggregate_from_vae(const VaeModel& model, const Dataset2D& dataset);
// Forward-diffused dataset at one noise level: components N(alpha x_i, sigma^2 I).
AggregatePosterior aggregate_from_diffusion(const Dataset2D& dataset, const ScheduleSample& at);

// Density field on a rectangular grid (row-major over z1 then z0).
std::vector<double> aggregate_posterior_density(const AggregatePosterior& agg,
                                                const std::vector<double>& grid_z0,
                                                const std::vector<double>& grid_z1);

// Prior/aggregate mismatch score: the fraction of standard-normal prior draws
// whose aggregate density falls below the 1st percentile of aggregate density
// over latents drawn from the aggregate itself. Calibrates to ~0.01 when the
// aggregate equals the prior; approaches 1 for a concentrated aggregate.
double hole_metric(const AggregatePosterior& agg, std::size_t n_prior_samples, Rng& rng);

// Gaussian-data oracle: data ~ N(mean, variance) per coordinate. The ideal
// denoiser is the posterior mean of x given z_t, in closed form.
struct AnalyticGaussianOracle {
    double mean = 0.0;
    double variance = 1.0;
};
Prediction optimal_denoiser(const AnalyticGaussianOracle& oracle, const Tensor& z_t,
                            const ScheduleSample& sample);

// Brute-force 1-D conjugacy oracle: pointwise product of the transition
// likelihood and the conditional prior on a 4001-point grid, normalized, and
// reduced to mean/variance. Errors out if the grid misses posterior mass.
struct GridPosterior {
    double mean = 0.0;
    double variance = 0.0;
};
GridPosterior grid_bayes_posterior(double x, double z_t, const ScheduleSample& s,
                                   const ScheduleSample& t, std::size_t grid_points = 4001);

// Two-sided Kolmogorov-Smirnov p-value of samples against N(0,1).
double ks_normal_pvalue(std::vector<double> samples);

}  // namespace vdm
