#pragma once

#include <string>

#include "vdm/schedule.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

// What a network output means. All kinds are linear reparameterizations of
// one another given the latent and its noise level:
//   X           data estimate x_hat
//   EPS         noise estimate, z = alpha x + sigma eps
//   SCORE       gradient of the latent log-density, -eps/sigma
//   V           tangential velocity of the angular rotation from x to eps:
//               v = alpha eps - sigma x
//   U           velocity of the linear data->noise interpolant: u = eps - x
//   ENERGY_GRAD gradient of a scalar energy, equal to -score
enum class PredictionKind { X, EPS, SCORE, V, U, ENERGY_GRAD };

const char* kind_name(PredictionKind k);
PredictionKind kind_from_name(const std::string& name);

struct Prediction {
    PredictionKind kind = PredictionKind::EPS;
    Tensor value;
    double lambda = 0.0;  // conditioning noise level the value refers to
};

// Below this, a conversion dividing by alpha_t or sigma_t is refused as an
// endpoint singularity rather than amplifying rounding error.
inline constexpr double kSingularityThreshold = 1e-8;

// Exact linear map between prediction kinds at one schedule point. Round
// trips close to 1e-12 away from the endpoints. ENERGY_GRAD is accepted as a
// source (it is -score) but not as a target.
Prediction convert(const Prediction& pred, const Tensor& z_t, const ScheduleSample& sample,
                   PredictionKind to);

// Squared-error translation between kinds, e.g.
// ||x - x_hat||^2 = (sigma^2/alpha^2) ||eps - eps_hat||^2. Factors compose
// and invert exactly: factor(a,b) * factor(b,a) = 1.
double translate_loss(double sq_err, PredictionKind from, PredictionKind to,
                      const ScheduleSample& sample);
double loss_translation_factor(PredictionKind from, PredictionKind to, const ScheduleSample& sample);

// Diagnostic: given ground truth (x, eps) and two kind-consistent
// predictions, the direct squared error in kind B minus the squared error
// translated from kind A; bounded by 1e-10 * (1 + magnitude) for exact pairs.
double direct_vs_translated(const Tensor& x, const Tensor& eps, const Prediction& pred_a,
                            const Prediction& pred_b, const Tensor& z_t, const ScheduleSample& sample);

// Ground-truth target of a given kind from (x, eps, z) at a schedule point.
Tensor target_of_kind(PredictionKind kind, const Tensor& x, const Tensor& eps, const Tensor& z_t,
                      const ScheduleSample& sample);

}  // namespace vdm
