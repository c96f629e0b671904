#include "vdm/parameterization.hpp"

#include <cmath>

namespace vdm {

namespace {

void require_nonsingular(double divisor, const char* name) {
    if (std::abs(divisor) < kSingularityThreshold) {
        throw SingularityError(std::string("conversion divides by vanishing ") + name);
    }
}

// Hub representation: everything maps to and from EPS.
Tensor to_eps(const Prediction& pred, const Tensor& z, const ScheduleSample& s) {
    const double a = s.alpha, sg = s.sigma();
    switch (pred.kind) {
        case PredictionKind::EPS:
            return pred.value;
        case PredictionKind::X: {
            // eps = (z - alpha x) / sigma
            require_nonsingular(sg, "sigma_t");
            return (1.0 / sg) * (z - a * pred.value);
        }
        case PredictionKind::SCORE:
            // score = -eps / sigma
            return (-sg) * pred.value;
        case PredictionKind::V:
            // v = alpha eps - sigma x  =>  eps = alpha v + sigma z
            return a * pred.value + sg * z;
        case PredictionKind::U: {
            // u = eps - x with z = alpha x + sigma eps  =>  eps = (z + alpha u) / (alpha + sigma)
            require_nonsingular(a + sg, "alpha_t + sigma_t");
            return (1.0 / (a + sg)) * (z + a * pred.value);
        }
        case PredictionKind::ENERGY_GRAD:
            // energy gradient = -score = eps / sigma
            return sg * pred.value;
    }
    throw ContractError("unreachable prediction kind");
}

Tensor from_eps(const Tensor& eps, const Tensor& z, const ScheduleSample& s, PredictionKind to) {
    const double a = s.alpha, sg = s.sigma();
    switch (to) {
        case PredictionKind::EPS:
            return eps;
        case PredictionKind::X:
            require_nonsingular(a, "alpha_t");
            return (1.0 / a) * (z - sg * eps);
        case PredictionKind::SCORE:
            require_nonsingular(sg, "sigma_t");
            return (-1.0 / sg) * eps;
        case PredictionKind::V:
            require_nonsingular(a, "alpha_t");
            return (1.0 / a) * (eps - sg * z);
        case PredictionKind::U:
            require_nonsingular(a, "alpha_t");
            return (1.0 / a) * ((a + sg) * eps - z);
        case PredictionKind::ENERGY_GRAD:
            throw LookupError("energy-gradient is an input-only prediction kind");
    }
    throw ContractError("unreachable prediction kind");
}

}  // namespace

const char* kind_name(PredictionKind k) {
    switch (k) {
        case PredictionKind::X: return "x";
        case PredictionKind::EPS: return "eps";
        case PredictionKind::SCORE: return "score";
        case PredictionKind::V: return "v";
        case PredictionKind::U: return "u";
        case PredictionKind::ENERGY_GRAD: return "energy-grad";
    }
    return "?";
}

PredictionKind kind_from_name(const std::string& name) {
    if (name == "x") return PredictionKind::X;
    if (name == "eps") return PredictionKind::EPS;
    if (name == "score") return PredictionKind::SCORE;
    if (name == "v") return PredictionKind::V;
    if (name == "u") return PredictionKind::U;
    if (name == "energy-grad") return PredictionKind::ENERGY_GRAD;
    throw LookupError("unknown prediction kind: " + name);
}

Prediction convert(const Prediction& pred, const Tensor& z_t, const ScheduleSample& sample,
                   PredictionKind to) {
    if (!pred.value.same_shape(z_t)) throw DimensionError("convert: prediction/latent shape mismatch");
    if (std::abs(pred.lambda - sample.lambda) > 1e-9) {
        throw ContractError("convert: prediction and schedule sample refer to different noise levels");
    }
    Prediction out;
    out.kind = to;
    out.lambda = pred.lambda;
    out.value = (pred.kind == to) ? pred.value : from_eps(to_eps(pred, z_t, sample), z_t, sample, to);
    return out;
}

double loss_translation_factor(PredictionKind from, PredictionKind to, const ScheduleSample& s) {
    // ||k - k_hat||^2 = C_k * ||eps - eps_hat||^2 at a fixed latent.
    auto coef = [&](PredictionKind k) -> double {
        const double a2 = s.alpha2(), s2 = s.sigma2;
        switch (k) {
            case PredictionKind::EPS:
                return 1.0;
            case PredictionKind::X:
                require_nonsingular(s.alpha, "alpha_t");
                return s2 / a2;
            case PredictionKind::SCORE:
            case PredictionKind::ENERGY_GRAD:
                require_nonsingular(s.sigma(), "sigma_t");
                return 1.0 / s2;
            case PredictionKind::V:
                require_nonsingular(s.alpha, "alpha_t");
                return 1.0 / a2;
            case PredictionKind::U: {
                const double asum = s.alpha + s.sigma();
                require_nonsingular(s.alpha, "alpha_t");
                return asum * asum / a2;
            }
        }
        throw ContractError("unreachable prediction kind");
    };
    if (from == to) return 1.0;
    return coef(to) / coef(from);
}

double translate_loss(double sq_err, PredictionKind from, PredictionKind to, const ScheduleSample& s) {
    if (!(sq_err >= 0.0)) throw DomainError("translate_loss: squared error must be non-negative");
    return sq_err * loss_translation_factor(from, to, s);
}

Tensor target_of_kind(PredictionKind kind, const Tensor& x, const Tensor& eps, const Tensor& z_t,
                      const ScheduleSample& s) {
    switch (kind) {
        case PredictionKind::X:
            return x;
        case PredictionKind::EPS:
            return eps;
        case PredictionKind::SCORE:
            require_nonsingular(s.sigma(), "sigma_t");
            return (-1.0 / s.sigma()) * eps;
        case PredictionKind::V:
            return s.alpha * eps - s.sigma() * x;
        case PredictionKind::U:
            return eps - x;
        case PredictionKind::ENERGY_GRAD:
            require_nonsingular(s.sigma(), "sigma_t");
            return (1.0 / s.sigma()) * eps;
    }
    throw ContractError("unreachable prediction kind");
    (void)z_t;
}

double direct_vs_translated(const Tensor& x, const Tensor& eps, const Prediction& pred_a,
                            const Prediction& pred_b, const Tensor& z_t, const ScheduleSample& sample) {
    const Tensor target_a = target_of_kind(pred_a.kind, x, eps, z_t, sample);
    const Tensor target_b = target_of_kind(pred_b.kind, x, eps, z_t, sample);
    const double err_a = squared_norm(target_a - pred_a.value);
    const double err_b = squared_norm(target_b - pred_b.value);
    return std::abs(err_b - translate_loss(err_a, pred_a.kind, pred_b.kind, sample));
}

}  // namespace vdm
