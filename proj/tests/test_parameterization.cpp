#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "vdm/diffusion.hpp"
#include "vdm/nets.hpp"
#include "vdm/parameterization.hpp"

using namespace vdm;

namespace {

ScheduleSample vp_point(double alpha, double sigma2, double t = 0.5) {
    ScheduleSample s;
    s.t = t;
    s.alpha = alpha;
    s.sigma2 = sigma2;
    s.lambda = std::log(alpha * alpha / sigma2);
    return s;
}

ScheduleSample at_lambda(double lam) {
    ScheduleSample s;
    s.lambda = lam;
    s.sigma2 = sigmoid(-lam);
    s.alpha = std::sqrt(sigmoid(lam));
    return s;
}

Prediction make_pred(PredictionKind k, Tensor v, double lam) {
    Prediction p;
    p.kind = k;
    p.value = std::move(v);
    p.lambda = lam;
    return p;
}

constexpr PredictionKind kFive[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                    PredictionKind::V, PredictionKind::U};

}  // namespace

TEST_CASE("kind names round-trip") {
    for (PredictionKind k : kFive) CHECK(kind_from_name(kind_name(k)) == k);
    CHECK(kind_from_name("energy-grad") == PredictionKind::ENERGY_GRAD);
    CHECK_THROWS_AS(kind_from_name("nope"), LookupError);
}

TEST_CASE("worked conversions at alpha=0.8, sigma=0.6, z=1.1") {
    const ScheduleSample smp = vp_point(0.8, 0.36);
    const Tensor z = Tensor::vec({1.1});
    const Prediction xhat = make_pred(PredictionKind::X, Tensor::vec({1.0}), smp.lambda);

    const Prediction eps = convert(xhat, z, smp, PredictionKind::EPS);
    CHECK(eps.value[0] == doctest::Approx(0.5).epsilon(1e-12));

    const Prediction v = convert(xhat, z, smp, PredictionKind::V);
    CHECK(v.value[0] == doctest::Approx(-0.2).epsilon(1e-12));
    const Prediction x_back = convert(v, z, smp, PredictionKind::X);
    CHECK(x_back.value[0] == doctest::Approx(1.0).epsilon(1e-12));

    const Prediction score = convert(eps, z, smp, PredictionKind::SCORE);
    CHECK(score.value[0] == doctest::Approx(-0.5 / 0.6).epsilon(1e-10));
    CHECK(convert(score, z, smp, PredictionKind::EPS).value[0] == doctest::Approx(0.5).epsilon(1e-12));

    // u = eps - x; back through eps = (z + alpha u) / (alpha + sigma).
    const Prediction u = convert(xhat, z, smp, PredictionKind::U);
    CHECK(u.value[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(convert(u, z, smp, PredictionKind::EPS).value[0] == doctest::Approx(0.5).epsilon(1e-12));

    // Energy gradient is accepted as a source (it equals -score)...
    const Prediction eg = make_pred(PredictionKind::ENERGY_GRAD, Tensor::vec({0.5 / 0.6}), smp.lambda);
    CHECK(convert(eg, z, smp, PredictionKind::EPS).value[0] == doctest::Approx(0.5).epsilon(1e-10));
    // ...but not as a target.
    CHECK_THROWS_AS(convert(eps, z, smp, PredictionKind::ENERGY_GRAD), LookupError);
}

TEST_CASE("conversion preconditions: matching lambda, singular endpoints") {
    const ScheduleSample smp = vp_point(0.8, 0.36);
    const Tensor z = Tensor::vec({1.1});
    Prediction bad = make_pred(PredictionKind::X, Tensor::vec({1.0}), smp.lambda + 0.5);
    CHECK_THROWS_AS(convert(bad, z, smp, PredictionKind::EPS), ContractError);

    // Deep in the noise-free endpoint sigma underflows the threshold.
    const ScheduleSample clean = at_lambda(40.0);
    CHECK(clean.sigma() < kSingularityThreshold);
    Prediction x = make_pred(PredictionKind::X, Tensor::vec({1.0}), clean.lambda);
    CHECK_THROWS_AS(convert(x, Tensor::vec({1.0}), clean, PredictionKind::EPS), SingularityError);
    // A conversion that never divides by sigma still works there.
    Prediction e = make_pred(PredictionKind::EPS, Tensor::vec({0.3}), clean.lambda);
    CHECK_NOTHROW(convert(e, Tensor::vec({1.0}), clean, PredictionKind::V));
    // Mirror case at the pure-noise endpoint: alpha underflows instead.
    const ScheduleSample noisy = at_lambda(-40.0);
    Prediction e2 = make_pred(PredictionKind::EPS, Tensor::vec({0.3}), noisy.lambda);
    CHECK_THROWS_AS(convert(e2, Tensor::vec({1.0}), noisy, PredictionKind::X), SingularityError);
}

TEST_CASE("all 20 ordered conversion pairs round-trip to 1e-12 for |lambda| <= 8") {
    Rng rng(41);
    for (int k = 0; k < 200; ++k) {
        const ScheduleSample smp = at_lambda(-8.0 + 16.0 * rng.uniform());
        const Tensor x = rng.normal_vec(3), eps = rng.normal_vec(3);
        const Tensor z = diffuse(x, smp, eps);
        for (PredictionKind a : kFive) {
            Prediction pa = make_pred(a, target_of_kind(a, x, eps, z, smp) + 0.1 * rng.normal_vec(3),
                                      smp.lambda);
            for (PredictionKind b : kFive) {
                if (a == b) continue;
                const Prediction round = convert(convert(pa, z, smp, b), z, smp, a);
                CHECK(std::sqrt(squared_norm(round.value - pa.value)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("v-parameterization geometry: angle form matches the alpha/sigma form") {
    Rng rng(4242);
    for (int k = 0; k < 100; ++k) {
        const ScheduleSample smp = at_lambda(-8.0 + 16.0 * rng.uniform());
        const double phi = std::atan2(smp.sigma(), smp.alpha);
        const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
        const Tensor z = diffuse(x, smp, eps);
        const Tensor z_angle = std::cos(phi) * x + std::sin(phi) * eps;
        CHECK(std::sqrt(squared_norm(z - z_angle)) <= 1e-12);
        const Tensor v = target_of_kind(PredictionKind::V, x, eps, z, smp);
        const Tensor v_angle = std::cos(phi) * eps - std::sin(phi) * x;
        CHECK(std::sqrt(squared_norm(v - v_angle)) <= 1e-12);
    }
}

TEST_CASE("loss translation: worked factors and the inversion invariant") {
    const ScheduleSample smp = vp_point(0.8, 0.36);
    // eps-err^2 = 0.04 -> x-err^2 = (sigma^2/alpha^2) * 0.04 = 0.0225.
    CHECK(translate_loss(0.04, PredictionKind::EPS, PredictionKind::X, smp) ==
          doctest::Approx(0.0225).epsilon(1e-12));
    // v -> x: v-err = eps-err / alpha and x-err = (sigma^2/alpha^2) eps-err,
    // so the factor collapses to sigma^2 under the VP identity.
    CHECK(loss_translation_factor(PredictionKind::V, PredictionKind::X, smp) ==
          doctest::Approx(0.36).epsilon(1e-10));
    // score <- eps: multiply by 1/sigma^2.
    CHECK(loss_translation_factor(PredictionKind::EPS, PredictionKind::SCORE, smp) ==
          doctest::Approx(1.0 / 0.36).epsilon(1e-10));
    for (PredictionKind a : kFive) {
        CHECK(loss_translation_factor(a, a, smp) == 1.0);
        for (PredictionKind b : kFive) {
            const double fwd = loss_translation_factor(a, b, smp);
            const double bwd = loss_translation_factor(b, a, smp);
            CHECK(fwd * bwd == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(translate_loss(-0.1, PredictionKind::EPS, PredictionKind::X, smp), DomainError);
}

TEST_CASE("loss translation commutes with conversion on consistent pairs") {
    Rng rng(9);
    for (int k = 0; k < 100; ++k) {
        const ScheduleSample smp = at_lambda(-8.0 + 16.0 * rng.uniform());
        const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
        const Tensor z = diffuse(x, smp, eps);
        Prediction pe = make_pred(PredictionKind::EPS, eps + 0.2 * rng.normal_vec(2), smp.lambda);
        for (PredictionKind a : kFive) {
            for (PredictionKind b : kFive) {
                const Prediction pa = convert(pe, z, smp, a);
                const Prediction pb = convert(pe, z, smp, b);
                CHECK(direct_vs_translated(x, eps, pa, pb, z, smp) <= 1e-10);
            }
        }
        // Perfect prediction: both errors are zero.
        Prediction perfect = make_pred(PredictionKind::EPS, eps, smp.lambda);
        CHECK(direct_vs_translated(x, eps, perfect, convert(perfect, z, smp, PredictionKind::X), z, smp) <=
              1e-14);
    }
}

TEST_CASE("ground-truth targets satisfy their defining identities") {
    Rng rng(13);
    const ScheduleSample smp = at_lambda(0.37);
    const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
    const Tensor z = diffuse(x, smp, eps);
    CHECK(squared_norm(target_of_kind(PredictionKind::X, x, eps, z, smp) - x) <= 1e-28);
    CHECK(squared_norm(target_of_kind(PredictionKind::EPS, x, eps, z, smp) - eps) <= 1e-28);
    const Tensor sc = target_of_kind(PredictionKind::SCORE, x, eps, z, smp);
    CHECK(std::sqrt(squared_norm(sc - (-1.0 / smp.sigma()) * eps)) <= 1e-12);
    const Tensor v = target_of_kind(PredictionKind::V, x, eps, z, smp);
    CHECK(std::sqrt(squared_norm(v - (smp.alpha * eps - smp.sigma() * x))) <= 1e-12);
    const Tensor u = target_of_kind(PredictionKind::U, x, eps, z, smp);
    CHECK(std::sqrt(squared_norm(u - (eps - x))) <= 1e-12);
}
