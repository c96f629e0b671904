// Acceptance gate: ten end-to-end criteria, one pass/fail line each.
// Returns a nonzero exit code if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "vdm/baselines.hpp"
#include "vdm/config.hpp"
#include "vdm/diffusion.hpp"
#include "vdm/losses.hpp"
#include "vdm/nets.hpp"
#include "vdm/parameterization.hpp"
#include "vdm/report.hpp"
#include "vdm/run.hpp"
#include "vdm/schedule.hpp"

using namespace vdm;

namespace {

int g_failures = 0;

class Timer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(const std::string& name, bool pass, const std::string& detail, double secs,
            double limit_secs) {
    const bool in_time = secs < limit_secs;
    const bool ok = pass && in_time;
    if (!ok) ++g_failures;
    std::printf("[%s] %s (%s; %.1fs of %.0fs budget)\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.c_str(), secs, limit_secs);
    std::fflush(stdout);
}

ScheduleSample sample_from_lambda(double lam) {
    ScheduleSample s;
    s.lambda = lam;
    s.sigma2 = sigmoid(-lam);
    s.alpha = std::sqrt(sigmoid(lam));
    return s;
}

DenoiserFn ideal_unit_gaussian() {
    return [](const Tensor& z, double lambda) {
        const AnalyticGaussianOracle oracle{0.0, 1.0};
        return optimal_denoiser(oracle, z, sample_from_lambda(lambda));
    };
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

// ---- criterion 1: closed-form posterior vs the brute-force grid oracle ----
void criterion_1() {
    const Timer timer;
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();
    Rng rng(1001);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double ts = 0.05 + 0.8 * rng.uniform();
        const double tt = ts + 0.05 + (0.95 - ts - 0.05) * rng.uniform();
        const ScheduleSample s = lin.sample_at(ts), t = lin.sample_at(tt);
        const double x = rng.normal();
        const double z = t.alpha * x + t.sigma() * rng.normal();
        const PosteriorParams p = posterior_params(s, t);
        const GridPosterior gp = grid_bayes_posterior(x, z, s, t);
        worst = std::max(worst, std::abs(p.coef_z * z + p.coef_x * x - gp.mean));
        worst = std::max(worst, std::abs(p.sigma2_Q - gp.variance));
    }
    report("01 posterior-conjugacy-100-pairs", worst <= 1e-4, fmt("worst |diff| %.3g vs 1e-4", worst),
           timer.seconds(), 10.0);
}

// ---- criterion 2: full-interval uniform-weight loss = 3.0000 under two schedules ----
void criterion_2() {
    const Timer timer;
    bool pass = true;
    std::string detail;
    std::uint64_t seed = 2001;
    for (const NoiseSchedule& sched : {NoiseSchedule::linear_lambda(), NoiseSchedule::cosine()}) {
        Rng rng(seed++);
        const DenoiserFn ideal = ideal_unit_gaussian();
        std::vector<double> samples;
        samples.reserve(100000);
        for (int k = 0; k < 100000; ++k) {
            const Tensor x = rng.normal_vec(1);
            samples.push_back(
                continuous_loss(x, ideal, sched, WeightingFn::uniform(), 1, rng).value);
        }
        const LossEstimate est = LossEstimate::from_samples(std::move(samples));
        const double dev = std::abs(est.value - 3.0);
        pass = pass && dev <= 3.0 * est.std_error;
        detail += std::string(sched.kind_name()) + " " + fmt("%.4f+-%.4f ", est.value, est.std_error);
    }
    report("02 uniform-loss-3.0000-both-schedules", pass, detail + "(3 SE band)", timer.seconds(), 30.0);
}

// ---- criterion 3: exact T-step loss strictly decreasing toward 3.0 ----
void criterion_3() {
    const Timer timer;
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();
    bool pass = true;
    double prev = 1e300, last = 0.0;
    for (std::size_t T = 8; T <= 512; T *= 2) {
        // Exact enumeration: zero Monte Carlo error, so any positive gap
        // already clears a 3-combined-standard-error threshold.
        const double val = discrete_loss_expected_unit_gaussian(lin, T);
        pass = pass && (val < prev) && (val > 3.0);
        prev = val;
        last = val;
    }
    report("03 discrete-loss-monotone-in-depth", pass,
           fmt("L_512 = %.6f, decreasing toward 3.0 (exact gaps > 0)", last), timer.seconds(), 10.0);
}

// ---- criterion 4: conversion table, round trips, loss translations ----
void criterion_4() {
    const Timer timer;
    Rng rng(4001);
    const PredictionKind kinds[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                    PredictionKind::V, PredictionKind::U};
    double worst_row = 0.0, worst_round = 0.0, worst_translate = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const ScheduleSample smp = sample_from_lambda(-8.0 + 16.0 * rng.uniform());
        const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
        const Tensor z = diffuse(x, smp, eps);

        // Each defining row: converting the true eps-target yields the true
        // target of every other kind.
        Prediction truth;
        truth.kind = PredictionKind::EPS;
        truth.lambda = smp.lambda;
        truth.value = eps;
        for (PredictionKind b : kinds) {
            const Tensor got = convert(truth, z, smp, b).value;
            const Tensor want = target_of_kind(b, x, eps, z, smp);
            worst_row = std::max(worst_row, std::sqrt(squared_norm(got - want)));
        }

        // All 20 ordered round trips on a perturbed prediction.
        Prediction noisy = truth;
        noisy.value = eps + 0.2 * rng.normal_vec(2);
        for (PredictionKind a : kinds) {
            const Prediction pa = convert(noisy, z, smp, a);
            for (PredictionKind b : kinds) {
                if (a == b) continue;
                const Prediction back = convert(convert(pa, z, smp, b), z, smp, a);
                // Relative to the prediction's own magnitude: near lambda = 8
                // the score values reach ~50, so absolute error scales with them.
                const double rel = std::sqrt(squared_norm(back.value - pa.value)) /
                                   std::max(1.0, std::sqrt(squared_norm(pa.value)));
                worst_round = std::max(worst_round, rel);
            }
            for (PredictionKind b : kinds) {
                worst_translate = std::max(
                    worst_translate,
                    direct_vs_translated(x, eps, pa, convert(noisy, z, smp, b), z, smp));
            }
        }
    }
    const bool pass = worst_row <= 1e-12 && worst_round <= 1e-12 && worst_translate <= 1e-10;
    report("04 parameterization-identities-1000-draws", pass,
           fmt("rows %.2g, round trips %.2g", worst_row, worst_round) +
               fmt(", translations %.2g", worst_translate),
           timer.seconds(), 5.0);
}

// ---- criterion 5: cancellation-free forms, including a 1e-12 log-SNR gap ----
void criterion_5() {
    const Timer timer;
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();
    Rng rng(5001);
    double worst_rel = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double a = 0.02 + 0.9 * rng.uniform();
        const double b = a + 1e-3 + (0.98 - a) * rng.uniform();
        const ScheduleSample s = lin.sample_at(a), t = lin.sample_at(b);
        const double stable = discrete_loss_constant(s, t, true);
        const double naive = discrete_loss_constant(s, t, false);
        worst_rel = std::max(worst_rel, std::abs(stable - naive) / std::abs(naive));
        const PosteriorParams pd = posterior_params(s, t);
        const PosteriorParams ps = posterior_params_stable(s.gamma(), t.gamma(), s, t);
        worst_rel = std::max(worst_rel, std::abs(pd.sigma2_Q - ps.sigma2_Q) / pd.sigma2_Q);
    }

    // Tiny-gap case: direct subtraction would cancel to noise; the expm1 form
    // must agree with an extended-precision oracle.
    const double gap = 1e-12;
    ScheduleSample s_tiny = lin.sample_at(0.5), t_tiny = lin.sample_at(0.5);
    s_tiny.lambda = t_tiny.lambda + gap;
    const PosteriorParams tiny = posterior_params_stable(s_tiny.gamma(), t_tiny.gamma(), s_tiny, t_tiny);
    const long double oracle = static_cast<long double>(s_tiny.sigma2) *
                               (-std::expm1l(-static_cast<long double>(gap)));
    const double tiny_rel =
        std::abs(static_cast<double>((static_cast<long double>(tiny.sigma2_Q) - oracle) / oracle));
    const bool pass = worst_rel <= 1e-10 && std::isfinite(tiny.sigma2_Q) && tiny.sigma2_Q > 0.0 &&
                      tiny_rel < 1e-6;
    report("05 stable-forms-and-1e-12-gap", pass,
           fmt("well-conditioned rel %.2g, tiny-gap rel %.2g", worst_rel, tiny_rel), timer.seconds(),
           10.0);
}

// ---- criterion 6: the autoencoder leaves prior holes; diffusion does not ----
void criterion_6() {
    const Timer timer;
    const FiveClusters fc = five_clusters(4000, 6001);

    ParamStore params;
    Rng init_rng = Rng::derive(6001, 0xBEE);
    VaeModel vae({}, &params, init_rng);
    Rng train_rng = Rng::derive(6001, 0xFEED);
    train_vae(vae, params, fc.data, 4000, 32, 0.01, 0.9, train_rng);

    const AggregatePosterior agg_vae = aggregate_from_vae(vae, fc.data);
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();
    const AggregatePosterior agg_diff = aggregate_from_diffusion(fc.data, lin.sample_at(1.0));

    Rng hole_rng = Rng::derive(6001, 0x401E);
    const double hm_vae = hole_metric(agg_vae, 10000, hole_rng);
    const double hm_diff = hole_metric(agg_diff, 10000, hole_rng);

    // Normality of the forward-diffused endpoint marginals over 10^4 points.
    Rng ks_rng = Rng::derive(6001, 0x6B5);
    const ScheduleSample t1 = lin.sample_at(1.0);
    std::vector<double> marg;
    marg.reserve(10000);
    for (std::size_t i = 0; i < 5000; ++i) {
        marg.push_back(t1.alpha * fc.data.points[i][0] + t1.sigma() * ks_rng.normal());
        marg.push_back(t1.alpha * fc.data.points[i][1] + t1.sigma() * ks_rng.normal());
    }
    const double ks_p = ks_normal_pvalue(marg);

    const bool pass = hm_vae >= 10.0 * hm_diff && ks_p > 0.01;
    report("06 prior-hole-contrast-and-endpoint-normality", pass,
           fmt("hole vae %.4f vs diffusion %.4f", hm_vae, hm_diff) + fmt(", ks p %.3f", ks_p),
           timer.seconds(), 300.0);
}

// ---- criterion 7: trained sampler recovers the mixture ----
void criterion_7() {
    const Timer timer;
    const FiveClusters fc = five_clusters(4000, 7001);
    ParamStore params;
    Rng init_rng = Rng::derive(7001, 0xA11CE);
    DenoiserNet net({2, 64, 2, true}, &params, init_rng);
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();

    TrainOptions opt;
    opt.loss_mode = "continuous";
    opt.weighting = "simple-eps";
    opt.time_dist = TimeDist::UniformT;
    opt.steps = 5000;
    opt.batch = 64;
    opt.lr = 0.02;
    opt.momentum = 0.9;
    Rng train_rng = Rng::derive(7001, 0x7EA1);
    train_denoiser(net, params, PredictionKind::EPS, fc.data, lin, nullptr, opt, train_rng);

    const auto samples = sample_diffusion(denoiser_fn(net, PredictionKind::EPS), lin, 2000, 200, 7002);
    std::size_t hits = 0;
    for (const auto& p : samples) {
        for (const auto& c : fc.centers) {
            if (std::abs(p[0] - c[0]) <= 3.0 * fc.component_std[0] &&
                std::abs(p[1] - c[1]) <= 3.0 * fc.component_std[1]) {
                ++hits;
                break;
            }
        }
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(samples.size());
    report("07 sampler-recovers-mixture", frac >= 0.95, fmt("%.1f%% of samples near a center", 100.0 * frac),
           timer.seconds(), 600.0);
}

// ---- criterion 8: every parameter passes a finite-difference gradient check ----
void criterion_8() {
    const Timer timer;
    ParamStore params;
    Rng rng(8001);
    DenoiserNet net({2, 16, 2, true}, &params, rng);
    MonotonicNet mono(&params, rng, -6.0, 6.0, 16);
    VaeModel vae({}, &params, rng);

    const Tensor z = Tensor::vec({0.7, -0.3});
    const Tensor target = Tensor::vec({0.2, 0.4});
    const Tensor x = Tensor::vec({0.5, -1.0});
    const Tensor eps = Tensor::vec({0.3, -0.7});

    // One combined scalar objective touching all three networks.
    const auto build_loss = [&](Graph& g) {
        const int out = net.build(g, g.input(z), g.input_scalar(0.8));
        const int l1 = g.sqsum(g.sub(out, g.input(target)));
        const int l2 = mono.build(g, g.input_scalar(0.37));
        const int l3 = vae.build_elbo(g, x, eps);
        return g.add(g.add(l1, l2), g.scale(l3, -0.1));
    };

    params.zero_grad();
    {
        Graph g(&params);
        g.backward(build_loss(g));
    }
    const auto eval_loss = [&]() {
        Graph g(&params);
        return g.value(build_loss(g))[0];
    };

    const double h = 1e-5;
    double worst_rel = 0.0;
    std::size_t n_params = 0;
    for (int pid = 0; pid < params.count(); ++pid) {
        Tensor& value = params[pid].value;
        const Tensor& grad = params[pid].grad;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + h;
            const double up = eval_loss();
            value[i] = orig - h;
            const double down = eval_loss();
            value[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd));
            worst_rel = std::max(worst_rel, rel);
            ++n_params;
        }
    }
    report("08 finite-difference-gradients-all-params", worst_rel <= 1e-5,
           fmt("%.0f parameters, worst rel err %.2g", static_cast<double>(n_params), worst_rel),
           timer.seconds(), 120.0);
}

// ---- criterion 9: weighting-as-CDF fixtures and the monotone identity ----
void criterion_9() {
    const Timer timer;
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();

    const std::string c_uniform = weighting_cdf_check(WeightingFn::uniform(), lin).classification;
    const std::string c_sig =
        weighting_cdf_check(WeightingFn::sigmoid_monotone(), lin).classification;
    std::vector<std::pair<double, double>> bump;
    for (double lam = -6.0; lam <= 6.0 + 1e-9; lam += 0.05) bump.push_back({lam, std::exp(-lam * lam)});
    const std::string c_bump = weighting_cdf_check(WeightingFn::custom_table(bump), lin).classification;
    const std::string c_exact =
        weighting_cdf_check(WeightingFn::custom_table({{-6.0, 1.0}, {6.0, 0.0}}), lin).classification;
    const bool fixtures_ok = c_uniform == "non-CDF: not endpoint-normalized" &&
                             c_sig == "CDF after affine renormalization" &&
                             c_bump == "non-CDF: ELBO minimized at some noise levels" &&
                             c_exact == "CDF";

    Rng rng(9001);
    const Tensor x = Tensor::vec({0.6});
    const WeightingIdentityResult res = monotone_weighting_identity_check(
        x, ideal_unit_gaussian(), lin, WeightingFn::sigmoid_monotone(), 60000, rng);
    const double band = 1e-3 + 3.0 * std::sqrt(res.lhs_se * res.lhs_se + res.rhs_se * res.rhs_se);
    const bool identity_ok = std::abs(res.residual) <= band;

    report("09 cdf-fixtures-and-monotone-identity", fixtures_ok && identity_ok,
           fmt("residual %.4g vs band %.4g", res.residual, band) +
               (fixtures_ok ? ", 4/4 fixtures" : ", fixture mismatch"),
           timer.seconds(), 60.0);
}

// ---- criterion 10: byte-identical outputs on re-run ----
void criterion_10() {
    const Timer timer;
    namespace fs = std::filesystem;
    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto make_dir = [](const std::string& name) {
        const fs::path dir = fs::temp_directory_path() / ("vdm-acceptance-" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    };
    const auto run = [](const std::string& text, const std::string& command, const fs::path& out) {
        RunConfig cfg = RunConfig::from_string(text);
        cfg.command = command;
        cfg.seed = cfg.require_seed();
        cfg.out_dir = out.string();
        return dispatch(cfg);
    };

    const std::string train_cfg =
        "seed=10\n"
        "dataset.n=500\n"
        "model.hidden=16\n"
        "model.depth=1\n"
        "train.steps=120\n"
        "train.batch=16\n"
        "train.lr=0.02\n"
        "sample.n=50\n"
        "sample.T=30\n";
    bool pass = true;
    const auto t1 = make_dir("t1"), t2 = make_dir("t2");
    pass = pass && run(train_cfg, "train", t1) == 0 && run(train_cfg, "train", t2) == 0;
    pass = pass && slurp(t1 / "loss_curve.csv") == slurp(t2 / "loss_curve.csv");
    pass = pass && slurp(t1 / "checkpoint.txt") == slurp(t2 / "checkpoint.txt");

    const auto s1 = make_dir("s1"), s2 = make_dir("s2");
    const std::string sample_cfg = train_cfg + "sample.checkpoint=" + (t1 / "checkpoint.txt").string() + "\n";
    pass = pass && run(sample_cfg, "sample", s1) == 0 && run(sample_cfg, "sample", s2) == 0;
    pass = pass && slurp(s1 / "samples.csv") == slurp(s2 / "samples.csv");
    pass = pass && slurp(s1 / "trajectory.csv") == slurp(s2 / "trajectory.csv");

    const auto d1 = make_dir("d1"), d2 = make_dir("d2");
    pass = pass && run("seed=10\n", "schedule-dump", d1) == 0 && run("seed=10\n", "schedule-dump", d2) == 0;
    pass = pass && slurp(d1 / "schedule.csv") == slurp(d2 / "schedule.csv");

    report("10 byte-identical-reruns", pass, "train/sample/schedule csv outputs compared bytewise",
           timer.seconds(), 120.0);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures == 0) {
        std::printf("all 10 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", g_failures);
    return 1;
}
