#include "vdm/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "vdm/report.hpp"

namespace vdm {

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

NoiseSchedule make_schedule(const RunConfig& cfg, const MonotonicNet* net = nullptr) {
    return NoiseSchedule::make(cfg.get_str("schedule.kind", "linear-lambda"),
                               cfg.get_num("schedule.lambda_min", -6.0),
                               cfg.get_num("schedule.lambda_max", 6.0), net);
}

WeightingFn make_weighting(const std::string& name, const NoiseSchedule* sched) {
    return implied_weighting(name, sched);
}

TrainOptions train_options(const RunConfig& cfg) {
    TrainOptions opt;
    opt.loss_mode = cfg.get_str("loss.mode", "continuous");
    opt.weighting = cfg.get_str("loss.weighting", "simple-eps");
    opt.time_dist = time_dist_from_name(cfg.get_str("loss.time_dist", "uniform-t"));
    opt.T = cfg.get_count("loss.T", 1000);
    opt.steps = cfg.get_count("train.steps", 5000);
    opt.batch = cfg.get_count("train.batch", 64);
    opt.lr = cfg.get_num("train.lr", 1e-3);
    opt.momentum = cfg.get_num("train.momentum", 0.9);
    opt.learn_schedule = cfg.get_flag("train.learn_schedule", false);
    if (opt.loss_mode != "continuous" && opt.loss_mode != "discrete") {
        throw ConfigError("loss.mode must be continuous or discrete");
    }
    return opt;
}

// Draw one (schedule point, weight coefficient) pair such that
// coefficient * ||eps - eps_hat||^2 is an unbiased per-sample term of the
// configured objective.
struct DrawnLevel {
    ScheduleSample smp;
    double coef;
};

DrawnLevel draw_level(const NoiseSchedule& sched, const WeightingFn& w, const TrainOptions& opt, Rng& rng) {
    DrawnLevel d;
    if (opt.loss_mode == "discrete") {
        const double Td = static_cast<double>(opt.T);
        const std::size_t i = rng.integer(1, opt.T);
        const ScheduleSample s = sched.sample_at((static_cast<double>(i) - 1.0) / Td);
        d.smp = sched.sample_at(static_cast<double>(i) / Td);
        d.coef = 0.5 * Td * discrete_loss_constant(s, d.smp);
    } else if (opt.time_dist == TimeDist::UniformT) {
        const double t = rng.uniform();
        d.smp = sched.sample_at(t);
        d.coef = 0.5 * w.eval(d.smp.lambda) * (-sched.dlambda_dt(t));
    } else {
        const double span = sched.lambda_max() - sched.lambda_min();
        d.smp = sched.sample_at_lambda(sched.lambda_min() + span * rng.uniform());
        d.coef = 0.5 * w.eval(d.smp.lambda) * span;
    }
    return d;
}

}  // namespace

PredictionKind train_kind(const DenoiserNet&, const RunConfig& cfg) {
    return kind_from_name(cfg.get_str("model.kind", "eps"));
}

DenoiserFn denoiser_fn(const DenoiserNet& net, PredictionKind kind) {
    return [&net, kind](const Tensor& z, double lambda) {
        Prediction p;
        p.kind = kind;
        p.lambda = lambda;
        p.value = net.eval(z, lambda);
        return p;
    };
}

TrainResult train_denoiser(DenoiserNet& net, ParamStore& params, PredictionKind kind,
                           const Dataset2D& data, const NoiseSchedule& sched,
                           MonotonicNet* learned_sched, const TrainOptions& opt, Rng& rng) {
    if (data.size() == 0) throw ContractError("training needs a non-empty dataset");
    const WeightingFn w = make_weighting(opt.weighting, &sched);
    if (opt.learn_schedule) {
        if (learned_sched == nullptr) throw ConfigError("train.learn_schedule requires schedule.kind=learned");
        if (kind != PredictionKind::EPS) throw ConfigError("joint schedule training supports model.kind=eps only");
        if (opt.loss_mode != "continuous" || opt.time_dist != TimeDist::UniformT) {
            throw ConfigError("joint schedule training supports the continuous uniform-t objective only");
        }
        if (opt.weighting != "uniform-vlb" && opt.weighting != "simple-eps") {
            throw ConfigError("joint schedule training supports uniform-vlb or simple-eps weighting only");
        }
    }

    TrainResult res;
    res.loss_curve.reserve(opt.steps);
    SgdMomentum optimizer(&params, opt.lr, opt.momentum);
    {
        Rng eval_rng = Rng::derive(0x9e3779b97f4a7c15ULL, 1);
        res.initial_loss = denoiser_objective(net, kind, data, sched, opt, 2000, eval_rng);
    }

    Graph g(&params);
    for (std::size_t step = 0; step < opt.steps; ++step) {
        params.zero_grad();
        double step_loss = 0.0;
        for (std::size_t b = 0; b < opt.batch; ++b) {
            const Tensor x = data.tensor_at(rng.integer(0, data.size() - 1));
            const Tensor eps = rng.normal_vec(x.size());
            g.clear();
            int loss_node;
            if (!opt.learn_schedule) {
                const DrawnLevel d = draw_level(sched, w, opt, rng);
                const Tensor z = diffuse(x, d.smp, eps);
                const Tensor target = target_of_kind(kind, x, eps, z, d.smp);
                // Squared error in the trained kind, rescaled to its
                // noise-prediction equivalent so the objective value is
                // kind-independent.
                const double coef = d.coef * loss_translation_factor(kind, PredictionKind::EPS, d.smp) /
                                    static_cast<double>(opt.batch);
                const int out = net.build(g, g.input(z), g.input_scalar(d.smp.lambda));
                loss_node = g.scale(g.sqsum(g.sub(out, g.input(target))), coef);
            } else {
                // Differentiate through the schedule as well: the latent, the
                // conditioning level, and (for uniform weighting) the slope of
                // the log-SNR curve all depend on the monotone network.
                const double t = rng.uniform();
                const int gamma = learned_sched->build(g, g.input_scalar(t));
                const int lambda = g.scale(gamma, -1.0);
                const int alpha = g.sqrt_(g.sigmoid_(lambda));
                const int sigma = g.sqrt_(g.sigmoid_(g.scale(lambda, -1.0)));
                const int z = g.add(g.smul(alpha, g.input(x)), g.smul(sigma, g.input(eps)));
                const int out = net.build(g, z, lambda);
                const int sq = g.sqsum(g.sub(out, g.input(eps)));
                if (opt.weighting == "uniform-vlb") {
                    const double h = 1e-5;
                    const double tlo = std::max(0.0, t - h), thi = std::min(1.0, t + h);
                    const int gp = g.scale(g.sub(learned_sched->build(g, g.input_scalar(thi)),
                                                 learned_sched->build(g, g.input_scalar(tlo))),
                                           1.0 / (thi - tlo));
                    loss_node = g.scale(g.smul(gp, sq), 0.5 / static_cast<double>(opt.batch));
                } else {
                    loss_node = g.scale(sq, 0.5 / static_cast<double>(opt.batch));
                }
            }
            step_loss += g.value(loss_node)[0];
            g.backward(loss_node);
        }
        if (!std::isfinite(step_loss)) {
            throw NumericError("training diverged at step " + std::to_string(step));
        }
        if (opt.lr != 0.0) optimizer.step();
        res.loss_curve.push_back(step_loss);
    }

    const std::size_t tail = std::max<std::size_t>(1, opt.steps / 20);
    double acc = 0.0;
    for (std::size_t i = res.loss_curve.size() - tail; i < res.loss_curve.size(); ++i) acc += res.loss_curve[i];
    res.final_loss = acc / static_cast<double>(tail);
    return res;
}

double denoiser_objective(const DenoiserNet& net, PredictionKind kind, const Dataset2D& data,
                          const NoiseSchedule& sched, const TrainOptions& opt, std::size_t n_mc, Rng& rng) {
    const WeightingFn w = make_weighting(opt.weighting, &sched);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_mc; ++k) {
        const Tensor x = data.tensor_at(rng.integer(0, data.size() - 1));
        const Tensor eps = rng.normal_vec(x.size());
        const DrawnLevel d = draw_level(sched, w, opt, rng);
        const Tensor z = diffuse(x, d.smp, eps);
        const Tensor target = target_of_kind(kind, x, eps, z, d.smp);
        const Tensor out = net.eval(z, d.smp.lambda);
        acc += d.coef * loss_translation_factor(kind, PredictionKind::EPS, d.smp) * squared_norm(out - target);
    }
    return acc / static_cast<double>(n_mc);
}

std::vector<std::array<double, 2>> sample_diffusion(const DenoiserFn& denoiser,
                                                    const NoiseSchedule& sched, std::size_t n,
                                                    std::size_t T, std::uint64_t seed,
                                                    LatentPath* trajectory_out) {
    if (T < 1) throw ContractError("sampling needs T >= 1");
    std::vector<std::array<double, 2>> out;
    out.reserve(n);
    const double Td = static_cast<double>(T);
    for (std::size_t chain = 0; chain < n; ++chain) {
        Rng rng = Rng::derive(seed, chain);
        Tensor z = rng.normal_vec(2);
        std::vector<double> traj_times;
        std::vector<Tensor> traj_latents;
        const bool record = (trajectory_out != nullptr && chain == 0);
        if (record) {
            traj_times.push_back(1.0);
            traj_latents.push_back(z);
        }
        for (std::size_t k = T; k >= 2; --k) {
            const ScheduleSample t = sched.sample_at(static_cast<double>(k) / Td);
            const ScheduleSample s = sched.sample_at((static_cast<double>(k) - 1.0) / Td);
            const Prediction pred = denoiser(z, t.lambda);
            const Tensor noise = rng.normal_vec(2);
            z = ancestral_step(pred, z, s, t, noise);
            if (record) {
                traj_times.push_back(s.t);
                traj_latents.push_back(z);
            }
        }
        // Final denoising step: the data estimate at the least-noisy level is
        // returned directly (no extra likelihood draw).
        const ScheduleSample t1 = sched.sample_at(1.0 / Td);
        const Tensor x = convert(denoiser(z, t1.lambda), z, t1, PredictionKind::X).value;
        out.push_back({x[0], x[1]});
        if (record) {
            traj_times.push_back(0.0);
            traj_latents.push_back(x);
            // Stored on an ascending time grid.
            trajectory_out->times.assign(traj_times.rbegin(), traj_times.rend());
            trajectory_out->latents.assign(traj_latents.rbegin(), traj_latents.rend());
        }
    }
    return out;
}

double train_vae(VaeModel& model, ParamStore& params, const Dataset2D& data, std::size_t steps,
                 std::size_t batch, double lr, double momentum, Rng& rng) {
    SgdMomentum optimizer(&params, lr, momentum);
    Graph g(&params);
    double tail_acc = 0.0;
    std::size_t tail_n = 0;
    const std::size_t tail_from = steps - std::max<std::size_t>(1, steps / 20);
    for (std::size_t step = 0; step < steps; ++step) {
        params.zero_grad();
        double bound = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const Tensor x = data.tensor_at(rng.integer(0, data.size() - 1));
            const Tensor eps = rng.normal_vec(model.config().latent_dim);
            g.clear();
            const int elbo = model.build_elbo(g, x, eps);
            const int loss = g.scale(elbo, -1.0 / static_cast<double>(batch));
            bound += g.value(elbo)[0] / static_cast<double>(batch);
            g.backward(loss);
        }
        if (!std::isfinite(bound)) throw NumericError("vae training diverged at step " + std::to_string(step));
        optimizer.step();
        if (step >= tail_from) {
            tail_acc += bound;
            ++tail_n;
        }
    }
    return tail_acc / static_cast<double>(tail_n);
}

// -------------------------------------------------------------------------
// Verification registry
// -------------------------------------------------------------------------

namespace {

ScheduleSample sample_from_lambda(double lam) {
    ScheduleSample s;
    s.lambda = lam;
    s.sigma2 = sigmoid(-lam);
    s.alpha = std::sqrt(sigmoid(lam));
    return s;
}

void push_check(std::vector<VerifyCheck>& out, std::string name, double expected, double observed,
                double tolerance) {
    VerifyCheck c;
    c.name = std::move(name);
    c.expected = expected;
    c.observed = observed;
    c.tolerance = tolerance;
    c.pass = std::abs(observed - expected) <= tolerance;
    out.push_back(std::move(c));
}

}  // namespace

std::vector<VerifyCheck> run_verification(std::uint64_t seed, const PosteriorFn& posterior_in) {
    const PosteriorFn posterior =
        posterior_in ? posterior_in
                     : PosteriorFn([](const ScheduleSample& s, const ScheduleSample& t) {
                           return posterior_params(s, t);
                       });
    std::vector<VerifyCheck> checks;
    const NoiseSchedule lin = NoiseSchedule::linear_lambda();
    Rng rng(seed);

    {  // Conjugacy against the brute-force grid oracle.
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const double ts = 0.05 + 0.8 * rng.uniform();
            const double tt = ts + 0.05 + (0.95 - ts - 0.05) * rng.uniform();
            const ScheduleSample s = lin.sample_at(ts), t = lin.sample_at(tt);
            const double x = rng.normal();
            const double z = t.alpha * x + t.sigma() * rng.normal();
            const PosteriorParams p = posterior(s, t);
            const GridPosterior gp = grid_bayes_posterior(x, z, s, t);
            worst = std::max(worst, std::abs(p.coef_z * z + p.coef_x * x - gp.mean));
            worst = std::max(worst, std::abs(p.sigma2_Q - gp.variance));
        }
        push_check(checks, "posterior-conjugacy-grid-oracle", 0.0, worst, 1e-4);
    }

    {  // Stable vs direct posterior parameters.
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double ts = 0.02 + 0.9 * rng.uniform();
            double tt = ts + 1e-3 + (0.98 - ts) * rng.uniform();
            const ScheduleSample s = lin.sample_at(ts), t = lin.sample_at(tt);
            const PosteriorParams a = posterior_params(s, t);
            const PosteriorParams b = posterior_params_stable(s.gamma(), t.gamma(), s, t);
            worst = std::max(worst, std::abs(a.sigma2_Q - b.sigma2_Q) / a.sigma2_Q);
            worst = std::max(worst, std::abs(a.coef_x - b.coef_x) / a.coef_x);
            worst = std::max(worst, std::abs(a.coef_z - b.coef_z) / a.coef_z);
        }
        push_check(checks, "posterior-stable-direct-agreement", 0.0, worst, 1e-10);
    }

    {  // All generative-mean parameterizations agree.
        double worst = 0.0;
        const PredictionKind kinds[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                        PredictionKind::V, PredictionKind::U};
        for (int k = 0; k < 100; ++k) {
            const double ts = 0.05 + 0.5 * rng.uniform();
            const double tt = ts + 0.1 + (0.95 - ts - 0.1) * rng.uniform();
            const ScheduleSample s = lin.sample_at(ts), t = lin.sample_at(tt);
            const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
            const Tensor z = diffuse(x, t, eps);
            Prediction base;
            base.kind = PredictionKind::EPS;
            base.lambda = t.lambda;
            base.value = eps + 0.3 * rng.normal_vec(2);  // imperfect prediction
            const Tensor ref = generative_mean(base, z, s, t);
            for (PredictionKind kk : kinds) {
                const Tensor m = generative_mean(convert(base, z, t, kk), z, s, t);
                worst = std::max(worst, std::sqrt(squared_norm(m - ref)));
            }
        }
        push_check(checks, "generative-mean-parameterization-agreement", 0.0, worst, 1e-12);
    }

    {  // Conversion round trips, all ordered pairs.
        double worst = 0.0;
        const PredictionKind kinds[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                        PredictionKind::V, PredictionKind::U};
        for (int k = 0; k < 100; ++k) {
            const ScheduleSample t = sample_from_lambda(-8.0 + 16.0 * rng.uniform());
            const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
            const Tensor z = diffuse(x, t, eps);
            for (PredictionKind a : kinds) {
                Prediction pa;
                pa.kind = a;
                pa.lambda = t.lambda;
                pa.value = target_of_kind(a, x, eps, z, t) + 0.1 * rng.normal_vec(2);
                for (PredictionKind b : kinds) {
                    if (a == b) continue;
                    const Prediction back = convert(convert(pa, z, t, b), z, t, a);
                    worst = std::max(worst, std::sqrt(squared_norm(back.value - pa.value)));
                }
            }
        }
        push_check(checks, "conversion-round-trips", 0.0, worst, 1e-12);
    }

    {  // Loss translation matches direct error computation.
        double worst = 0.0;
        const PredictionKind kinds[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                        PredictionKind::V, PredictionKind::U};
        for (int k = 0; k < 100; ++k) {
            const ScheduleSample t = sample_from_lambda(-8.0 + 16.0 * rng.uniform());
            const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
            const Tensor z = diffuse(x, t, eps);
            Prediction pe;
            pe.kind = PredictionKind::EPS;
            pe.lambda = t.lambda;
            pe.value = eps + 0.2 * rng.normal_vec(2);
            for (PredictionKind a : kinds) {
                for (PredictionKind b : kinds) {
                    const double r = direct_vs_translated(x, eps, convert(pe, z, t, a), convert(pe, z, t, b), z, t);
                    worst = std::max(worst, r);
                }
            }
        }
        push_check(checks, "loss-translation-direct-agreement", 0.0, worst, 1e-10);
    }

    {  // Two-step transition composition.
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
            if (a > b) std::swap(a, b);
            if (b > c) std::swap(b, c);
            if (a > b) std::swap(a, b);
            if (c - a < 0.05) continue;
            a = 0.02 + 0.96 * a;
            b = 0.02 + 0.96 * b;
            c = 0.02 + 0.96 * c;
            if (!(a < b && b < c)) continue;
            const ScheduleSample ss = lin.sample_at(a), su = lin.sample_at(b), st = lin.sample_at(c);
            const TransitionParams ts_full = transition_params(ss, st);
            const TransitionParams t1 = transition_params(ss, su), t2 = transition_params(su, st);
            worst = std::max(worst, std::abs(ts_full.alpha_ts - t2.alpha_ts * t1.alpha_ts));
            worst = std::max(worst,
                             std::abs(ts_full.sigma2_ts - (t2.sigma2_ts + t2.alpha_ts * t2.alpha_ts * t1.sigma2_ts)));
        }
        push_check(checks, "transition-markov-composition", 0.0, worst, 1e-12);
    }

    {  // Empirical variance preservation on standardized data.
        const FiveClusters fc = five_clusters(4000, seed + 1);
        double acc0 = 0.0, acc1 = 0.0;
        const std::size_t n = 100000;
        for (std::size_t k = 0; k < n; ++k) {
            const ScheduleSample t = lin.sample_at(rng.uniform());
            const auto& p = fc.data.points[rng.integer(0, fc.data.size() - 1)];
            const double z0 = t.alpha * p[0] + t.sigma() * rng.normal();
            const double z1 = t.alpha * p[1] + t.sigma() * rng.normal();
            acc0 += z0 * z0;
            acc1 += z1 * z1;
        }
        const double v0 = acc0 / static_cast<double>(n), v1 = acc1 / static_cast<double>(n);
        const double observed = std::abs(v0 - 1.0) > std::abs(v1 - 1.0) ? v0 : v1;
        push_check(checks, "vp-variance-preservation", 1.0, observed, 0.02);
    }

    {  // sigmoid(x) + sigmoid(-x) = 1 to near machine precision.
        double worst = 0.0;
        for (double x = -30.0; x <= 30.0; x += 0.125) {
            worst = std::max(worst, std::abs(1.0 - sigmoid(x) - sigmoid(-x)));
        }
        push_check(checks, "sigmoid-complement-identity", 0.0, worst, 1e-15);
    }

    ParamStore sched_params;
    Rng sched_rng(seed + 2);
    const MonotonicNet mono(&sched_params, sched_rng, -6.0, 6.0);
    const NoiseSchedule learned = NoiseSchedule::learned(&mono);

    {  // Log-SNR strictly decreasing for every kind.
        const NoiseSchedule kinds[] = {lin, NoiseSchedule::cosine(), NoiseSchedule::flow_linear(), learned};
        double worst = -1.0;  // most positive forward difference (want < 0)
        for (const auto& sc : kinds) {
            for (double t = 0.0; t + 1e-3 <= 1.0; t += 0.01) {
                worst = std::max(worst, sc.lambda_of(t + 1e-3) - sc.lambda_of(t));
            }
        }
        push_check(checks, "lambda-strictly-decreasing", -1.0, worst < 0.0 ? -1.0 : worst, 0.0);
    }

    {  // Noise-level density integrates to one for every kind.
        const NoiseSchedule kinds[] = {lin, NoiseSchedule::cosine(), NoiseSchedule::flow_linear(), learned};
        double worst = 0.0;
        for (const auto& sc : kinds) {
            const std::size_t n = 10000;
            const double span = sc.lambda_max() - sc.lambda_min();
            double integral = 0.0;
            double prev = sc.density(sc.lambda_min());
            for (std::size_t i = 1; i < n; ++i) {
                const double lam = sc.lambda_min() + span * static_cast<double>(i) / static_cast<double>(n - 1);
                const double cur = sc.density(lam);
                integral += 0.5 * (prev + cur) * span / static_cast<double>(n - 1);
                prev = cur;
            }
            worst = std::max(worst, std::abs(integral - 1.0));
        }
        push_check(checks, "lambda-density-normalization", 0.0, worst, 1e-4);
    }

    {  // Learned-schedule endpoints pinned by the affine map.
        const double d0 = std::abs(mono.eval(0.0) - (-6.0));
        const double d1 = std::abs(mono.eval(1.0) - 6.0);
        push_check(checks, "learned-schedule-endpoints-pinned", 0.0, std::max(d0, d1), 1e-12);
    }

    {  // Monotone network: non-decreasing on a grid.
        double worst = 0.0;  // most negative backward difference magnitude
        double prev = mono.eval(0.0);
        for (double t = 0.01; t <= 1.0 + 1e-12; t += 0.01) {
            const double cur = mono.eval(std::min(t, 1.0));
            worst = std::min(worst, cur - prev);
            prev = cur;
        }
        push_check(checks, "monotone-net-grid-scan", 0.0, worst < -1e-12 ? worst : 0.0, 0.0);
    }

    {  // Deeper chains never increase the expected loss (ideal denoiser).
        double min_gap = 1e300;
        double prev = discrete_loss_expected_unit_gaussian(lin, 8);
        for (std::size_t T = 16; T <= 512; T *= 2) {
            const double cur = discrete_loss_expected_unit_gaussian(lin, T);
            min_gap = std::min(min_gap, prev - cur);
            prev = cur;
        }
        push_check(checks, "discrete-loss-depth-monotonicity", 1.0, min_gap > 0.0 ? 1.0 : 0.0, 0.0);
    }

    {  // Uniform-weight continuous loss depends only on the endpoints.
        const double closed_form = 0.5 * (softplus(6.0) - softplus(-6.0));
        const AnalyticGaussianOracle oracle;
        const DenoiserFn ideal = [&oracle](const Tensor& z, double lam) {
            return optimal_denoiser(oracle, z, sample_from_lambda(lam));
        };
        double worst_se = 0.0;
        for (const NoiseSchedule& sc : {lin, NoiseSchedule::cosine()}) {
            // Redraw the datapoint per term so the standard error includes
            // the across-datapoint variance, not just the within-x noise.
            std::vector<double> vals;
            vals.reserve(20000);
            for (int r = 0; r < 20000; ++r) {
                const Tensor xr = rng.normal_vec(1);
                vals.push_back(continuous_loss(xr, ideal, sc, WeightingFn::uniform(), 1, rng).value);
            }
            const LossEstimate est = LossEstimate::from_samples(std::move(vals));
            worst_se = std::max(worst_se, std::abs(est.value - closed_form) / est.std_error);
        }
        push_check(checks, "continuous-loss-schedule-invariance-se-units", 0.0, worst_se, 3.0);
    }

    {  // Step divergence: SNR-difference form equals the Gaussian formula.
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double ts = 0.05 + 0.5 * rng.uniform();
            const double tt = ts + 0.1 + (0.95 - ts - 0.1) * rng.uniform();
            const ScheduleSample s = lin.sample_at(ts), t = lin.sample_at(tt);
            const Tensor x = rng.normal_vec(2), eps = rng.normal_vec(2);
            const Tensor z = diffuse(x, t, eps);
            Prediction pred;
            pred.kind = PredictionKind::X;
            pred.lambda = t.lambda;
            pred.value = x + 0.1 * rng.normal_vec(2);
            const double kl = kl_term(x, z, pred, s, t);
            const PosteriorParams q = posterior_params(s, t);
            const Tensor mu_q = q.mean(z, x);
            const Tensor mu_theta = generative_mean(pred, z, s, t);
            const double direct = squared_norm(mu_q - mu_theta) / (2.0 * q.sigma2_Q);
            worst = std::max(worst, std::abs(kl - direct) / std::max(1.0, direct));
        }
        push_check(checks, "kl-snr-difference-form", 0.0, worst, 1e-10);
    }

    {  // Weighting fixtures classified correctly.
        int misclassified = 0;
        const auto rep_u = weighting_cdf_check(WeightingFn::uniform(), lin);
        if (rep_u.valid || rep_u.cdf_after_renormalization) ++misclassified;
        const auto rep_s = weighting_cdf_check(WeightingFn::sigmoid_monotone(), lin);
        if (!rep_s.cdf_after_renormalization) ++misclassified;
        std::vector<std::pair<double, double>> bump;
        for (double lam = -6.0; lam <= 6.0 + 1e-9; lam += 0.05) bump.push_back({lam, std::exp(-lam * lam)});
        const auto rep_b = weighting_cdf_check(WeightingFn::custom_table(bump), lin);
        if (rep_b.nondecreasing_in_t || rep_b.classification.find("minimized") == std::string::npos) ++misclassified;
        push_check(checks, "weighting-cdf-fixture-classification", 0.0, misclassified, 0.0);
    }

    {  // Constant observed loss keeps the adaptive density uniform.
        AdaptiveScheduleState st = AdaptiveScheduleState::make(-6.0, 6.0);
        for (int k = 0; k < 5000; ++k) st = adaptive_update(st, -6.0 + 12.0 * rng.uniform(), 1.0);
        double worst = 0.0;
        for (double d : st.density()) worst = std::max(worst, std::abs(d - 1.0 / 64.0));
        push_check(checks, "adaptive-density-uniform-fixed-point", 0.0, worst, 1e-12);
    }

    {  // Aggregate posterior density integrates to one on a wide grid.
        const FiveClusters fc = five_clusters(200, seed + 3);
        ParamStore vae_params;
        Rng vae_rng(seed + 4);
        const VaeModel vae({}, &vae_params, vae_rng);
        const AggregatePosterior agg = aggregate_from_vae(vae, fc.data);
        std::vector<double> grid;
        const int gn = 161;
        for (int i = 0; i < gn; ++i) grid.push_back(-8.0 + 16.0 * static_cast<double>(i) / (gn - 1));
        const std::vector<double> field = aggregate_posterior_density(agg, grid, grid);
        double integral = 0.0;
        const double cell = (16.0 / (gn - 1)) * (16.0 / (gn - 1));
        for (double v : field) integral += v * cell;
        push_check(checks, "aggregate-density-normalization", 1.0, integral, 1e-2);
    }

    {  // Evidence bound never exceeds the exact evidence (conjugate model).
        // Generative model: z ~ N(0,1), x | z ~ N(a z + b, v); evidence is
        // N(b, a^2 + v). Any Gaussian q(z|x) must bound it from below.
        double worst = -1e300;
        for (int k = 0; k < 200; ++k) {
            const double a = 0.5 + rng.uniform(), b = rng.normal(), v = 0.2 + rng.uniform();
            const double x = rng.normal() * 2.0;
            const double qm = rng.normal(), qv = 0.1 + rng.uniform();
            // E_q[log p(x|z)] has closed form for Gaussian q.
            const double er = -0.5 * std::log(2.0 * 3.14159265358979323846 * v) -
                              ((x - a * qm - b) * (x - a * qm - b) + a * a * qv) / (2.0 * v);
            const double kl = 0.5 * (qv + qm * qm - 1.0 - std::log(qv));
            const double ev_var = a * a + v;
            const double log_evidence = -0.5 * std::log(2.0 * 3.14159265358979323846 * ev_var) -
                                        (x - b) * (x - b) / (2.0 * ev_var);
            worst = std::max(worst, (er - kl) - log_evidence);
        }
        push_check(checks, "evidence-bound-conjugate-model", 0.0, worst > 0.0 ? worst : 0.0, 1e-9);
    }

    {  // Ideal-denoiser error moments at lambda = 0.
        const AnalyticGaussianOracle oracle;
        const ScheduleSample t = sample_from_lambda(0.0);
        double acc_x = 0.0, acc_e = 0.0;
        const std::size_t n = 200000;
        for (std::size_t k = 0; k < n; ++k) {
            const Tensor x = rng.normal_vec(1), eps = rng.normal_vec(1);
            const Tensor z = diffuse(x, t, eps);
            const Prediction xh = optimal_denoiser(oracle, z, t);
            acc_x += squared_norm(x - xh.value);
            acc_e += squared_norm(eps - convert(xh, z, t, PredictionKind::EPS).value);
        }
        const double mx = acc_x / static_cast<double>(n), me = acc_e / static_cast<double>(n);
        // E||x - x_hat||^2 = sigma^2 = 0.5 and E||eps - eps_hat||^2 = SNR * that.
        const double worst = std::max(std::abs(mx - 0.5), std::abs(me - t.snr() * mx));
        push_check(checks, "ideal-denoiser-error-moments", 0.0, worst, 0.005);
    }

    {  // Forward-diffused data at t = 1 is indistinguishable from the prior.
        const FiveClusters fc = five_clusters(10000, seed + 5);
        const ScheduleSample t1 = lin.sample_at(1.0);
        std::vector<double> m0, m1;
        m0.reserve(fc.data.size());
        m1.reserve(fc.data.size());
        for (const auto& p : fc.data.points) {
            m0.push_back(t1.alpha * p[0] + t1.sigma() * rng.normal());
            m1.push_back(t1.alpha * p[1] + t1.sigma() * rng.normal());
        }
        const double pv = std::min(ks_normal_pvalue(m0), ks_normal_pvalue(m1));
        push_check(checks, "endpoint-marginal-normality-ks-p", 1.0, pv > 0.01 ? 1.0 : pv, 0.99);
    }

    return checks;
}

// -------------------------------------------------------------------------
// CLI commands
// -------------------------------------------------------------------------

namespace {

FiveClusters make_dataset(const RunConfig& cfg, std::uint64_t seed) {
    const std::string kind = cfg.get_str("dataset.kind", "five-clusters");
    if (kind != "five-clusters") throw ConfigError("unknown dataset.kind: " + kind);
    return five_clusters(cfg.get_count("dataset.n", 4000), seed ^ 0xd1b54a32d192ed03ULL);
}

DenoiserNet::Config model_config(const RunConfig& cfg) {
    DenoiserNet::Config mc;
    mc.dim = 2;
    mc.hidden = cfg.get_count("model.hidden", 64);
    mc.depth = cfg.get_count("model.depth", 2);
    mc.residual = cfg.get_flag("model.residual", true);
    return mc;
}

void write_checkpoint_meta(const RunConfig& cfg, const std::string& path) {
    Manifest meta;
    meta.add("schedule.kind", cfg.get_str("schedule.kind", "linear-lambda"));
    meta.add_num("schedule.lambda_min", cfg.get_num("schedule.lambda_min", -6.0));
    meta.add_num("schedule.lambda_max", cfg.get_num("schedule.lambda_max", 6.0));
    meta.add_num("model.hidden", static_cast<double>(cfg.get_count("model.hidden", 64)));
    meta.add_num("model.depth", static_cast<double>(cfg.get_count("model.depth", 2)));
    meta.add("model.kind", cfg.get_str("model.kind", "eps"));
    meta.write(path);
}

void check_checkpoint_meta(const RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing checkpoint metadata: " + path);
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line)) {
        const auto c = line.find(": ");
        if (c != std::string::npos) meta[line.substr(0, c)] = line.substr(c + 2);
    }
    auto near = [&](const std::string& key, double want) {
        return std::abs(std::stod(meta.at(key)) - want) < 1e-9;
    };
    if (!near("schedule.lambda_min", cfg.get_num("schedule.lambda_min", -6.0)) ||
        !near("schedule.lambda_max", cfg.get_num("schedule.lambda_max", 6.0))) {
        throw ConfigError("checkpoint was trained for a different log-SNR range than the configured schedule");
    }
    if (meta.at("model.kind") != cfg.get_str("model.kind", "eps")) {
        throw ConfigError("checkpoint prediction kind differs from configured model.kind");
    }
}

void write_manifest(const RunConfig& cfg, const std::string& status, double wall_seconds,
                    const std::vector<std::pair<std::string, double>>& metrics) {
    Manifest m;
    m.add("status", status);
    m.add("code_version", "vdm-lab 1.0");
    m.add("command", cfg.command);
    m.add_num("seed", static_cast<double>(cfg.seed));
    m.add_num("wall_clock_seconds", wall_seconds);
    for (const auto& [k, v] : cfg.entries()) m.add("config." + k, v);
    for (const auto& [k, v] : metrics) m.add_num("metric." + k, v);
    m.write(out_path(cfg, "manifest.txt"));
}

class WallClock {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

int cmd_train(const RunConfig& cfg) {
    const WallClock clock;
    const std::uint64_t seed = cfg.require_seed();
    const TrainOptions opt = train_options(cfg);
    const FiveClusters fc = make_dataset(cfg, seed);

    ParamStore params;
    Rng init_rng = Rng::derive(seed, 0xA11CE);
    DenoiserNet net(model_config(cfg), &params, init_rng);
    const PredictionKind kind = train_kind(net, cfg);

    MonotonicNet* msched = nullptr;
    std::unique_ptr<MonotonicNet> msched_owned;
    if (cfg.get_str("schedule.kind", "linear-lambda") == "learned") {
        msched_owned = std::make_unique<MonotonicNet>(&params, init_rng,
                                                      -cfg.get_num("schedule.lambda_max", 6.0),
                                                      -cfg.get_num("schedule.lambda_min", -6.0));
        msched = msched_owned.get();
    }
    const NoiseSchedule sched = make_schedule(cfg, msched);

    Rng rng = Rng::derive(seed, 0x7EA1);
    TrainResult res;
    try {
        res = train_denoiser(net, params, kind, fc.data, sched, msched, opt, rng);
    } catch (const NumericError& e) {
        write_manifest(cfg, std::string("diverged: ") + e.what(), clock.seconds(), {});
        return 2;
    }

    {
        CsvWriter csv(out_path(cfg, "loss_curve.csv"), {"step", "loss"});
        for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
            csv.row({static_cast<double>(i), res.loss_curve[i]});
        }
    }
    {
        SvgSeries s;
        s.label = "training objective";
        for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(res.loss_curve[i]);
        }
        svg_line_plot(out_path(cfg, "loss_curve.svg"), "training objective per step", {s});
    }
    save_checkpoint(params, out_path(cfg, "checkpoint.txt"));
    write_checkpoint_meta(cfg, out_path(cfg, "checkpoint.meta"));
    write_manifest(cfg, "ok", clock.seconds(),
                   {{"initial_loss", res.initial_loss}, {"final_loss", res.final_loss}});
    return 0;
}

int cmd_sample(const RunConfig& cfg) {
    const WallClock clock;
    const std::uint64_t seed = cfg.require_seed();
    const std::string ckpt = cfg.get_str("sample.checkpoint", out_path(cfg, "checkpoint.txt"));
    const std::string meta = ckpt.size() > 4 ? ckpt.substr(0, ckpt.size() - 4) + ".meta" : ckpt + ".meta";
    check_checkpoint_meta(cfg, meta);

    ParamStore params;
    Rng init_rng = Rng::derive(seed, 0xA11CE);
    DenoiserNet net(model_config(cfg), &params, init_rng);
    const PredictionKind kind = train_kind(net, cfg);
    std::unique_ptr<MonotonicNet> msched_owned;
    if (cfg.get_str("schedule.kind", "linear-lambda") == "learned") {
        msched_owned = std::make_unique<MonotonicNet>(&params, init_rng,
                                                      -cfg.get_num("schedule.lambda_max", 6.0),
                                                      -cfg.get_num("schedule.lambda_min", -6.0));
    }
    load_checkpoint(params, ckpt);
    const NoiseSchedule sched = make_schedule(cfg, msched_owned.get());

    const std::size_t n = cfg.get_count("sample.n", 2000);
    const std::size_t T = cfg.get_count("sample.T", 200);
    LatentPath traj;
    const auto samples = sample_diffusion(denoiser_fn(net, kind), sched, n, T, seed ^ 0x5A, &traj);

    {
        CsvWriter csv(out_path(cfg, "samples.csv"), {"x0", "x1"});
        for (const auto& s : samples) csv.row({s[0], s[1]});
    }
    {
        CsvWriter csv(out_path(cfg, "trajectory.csv"), {"t", "z0", "z1"});
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            csv.row({traj.times[i], traj.latents[i][0], traj.latents[i][1]});
        }
    }
    {
        SvgSeries s;
        s.label = "generated samples";
        for (const auto& p : samples) {
            s.x.push_back(p[0]);
            s.y.push_back(p[1]);
        }
        svg_scatter_plot(out_path(cfg, "samples.svg"), "reverse-chain samples", {s});
    }
    write_manifest(cfg, "ok", clock.seconds(), {{"n_samples", static_cast<double>(samples.size())}});
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    const WallClock clock;
    const std::uint64_t seed = cfg.require_seed();
    const auto checks = run_verification(seed);
    bool all_pass = true;
    {
        CsvWriter csv(out_path(cfg, "verification_report.csv"),
                      {"check", "expected", "observed", "tolerance", "pass"});
        for (const auto& c : checks) {
            all_pass = all_pass && c.pass;
            csv.row_mixed({c.name, render_number(c.expected), render_number(c.observed),
                           render_number(c.tolerance), c.pass ? "1" : "0"});
            std::printf("[%s] %s (observed %.6g, tolerance %.6g)\n", c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.observed, c.tolerance);
        }
    }
    write_manifest(cfg, all_pass ? "ok" : "verification failures", clock.seconds(),
                   {{"checks", static_cast<double>(checks.size())}});
    return all_pass ? 0 : 1;
}

int cmd_hole_demo(const RunConfig& cfg) {
    const WallClock clock;
    const std::uint64_t seed = cfg.require_seed();
    const FiveClusters fc = make_dataset(cfg, seed);

    ParamStore params;
    Rng init_rng = Rng::derive(seed, 0xBEE);
    VaeModel vae({}, &params, init_rng);
    Rng train_rng = Rng::derive(seed, 0xFEED);
    const double bound = train_vae(vae, params, fc.data, cfg.get_count("vae.steps", 4000),
                                   cfg.get_count("vae.batch", 32), cfg.get_num("vae.lr", 0.01),
                                   cfg.get_num("vae.momentum", 0.9), train_rng);

    const AggregatePosterior agg_vae = aggregate_from_vae(vae, fc.data);
    const NoiseSchedule lin = make_schedule(cfg);
    const AggregatePosterior agg_diff = aggregate_from_diffusion(fc.data, lin.sample_at(1.0));

    Rng hole_rng = Rng::derive(seed, 0x401E);
    const std::size_t n_prior = cfg.get_count("hole.prior_samples", 20000);
    const double hm_vae = hole_metric(agg_vae, n_prior, hole_rng);
    const double hm_diff = hole_metric(agg_diff, n_prior, hole_rng);

    // Endpoint-normality evidence for the diffusion side.
    Rng ks_rng = Rng::derive(seed, 0x6B5);
    const ScheduleSample t1 = lin.sample_at(1.0);
    std::vector<double> m0, m1;
    for (const auto& p : fc.data.points) {
        m0.push_back(t1.alpha * p[0] + t1.sigma() * ks_rng.normal());
        m1.push_back(t1.alpha * p[1] + t1.sigma() * ks_rng.normal());
    }
    const double ks_p = std::min(ks_normal_pvalue(m0), ks_normal_pvalue(m1));

    {
        const int gn = 121;
        CsvWriter csv(out_path(cfg, "prior_vs_aggregate.csv"),
                      {"z0", "z1", "prior_density", "vae_aggregate_density", "diffusion_aggregate_density"});
        for (int i = 0; i < gn; ++i) {
            for (int j = 0; j < gn; ++j) {
                const double z0 = -4.0 + 8.0 * static_cast<double>(i) / (gn - 1);
                const double z1 = -4.0 + 8.0 * static_cast<double>(j) / (gn - 1);
                const double prior = std::exp(-0.5 * (z0 * z0 + z1 * z1)) / (2.0 * 3.14159265358979323846);
                csv.row({z0, z1, prior, agg_vae.density(z0, z1), agg_diff.density(z0, z1)});
            }
        }
    }
    {
        CsvWriter csv(out_path(cfg, "hole_metrics.csv"), {"model", "hole_metric", "ks_normality_p"});
        csv.row_mixed({"vae", render_number(hm_vae), ""});
        csv.row_mixed({"diffusion-endpoint", render_number(hm_diff), render_number(ks_p)});
    }
    write_manifest(cfg, "ok", clock.seconds(),
                   {{"vae_bound", bound},
                    {"hole_metric_vae", hm_vae},
                    {"hole_metric_diffusion", hm_diff},
                    {"ks_normality_p", ks_p}});
    return 0;
}

int cmd_schedule_dump(const RunConfig& cfg) {
    const WallClock clock;
    cfg.require_seed();
    std::unique_ptr<MonotonicNet> msched_owned;
    ParamStore params;
    if (cfg.get_str("schedule.kind", "linear-lambda") == "learned") {
        Rng init_rng = Rng::derive(cfg.seed, 0xA11CE);
        msched_owned = std::make_unique<MonotonicNet>(&params, init_rng,
                                                      -cfg.get_num("schedule.lambda_max", 6.0),
                                                      -cfg.get_num("schedule.lambda_min", -6.0));
    }
    const NoiseSchedule sched = make_schedule(cfg, msched_owned.get());

    SvgSeries s_lambda, s_alpha;
    s_lambda.label = "lambda(t)";
    s_alpha.label = "alpha(t)";
    s_alpha.color = "#b23a1f";
    {
        CsvWriter csv(out_path(cfg, "schedule.csv"), {"t", "alpha", "sigma2", "lambda", "p_lambda"});
        const int rows = 100;
        for (int i = 0; i < rows; ++i) {
            const double t = static_cast<double>(i) / (rows - 1);
            const ScheduleSample smp = sched.sample_at(t);
            csv.row({smp.t, smp.alpha, smp.sigma2, smp.lambda, sched.density(smp.lambda)});
            s_lambda.x.push_back(t);
            s_lambda.y.push_back(smp.lambda);
            s_alpha.x.push_back(t);
            s_alpha.y.push_back(smp.alpha);
        }
    }
    svg_line_plot(out_path(cfg, "schedule.svg"), std::string("noise schedule: ") + sched.kind_name(),
                  {s_lambda, s_alpha});
    write_manifest(cfg, "ok", clock.seconds(), {});
    return 0;
}

int cmd_param_table(const RunConfig& cfg) {
    const WallClock clock;
    cfg.require_seed();
    const double lam = cfg.get_num("param.lambda", 0.0);
    ScheduleSample smp = sample_from_lambda(lam);
    const PredictionKind kinds[] = {PredictionKind::X, PredictionKind::EPS, PredictionKind::SCORE,
                                    PredictionKind::V, PredictionKind::U};
    {
        CsvWriter csv(out_path(cfg, "param_table.csv"), {"from", "to", "loss_factor"});
        for (PredictionKind a : kinds) {
            for (PredictionKind b : kinds) {
                csv.row_mixed({kind_name(a), kind_name(b),
                               render_number(loss_translation_factor(a, b, smp))});
            }
        }
    }
    write_manifest(cfg, "ok", clock.seconds(), {{"lambda", lam}});
    return 0;
}

int dispatch(const RunConfig& cfg) {
    if (cfg.command == "train") return cmd_train(cfg);
    if (cfg.command == "sample") return cmd_sample(cfg);
    if (cfg.command == "verify") return cmd_verify(cfg);
    if (cfg.command == "hole-demo") return cmd_hole_demo(cfg);
    if (cfg.command == "schedule-dump") return cmd_schedule_dump(cfg);
    if (cfg.command == "param-table") return cmd_param_table(cfg);
    throw ConfigError("unknown command: " + cfg.command);
}

}  // namespace vdm
