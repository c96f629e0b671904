#include "vdm/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace vdm {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("schedule time outside [0,1]");
}

// Raw (unclamped) time warp for the cosine kind: signal scale cos(pi u / 2)
// gives lambda_raw(u) = -2 log tan(pi u / 2); inverse u = (2/pi) atan(e^{-lambda/2}).
double cosine_lambda_raw(double u) { return -2.0 * std::log(std::tan(kPi * u / 2.0)); }
double cosine_u_of_lambda(double lam) { return (2.0 / kPi) * std::atan(std::exp(-lam / 2.0)); }
double cosine_dlambda_du(double u) { return -2.0 * kPi / std::sin(kPi * u); }

// Raw time warp for the flow-linear interpolant (signal 1-u, noise u):
// lambda_raw(u) = 2 log((1-u)/u); inverse u = sigmoid(-lambda/2).
double flow_lambda_raw(double u) { return 2.0 * std::log((1.0 - u) / u); }
double flow_u_of_lambda(double lam) { return sigmoid(-lam / 2.0); }
double flow_dlambda_du(double u) { return -2.0 / (u * (1.0 - u)); }

}  // namespace

NoiseSchedule NoiseSchedule::linear_lambda(double lambda_min, double lambda_max) {
    if (!(lambda_min < lambda_max)) throw OrderingError("schedule: need lambda_min < lambda_max");
    return NoiseSchedule(ScheduleKind::LinearLambda, lambda_min, lambda_max);
}

NoiseSchedule NoiseSchedule::cosine(double lambda_min, double lambda_max) {
    if (!(lambda_min < lambda_max)) throw OrderingError("schedule: need lambda_min < lambda_max");
    NoiseSchedule s(ScheduleKind::Cosine, lambda_min, lambda_max);
    s.u0_ = cosine_u_of_lambda(lambda_max);
    s.u1_ = cosine_u_of_lambda(lambda_min);
    return s;
}

NoiseSchedule NoiseSchedule::flow_linear(double lambda_min, double lambda_max) {
    if (!(lambda_min < lambda_max)) throw OrderingError("schedule: need lambda_min < lambda_max");
    NoiseSchedule s(ScheduleKind::FlowLinear, lambda_min, lambda_max);
    s.u0_ = flow_u_of_lambda(lambda_max);
    s.u1_ = flow_u_of_lambda(lambda_min);
    return s;
}

NoiseSchedule NoiseSchedule::learned(const MonotonicNet* net, double lambda_min, double lambda_max) {
    if (!(lambda_min < lambda_max)) throw OrderingError("schedule: need lambda_min < lambda_max");
    if (net == nullptr) throw ContractError("learned schedule requires a monotone network");
    NoiseSchedule s(ScheduleKind::Learned, lambda_min, lambda_max);
    s.net_ = net;
    return s;
}

NoiseSchedule NoiseSchedule::make(const std::string& kind_name, double lambda_min, double lambda_max,
                                  const MonotonicNet* net) {
    if (kind_name == "linear-lambda") return linear_lambda(lambda_min, lambda_max);
    if (kind_name == "cosine") return cosine(lambda_min, lambda_max);
    if (kind_name == "flow-linear") return flow_linear(lambda_min, lambda_max);
    if (kind_name == "learned") return learned(net, lambda_min, lambda_max);
    throw LookupError("unknown schedule kind: " + kind_name);
}

const char* NoiseSchedule::kind_name() const {
    switch (kind_) {
        case ScheduleKind::LinearLambda: return "linear-lambda";
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::FlowLinear: return "flow-linear";
        case ScheduleKind::Learned: return "learned";
    }
    return "?";
}

double NoiseSchedule::lambda_of(double t) const {
    require_time(t);
    switch (kind_) {
        case ScheduleKind::LinearLambda:
            return lambda_max_ + (lambda_min_ - lambda_max_) * t;
        case ScheduleKind::Cosine:
            if (t == 0.0) return lambda_max_;  // exact endpoints by construction
            if (t == 1.0) return lambda_min_;
            return cosine_lambda_raw(u0_ + (u1_ - u0_) * t);
        case ScheduleKind::FlowLinear:
            if (t == 0.0) return lambda_max_;
            if (t == 1.0) return lambda_min_;
            return flow_lambda_raw(u0_ + (u1_ - u0_) * t);
        case ScheduleKind::Learned:
            return -net_->eval(t);
    }
    throw ContractError("unreachable schedule kind");
}

double NoiseSchedule::dlambda_dt(double t) const {
    require_time(t);
    switch (kind_) {
        case ScheduleKind::LinearLambda:
            return lambda_min_ - lambda_max_;
        case ScheduleKind::Cosine:
            return cosine_dlambda_du(u0_ + (u1_ - u0_) * t) * (u1_ - u0_);
        case ScheduleKind::FlowLinear:
            return flow_dlambda_du(u0_ + (u1_ - u0_) * t) * (u1_ - u0_);
        case ScheduleKind::Learned: {
            const double h = 1e-5;
            const double lo = std::max(0.0, t - h), hi = std::min(1.0, t + h);
            return (-net_->eval(hi) + net_->eval(lo)) / (hi - lo);
        }
    }
    throw ContractError("unreachable schedule kind");
}

double NoiseSchedule::t_of_lambda(double lam) const {
    if (!(lam >= lambda_min_ && lam <= lambda_max_)) {
        throw DomainError("lambda outside schedule range");
    }
    switch (kind_) {
        case ScheduleKind::LinearLambda:
            return (lam - lambda_max_) / (lambda_min_ - lambda_max_);
        case ScheduleKind::Cosine:
            return (cosine_u_of_lambda(lam) - u0_) / (u1_ - u0_);
        case ScheduleKind::FlowLinear:
            return (flow_u_of_lambda(lam) - u0_) / (u1_ - u0_);
        case ScheduleKind::Learned: {
            // lambda is strictly decreasing in t: bisect.
            double lo = 0.0, hi = 1.0;
            for (int i = 0; i < 64; ++i) {
                const double mid = 0.5 * (lo + hi);
                (lambda_of(mid) > lam ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
    }
    throw ContractError("unreachable schedule kind");
}

ScheduleSample NoiseSchedule::sample_at(double t) const {
    const double lam = lambda_of(t);
    ScheduleSample s;
    s.t = t;
    s.lambda = lam;
    s.sigma2 = sigmoid(-lam);
    s.alpha = std::sqrt(sigmoid(lam));
    return s;
}

ScheduleSample NoiseSchedule::sample_at_lambda(double lam) const { return sample_at(t_of_lambda(lam)); }

double NoiseSchedule::density(double lam) const {
    const double t = t_of_lambda(lam);
    const double slope = dlambda_dt(t);
    // lambda is strictly decreasing, so -dt/dlambda = -1/slope >= 0.
    return -1.0 / slope;
}

double vp_alpha_from_sigma(double sigma2, double data_variance) {
    if (!(sigma2 > 0.0)) throw DomainError("vp_alpha_from_sigma: sigma2 must be positive");
    if (!(sigma2 < data_variance)) {
        throw InfeasibleError("variance-preserving process infeasible: sigma2 >= data variance");
    }
    return std::sqrt(1.0 - sigma2 / data_variance);
}

WeightingFn WeightingFn::custom_table(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw ContractError("custom weighting table needs at least two points");
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (!(table[i - 1].first < table[i].first)) {
            throw OrderingError("custom weighting table must be ascending in lambda");
        }
    }
    for (const auto& [lam, w] : table) {
        if (!(std::isfinite(w)) || w < 0.0) throw DomainError("weighting values must be finite and non-negative");
    }
    WeightingFn f(Kind::CustomTable);
    f.table_ = std::move(table);
    return f;
}

double WeightingFn::eval(double lambda) const {
    switch (kind_) {
        case Kind::Uniform:
            return 1.0;
        case Kind::SimpleImplied:
            if (sched_ == nullptr) throw ContractError("simple-implied weighting needs a schedule");
            // 1/gamma'(t) at t(lambda) equals the schedule's density over lambda.
            return sched_->density(lambda);
        case Kind::Snr:
            return std::exp(lambda);
        case Kind::SigmoidMonotone:
            return sigmoid(-lambda);
        case Kind::CustomTable: {
            if (lambda <= table_.front().first) return table_.front().second;
            if (lambda >= table_.back().first) return table_.back().second;
            auto it = std::upper_bound(table_.begin(), table_.end(), lambda,
                                       [](double v, const auto& p) { return v < p.first; });
            const auto& [x1, y1] = *it;
            const auto& [x0, y0] = *(it - 1);
            const double f = (lambda - x0) / (x1 - x0);
            return y0 + f * (y1 - y0);
        }
    }
    throw ContractError("unreachable weighting kind");
}

WeightingFn implied_weighting(const std::string& objective, const NoiseSchedule* sched) {
    if (objective == "uniform-vlb") return WeightingFn::uniform();
    if (objective == "simple-eps") return WeightingFn::simple_implied(sched);
    if (objective == "eps-in-x-space") return WeightingFn::snr();
    throw LookupError("unknown objective name: " + objective);
}

WeightingCdfReport weighting_cdf_check(const WeightingFn& w, const NoiseSchedule& sched) {
    WeightingCdfReport rep;
    const int n = 1000;
    const double tol = 1e-3;
    std::vector<double> wt(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        wt[static_cast<std::size_t>(i)] = w.eval(sched.lambda_of(static_cast<double>(i) / n));
    }
    rep.w_at_t0 = wt.front();
    rep.w_at_t1 = wt.back();

    rep.in_unit_interval = true;
    rep.nondecreasing_in_t = true;
    for (int i = 0; i <= n; ++i) {
        const double v = wt[static_cast<std::size_t>(i)];
        if (v < -tol || v > 1.0 + tol) rep.in_unit_interval = false;
        if (i > 0 && v < wt[static_cast<std::size_t>(i) - 1] - 1e-12) rep.nondecreasing_in_t = false;
    }
    rep.endpoint_normalized = std::abs(rep.w_at_t0) <= tol && std::abs(rep.w_at_t1 - 1.0) <= tol;
    rep.valid = rep.in_unit_interval && rep.nondecreasing_in_t && rep.endpoint_normalized;
    rep.cdf_after_renormalization =
        rep.nondecreasing_in_t && !rep.endpoint_normalized && (rep.w_at_t1 - rep.w_at_t0) > tol;

    if (rep.valid) {
        rep.classification = "CDF";
    } else if (rep.cdf_after_renormalization) {
        rep.classification = "CDF after affine renormalization";
    } else if (!rep.nondecreasing_in_t) {
        // A decreasing stretch means some noise levels enter the objective
        // with negative measure: the bound is minimized there.
        rep.classification = "non-CDF: ELBO minimized at some noise levels";
    } else {
        rep.classification = "non-CDF: not endpoint-normalized";
    }
    return rep;
}

double pw_density(const WeightingFn& w, const NoiseSchedule& sched, double t) {
    require_time(t);
    const double w0 = w.eval(sched.lambda_of(0.0));
    const double w1 = w.eval(sched.lambda_of(1.0));
    const double span = w1 - w0;
    if (!(std::abs(span) > 1e-12)) throw DomainError("weighting has no spread over time; no density exists");
    const double h = 1e-4;
    const double lo = std::max(0.0, t - h), hi = std::min(1.0, t + h);
    const double dlo = w.eval(sched.lambda_of(lo)), dhi = w.eval(sched.lambda_of(hi));
    return (dhi - dlo) / (hi - lo) / span;
}

}  // namespace vdm
