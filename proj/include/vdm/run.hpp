#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "vdm/baselines.hpp"
#include "vdm/config.hpp"
#include "vdm/diffusion.hpp"
#include "vdm/losses.hpp"
#include "vdm/nets.hpp"
#include "vdm/schedule.hpp"

namespace vdm {

// ---- Reusable experiment pieces (also driven by tests) ----

struct TrainOptions {
    std::string loss_mode = "continuous";     // continuous | discrete
    std::string weighting = "simple-eps";     // uniform-vlb | simple-eps | eps-in-x-space
    TimeDist time_dist = TimeDist::UniformT;
    std::size_t T = 1000;                     // discrete mode only
    std::size_t steps = 5000;
    std::size_t batch = 64;
    double lr = 1e-3;
    double momentum = 0.9;
    bool learn_schedule = false;              // joint schedule fit (learned kind only)
};

struct TrainResult {
    std::vector<double> loss_curve;  // one entry per step
    double initial_loss = 0.0;
    double final_loss = 0.0;  // mean over the last 5% of steps
};

PredictionKind train_kind(const DenoiserNet& net, const RunConfig& cfg);

TrainResult train_denoiser(DenoiserNet& net, ParamStore& params, PredictionKind kind,
                           const Dataset2D& data, const NoiseSchedule& sched,
                           MonotonicNet* learned_sched, const TrainOptions& opt, Rng& rng);

// Mean training-objective value of the current parameters (no updates).
double denoiser_objective(const DenoiserNet& net, PredictionKind kind, const Dataset2D& data,
                          const NoiseSchedule& sched, const TrainOptions& opt, std::size_t n_mc, Rng& rng);

// Reverse-chain sampling: n chains of T steps from pure noise; returns the
// final data-space points and, if trajectory_out != nullptr, chain 0's path.
std::vector<std::array<double, 2>> sample_diffusion(const DenoiserFn& denoiser,
                                                    const NoiseSchedule& sched, std::size_t n,
                                                    std::size_t T, std::uint64_t seed,
                                                    LatentPath* trajectory_out = nullptr);

DenoiserFn denoiser_fn(const DenoiserNet& net, PredictionKind kind);

// Maximizes the evidence bound of the baseline autoencoder; returns the mean
// bound over the last 5% of steps.
double train_vae(VaeModel& model, ParamStore& params, const Dataset2D& data, std::size_t steps,
                 std::size_t batch, double lr, double momentum, Rng& rng);

// ---- Verification registry ----

struct VerifyCheck {
    std::string name;
    double expected = 0.0;
    double observed = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

using PosteriorFn = std::function<PosteriorParams(const ScheduleSample&, const ScheduleSample&)>;

// Runs every registered invariant. `posterior` is injectable so the test
// suite can confirm that a corrupted implementation is actually caught.
std::vector<VerifyCheck> run_verification(std::uint64_t seed, const PosteriorFn& posterior = nullptr);

// ---- CLI commands; each returns a process exit code ----

int cmd_train(const RunConfig& cfg);
int cmd_sample(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_hole_demo(const RunConfig& cfg);
int cmd_schedule_dump(const RunConfig& cfg);
int cmd_param_table(const RunConfig& cfg);
int dispatch(const RunConfig& cfg);

}  // namespace vdm
