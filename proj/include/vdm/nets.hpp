#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vdm/graph.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

// Seeded RNG used everywhere. Seeding is mandatory at every entry point; no
// entropy-source defaults exist anywhere in the lab.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }  // [0,1)
    std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {  // inclusive range
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
    }

    Tensor normal_vec(std::size_t n) {
        Tensor out({n});
        for (std::size_t i = 0; i < n; ++i) out[i] = normal();
        return out;
    }

    // Derive an independent stream (e.g. one per sampling chain) from a root
    // seed; pure function of (seed, index) so runs are reproducible.
    static Rng derive(std::uint64_t root_seed, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        std::mt19937_64 eng(0);
        eng.seed(seq);
        Rng r(0);
        r.engine_ = eng;
        return r;
    }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Multilayer perceptron denoiser conditioned on the log-SNR of its input
// latent (so a trained net transfers across schedules sharing endpoints).
// Conditioning enters as sinusoidal features of lambda/4 plus a linear term,
// concatenated with the latent. tanh activations keep finite-difference
// gradient checks clean. Optional residual head: output = z + mlp(z, lambda).
class DenoiserNet {
  public:
    struct Config {
        std::size_t dim = 2;         // data dimensionality
        std::size_t hidden = 64;
        std::size_t depth = 2;       // number of hidden layers
        bool residual = true;
    };

    DenoiserNet(Config cfg, ParamStore* params, Rng& rng);

    // Tape-building forward: returns node id of the output (shape {dim}).
    int build(Graph& g, int z_node, int lambda_node) const;

    // Plain forward without a tape; bitwise-identical arithmetic order to the
    // tape path (verified by tests).
    Tensor eval(const Tensor& z, double lambda) const;

    const Config& config() const { return cfg_; }
    const std::vector<int>& param_ids() const { return pids_; }
    ParamStore* params() const { return params_; }

  private:
    Config cfg_;
    ParamStore* params_;
    std::vector<int> pids_;  // [W0,b0, W1,b1, ..., Wout,bout]
};

// Monotone scalar network for a learned log-SNR schedule: one hidden tanh
// layer of width 64 with weights stored as exponentials of unconstrained
// values (hence strictly positive), followed by an affine endpoint map that
// pins output(0) = gmin and output(1) = gmax exactly by construction.
class MonotonicNet {
  public:
    MonotonicNet(ParamStore* params, Rng& rng, double gmin, double gmax, std::size_t hidden = 64);

    double eval(double t) const;              // domain [0,1], else DomainError
    int build(Graph& g, int t_node) const;    // tape path (t not range-checked on tape)

    double gmin() const { return gmin_; }
    double gmax() const { return gmax_; }
    const std::vector<int>& param_ids() const { return pids_; }
    ParamStore* params() const { return params_; }

  private:
    double raw(double t) const;  // pre-affine monotone sum
    ParamStore* params_;
    std::vector<int> pids_;  // [u1, b1, u2] where weights = exp(u1), exp(u2)
    double gmin_, gmax_;
    std::size_t hidden_;
};

// Plain gradient descent with momentum: v <- momentum*v - lr*grad; p <- p + v.
class SgdMomentum {
  public:
    SgdMomentum(ParamStore* params, double lr, double momentum)
        : params_(params), lr_(lr), momentum_(momentum) {}

    void step();

  private:
    ParamStore* params_;
    double lr_, momentum_;
    std::vector<Tensor> velocity_;
};

// Checkpoint: versioned flat text of (name, shape, values) with 17-digit
// decimals, so save/load round trips are lossless.
void save_checkpoint(const ParamStore& params, const std::string& path);
void load_checkpoint(ParamStore& params, const std::string& path);

}  // namespace vdm
