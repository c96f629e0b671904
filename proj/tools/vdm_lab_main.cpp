// vdm-lab: command-line front end for the diffusion laboratory.
//
//   vdm-lab <command> --config <path> [--seed N] [--out DIR]
//
// Commands: train, sample, verify, hole-demo, schedule-dump, param-table.
// The config is flat key=value text; --seed and --out override the config
// file's `seed` and `out` entries. A seed is mandatory one way or the other.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "vdm/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"desk-scale variational diffusion laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;

    const char* names[] = {"train", "sample", "verify", "hole-demo", "schedule-dump", "param-table"};
    const char* descs[] = {
        "fit a denoiser on the bundled dataset",
        "run the reverse chain from a checkpoint",
        "run every registered invariant check",
        "compare prior coverage of autoencoder vs diffusion latents",
        "tabulate a noise schedule and its level density",
        "tabulate prediction-kind loss-translation factors",
    };
    for (int i = 0; i < 6; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "key=value config file")->required();
        sub->add_option("--seed", seed, "root random seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--out", out_dir, "output directory (overrides config)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        vdm::RunConfig cfg = vdm::RunConfig::from_file(config_path);
        cfg.command = app.get_subcommands().front()->get_name();
        if (seed_given) {
            cfg.seed = seed;
            cfg.seed_set = true;
        }
        if (!out_dir.empty()) {
            cfg.out_dir = out_dir;
        } else if (cfg.has("out")) {
            cfg.out_dir = cfg.get_str("out", ".");
        }
        return vdm::dispatch(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "vdm-lab: error: %s\n", e.what());
        return 1;
    }
}
