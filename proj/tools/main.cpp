// idpo command line: pretrain | pairgen | posttrain | diagnose | compare
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime/numeric error.

#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idpo/cli.hpp"
#include "idpo/config.hpp"
#include "idpo/errors.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    std::string seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "config file (key=value lines)")->required();
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set schedule.T=40");
    cmd->add_option("--out", args.out, "output directory (overrides key 'out')");
    cmd->add_option("--seed", args.seed, "seed (overrides key 'seed')");
}

idpo::Config merge_config(const CommonArgs& args) {
    idpo::Config cfg = idpo::Config::from_file(args.config_path);
    for (const std::string& kv : args.overrides) cfg.apply_override(kv);
    if (!args.out.empty()) cfg.set("out", args.out);
    if (!args.seed.empty()) cfg.set("seed", args.seed);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"idpo: toy diffusion preference post-training lab"};
    app.require_subcommand(1);

    CommonArgs pretrain_args, pairgen_args, posttrain_args, diagnose_args, compare_args;
    std::string pairgen_ckpt, posttrain_ckpt, posttrain_pairs, posttrain_variant, diagnose_ckpt;
    std::string inversion_steps;

    CLI::App* pretrain = app.add_subcommand("pretrain", "train the base denoiser");
    add_common(pretrain, pretrain_args);

    CLI::App* pairgen = app.add_subcommand("pairgen", "build scored candidate pools and pairs");
    add_common(pairgen, pairgen_args);
    pairgen->add_option("--checkpoint", pairgen_ckpt, "base checkpoint path");

    CLI::App* posttrain = app.add_subcommand("posttrain", "preference post-training");
    add_common(posttrain, posttrain_args);
    posttrain->add_option("--checkpoint", posttrain_ckpt, "base checkpoint path");
    posttrain->add_option("--pairs", posttrain_pairs, "pair dataset path");
    posttrain->add_option("--variant", posttrain_variant,
                          "loss variant: diffusion-dpo | inversion-dpo");
    posttrain->add_option("--inversion-steps", inversion_steps,
                          "schedule steps for the inversion (overrides schedule.T)");

    CLI::App* diagnose = app.add_subcommand("diagnose", "round-trip and adjacent-eps diagnostics");
    add_common(diagnose, diagnose_args);
    diagnose->add_option("--checkpoint", diagnose_ckpt, "checkpoint path");

    CLI::App* compare = app.add_subcommand("compare", "matched-budget run of all loss variants");
    add_common(compare, compare_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (pretrain->parsed()) {
            return idpo::cli::run_pretrain(merge_config(pretrain_args));
        }
        if (pairgen->parsed()) {
            idpo::Config cfg = merge_config(pairgen_args);
            if (!pairgen_ckpt.empty()) cfg.set("pairgen.checkpoint", pairgen_ckpt);
            return idpo::cli::run_pairgen(cfg);
        }
        if (posttrain->parsed()) {
            idpo::Config cfg = merge_config(posttrain_args);
            if (!posttrain_ckpt.empty()) cfg.set("posttrain.checkpoint", posttrain_ckpt);
            if (!posttrain_pairs.empty()) cfg.set("posttrain.pairs", posttrain_pairs);
            if (!posttrain_variant.empty()) cfg.set("dpo.variant", posttrain_variant);
            if (!inversion_steps.empty()) cfg.set("schedule.T", inversion_steps);
            return idpo::cli::run_posttrain(cfg);
        }
        if (diagnose->parsed()) {
            idpo::Config cfg = merge_config(diagnose_args);
            if (!diagnose_ckpt.empty()) cfg.set("diagnose.checkpoint", diagnose_ckpt);
            return idpo::cli::run_diagnose(cfg);
        }
        if (compare->parsed()) {
            return idpo::cli::run_compare(merge_config(compare_args));
        }
    } catch (const idpo::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
