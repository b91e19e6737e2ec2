// Subcommand implementations. The thin argv layer lives in tools/; these
// functions take a merged Config so tests can drive them in-process.
//
// Output files, all under the configured out dir:
//   pretrain   base.ckpt, pretrain_report.csv
//   pairgen    pairs.idpr, pool_scores.csv
//   posttrain  post_<variant>.ckpt, posttrain_report_<variant>.csv
//   diagnose   diagnostics.csv, traj_inverted_T*.csv, traj_sampled_T*.csv
//   compare    compare.csv, compare_summary.csv

#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "idpo/config.hpp"
#include "idpo/dataset.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/dpo.hpp"
#include "idpo/errors.hpp"
#include "idpo/inversion.hpp"
#include "idpo/preference.hpp"
#include "idpo/schedule.hpp"
#include "idpo/trainer.hpp"

namespace idpo {

namespace cli {

inline NoiseSchedule schedule_from_config(const Config& cfg) {
    const int T = cfg.get_int("schedule.T", 80);
    const double target = cfg.get_double("schedule.alpha_T", 0.01);
    if (T < 1) throw ConfigError("schedule.T must be >= 1");
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("schedule.alpha_T must lie in (0,1)");
    return make_schedule(T, target);
}

inline MixtureSpec mixture_from_config(const Config& cfg) {
    MixtureSpec spec;
    spec.n_conditions = cfg.get_int("data.n_conditions", 8);
    spec.mode_radius = cfg.get_double("data.mode_radius", 4.0);
    spec.mode_std = cfg.get_double("data.mode_std", 0.3);
    if (spec.n_conditions < 1) throw ConfigError("data.n_conditions must be >= 1");
    if (!(spec.mode_std > 0.0)) throw ConfigError("data.mode_std must be > 0");
    return spec;
}

inline AdamWConfig adamw_from_config(const Config& cfg, const std::string& prefix,
                                     double default_lr) {
    AdamWConfig opt;
    opt.lr = cfg.get_double(prefix + ".lr", default_lr);
    opt.beta1 = cfg.get_double("optimizer.beta1", 0.9);
    opt.beta2 = cfg.get_double("optimizer.beta2", 0.999);
    opt.eps = cfg.get_double("optimizer.eps", 1e-8);
    opt.weight_decay = cfg.get_double("optimizer.weight_decay", 0.01);
    return opt;
}

inline DpoConfig dpo_from_config(const Config& cfg) {
    const std::string variant = cfg.get_string("dpo.variant", "inversion-dpo");
    DpoConfig dpo = default_dpo_config(dpo_variant_from_string(variant));
    dpo.beta = cfg.get_double("dpo.beta", 2000.0);
    dpo.inner_sign = cfg.get_int("dpo.inner_sign", +1);
    const std::string mode = cfg.get_string(
        "dpo.timestep_mode", dpo.timestep_mode == TimestepMode::full_trajectory ? "full-trajectory"
                                                                                : "single-uniform-t");
    if (mode == "full-trajectory") {
        dpo.timestep_mode = TimestepMode::full_trajectory;
    } else if (mode == "single-uniform-t") {
        dpo.timestep_mode = TimestepMode::single_uniform_t;
    } else {
        throw ConfigError("dpo.timestep_mode must be full-trajectory or single-uniform-t");
    }
    try {
        dpo.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return dpo;
}

inline std::string out_dir(const Config& cfg) {
    const std::string dir = cfg.get_string("out", "out");
    std::filesystem::create_directories(dir);
    return dir;
}

inline bool deterministic_timing(const Config& cfg) {
    return cfg.get_string("report.deterministic_timing", "true") != "false";
}

inline std::string variant_label(const DpoConfig& dpo) {
    std::string label = to_string(dpo.variant);
    if (dpo.variant == DpoVariant::inversion_dpo &&
        dpo.timestep_mode == TimestepMode::single_uniform_t) {
        label += "-single-t";
    }
    return label;
}

inline PosttrainConfig posttrain_config(const Config& cfg, const MixtureSpec& mix) {
    PosttrainConfig pt;
    pt.steps = cfg.get_long("posttrain.steps", 2000);
    pt.eval_interval = cfg.get_long("posttrain.eval_interval", 50);
    pt.eval_samples_per_condition = cfg.get_int("posttrain.eval_samples_per_condition", 32);
    pt.n_conditions = mix.n_conditions;
    pt.opt = adamw_from_config(cfg, "posttrain", 1e-4);
    pt.seed = cfg.get_u64("seed", 42);
    if (pt.steps < 0) throw ConfigError("posttrain.steps must be >= 0");
    if (pt.eval_interval < 1) throw ConfigError("posttrain.eval_interval must be >= 1");
    return pt;
}

// ---- subcommands ----

inline int run_pretrain(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const NoiseSchedule s = schedule_from_config(cfg);
    const MixtureSpec mix = mixture_from_config(cfg);
    const std::uint64_t seed = cfg.get_u64("seed", 42);

    RngState data_rng = derive_stream(seed, "dataset");
    const Dataset data = make_dataset(mix, cfg.get_int("data.samples_per_condition", 256), data_rng);

    RngState init_rng = derive_stream(seed, "init");
    Denoiser model = make_denoiser(2, cfg.get_int("model.hidden_dim", 128),
                                   cfg.get_int("model.time_embed_dim", 16), mix.n_conditions,
                                   init_rng);

    PretrainConfig pc;
    pc.steps = cfg.get_long("pretrain.steps", 4000);
    pc.batch_size = cfg.get_int("pretrain.batch_size", 64);
    pc.report_interval = cfg.get_long("pretrain.report_interval", 200);
    pc.loss_gate = cfg.get_double("pretrain.loss_gate", 0.15);
    pc.opt = adamw_from_config(cfg, "pretrain", 1e-3);
    if (pc.steps < 1) throw ConfigError("pretrain.steps must be >= 1");

    std::fprintf(stderr, "pretrain: %ld steps, batch %d, lr %g\n", pc.steps, pc.batch_size,
                 pc.opt.lr);
    RngState train_rng = derive_stream(seed, "pretrain");
    const TrainReport report = pretrain_base(model, s, data, pc, train_rng);
    std::fprintf(stderr, "pretrain: final loss %.6f (gate %.6f)\n", report.final_loss,
                 pc.loss_gate);

    save_checkpoint(model, s, dir + "/base.ckpt");
    report.write_csv(dir + "/pretrain_report.csv", deterministic_timing(cfg));

    if (!(report.final_loss < pc.loss_gate)) {
        throw TrainingError("pretrain: final loss " + std::to_string(report.final_loss) +
                                " did not pass the gate " + std::to_string(pc.loss_gate),
                            pc.steps - 1);
    }
    return 0;
}

inline int run_pairgen(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const MixtureSpec mix = mixture_from_config(cfg);
    const std::uint64_t seed = cfg.get_u64("seed", 42);
    const int K = cfg.get_int("pairgen.pool_size", 4);
    const int pools_per_condition = cfg.get_int("pairgen.pools_per_condition", 8);
    if (K < 2) throw ConfigError("pairgen.pool_size must be >= 2");
    if (pools_per_condition < 1) throw ConfigError("pairgen.pools_per_condition must be >= 1");
    const PairStrategy strategy =
        pair_strategy_from_string(cfg.get_string("pairgen.strategy", "all-ordered"));

    const std::string ckpt = cfg.get_string("pairgen.checkpoint", dir + "/base.ckpt");
    auto [model, s] = load_checkpoint(ckpt);

    const RewardSuite suite = make_toy_suite(mix);
    std::vector<CandidatePool> pools;
    std::vector<PreferencePair> pairs;
    for (int c = 0; c < mix.n_conditions; ++c) {
        // per-condition substream: pools are independent of condition order
        RngState pool_rng = derive_stream(seed, "pairgen-cond-" + std::to_string(c));
        for (int p = 0; p < pools_per_condition; ++p) {
            CandidatePool pool = build_pool(model, s, suite, Condition{c}, K, pool_rng);
            for (PreferencePair& pr : dynamic_pairs(pool, strategy)) {
                pairs.push_back(std::move(pr));
            }
            pools.push_back(std::move(pool));
        }
    }
    if (pairs.empty()) {
        throw NumericError("pairgen: every pool was fully tied; no pairs to write");
    }
    save_pairs(pairs, dir + "/pairs.idpr");
    write_pool_csv(pools, suite, dir + "/pool_scores.csv");
    std::fprintf(stderr, "pairgen: %zu pairs from %zu pools -> %s/pairs.idpr\n", pairs.size(),
                 pools.size(), dir.c_str());
    return 0;
}

inline int run_posttrain(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const MixtureSpec mix = mixture_from_config(cfg);
    const NoiseSchedule s = schedule_from_config(cfg);
    const DpoConfig dpo = dpo_from_config(cfg);

    const std::string ckpt = cfg.get_string("posttrain.checkpoint", dir + "/base.ckpt");
    auto [model, base_schedule] = load_checkpoint(ckpt);
    (void)base_schedule;
    const std::vector<PreferencePair> pairs =
        load_pairs(cfg.get_string("posttrain.pairs", dir + "/pairs.idpr"));

    const PosttrainConfig pt = posttrain_config(cfg, mix);
    const RewardSuite suite = make_toy_suite(mix);

    const std::string label = variant_label(dpo);
    std::fprintf(stderr, "posttrain %s: %ld steps, beta %g, sign %+d, T %d\n", label.c_str(),
                 pt.steps, dpo.beta, dpo.inner_sign, s.T);
    PosttrainResult result = posttrain(model, s, pairs, dpo, pt, suite);

    save_checkpoint(model, s, dir + "/post_" + label + ".ckpt");
    result.report.write_csv(dir + "/posttrain_report_" + label + ".csv", deterministic_timing(cfg));
    return 0;
}

inline int run_diagnose(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const MixtureSpec mix = mixture_from_config(cfg);
    const std::uint64_t seed = cfg.get_u64("seed", 42);
    const double alpha_T = cfg.get_double("schedule.alpha_T", 0.01);
    const int probes = cfg.get_int("diagnose.probe_count", 16);

    std::vector<int> t_list;
    {
        std::istringstream in(cfg.get_string("diagnose.T_list", "20,40,80"));
        std::string tok;
        while (std::getline(in, tok, ',')) {
            const int T = std::stoi(tok);
            if (T < 1) throw ConfigError("diagnose.T_list entries must be >= 1");
            t_list.push_back(T);
        }
        if (t_list.empty()) throw ConfigError("diagnose.T_list is empty");
    }

    const std::string ckpt = cfg.get_string("diagnose.checkpoint", dir + "/base.ckpt");
    auto [model, ckpt_schedule] = load_checkpoint(ckpt);
    (void)ckpt_schedule;

    RngState probe_rng = derive_stream(seed, "diagnose");
    const Dataset probe_set = make_dataset(mix, std::max(1, probes / mix.n_conditions), probe_rng);

    std::FILE* f = std::fopen((dir + "/diagnostics.csv").c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open diagnostics.csv for writing");
    std::fputs("T,metric,value\n", f);
    for (const int T : t_list) {
        const NoiseSchedule s = make_schedule(T, alpha_T);
        double rt_sum = 0.0;
        double gap_sum = 0.0;
        for (std::size_t i = 0; i < probe_set.size(); ++i) {
            rt_sum += roundtrip_error(model, s, probe_set.x0s[i], probe_set.conditions[i]);
            const Trajectory traj = invert(model, s, probe_set.x0s[i], probe_set.conditions[i]);
            gap_sum += adjacent_eps_gap(model, s, traj, probe_set.conditions[i]);
        }
        const double n = static_cast<double>(probe_set.size());
        std::fprintf(f, "%d,roundtrip_error,%.17g\n", T, rt_sum / n);
        std::fprintf(f, "%d,adjacent_eps_gap,%.17g\n", T, gap_sum / n);

        const Trajectory up = invert(model, s, probe_set.x0s[0], probe_set.conditions[0]);
        write_trajectory_csv(up, dir + "/traj_inverted_T" + std::to_string(T) + ".csv");
        const Trajectory down = sample(model, s, up.states.back(), probe_set.conditions[0]);
        write_trajectory_csv(down, dir + "/traj_sampled_T" + std::to_string(T) + ".csv");
    }
    std::fclose(f);
    std::fprintf(stderr, "diagnose: wrote %s/diagnostics.csv\n", dir.c_str());
    return 0;
}

inline int run_compare(const Config& cfg) {
    const std::string dir = out_dir(cfg);
    const MixtureSpec mix = mixture_from_config(cfg);
    const NoiseSchedule s = schedule_from_config(cfg);
    const double threshold = cfg.get_double("compare.reward_threshold", -0.45);

    const std::string ckpt = cfg.get_string("posttrain.checkpoint", dir + "/base.ckpt");
    const std::vector<PreferencePair> pairs =
        load_pairs(cfg.get_string("posttrain.pairs", dir + "/pairs.idpr"));
    const RewardSuite suite = make_toy_suite(mix);

    PosttrainConfig pt = posttrain_config(cfg, mix);
    pt.steps = cfg.get_long("compare.steps", pt.steps);

    std::vector<DpoConfig> runs;
    {
        DpoConfig diffusion = dpo_from_config(cfg);
        diffusion.variant = DpoVariant::diffusion_dpo;
        diffusion.timestep_mode = TimestepMode::single_uniform_t;
        DpoConfig inversion = dpo_from_config(cfg);
        inversion.variant = DpoVariant::inversion_dpo;
        inversion.timestep_mode = TimestepMode::full_trajectory;
        DpoConfig inversion_single = inversion;
        inversion_single.timestep_mode = TimestepMode::single_uniform_t;
        runs = {diffusion, inversion, inversion_single};
    }

    std::FILE* f = std::fopen((dir + "/compare.csv").c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open compare.csv for writing");
    std::fputs("variant,step,metric,value\n", f);
    std::FILE* fs = std::fopen((dir + "/compare_summary.csv").c_str(), "wb");
    if (!fs) {
        std::fclose(f);
        throw std::runtime_error("cannot open compare_summary.csv for writing");
    }
    std::fputs("variant,steps_to_threshold,final_pair_accuracy,final_reward_mean,threshold\n", fs);

    for (const DpoConfig& dpo : runs) {
        auto [model, base_schedule] = load_checkpoint(ckpt);
        (void)base_schedule;
        const std::string label = variant_label(dpo);
        std::fprintf(stderr, "compare %s: %ld steps\n", label.c_str(), pt.steps);
        const PosttrainResult result = posttrain(model, s, pairs, dpo, pt, suite,
                                                 /*eval_rewards=*/true);

        long steps_to_threshold = -1;
        for (const TrainReportRow& row : result.report.rows) {
            std::fprintf(f, "%s,%ld,loss,%.17g\n", label.c_str(), row.step, row.loss);
            std::fprintf(f, "%s,%ld,margin_mean,%.17g\n", label.c_str(), row.step, row.margin_mean);
            std::fprintf(f, "%s,%ld,pair_accuracy,%.17g\n", label.c_str(), row.step,
                         row.pair_accuracy);
            std::fprintf(f, "%s,%ld,reward_mean,%.17g\n", label.c_str(), row.step, row.reward_mean);
            if (steps_to_threshold < 0 && row.reward_mean >= threshold) {
                steps_to_threshold = row.step;
            }
        }
        const TrainReportRow& last = result.report.rows.back();
        std::fprintf(fs, "%s,%ld,%.17g,%.17g,%.17g\n", label.c_str(), steps_to_threshold,
                     last.pair_accuracy, last.reward_mean, threshold);
    }
    std::fclose(fs);
    std::fclose(f);
    std::fprintf(stderr, "compare: wrote %s/compare.csv and compare_summary.csv\n", dir.c_str());
    return 0;
}

} // namespace cli
} // namespace idpo
