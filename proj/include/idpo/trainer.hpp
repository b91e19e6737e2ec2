// Training loops (base pretraining, preference post-training) and the
// evaluation pass. Everything here is single-threaded on purpose: reruns
// with the same seed and config must produce bitwise identical
// checkpoints and reports.
//
// Report CSV schema: step,loss,margin_mean,pair_accuracy,wallclock_ms.
// Measured wall time is kept in memory and echoed to stderr; the CSV
// column is written as 0 unless deterministic timing is disabled, so that
// rerunning a command yields byte-identical files.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/dataset.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/dpo.hpp"
#include "idpo/errors.hpp"
#include "idpo/optimizer.hpp"
#include "idpo/preference.hpp"
#include "idpo/rng.hpp"

namespace idpo {

struct TrainReportRow {
    long step = 0;
    double loss = 0.0;
    double margin_mean = 0.0;
    double pair_accuracy = 0.0;
    double wallclock_ms = 0.0;
    double reward_mean = 0.0; // compare-mode extra; not part of the CSV schema
};

struct TrainReport {
    std::vector<TrainReportRow> rows;
    double final_loss = 0.0;

    void write_csv(const std::string& path, bool deterministic_timing = true) const {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
        std::fputs("step,loss,margin_mean,pair_accuracy,wallclock_ms\n", f);
        for (const TrainReportRow& r : rows) {
            std::fprintf(f, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss, r.margin_mean,
                         r.pair_accuracy, deterministic_timing ? 0.0 : r.wallclock_ms);
        }
        std::fclose(f);
    }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void shuffle_indices(std::vector<std::size_t>& idx, RngState& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace detail

// ---- base pretraining ----

struct PretrainConfig {
    long steps = 4000;
    int batch_size = 64;
    long report_interval = 200;
    double loss_gate = 0.15; // advisory; checked by the caller against final_loss
    AdamWConfig opt;
};

// final_loss is the mean training loss over the last report interval.
inline TrainReport pretrain_base(Denoiser& model, const NoiseSchedule& s, const Dataset& data,
                                 const PretrainConfig& cfg, RngState& rng) {
    if (data.size() == 0) throw std::invalid_argument("pretrain_base: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("pretrain_base: batch_size must be >= 1");

    AdamW opt(model, cfg.opt);
    TrainReport report;
    detail::Stopwatch clock;

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size(); // forces a shuffle on first use

    std::vector<DenseArray> batch_x;
    std::vector<Condition> batch_c;
    double window_sum = 0.0;
    long window_count = 0;
    long last_good = -1;

    for (long step = 0; step < cfg.steps; ++step) {
        batch_x.clear();
        batch_c.clear();
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor == order.size()) {
                detail::shuffle_indices(order, rng);
                cursor = 0;
            }
            batch_x.push_back(data.x0s[order[cursor]]);
            batch_c.push_back(data.conditions[order[cursor]]);
            ++cursor;
        }
        BaseLossOut lo = base_loss(model, s, batch_x, batch_c, rng);
        if (!std::isfinite(lo.loss)) {
            throw TrainingError("pretrain_base: loss diverged", last_good);
        }
        if (step == 0) {
            report.rows.push_back({0, lo.loss, 0.0, 0.0, clock.ms(), 0.0});
        }
        opt.apply(model, lo.grads);
        last_good = step;
        window_sum += lo.loss;
        ++window_count;
        if ((step + 1) % cfg.report_interval == 0 || step + 1 == cfg.steps) {
            const double mean_loss = window_sum / static_cast<double>(window_count);
            report.rows.push_back({step + 1, mean_loss, 0.0, 0.0, clock.ms(), 0.0});
            report.final_loss = mean_loss;
            window_sum = 0.0;
            window_count = 0;
        }
    }
    return report;
}

// ---- evaluation ----

struct EvalRecord {
    double reward_mean = 0.0;
    std::vector<std::pair<std::string, double>> component_means;
    double margin_mean = 0.0;
    double pair_accuracy = 0.0;
};

// Pre-drawn randomness for one evaluation pass, so that every evaluation
// during a run (and across variant runs) sees identical draws.
struct EvalFixture {
    std::vector<DenseArray> noise; // one x_T per generated sample
    std::vector<int> pair_ts;      // per held-out pair, for the diffusion margin
    std::vector<DenseArray> pair_eps_w;
    std::vector<DenseArray> pair_eps_l;
    int samples_per_condition = 0;
    int n_conditions = 0;
};

inline EvalFixture make_eval_fixture(int n_conditions, int samples_per_condition, int data_dim,
                                     const NoiseSchedule& s, std::size_t n_pairs, RngState& rng) {
    EvalFixture fx;
    fx.samples_per_condition = samples_per_condition;
    fx.n_conditions = n_conditions;
    const auto d = static_cast<std::size_t>(data_dim);
    fx.noise.reserve(static_cast<std::size_t>(n_conditions) * samples_per_condition);
    for (int c = 0; c < n_conditions; ++c) {
        for (int i = 0; i < samples_per_condition; ++i) {
            fx.noise.push_back(gaussian_sample(rng, {d}));
        }
    }
    for (std::size_t i = 0; i < n_pairs; ++i) {
        fx.pair_ts.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.T))));
        fx.pair_eps_w.push_back(gaussian_sample(rng, {d}));
        fx.pair_eps_l.push_back(gaussian_sample(rng, {d}));
    }
    return fx;
}

inline double pair_margin_fixed(const Denoiser& model, const Denoiser& ref, const NoiseSchedule& s,
                                const PreferencePair& pair, const DpoConfig& cfg,
                                const EvalFixture& fx, std::size_t pair_index) {
    if (cfg.variant == DpoVariant::diffusion_dpo) {
        return diffusion_dpo_loss_at(model, ref, s, pair, cfg, fx.pair_ts[pair_index],
                                     fx.pair_eps_w[pair_index], fx.pair_eps_l[pair_index],
                                     /*want_grads=*/false)
            .margin;
    }
    const Trajectory tw = invert(model, s, pair.winner, pair.condition);
    const Trajectory tl = invert(model, s, pair.loser, pair.condition);
    const int single_t =
        cfg.timestep_mode == TimestepMode::single_uniform_t ? fx.pair_ts[pair_index] : -1;
    return inversion_dpo_loss_at(model, ref, s, tw, tl, pair.condition, cfg, single_t,
                                 /*want_grads=*/false)
        .margin;
}

inline EvalRecord evaluate_fixed(const Denoiser& model, const Denoiser& ref,
                                 const RewardSuite& suite, const NoiseSchedule& s,
                                 std::span<const PreferencePair> heldout, const DpoConfig& cfg,
                                 const EvalFixture& fx) {
    EvalRecord rec;
    std::vector<double> comp_sums(suite.count(), 0.0);
    std::size_t n = 0;
    std::size_t noise_idx = 0;
    for (int c = 0; c < fx.n_conditions; ++c) {
        for (int i = 0; i < fx.samples_per_condition; ++i, ++noise_idx) {
            const DenseArray x0 = sample(model, s, fx.noise[noise_idx], Condition{c}).states.front();
            const RewardBreakdown rb = aggregate_reward(suite, Condition{c}, x0);
            rec.reward_mean += rb.aggregate;
            for (std::size_t k = 0; k < comp_sums.size(); ++k) comp_sums[k] += rb.components[k];
            ++n;
        }
    }
    if (n > 0) {
        rec.reward_mean /= static_cast<double>(n);
        for (std::size_t k = 0; k < suite.count(); ++k) {
            rec.component_means.emplace_back(suite.rewards[k].name,
                                             comp_sums[k] / static_cast<double>(n));
        }
    }
    if (!heldout.empty()) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < heldout.size(); ++i) {
            const double margin = pair_margin_fixed(model, ref, s, heldout[i], cfg, fx, i);
            rec.margin_mean += margin;
            if (margin > 0.0) ++correct;
        }
        rec.margin_mean /= static_cast<double>(heldout.size());
        rec.pair_accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());
    }
    return rec;
}

// Seeded rng-draw evaluation (fresh fixture from the given rng); matches
// the fixed-fixture path otherwise.
inline EvalRecord evaluate(const Denoiser& model, const Denoiser& ref, const RewardSuite& suite,
                           const NoiseSchedule& s, std::span<const PreferencePair> heldout,
                           const DpoConfig& cfg, int n_conditions, int samples_per_condition,
                           RngState& rng) {
    const EvalFixture fx =
        make_eval_fixture(n_conditions, samples_per_condition, 2, s, heldout.size(), rng);
    return evaluate_fixed(model, ref, suite, s, heldout, cfg, fx);
}

// ---- preference post-training ----

struct PosttrainConfig {
    long steps = 2000;
    long eval_interval = 50;
    int eval_samples_per_condition = 32;
    int n_conditions = 8;
    AdamWConfig opt;
    std::uint64_t seed = 0;
};

// Pairs whose condition hashes into the held-out bucket (10%) are used
// for margin/accuracy evaluation only. Never empty: if no condition
// hashes into the bucket, the smallest-hash condition is held out.
inline std::vector<int> heldout_conditions(int n_conditions, std::uint64_t seed) {
    std::vector<int> held;
    int argmin = 0;
    std::uint64_t min_h = UINT64_MAX;
    for (int c = 0; c < n_conditions; ++c) {
        std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c + 1));
        const std::uint64_t h = detail::splitmix64(z);
        if (h < min_h) {
            min_h = h;
            argmin = c;
        }
        if (h % 10 == 0) held.push_back(c);
    }
    if (held.empty()) held.push_back(argmin);
    if (held.size() == static_cast<std::size_t>(n_conditions)) {
        throw std::invalid_argument("heldout_conditions: every condition landed in the held-out bucket");
    }
    return held;
}

struct PosttrainResult {
    TrainReport report;
    std::vector<PreferencePair> heldout;
};

inline PosttrainResult posttrain(Denoiser& model, const NoiseSchedule& s,
                                 const std::vector<PreferencePair>& pairs, const DpoConfig& dpo_cfg,
                                 const PosttrainConfig& cfg, const RewardSuite& suite,
                                 bool eval_rewards = false) {
    if (pairs.empty()) throw std::invalid_argument("posttrain: empty pair dataset");
    dpo_cfg.validate();

    const Denoiser ref = model; // frozen reference, deep copy
    const std::uint64_t ref_hash_before = param_hash(ref);

    const std::vector<int> held_conds = heldout_conditions(cfg.n_conditions, cfg.seed);
    std::vector<PreferencePair> train_pairs;
    std::vector<PreferencePair> heldout;
    for (const PreferencePair& p : pairs) {
        const bool held = std::find(held_conds.begin(), held_conds.end(), p.condition.label) !=
                          held_conds.end();
        (held ? heldout : train_pairs).push_back(p);
    }
    if (train_pairs.empty()) throw std::invalid_argument("posttrain: no training pairs after split");

    RngState run_rng = derive_stream(cfg.seed, "posttrain");
    RngState fixture_rng = derive_stream(cfg.seed, "posttrain-eval");
    const EvalFixture fx = make_eval_fixture(cfg.n_conditions, cfg.eval_samples_per_condition,
                                             model.data_dim, s, heldout.size(), fixture_rng);

    AdamW opt(model, cfg.opt);
    TrainReport report;
    detail::Stopwatch clock;

    auto eval_row = [&](long step, double loss_value) {
        const EvalRecord rec = evaluate_fixed(model, ref, suite, s, heldout, dpo_cfg, fx);
        TrainReportRow row{step, loss_value, rec.margin_mean, rec.pair_accuracy, clock.ms(),
                           rec.reward_mean};
        if (!eval_rewards) row.reward_mean = 0.0;
        report.rows.push_back(row);
        std::fprintf(stderr,
                     "  step %6ld  loss %.6f  margin %.4g  acc %.3f  reward %.4f  (%.0f ms)\n",
                     step, loss_value, rec.margin_mean, rec.pair_accuracy, rec.reward_mean,
                     clock.ms());
    };

    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    double window_sum = 0.0;
    long window_count = 0;
    long last_good = -1;

    for (long step = 0; step < cfg.steps; ++step) {
        if (cursor == order.size()) {
            detail::shuffle_indices(order, run_rng);
            cursor = 0;
        }
        const PreferencePair& pair = train_pairs[order[cursor]];
        ++cursor;

        DpoLossOut lo;
        if (dpo_cfg.variant == DpoVariant::diffusion_dpo) {
            lo = diffusion_dpo_loss(model, ref, s, pair, dpo_cfg, run_rng);
        } else {
            lo = inversion_dpo_loss(model, ref, s, pair, dpo_cfg, run_rng);
        }
        if (!std::isfinite(lo.loss)) {
            throw TrainingError("posttrain: loss diverged", last_good);
        }
        if (step == 0) eval_row(0, lo.loss);
        opt.apply(model, lo.grads);
        last_good = step;
        window_sum += lo.loss;
        ++window_count;
        if ((step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps) {
            const double mean_loss = window_sum / static_cast<double>(window_count);
            eval_row(step + 1, mean_loss);
            report.final_loss = mean_loss;
            window_sum = 0.0;
            window_count = 0;
        }
    }

    if (param_hash(ref) != ref_hash_before) {
        throw StateError("posttrain: frozen reference model was mutated");
    }
    return PosttrainResult{std::move(report), std::move(heldout)};
}

} // namespace idpo
