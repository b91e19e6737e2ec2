// The two preference losses.
//
// diffusion-dpo draws one timestep and fresh noise per pair member,
// noises both members through the forward process, and scores
//     -log sigmoid( -beta T omega (delta_w - delta_l) )
// with delta = ||eps - eps(x_t)||^2 - ||eps - eps_ref(x_t)||^2.
//
// inversion-dpo deterministically inverts both members with the current
// model, evaluates trained and reference nets at every recorded state,
// and scores
//     -log sigmoid( beta sign sum_t [ gap_w(t) - gap_l(t) ] )
// with gap(t) = ||eps(x_t) - eps_ref(x_t)||^2. Trajectory states carry no
// parameter gradient: only the eps evaluations at those states are
// differentiated. The single-uniform-t mode replaces the sum with T times
// one uniformly drawn summand.
//
// Both losses expose a *_at core taking the random draws (or trajectories)
// as explicit arguments; the finite-difference oracle certifies exactly
// those cores.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/inversion.hpp"
#include "idpo/preference.hpp"
#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"

namespace idpo {

enum class DpoVariant { diffusion_dpo, inversion_dpo };
enum class OmegaMode { constant_one };
enum class TimestepMode { full_trajectory, single_uniform_t };

inline DpoVariant dpo_variant_from_string(const std::string& s) {
    if (s == "diffusion-dpo") return DpoVariant::diffusion_dpo;
    if (s == "inversion-dpo") return DpoVariant::inversion_dpo;
    throw std::invalid_argument("unknown loss variant '" + s + "'");
}

inline std::string to_string(DpoVariant v) {
    return v == DpoVariant::diffusion_dpo ? "diffusion-dpo" : "inversion-dpo";
}

struct DpoConfig {
    double beta = 2000.0;
    DpoVariant variant = DpoVariant::inversion_dpo;
    int inner_sign = +1; // applied to the inversion-dpo bracketed sum
    OmegaMode omega_mode = OmegaMode::constant_one;
    TimestepMode timestep_mode = TimestepMode::full_trajectory;

    void validate() const {
        if (!(beta > 0.0)) throw std::invalid_argument("DpoConfig: beta must be > 0");
        if (inner_sign != 1 && inner_sign != -1) {
            throw std::invalid_argument("DpoConfig: inner_sign must be +1 or -1");
        }
    }
};

inline DpoConfig default_dpo_config(DpoVariant variant) {
    DpoConfig cfg;
    cfg.variant = variant;
    cfg.timestep_mode = variant == DpoVariant::inversion_dpo ? TimestepMode::full_trajectory
                                                             : TimestepMode::single_uniform_t;
    return cfg;
}

struct DpoLossOut {
    double loss = 0.0;
    double margin = 0.0;         // the sigmoid argument
    std::size_t sq_diff_terms = 0; // squared-difference evaluations inside it
    ParamGrads grads;
};

namespace detail {

// -log sigmoid(m), stable for large |m|
inline double neg_log_sigmoid(double m) {
    return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// d/dm of the above: sigmoid(m) - 1 = -1 / (1 + e^m)
inline double neg_log_sigmoid_grad(double m) {
    return m >= 0.0 ? -std::exp(-m) / (1.0 + std::exp(-m)) : -1.0 / (1.0 + std::exp(m));
}

inline void require_pair_dims(const Denoiser& m, const PreferencePair& pair, const char* where) {
    const auto d = static_cast<std::size_t>(m.data_dim);
    if (pair.winner.shape != std::vector<std::size_t>{d} ||
        pair.loser.shape != std::vector<std::size_t>{d}) {
        throw std::invalid_argument(std::string(where) + ": pair dims do not match the model");
    }
}

} // namespace detail

// ---- diffusion-dpo ----

// Deterministic core with the timestep and both noises fixed.
inline DpoLossOut diffusion_dpo_loss_at(const Denoiser& model, const Denoiser& ref,
                                        const NoiseSchedule& s, const PreferencePair& pair,
                                        const DpoConfig& cfg, int t, const DenseArray& eps_w,
                                        const DenseArray& eps_l, bool want_grads = true) {
    cfg.validate();
    if (cfg.variant != DpoVariant::diffusion_dpo) {
        throw std::invalid_argument("diffusion_dpo_loss: config variant mismatch");
    }
    detail::require_pair_dims(model, pair, "diffusion_dpo_loss");
    s.require_step(t, "diffusion_dpo_loss");

    const double omega = 1.0; // constant_one is the only mode
    const double time01 = static_cast<double>(t) / s.T;

    const DenseArray xw = forward_noise(s, pair.winner, t, eps_w);
    const DenseArray xl = forward_noise(s, pair.loser, t, eps_l);

    EpsTrace trace_w, trace_l;
    eps_forward_traced(model, xw, time01, pair.condition, trace_w);
    eps_forward_traced(model, xl, time01, pair.condition, trace_l);
    const DenseArray ref_w = eps_forward(ref, s, xw, t, pair.condition);
    const DenseArray ref_l = eps_forward(ref, s, xl, t, pair.condition);

    const double delta_w = squared_distance(eps_w, trace_w.output) - squared_distance(eps_w, ref_w);
    const double delta_l = squared_distance(eps_l, trace_l.output) - squared_distance(eps_l, ref_l);

    DpoLossOut out;
    out.sq_diff_terms = 4;
    out.margin = -cfg.beta * static_cast<double>(s.T) * omega * (delta_w - delta_l);
    out.loss = detail::neg_log_sigmoid(out.margin);

    if (want_grads) {
        out.grads = zero_grads(model);
        const double dl_dm = detail::neg_log_sigmoid_grad(out.margin);
        const double scale = dl_dm * cfg.beta * static_cast<double>(s.T) * omega;
        // d margin / d pred_w = -beta T omega * 2 (pred_w - eps_w)
        DenseArray up_w(trace_w.output.shape);
        for (std::size_t i = 0; i < up_w.size(); ++i) {
            up_w.data[i] = scale * -2.0 * (trace_w.output.data[i] - eps_w.data[i]);
        }
        eps_backward(model, trace_w, up_w, out.grads);
        DenseArray up_l(trace_l.output.shape);
        for (std::size_t i = 0; i < up_l.size(); ++i) {
            up_l.data[i] = scale * 2.0 * (trace_l.output.data[i] - eps_l.data[i]);
        }
        eps_backward(model, trace_l, up_l, out.grads);
    }
    return out;
}

inline DpoLossOut diffusion_dpo_loss(const Denoiser& model, const Denoiser& ref,
                                     const NoiseSchedule& s, const PreferencePair& pair,
                                     const DpoConfig& cfg, RngState& rng, bool want_grads = true) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.T)));
    const DenseArray eps_w = gaussian_sample(rng, pair.winner.shape);
    const DenseArray eps_l = gaussian_sample(rng, pair.loser.shape);
    return diffusion_dpo_loss_at(model, ref, s, pair, cfg, t, eps_w, eps_l, want_grads);
}

// ---- inversion-dpo ----

// Deterministic core with both trajectories fixed (stop-gradient through
// the inversion path happens here by construction). single_t < 0 means
// full-trajectory mode.
inline DpoLossOut inversion_dpo_loss_at(const Denoiser& model, const Denoiser& ref,
                                        const NoiseSchedule& s, const Trajectory& traj_w,
                                        const Trajectory& traj_l, const Condition& c,
                                        const DpoConfig& cfg, int single_t = -1,
                                        bool want_grads = true) {
    cfg.validate();
    if (cfg.variant != DpoVariant::inversion_dpo) {
        throw std::invalid_argument("inversion_dpo_loss: config variant mismatch");
    }
    if (traj_w.steps() != s.T || traj_l.steps() != s.T) {
        throw std::invalid_argument("inversion_dpo_loss: trajectory length does not match schedule");
    }
    for (const Trajectory* traj : {&traj_w, &traj_l}) {
        for (const DenseArray& x : traj->states) {
            if (!x.finite()) throw NumericError("inversion_dpo_loss: non-finite trajectory state");
        }
    }
    if (single_t >= 0) s.require_step(single_t, "inversion_dpo_loss");

    struct Eval {
        EpsTrace trace;
        DenseArray ref_out;
        double sign; // +1 winner term, -1 loser term
        double weight;
    };
    std::vector<Eval> evals;
    const int t_begin = single_t >= 0 ? single_t : 1;
    const int t_end = single_t >= 0 ? single_t : s.T;
    const double weight = single_t >= 0 ? static_cast<double>(s.T) : 1.0;

    // winner and loser sums are accumulated separately so that swapping the
    // pair negates the inner term exactly
    double sum_w = 0.0;
    double sum_l = 0.0;
    std::size_t terms = 0;
    for (int t = t_begin; t <= t_end; ++t) {
        const double time01 = static_cast<double>(t) / s.T;
        for (int side = 0; side < 2; ++side) {
            const Trajectory& traj = side == 0 ? traj_w : traj_l;
            Eval e;
            e.sign = side == 0 ? 1.0 : -1.0;
            e.weight = weight;
            eps_forward_traced(model, traj.states[t], time01, c, e.trace);
            e.ref_out = eps_forward(ref, s, traj.states[t], t, c);
            (side == 0 ? sum_w : sum_l) += weight * squared_distance(e.trace.output, e.ref_out);
            ++terms;
            if (want_grads) evals.push_back(std::move(e));
        }
    }
    const double inner_sum = sum_w - sum_l;

    DpoLossOut out;
    out.sq_diff_terms = terms;
    out.margin = cfg.beta * static_cast<double>(cfg.inner_sign) * inner_sum;
    out.loss = detail::neg_log_sigmoid(out.margin);

    if (want_grads) {
        out.grads = zero_grads(model);
        const double dl_dm = detail::neg_log_sigmoid_grad(out.margin);
        const double scale = dl_dm * cfg.beta * static_cast<double>(cfg.inner_sign);
        DenseArray upstream({static_cast<std::size_t>(model.data_dim)});
        for (const Eval& e : evals) {
            for (std::size_t i = 0; i < upstream.size(); ++i) {
                upstream.data[i] =
                    scale * e.sign * e.weight * 2.0 * (e.trace.output.data[i] - e.ref_out.data[i]);
            }
            eps_backward(model, e.trace, upstream, out.grads);
        }
    }
    return out;
}

// Inverts both pair members with the current model, then scores. The rng
// is consulted only in single-uniform-t mode.
inline DpoLossOut inversion_dpo_loss(const Denoiser& model, const Denoiser& ref,
                                     const NoiseSchedule& s, const PreferencePair& pair,
                                     const DpoConfig& cfg, RngState& rng, bool want_grads = true) {
    detail::require_pair_dims(model, pair, "inversion_dpo_loss");
    const Trajectory traj_w = invert(model, s, pair.winner, pair.condition);
    const Trajectory traj_l = invert(model, s, pair.loser, pair.condition);
    const int single_t = cfg.timestep_mode == TimestepMode::single_uniform_t
                             ? 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.T)))
                             : -1;
    return inversion_dpo_loss_at(model, ref, s, traj_w, traj_l, pair.condition, cfg, single_t,
                                 want_grads);
}

// The signed sigmoid argument of whichever loss the config selects;
// positive means the model currently prefers the winner.
inline double implicit_reward_margin(const Denoiser& model, const Denoiser& ref,
                                     const NoiseSchedule& s, const PreferencePair& pair,
                                     const DpoConfig& cfg, RngState& rng) {
    if (cfg.variant == DpoVariant::diffusion_dpo) {
        return diffusion_dpo_loss(model, ref, s, pair, cfg, rng, /*want_grads=*/false).margin;
    }
    return inversion_dpo_loss(model, ref, s, pair, cfg, rng, /*want_grads=*/false).margin;
}

} // namespace idpo
