// Forward noising, the pretraining loss, and the deterministic sampler
// (sigma = 0 throughout; the stochastic ancestral path is deliberately
// not exposed).

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"

namespace idpo {

enum class Direction { sampled, inverted };

struct Trajectory {
    std::vector<DenseArray> states; // x_0 .. x_T
    Direction direction = Direction::sampled;
    Condition condition;
    std::uint64_t schedule_id = 0;

    int steps() const { return static_cast<int>(states.size()) - 1; }
};

// x_t = sqrt(alpha_t) x0 + sqrt(1 - alpha_t) eps
inline DenseArray forward_noise(const NoiseSchedule& s, const DenseArray& x0, int t,
                                const DenseArray& eps) {
    s.require_step(t, "forward_noise");
    require_same_shape(x0, eps, "forward_noise");
    const double a = s.alpha[t];
    const double ca = std::sqrt(a);
    const double ce = std::sqrt(1.0 - a);
    DenseArray out = x0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = ca * x0.data[i] + ce * eps.data[i];
    }
    return out;
}

struct BaseLossOut {
    double loss = 0.0;
    ParamGrads grads;
};

// Deterministic core: per-sample timesteps and noises are given. Loss is
// the batch mean of ||eps - eps_model||^2 (summed over components).
inline BaseLossOut base_loss_at(const Denoiser& m, const NoiseSchedule& s,
                                std::span<const DenseArray> x0s, std::span<const Condition> conds,
                                std::span<const int> ts, std::span<const DenseArray> noises) {
    if (x0s.empty()) throw std::invalid_argument("base_loss: empty batch");
    if (x0s.size() != conds.size() || x0s.size() != ts.size() || x0s.size() != noises.size()) {
        throw std::invalid_argument("base_loss: batch arrays disagree in length");
    }
    BaseLossOut out;
    out.grads = zero_grads(m);
    const double inv_b = 1.0 / static_cast<double>(x0s.size());
    EpsTrace trace;
    DenseArray upstream({static_cast<std::size_t>(m.data_dim)});
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        const DenseArray x_t = forward_noise(s, x0s[i], ts[i], noises[i]);
        eps_forward_traced(m, x_t, static_cast<double>(ts[i]) / s.T, conds[i], trace);
        double l = 0.0;
        for (std::size_t k = 0; k < upstream.size(); ++k) {
            const double d = trace.output.data[k] - noises[i].data[k];
            l += d * d;
            upstream.data[k] = 2.0 * d * inv_b;
        }
        out.loss += l * inv_b;
        eps_backward(m, trace, upstream, out.grads);
    }
    return out;
}

// Draws t uniform in 1..T and eps ~ N(0, I) per sample, then defers to the
// deterministic core.
inline BaseLossOut base_loss(const Denoiser& m, const NoiseSchedule& s,
                             std::span<const DenseArray> x0s, std::span<const Condition> conds,
                             RngState& rng) {
    if (x0s.empty()) throw std::invalid_argument("base_loss: empty batch");
    std::vector<int> ts(x0s.size());
    std::vector<DenseArray> noises;
    noises.reserve(x0s.size());
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        ts[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.T)));
        noises.push_back(gaussian_sample(rng, x0s[i].shape));
    }
    return base_loss_at(m, s, x0s, conds, ts, noises);
}

// One deterministic generative step:
//   x_{t-1} = sqrt(alpha_{t-1}) x0_hat + sqrt(1 - alpha_{t-1}) eps(x_t, t)
template <typename Model>
DenseArray ddim_step(const Model& m, const NoiseSchedule& s, const DenseArray& x_t,
                     int t, const Condition& c) {
    s.require_step(t, "ddim_step");
    const DenseArray eps = eps_forward(m, s, x_t, t, c);
    const double a_t = s.alpha[t];
    const double a_prev = s.alpha[t - 1];
    const double inv_sqrt_a = 1.0 / std::sqrt(a_t);
    const double c_noise_t = std::sqrt(1.0 - a_t);
    const double c_sig = std::sqrt(a_prev);
    const double c_noise = std::sqrt(1.0 - a_prev);
    DenseArray out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0_hat = (x_t.data[i] - c_noise_t * eps.data[i]) * inv_sqrt_a;
        out.data[i] = c_sig * x0_hat + c_noise * eps.data[i];
    }
    return out;
}

// Full deterministic trajectory from pure noise down to x_0. Takes no RNG:
// the sigma = 0 path never draws.
template <typename Model>
Trajectory sample(const Model& m, const NoiseSchedule& s, const DenseArray& x_T,
                  const Condition& c) {
    require_finite(x_T, "sample");
    Trajectory traj;
    traj.direction = Direction::sampled;
    traj.condition = c;
    traj.schedule_id = s.id;
    traj.states.resize(static_cast<std::size_t>(s.T) + 1);
    traj.states[s.T] = x_T;
    for (int t = s.T; t >= 1; --t) {
        traj.states[t - 1] = ddim_step(m, s, traj.states[t], t, c);
        require_finite(traj.states[t - 1], "sample");
    }
    return traj;
}

} // namespace idpo
