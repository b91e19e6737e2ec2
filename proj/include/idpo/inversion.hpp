// Deterministic inversion from x_0 back to x_T, and the two diagnostics
// that probe how well a model satisfies the adjacent-step noise
// similarity this direction relies on.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "idpo/array.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/schedule.hpp"

namespace idpo {

// x_t = sqrt(alpha_t/alpha_{t-1}) x_{t-1}
//       + (sqrt(1-alpha_t) - sqrt(alpha_t/alpha_{t-1} - alpha_t)) eps(x_{t-1}, t-1)
//
// First-order only; a corrector hook would slot in after the eps
// evaluation if higher-order refinement is ever needed.
template <typename Model>
DenseArray invert_step(const Model& m, const NoiseSchedule& s, const DenseArray& x_prev,
                       int t, const Condition& c) {
    s.require_step(t, "invert_step");
    const DenseArray eps = eps_forward(m, s, x_prev, t - 1, c);
    const double a_t = s.alpha[t];
    const double a_prev = s.alpha[t - 1];
    const double ratio = a_t / a_prev;
    const double c_sig = std::sqrt(ratio);
    // radicand is alpha_t (1 - alpha_{t-1}) / alpha_{t-1} >= 0; clamp the
    // rounding slop at t = 1 where it is exactly zero
    const double c_noise = std::sqrt(1.0 - a_t) - std::sqrt(std::max(0.0, ratio - a_t));
    DenseArray out = x_prev;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = c_sig * x_prev.data[i] + c_noise * eps.data[i];
    }
    return out;
}

template <typename Model>
Trajectory invert(const Model& m, const NoiseSchedule& s, const DenseArray& x0,
                  const Condition& c) {
    require_finite(x0, "invert");
    Trajectory traj;
    traj.direction = Direction::inverted;
    traj.condition = c;
    traj.schedule_id = s.id;
    traj.states.resize(static_cast<std::size_t>(s.T) + 1);
    traj.states[0] = x0;
    for (int t = 1; t <= s.T; ++t) {
        traj.states[t] = invert_step(m, s, traj.states[t - 1], t, c);
        require_finite(traj.states[t], "invert");
    }
    return traj;
}

// || sample(invert(x0).x_T).x_0 - x0 || / (||x0|| + 1e-12)
template <typename Model>
double roundtrip_error(const Model& m, const NoiseSchedule& s, const DenseArray& x0,
                       const Condition& c) {
    const Trajectory up = invert(m, s, x0, c);
    const Trajectory down = sample(m, s, up.states.back(), c);
    return distance(down.states.front(), x0) / (norm(x0) + 1e-12);
}

// Mean over t of || eps(x_t, t) - eps(x_{t-1}, t-1) || along a recorded
// trajectory; small values mean the inversion approximation is safe.
template <typename Model>
double adjacent_eps_gap(const Model& m, const NoiseSchedule& s, const Trajectory& traj,
                        const Condition& c) {
    if (traj.states.empty()) {
        throw std::invalid_argument("adjacent_eps_gap: empty trajectory");
    }
    if (traj.steps() != s.T) {
        throw std::invalid_argument("adjacent_eps_gap: trajectory length does not match schedule");
    }
    if (traj.schedule_id != s.id) {
        throw std::invalid_argument("adjacent_eps_gap: trajectory was built on a different schedule");
    }
    double total = 0.0;
    DenseArray prev = eps_forward(m, s, traj.states[0], 0, c);
    for (int t = 1; t <= s.T; ++t) {
        DenseArray cur = eps_forward(m, s, traj.states[t], t, c);
        total += distance(cur, prev);
        prev = std::move(cur);
    }
    return total / static_cast<double>(s.T);
}

// One row per state: step index then the components.
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t d = traj.states.empty() ? 0 : traj.states[0].size();
    std::fputs("step", f);
    for (std::size_t k = 0; k < d; ++k) std::fprintf(f, ",c%zu", k);
    std::fputc('\n', f);
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        std::fprintf(f, "%zu", t);
        for (std::size_t k = 0; k < d; ++k) std::fprintf(f, ",%.17g", traj.states[t].data[k]);
        std::fputc('\n', f);
    }
    std::fclose(f);
}

} // namespace idpo
