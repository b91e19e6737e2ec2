// Noise schedule: the signal-retention sequence alpha_0..alpha_T and the
// per-step sigma. Every sampler and loss reads its coefficients from here.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "idpo/errors.hpp"

namespace idpo {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha; // alpha[0..T], alpha[0] == 1, strictly decreasing
    std::vector<double> sigma; // sigma[0..T]; sigma[0] unused; all zero here

    std::uint64_t id = 0; // content hash, recorded into trajectories

    NoiseSchedule() = default;

    explicit NoiseSchedule(std::vector<double> alphas)
        : T(static_cast<int>(alphas.size()) - 1), alpha(std::move(alphas)) {
        validate();
        sigma.assign(alpha.size(), 0.0);
        id = content_hash();
    }

    void validate() const {
        if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
        if (alpha.size() != static_cast<std::size_t>(T) + 1) {
            throw std::invalid_argument("NoiseSchedule: alpha length must be T+1");
        }
        if (alpha[0] != 1.0) throw std::invalid_argument("NoiseSchedule: alpha[0] must be 1");
        for (int t = 1; t <= T; ++t) {
            if (!(alpha[t] < alpha[t - 1])) {
                throw std::invalid_argument("NoiseSchedule: alpha must be strictly decreasing");
            }
        }
        if (!(alpha[T] > 0.0)) throw std::invalid_argument("NoiseSchedule: alpha[T] must be > 0");
    }

    void require_step(int t, const char* where) const {
        if (t < 1 || t > T) {
            throw std::invalid_argument(std::string(where) + ": timestep " + std::to_string(t) +
                                        " outside [1, " + std::to_string(T) + "]");
        }
    }

    std::uint64_t content_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (8 * i)) & 0xFF;
                h *= 0x100000001b3ULL;
            }
        };
        mix(static_cast<std::uint64_t>(T));
        for (double a : alpha) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(a));
            __builtin_memcpy(&bits, &a, sizeof(bits));
            mix(bits);
        }
        return h;
    }
};

// Log-linear interpolation of alpha from 1 down to alpha_T_target; sigma = 0
// everywhere (the deterministic-sampler configuration).
inline NoiseSchedule make_schedule(int T, double alpha_T_target) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(alpha_T_target > 0.0 && alpha_T_target < 1.0)) {
        throw std::invalid_argument("make_schedule: alpha_T_target must lie in (0, 1)");
    }
    std::vector<double> alphas(static_cast<std::size_t>(T) + 1);
    alphas[0] = 1.0;
    const double log_target = std::log(alpha_T_target);
    for (int t = 1; t <= T; ++t) {
        alphas[t] = std::exp(log_target * static_cast<double>(t) / static_cast<double>(T));
    }
    return NoiseSchedule(std::move(alphas));
}

// log(alpha_t / (1 - alpha_t)); undefined at t = 0 where alpha = 1.
inline double snr_log(const NoiseSchedule& s, int t) {
    s.require_step(t, "snr_log");
    return std::log(s.alpha[t] / (1.0 - s.alpha[t]));
}

} // namespace idpo
