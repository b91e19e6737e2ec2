// Toy data: 2-D Gaussian mixtures with one target mode per condition,
// modes evenly spaced on a circle.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/rng.hpp"

namespace idpo {

struct MixtureSpec {
    int n_conditions = 8;
    double mode_radius = 4.0;
    double mode_std = 0.3;
};

inline DenseArray mode_of(const MixtureSpec& spec, const Condition& c) {
    if (c.label < 0 || c.label >= spec.n_conditions) {
        throw std::invalid_argument("mode_of: condition label out of range");
    }
    const double angle = 2.0 * std::numbers::pi * c.label / spec.n_conditions;
    return DenseArray::vec({spec.mode_radius * std::cos(angle), spec.mode_radius * std::sin(angle)});
}

// Mean distance of a sample from its mode: Rayleigh mean sigma*sqrt(pi/2).
inline double expected_radius(const MixtureSpec& spec) {
    return spec.mode_std * std::sqrt(std::numbers::pi / 2.0);
}

struct Dataset {
    std::vector<DenseArray> x0s;
    std::vector<Condition> conditions;

    std::size_t size() const { return x0s.size(); }
};

inline Dataset make_dataset(const MixtureSpec& spec, int per_condition, RngState& rng) {
    if (per_condition < 1) throw std::invalid_argument("make_dataset: per_condition must be >= 1");
    Dataset ds;
    ds.x0s.reserve(static_cast<std::size_t>(spec.n_conditions) * per_condition);
    for (int c = 0; c < spec.n_conditions; ++c) {
        const DenseArray mu = mode_of(spec, Condition{c});
        for (int i = 0; i < per_condition; ++i) {
            DenseArray x = gaussian_sample(rng, {2});
            for (std::size_t k = 0; k < x.size(); ++k) x.data[k] = mu.data[k] + spec.mode_std * x.data[k];
            ds.x0s.push_back(std::move(x));
            ds.conditions.push_back(Condition{c});
        }
    }
    return ds;
}

} // namespace idpo
