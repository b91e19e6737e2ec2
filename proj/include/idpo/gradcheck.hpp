// Central finite differences. This is the certification oracle for every
// analytic backward pass in the repo, so it stays independent of them.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "idpo/array.hpp"
#include "idpo/errors.hpp"

namespace idpo {

using ScalarFn = std::function<double(const DenseArray&)>;

// (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
inline DenseArray finite_diff_grad(const ScalarFn& f, const DenseArray& x, double h = 1e-5) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
    DenseArray grad(x.shape);
    DenseArray probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + h;
        const double fp = f(probe);
        probe.data[i] = orig - h;
        const double fm = f(probe);
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        grad.data[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double relative_error(double got, double want) {
    return std::abs(got - want) / (std::abs(want) + 1e-12);
}

} // namespace idpo
