// DenseArray: the one storage type used everywhere. Row-major 64-bit
// floats plus a shape vector; no broadcasting, no views.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "idpo/errors.hpp"

namespace idpo {

struct DenseArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    DenseArray() = default;

    explicit DenseArray(std::vector<std::size_t> dims) : shape(std::move(dims)) {
        data.assign(element_count(shape), 0.0);
    }

    DenseArray(std::vector<std::size_t> dims, std::vector<double> values)
        : shape(std::move(dims)), data(std::move(values)) {
        if (data.size() != element_count(shape)) {
            throw std::invalid_argument("DenseArray: data length " + std::to_string(data.size()) +
                                        " does not match shape product " +
                                        std::to_string(element_count(shape)));
        }
    }

    static DenseArray vec(std::initializer_list<double> values) {
        return DenseArray({values.size()}, std::vector<double>(values));
    }

    static std::size_t element_count(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }

    std::size_t size() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const DenseArray& other) const { return shape == other.shape; }

    bool finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline void require_same_shape(const DenseArray& a, const DenseArray& b, const char* where) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(where) + ": shape mismatch");
    }
}

inline void require_finite(const DenseArray& a, const char* where) {
    if (!a.finite()) {
        throw NumericError(std::string(where) + ": non-finite value");
    }
}

inline double dot(const DenseArray& a, const DenseArray& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline double squared_norm(const DenseArray& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

inline double norm(const DenseArray& a) { return std::sqrt(squared_norm(a)); }

// a + s*b, elementwise
inline DenseArray axpy(const DenseArray& a, double s, const DenseArray& b) {
    require_same_shape(a, b, "axpy");
    DenseArray out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += s * b.data[i];
    return out;
}

inline DenseArray scaled(const DenseArray& a, double s) {
    DenseArray out = a;
    for (double& v : out.data) v *= s;
    return out;
}

inline DenseArray sub(const DenseArray& a, const DenseArray& b) { return axpy(a, -1.0, b); }

inline double squared_distance(const DenseArray& a, const DenseArray& b) {
    require_same_shape(a, b, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s;
}

inline double distance(const DenseArray& a, const DenseArray& b) {
    return std::sqrt(squared_distance(a, b));
}

} // namespace idpo
