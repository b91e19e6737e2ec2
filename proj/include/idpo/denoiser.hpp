// The parametric noise predictor eps(x, t, c): a 3-layer fully-connected
// net with tanh hidden activations and a linear output head. Inputs are
// the data vector, a 16-dim sinusoidal embedding of t/T, and a one-hot
// condition embedding. Forward records activations so the backward pass
// can produce exact analytic parameter gradients.
//
// Checkpoint format (all integers and floats little-endian):
//   magic "IDPO" | u32 version=1
//   u32 T | f64 alpha[0..T]
//   u32 data_dim | u32 time_dim | u32 n_conditions
//   u32 n_layers | u32 dims[n_layers+1]
//   f64 params, per layer: W row-major (out x in), then b (out)

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/errors.hpp"
#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"

namespace idpo {

struct Condition {
    int label = 0;
};

struct Layer {
    DenseArray W; // [out, in], row-major
    DenseArray b; // [out]
};

using ParamGrads = std::vector<Layer>;

struct Denoiser {
    int data_dim = 0;
    int time_dim = 0;
    int n_conditions = 0;
    std::vector<Layer> layers; // tanh on all but the last, last is linear

    int input_dim() const { return data_dim + time_dim + n_conditions; }
};

// Activations recorded by a traced forward pass, consumed by eps_backward.
struct EpsTrace {
    DenseArray input;               // assembled feature vector
    std::vector<DenseArray> hidden; // post-activation per hidden layer
    DenseArray output;
    bool valid = false;
};

namespace detail {

// Sinusoidal embedding of s = t/T with linear frequencies pi*(k+1); smooth
// enough that adjacent steps of an 80-step schedule stay close.
inline void time_embedding(double s, int dim, double* out) {
    for (int k = 0; k < dim / 2; ++k) {
        const double w = std::numbers::pi * static_cast<double>(k + 1);
        out[2 * k] = std::sin(w * s);
        out[2 * k + 1] = std::cos(w * s);
    }
    if (dim % 2 == 1) out[dim - 1] = s;
}

inline void matvec(const DenseArray& W, const DenseArray& b, const double* x, double* y) {
    const std::size_t out_dim = W.shape[0];
    const std::size_t in_dim = W.shape[1];
    const double* w = W.data.data();
    for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = b.data[o];
        const double* row = w + o * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

} // namespace detail

inline Denoiser make_denoiser(int data_dim, int hidden_dim, int time_dim, int n_conditions,
                              RngState& rng) {
    if (data_dim < 1 || hidden_dim < 1 || time_dim < 2 || n_conditions < 1) {
        throw std::invalid_argument("make_denoiser: bad dimensions");
    }
    Denoiser m;
    m.data_dim = data_dim;
    m.time_dim = time_dim;
    m.n_conditions = n_conditions;
    const std::vector<int> dims = {m.input_dim(), hidden_dim, hidden_dim, data_dim};
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const auto out_dim = static_cast<std::size_t>(dims[l + 1]);
        const auto in_dim = static_cast<std::size_t>(dims[l]);
        layer.W = gaussian_sample(rng, {out_dim, in_dim});
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& w : layer.W.data) w *= scale;
        layer.b = DenseArray({out_dim});
        m.layers.push_back(std::move(layer));
    }
    return m;
}

inline ParamGrads zero_grads(const Denoiser& m) {
    ParamGrads g;
    g.reserve(m.layers.size());
    for (const Layer& l : m.layers) {
        g.push_back(Layer{DenseArray(l.W.shape), DenseArray(l.b.shape)});
    }
    return g;
}

inline void check_condition(const Denoiser& m, const Condition& c, const char* where) {
    if (c.label < 0 || c.label >= m.n_conditions) {
        throw std::invalid_argument(std::string(where) + ": condition label " +
                                    std::to_string(c.label) + " outside [0, " +
                                    std::to_string(m.n_conditions) + ")");
    }
}

// Forward pass recording the trace. time01 = t/T in [0, 1].
inline void eps_forward_traced(const Denoiser& m, const DenseArray& x, double time01,
                               const Condition& c, EpsTrace& trace) {
    if (x.shape.size() != 1 || x.shape[0] != static_cast<std::size_t>(m.data_dim)) {
        throw std::invalid_argument("eps_forward: x does not match the model data dim");
    }
    check_condition(m, c, "eps_forward");

    const auto in_dim = static_cast<std::size_t>(m.input_dim());
    trace.input.shape = {in_dim};
    trace.input.data.resize(in_dim);
    double* f = trace.input.data.data();
    std::memcpy(f, x.data.data(), sizeof(double) * x.size());
    detail::time_embedding(time01, m.time_dim, f + m.data_dim);
    std::memset(f + m.data_dim + m.time_dim, 0, sizeof(double) * m.n_conditions);
    f[m.data_dim + m.time_dim + c.label] = 1.0;

    trace.hidden.resize(m.layers.size() - 1);
    const double* cur = f;
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        DenseArray& h = trace.hidden[l];
        h.shape = {m.layers[l].W.shape[0]};
        h.data.resize(h.shape[0]);
        detail::matvec(m.layers[l].W, m.layers[l].b, cur, h.data.data());
        for (double& v : h.data) v = std::tanh(v);
        cur = h.data.data();
    }
    const Layer& head = m.layers.back();
    trace.output.shape = {head.W.shape[0]};
    trace.output.data.resize(head.W.shape[0]);
    detail::matvec(head.W, head.b, cur, trace.output.data.data());
    trace.valid = true;
}

inline DenseArray eps_forward(const Denoiser& m, const NoiseSchedule& s, const DenseArray& x,
                              int t, const Condition& c) {
    if (t < 0 || t > s.T) {
        throw std::invalid_argument("eps_forward: timestep outside [0, T]");
    }
    EpsTrace trace;
    eps_forward_traced(m, x, static_cast<double>(t) / static_cast<double>(s.T), c, trace);
    return std::move(trace.output);
}

// Exact gradients of the recorded forward computation, accumulated into
// grads. upstream is dLoss/dOutput.
inline void eps_backward(const Denoiser& m, const EpsTrace& trace, const DenseArray& upstream,
                         ParamGrads& grads) {
    if (!trace.valid) {
        throw StateError("eps_backward: no recorded forward pass");
    }
    require_same_shape(upstream, trace.output, "eps_backward");
    if (grads.size() != m.layers.size()) {
        throw std::invalid_argument("eps_backward: grads do not match model layout");
    }

    std::vector<double> delta(upstream.data.begin(), upstream.data.end());
    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const Layer& layer = m.layers[li];
        const std::size_t out_dim = layer.W.shape[0];
        const std::size_t in_dim = layer.W.shape[1];
        const double* below = (li == 0) ? trace.input.data.data() : trace.hidden[li - 1].data.data();

        double* gW = grads[li].W.data.data();
        double* gb = grads[li].b.data.data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            gb[o] += d;
            double* row = gW + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) row[i] += d * below[i];
        }

        if (li == 0) break;
        std::vector<double> next(in_dim, 0.0);
        const double* w = layer.W.data.data();
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            const double* row = w + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) next[i] += d * row[i];
        }
        // through tanh of the layer below
        const DenseArray& act = trace.hidden[li - 1];
        for (std::size_t i = 0; i < in_dim; ++i) next[i] *= 1.0 - act.data[i] * act.data[i];
        delta = std::move(next);
    }
}

// x0 estimate (x_t - sqrt(1-alpha_t) eps) / sqrt(alpha_t); needs t >= 1.
inline DenseArray x0_predict(const Denoiser& m, const NoiseSchedule& s, const DenseArray& x_t,
                             int t, const Condition& c) {
    s.require_step(t, "x0_predict");
    const DenseArray eps = eps_forward(m, s, x_t, t, c);
    const double a = s.alpha[t];
    DenseArray out = x_t;
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    const double coeff = std::sqrt(1.0 - a);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = (x_t.data[i] - coeff * eps.data[i]) * inv_sqrt_a;
    }
    return out;
}

// ---- flat parameter access (used by the optimizer and the grad checker) ----

inline std::size_t param_count(const Denoiser& m) {
    std::size_t n = 0;
    for (const Layer& l : m.layers) n += l.W.size() + l.b.size();
    return n;
}

inline double* param_ptr(std::vector<Layer>& layers, std::size_t idx) {
    for (Layer& l : layers) {
        if (idx < l.W.size()) return &l.W.data[idx];
        idx -= l.W.size();
        if (idx < l.b.size()) return &l.b.data[idx];
        idx -= l.b.size();
    }
    throw std::invalid_argument("param index out of range");
}

inline double get_param(const Denoiser& m, std::size_t idx) {
    return *param_ptr(const_cast<std::vector<Layer>&>(m.layers), idx);
}

inline void set_param(Denoiser& m, std::size_t idx, double v) { *param_ptr(m.layers, idx) = v; }

inline double get_grad(const ParamGrads& g, std::size_t idx) {
    return *param_ptr(const_cast<ParamGrads&>(g), idx);
}

// FNV-1a over the raw parameter bytes in checkpoint order.
inline std::uint64_t param_hash(const Denoiser& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const DenseArray& a) {
        for (double v : a.data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xFF;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const Layer& l : m.layers) {
        mix(l.W);
        mix(l.b);
    }
    return h;
}

// ---- checkpoint IO ----

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

struct ByteReader {
    std::ifstream in;
    std::size_t offset = 0;

    explicit ByteReader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw FormatError("cannot open '" + path + "'", 0, "magic");
    }

    void read(void* dst, std::size_t n, const char* section) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError("truncated file", offset, section);
        }
        offset += n;
    }

    std::uint32_t u32(const char* section) {
        std::uint32_t v;
        read(&v, sizeof(v), section);
        return v;
    }

    double f64(const char* section) {
        double v;
        read(&v, sizeof(v), section);
        return v;
    }
};

struct ByteWriter {
    std::ofstream out;

    explicit ByteWriter(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    }

    void write(const void* src, std::size_t n) {
        out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) { write(&v, sizeof(v)); }
    void f64(double v) { write(&v, sizeof(v)); }
};

} // namespace detail

inline constexpr std::array<char, 4> kCheckpointMagic = {'I', 'D', 'P', 'O'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Denoiser& m, const NoiseSchedule& s, const std::string& path) {
    detail::ByteWriter w(path);
    w.write(kCheckpointMagic.data(), 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(s.T));
    for (double a : s.alpha) w.f64(a);
    w.u32(static_cast<std::uint32_t>(m.data_dim));
    w.u32(static_cast<std::uint32_t>(m.time_dim));
    w.u32(static_cast<std::uint32_t>(m.n_conditions));
    w.u32(static_cast<std::uint32_t>(m.layers.size()));
    for (const Layer& l : m.layers) w.u32(static_cast<std::uint32_t>(l.W.shape[1]));
    w.u32(static_cast<std::uint32_t>(m.layers.back().W.shape[0]));
    for (const Layer& l : m.layers) {
        for (double v : l.W.data) w.f64(v);
        for (double v : l.b.data) w.f64(v);
    }
    if (!w.out) throw std::runtime_error("short write to '" + path + "'");
}

inline std::pair<Denoiser, NoiseSchedule> load_checkpoint(const std::string& path) {
    detail::ByteReader r(path);

    std::array<char, 4> magic;
    r.read(magic.data(), 4, "magic");
    if (magic != kCheckpointMagic) {
        throw FormatError("bad magic", 0, "magic");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4, "version");
    }

    const std::uint32_t T = r.u32("schedule");
    if (T < 1 || T > 1'000'000) throw FormatError("implausible T", r.offset - 4, "schedule");
    std::vector<double> alphas(T + 1);
    for (auto& a : alphas) a = r.f64("schedule");
    NoiseSchedule schedule(std::move(alphas));

    Denoiser m;
    m.data_dim = static_cast<int>(r.u32("layer-dims"));
    m.time_dim = static_cast<int>(r.u32("layer-dims"));
    m.n_conditions = static_cast<int>(r.u32("layer-dims"));
    const std::uint32_t n_layers = r.u32("layer-dims");
    if (n_layers < 1 || n_layers > 64) throw FormatError("implausible layer count", r.offset - 4, "layer-dims");
    std::vector<std::uint32_t> dims(n_layers + 1);
    for (auto& d : dims) d = r.u32("layer-dims");
    if (dims[0] != static_cast<std::uint32_t>(m.data_dim + m.time_dim + m.n_conditions)) {
        throw FormatError("input dim does not match data/time/condition dims", r.offset, "layer-dims");
    }
    if (dims[n_layers] != static_cast<std::uint32_t>(m.data_dim)) {
        throw FormatError("output dim does not match data dim", r.offset, "layer-dims");
    }
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        Layer layer;
        layer.W = DenseArray({dims[l + 1], dims[l]});
        layer.b = DenseArray({dims[l + 1]});
        for (double& v : layer.W.data) v = r.f64("parameters");
        for (double& v : layer.b.data) v = r.f64("parameters");
        m.layers.push_back(std::move(layer));
    }
    return {std::move(m), std::move(schedule)};
}

} // namespace idpo
