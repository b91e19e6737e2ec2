// AdamW with decoupled weight decay. Update, per coordinate, at step k:
//   m_k = b1 m_{k-1} + (1-b1) g
//   v_k = b2 v_{k-1} + (1-b2) g^2
//   mhat = m_k / (1 - b1^k),  vhat = v_k / (1 - b2^k)
//   p   -= lr * ( mhat / (sqrt(vhat) + eps) + wd * p )

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "idpo/denoiser.hpp"

namespace idpo {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
public:
    AdamW(const Denoiser& model, AdamWConfig cfg) : cfg_(cfg) {
        if (!(cfg.lr > 0.0)) throw std::invalid_argument("AdamW: lr must be > 0");
        if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
            throw std::invalid_argument("AdamW: moment decays must lie in [0, 1)");
        }
        m_ = zero_grads(model);
        v_ = zero_grads(model);
    }

    long step_count() const { return step_; }

    void apply(Denoiser& model, const ParamGrads& grads) {
        if (grads.size() != model.layers.size()) {
            throw std::invalid_argument("AdamW: grads do not match model layout");
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            update(model.layers[l].W, grads[l].W, m_[l].W, v_[l].W, bc1, bc2);
            update(model.layers[l].b, grads[l].b, m_[l].b, v_[l].b, bc1, bc2);
        }
    }

private:
    void update(DenseArray& p, const DenseArray& g, DenseArray& m, DenseArray& v, double bc1,
                double bc2) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p.data[i]);
        }
    }

    AdamWConfig cfg_;
    long step_ = 0;
    ParamGrads m_;
    ParamGrads v_;
};

} // namespace idpo
