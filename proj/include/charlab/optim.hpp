#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "charlab/nn.hpp"

namespace charlab::optim {

// Bias-corrected Adam direction with a per-tensor trust ratio:
//   r = m_hat / (sqrt(v_hat) + eps) + weight_decay * w
//   phi = |w| / |r| when both norms are nonzero, else 1
//   w <- w - lr * phi * r
// Weight decay skips parameters flagged decay = false (biases, norms).
struct LambHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.01;
};

template <typename Real>
class LambOptimizer {
public:
    explicit LambOptimizer(const LambHyper& hyper = {}, bool force_trust_ratio_one = false)
        : hyper_(hyper), force_trust_ratio_one_(force_trust_ratio_one) {}

    // Applies one update from the gradients stored on the parameters.
    // A non-finite gradient anywhere rejects the whole step: parameters,
    // moments and the step count stay untouched.
    bool step(std::vector<nn::Param<Real>>& params, double lr) {
        ensure_state(params);
        for (auto& p : params) {
            if (!p.value.has_grad()) continue;
            for (const Real g : p.value.grad())
                if (!std::isfinite(static_cast<double>(g))) {
                    ++rejected_;
                    return false;
                }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            auto& w = p.value.values();
            auto& g = p.value.grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            const double lambda = p.decay ? hyper_.weight_decay : 0.0;
            double w_norm = 0.0, r_norm = 0.0;
            std::vector<double> direction(w.size());
            for (size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * gi;
                v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * gi * gi;
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                const double r = m_hat / (std::sqrt(v_hat) + hyper_.eps) + lambda * static_cast<double>(w[i]);
                direction[i] = r;
                w_norm += static_cast<double>(w[i]) * static_cast<double>(w[i]);
                r_norm += r * r;
            }
            w_norm = std::sqrt(w_norm);
            r_norm = std::sqrt(r_norm);
            double trust = 1.0;
            if (!force_trust_ratio_one_ && w_norm > 0.0 && r_norm > 0.0) trust = w_norm / r_norm;
            for (size_t i = 0; i < w.size(); ++i)
                w[i] = static_cast<Real>(static_cast<double>(w[i]) - lr * trust * direction[i]);
        }
        return true;
    }

    int64_t step_count() const { return t_; }
    int64_t rejected_steps() const { return rejected_; }

    // checkpoint access
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

    void ensure_state(const std::vector<nn::Param<Real>>& params) {
        if (m_.size() == params.size()) return;
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(static_cast<size_t>(params[i].value.numel()), 0.0);
            v_[i].assign(static_cast<size_t>(params[i].value.numel()), 0.0);
        }
    }

private:
    LambHyper hyper_;
    bool force_trust_ratio_one_ = false;
    int64_t t_ = 0;
    int64_t rejected_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Linear warmup to max_lr, then cosine decay to min_lr at total_steps.
struct SchedulePreset {
    double max_lr = 1.25e-3;
    double min_lr = 1.25e-5;
    int64_t warmup_steps = 3125;
    int64_t total_steps = 250000;
};

inline double lr_at(int64_t step, const SchedulePreset& preset) {
    if (step < 0 || step > preset.total_steps) throw std::invalid_argument("lr_at: step outside [0, total_steps]");
    if (step <= preset.warmup_steps)
        return preset.max_lr * static_cast<double>(step) / static_cast<double>(preset.warmup_steps);
    const double progress = static_cast<double>(step - preset.warmup_steps) /
                            static_cast<double>(preset.total_steps - preset.warmup_steps);
    return preset.min_lr + 0.5 * (preset.max_lr - preset.min_lr) * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// Scales all gradients by max_norm / |g| when the global L2 norm exceeds
// max_norm; returns the pre-clip norm.
template <typename Real>
double clip_global(std::vector<nn::Param<Real>>& params, double max_norm = 10.0) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p.value.has_grad()) continue;
        for (const Real g : p.value.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (auto& p : params) {
            if (!p.value.has_grad()) continue;
            for (Real& g : p.value.grad()) g = static_cast<Real>(static_cast<double>(g) * factor);
        }
    }
    return norm;
}

// Exponential moving average of the weights, refreshed every `every` steps:
// ema <- decay * ema + (1 - decay) * params. Evaluation always runs on the
// averaged weights; UseAverage swaps them in for a scope.
template <typename Real>
class EmaWeights {
public:
    EmaWeights() = default;

    EmaWeights(const std::vector<nn::Param<Real>>& params, double decay = 0.9, int64_t every = 100)
        : decay_(decay), every_(every) {
        for (const auto& p : params) ema_.push_back(p.value.values());
    }

    bool maybe_update(const std::vector<nn::Param<Real>>& params, int64_t step) {
        if (step <= 0 || step % every_ != 0) return false;
        for (size_t i = 0; i < params.size(); ++i) {
            const auto& w = params[i].value.values();
            auto& e = ema_[i];
            for (size_t j = 0; j < w.size(); ++j)
                e[j] = static_cast<Real>(decay_ * static_cast<double>(e[j]) +
                                         (1.0 - decay_) * static_cast<double>(w[j]));
        }
        return true;
    }

    std::vector<std::vector<Real>>& values() { return ema_; }
    const std::vector<std::vector<Real>>& values() const { return ema_; }
    double decay() const { return decay_; }
    int64_t every() const { return every_; }

    class UseAverage {
    public:
        UseAverage(EmaWeights& ema, std::vector<nn::Param<Real>>& params) : ema_(ema), params_(params) {
            for (size_t i = 0; i < params.size(); ++i) {
                saved_.push_back(params[i].value.values());
                params[i].value.values() = ema_.ema_[i];
            }
        }
        ~UseAverage() {
            for (size_t i = 0; i < params_.size(); ++i) params_[i].value.values() = saved_[i];
        }

    private:
        EmaWeights& ema_;
        std::vector<nn::Param<Real>>& params_;
        std::vector<std::vector<Real>> saved_;
    };

private:
    double decay_ = 0.9;
    int64_t every_ = 100;
    std::vector<std::vector<Real>> ema_;
};

}  // namespace charlab::optim
