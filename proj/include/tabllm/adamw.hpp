#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tabllm/autograd.hpp"
#include "tabllm/error.hpp"
#include "tabllm/tensor.hpp"

namespace tabllm {

struct AdamWConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // 0 keeps the rate constant; otherwise the rate decays linearly to zero
    // over this many steps.
    size_t linear_decay_steps = 0;

    void validate() const {
        if (learning_rate <= 0) fail(errc::bad_config, "learning_rate must be positive");
        if (weight_decay < 0) fail(errc::bad_config, "weight_decay must be non-negative");
        if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
            fail(errc::bad_config, "betas must be in (0, 1)");
        if (epsilon <= 0) fail(errc::bad_config, "epsilon must be positive");
    }
};

// AdamW with decoupled weight decay: the decay term is subtracted from the
// parameter directly, never folded into the moment estimates. Decay is
// skipped for parameters flagged weight_decay = false (biases, layer norms).
template <typename Real>
class AdamW {
public:
    AdamW(std::vector<Parameter<Real>*> params, AdamWConfig config)
        : params_(std::move(params)), config_(config) {
        config_.validate();
        for (auto* p : params_) {
            slots_.push_back(p->trainable ? moments_.size() : kNoSlot);
            if (p->trainable) {
                moments_.push_back({Tensor<Real>(p->value.shape), Tensor<Real>(p->value.shape)});
            }
        }
    }

    size_t step_count() const { return step_; }

    double current_learning_rate() const {
        if (config_.linear_decay_steps == 0) return config_.learning_rate;
        double remaining = 1.0 - static_cast<double>(step_) / config_.linear_decay_steps;
        return config_.learning_rate * std::max(0.0, remaining);
    }

    void step() {
        const double lr = current_learning_rate();
        ++step_;
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Parameter<Real>* p = params_[i];
            if (!p->trainable) continue;
            if (!p->value.same_shape(p->grad))
                fail(errc::missing_gradient, "gradient shape mismatch for '" + p->name + "'");
            auto& [m, v] = moments_[slots_[i]];
            const double decay = p->weight_decay ? config_.weight_decay : 0.0;
            for (size_t j = 0; j < p->value.size(); ++j) {
                const double g = static_cast<double>(p->grad.v[j]);
                const double mj = config_.beta1 * static_cast<double>(m.v[j]) +
                                  (1.0 - config_.beta1) * g;
                const double vj = config_.beta2 * static_cast<double>(v.v[j]) +
                                  (1.0 - config_.beta2) * g * g;
                m.v[j] = static_cast<Real>(mj);
                v.v[j] = static_cast<Real>(vj);
                const double update = (mj / bc1) / (std::sqrt(vj / bc2) + config_.epsilon);
                double theta = static_cast<double>(p->value.v[j]);
                theta -= lr * update;
                theta -= lr * decay * theta;
                p->value.v[j] = static_cast<Real>(theta);
            }
        }
    }

    void zero_grads() {
        for (auto* p : params_) p->zero_grad();
    }

private:
    static constexpr size_t kNoSlot = static_cast<size_t>(-1);
    std::vector<Parameter<Real>*> params_;
    AdamWConfig config_;
    std::vector<size_t> slots_;
    std::vector<std::pair<Tensor<Real>, Tensor<Real>>> moments_;
    size_t step_ = 0;
};

}  // namespace tabllm
