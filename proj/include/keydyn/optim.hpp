#pragma once

#include <vector>

#include "keydyn/tensor.hpp"

namespace keydyn {

struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Milestone step decay: lr is multiplied by `gamma` at each milestone epoch.
class StepScheduler {
public:
    StepScheduler(double base_lr, std::vector<int> milestones, double gamma = 0.1)
        : base_lr_(base_lr), milestones_(std::move(milestones)), gamma_(gamma) {
        for (std::size_t i = 1; i < milestones_.size(); ++i)
            if (milestones_[i] <= milestones_[i - 1])
                throw std::invalid_argument("milestones must be strictly increasing");
    }

    double lr_at(int epoch) const {
        double lr = base_lr_;
        for (int m : milestones_)
            if (epoch >= m) lr *= gamma_;
        return lr;
    }

private:
    double base_lr_;
    std::vector<int> milestones_;
    double gamma_;
};

/// Adaptive-moment optimizer with decoupled weight decay.
template <class T>
class AdamW {
public:
    explicit AdamW(std::vector<ParamRef<T>> params, double weight_decay = 0.0,
                   double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)),
          weight_decay_(weight_decay),
          beta1_(beta1),
          beta2_(beta2),
          eps_(eps) {
        for (const auto& p : params_) {
            m_.emplace_back(p.value->size(), 0.0);
            v_.emplace_back(p.value->size(), 0.0);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.grad->zero();
    }

    /// Rejects non-finite gradients before touching any parameter.
    void step(double lr) {
        for (const auto& p : params_)
            if (!p.grad->all_finite())
                throw DivergedError("non-finite gradient in " + p.name);
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& value = *params_[i].value;
            const auto& grad = *params_[i].grad;
            for (std::size_t j = 0; j < value.size(); ++j) {
                const double g = static_cast<double>(grad.data[j]);
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                const double w = static_cast<double>(value.data[j]);
                value.data[j] = static_cast<T>(
                    w - lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w));
            }
        }
    }

    const std::vector<ParamRef<T>>& params() const { return params_; }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<std::vector<double>> m_, v_;
    double weight_decay_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace keydyn
