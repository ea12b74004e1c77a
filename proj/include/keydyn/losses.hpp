#pragma once

#include "keydyn/tensor.hpp"

namespace keydyn {

namespace detail {
inline double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|)); never materializes sigmoid then log.
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

/// Binary cross-entropy on logits with a positive-class weight, log-sum-exp
/// stabilized. logits (B,1) or (B); targets in [0,1] (soft targets allowed).
/// Fills dlogits (same shape) with the mean-reduced gradient.
template <class T>
double bce_logits_loss(const Tensor<T>& logits, const std::vector<double>& targets,
                       double pos_weight, Tensor<T>* dlogits = nullptr) {
    const std::size_t B = logits.size();
    if (targets.size() != B)
        throw std::invalid_argument("bce_logits_loss: target count mismatch");
    if (dlogits) *dlogits = Tensor<T>(logits.shape);
    double total = 0;
    for (std::size_t i = 0; i < B; ++i) {
        const double z = static_cast<double>(logits.data[i]);
        const double y = targets[i];
        total += pos_weight * y * detail::softplus(-z) +
                 (1.0 - y) * detail::softplus(z);
        if (dlogits)
            dlogits->data[i] = static_cast<T>(
                (-pos_weight * y * detail::sigmoid(-z) +
                 (1.0 - y) * detail::sigmoid(z)) /
                static_cast<double>(B));
    }
    return total / static_cast<double>(B);
}

/// Multiclass cross-entropy on logits (B,K) against class indices,
/// log-sum-exp stabilized; mean reduction.
template <class T>
double cross_entropy_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                          Tensor<T>* dlogits = nullptr) {
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(targets.size()) != B)
        throw std::invalid_argument("cross_entropy_loss: target count mismatch");
    if (dlogits) *dlogits = Tensor<T>(logits.shape);
    double total = 0;
    for (int i = 0; i < B; ++i) {
        const int y = targets[i];
        if (y < 0 || y >= K)
            throw std::invalid_argument("cross_entropy_loss: target out of range");
        double mx = static_cast<double>(logits(i, 0));
        for (int k = 1; k < K; ++k)
            mx = std::max(mx, static_cast<double>(logits(i, k)));
        double denom = 0;
        for (int k = 0; k < K; ++k)
            denom += std::exp(static_cast<double>(logits(i, k)) - mx);
        const double lse = mx + std::log(denom);
        total += lse - static_cast<double>(logits(i, y));
        if (dlogits) {
            for (int k = 0; k < K; ++k) {
                const double p =
                    std::exp(static_cast<double>(logits(i, k)) - lse);
                (*dlogits)(i, k) = static_cast<T>(
                    (p - (k == y ? 1.0 : 0.0)) / static_cast<double>(B));
            }
        }
    }
    return total / static_cast<double>(B);
}

/// Cross-entropy of the student distribution against a teacher distribution
/// (soft labels, temperature 1); mean reduction.
template <class T>
double soft_cross_entropy_loss(const Tensor<T>& logits,
                               const std::vector<std::vector<double>>& teacher,
                               Tensor<T>* dlogits = nullptr) {
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(teacher.size()) != B)
        throw std::invalid_argument("soft_cross_entropy_loss: batch mismatch");
    if (dlogits) *dlogits = Tensor<T>(logits.shape);
    double total = 0;
    for (int i = 0; i < B; ++i) {
        double mx = static_cast<double>(logits(i, 0));
        for (int k = 1; k < K; ++k)
            mx = std::max(mx, static_cast<double>(logits(i, k)));
        double denom = 0;
        for (int k = 0; k < K; ++k)
            denom += std::exp(static_cast<double>(logits(i, k)) - mx);
        const double lse = mx + std::log(denom);
        for (int k = 0; k < K; ++k) {
            const double logp = static_cast<double>(logits(i, k)) - lse;
            total += -teacher[i][k] * logp;
            if (dlogits)
                (*dlogits)(i, k) = static_cast<T>(
                    (std::exp(logp) - teacher[i][k]) / static_cast<double>(B));
        }
    }
    return total / static_cast<double>(B);
}

}  // namespace keydyn
