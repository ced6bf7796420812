#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitmesh/errors.hpp"
#include "splitmesh/model_spec.hpp"
#include "splitmesh/tensor.hpp"

namespace splitmesh {

inline constexpr double kBceEps = 1e-7;

template <typename T>
struct LossResult {
    double value = 0.0;
    TensorT<T> grad;  // d(loss)/d(pred), mean-reduced over all elements
};

// BCE: -mean(y ln p + (1-y) ln(1-p)) with p clamped to [eps, 1-eps]; the
// gradient is evaluated at the clamped value (pass-through). MSE: mean((p-y)^2).
// pred/target must share shape; per-sample outputs wider than 1 are averaged
// elementwise. The scalar value is accumulated in double.
template <typename T>
LossResult<T> loss_forward(LossKind kind, const TensorT<T>& pred, const TensorT<T>& target) {
    if (pred.shape != target.shape)
        throw ShapeMismatch("loss: pred shape " + pred.shape_str() + " != target shape " +
                            target.shape_str());
    const std::size_t n = pred.size();
    const T invn = T(1) / static_cast<T>(n);
    LossResult<T> r;
    r.grad = TensorT<T>(pred.shape);
    double acc = 0.0;
    if (kind == LossKind::BCE) {
        const T lo = static_cast<T>(kBceEps);
        const T hi = T(1) - static_cast<T>(kBceEps);
        for (std::size_t i = 0; i < n; ++i) {
            T y = target.data[i];
            if (!(y == T(0) || y == T(1)))
                throw InvalidTarget("bce target must be 0 or 1, got " + std::to_string(static_cast<double>(y)));
            T p = pred.data[i];
            if (p < lo) p = lo;
            if (p > hi) p = hi;
            double pd = static_cast<double>(p);
            acc += y == T(1) ? -std::log(pd) : -std::log(1.0 - pd);
            r.grad.data[i] = ((p - y) / (p * (T(1) - p))) * invn;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            T d = pred.data[i] - target.data[i];
            acc += static_cast<double>(d) * static_cast<double>(d);
            r.grad.data[i] = T(2) * d * invn;
        }
    }
    r.value = acc / static_cast<double>(n);
    return r;
}

// sqrt(mean((ln(1+p) - ln(1+y))^2)). Strict about the log domain: any value
// <= -1 raises DomainError.
inline double rmsle(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw ShapeMismatch("rmsle: length " + std::to_string(pred.size()) + " vs " +
                            std::to_string(target.size()));
    if (pred.empty()) throw ShapeMismatch("rmsle of empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(pred[i] > -1.0) || !(target[i] > -1.0))
            throw DomainError("rmsle requires all values > -1");
        double d = std::log1p(pred[i]) - std::log1p(target[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Evaluation convenience: clamps both sides at 0 before rmsle so early-training
// negative predictions do not abort a run.
inline double rmsle_nonneg(std::span<const double> pred, std::span<const double> target) {
    std::vector<double> p(pred.begin(), pred.end()), t(target.begin(), target.end());
    for (auto& v : p)
        if (v < 0.0) v = 0.0;
    for (auto& v : t)
        if (v < 0.0) v = 0.0;
    return rmsle(p, t);
}

// Fraction of rows where thresholded prediction (p >= 0.5) matches the 0/1 target.
template <typename T>
double binary_accuracy(const TensorT<T>& pred, const TensorT<T>& target) {
    if (pred.shape != target.shape)
        throw ShapeMismatch("accuracy: pred shape " + pred.shape_str() + " != target shape " +
                            target.shape_str());
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool yes = pred.data[i] >= T(0.5);
        bool pos = target.data[i] == T(1);
        if (yes == pos) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace splitmesh
