#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "splitmesh/errors.hpp"
#include "splitmesh/model_spec.hpp"
#include "splitmesh/rng.hpp"
#include "splitmesh/tensor.hpp"

namespace splitmesh {

// Glorot-uniform parameters for a layer spec: weights drawn row-major from
// [-L, L], L = sqrt(6/(fan_in+fan_out)), then a zero bias that consumes no
// random draws. Layers without parameters yield an empty list.
template <typename T>
std::vector<TensorT<T>> glorot_init(const LayerSpec& spec, std::size_t fan_in, std::size_t fan_out,
                                    SplitMix64& rng) {
    if (fan_in < 1 || fan_out < 1) throw ShapeMismatch("glorot_init: fan_in and fan_out must be >= 1");
    const double limit = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
    auto draw_into = [&](TensorT<T>& w) {
        for (auto& v : w.data) v = static_cast<T>((2.0 * rng.next_double() - 1.0) * limit);
    };
    std::vector<TensorT<T>> out;
    if (const auto* c = std::get_if<Conv2DSpec>(&spec)) {
        std::size_t in_ch = fan_in / (c->kh * c->kw);
        if (in_ch * c->kh * c->kw != fan_in)
            throw ShapeMismatch("glorot_init: conv fan_in not divisible by kernel area");
        TensorT<T> w({c->out_channels, in_ch, c->kh, c->kw});
        draw_into(w);
        out.push_back(std::move(w));
        out.emplace_back(std::vector<std::size_t>{c->out_channels});  // zero bias
    } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
        TensorT<T> w({d->out_features, fan_in});
        draw_into(w);
        out.push_back(std::move(w));
        out.emplace_back(std::vector<std::size_t>{d->out_features});
    }
    return out;
}

// A layer owns its parameters, gradients and the forward cache needed by the
// matching backward call. Backward accumulates into grads (+=); callers zero
// grads via sgd_step or zero_grads.
template <typename T>
class LayerT {
  public:
    virtual ~LayerT() = default;
    virtual TensorT<T> forward(const TensorT<T>& x) = 0;
    virtual TensorT<T> backward(const TensorT<T>& grad_out) = 0;
    virtual std::vector<TensorT<T>*> params() { return {}; }
    virtual std::vector<TensorT<T>*> grads() { return {}; }
    virtual const char* kind() const = 0;
};

template <typename T>
class Conv2DLayerT final : public LayerT<T> {
  public:
    Conv2DLayerT(const Conv2DSpec& spec, std::size_t in_channels, SplitMix64& rng) : spec_(spec) {
        std::size_t fan_in = in_channels * spec.kh * spec.kw;
        std::size_t fan_out = spec.out_channels * spec.kh * spec.kw;
        auto p = glorot_init<T>(LayerSpec{spec}, fan_in, fan_out, rng);
        w_ = std::move(p[0]);
        b_ = std::move(p[1]);
        gw_ = TensorT<T>(w_.shape);
        gb_ = TensorT<T>(b_.shape);
    }

    TensorT<T> forward(const TensorT<T>& x) override {
        check_input(x);
        x_ = x;
        const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
        const std::size_t K = spec_.out_channels, kh = spec_.kh, kw = spec_.kw;
        const std::size_t s = spec_.stride, p = spec_.pad;
        const std::size_t Ho = out_dim(H), Wo = out_dim_w(W);
        TensorT<T> y({N, K, Ho, Wo});
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        T acc = b_.data[k];
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t i = 0; i < kh; ++i) {
                                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + i) -
                                                    static_cast<std::ptrdiff_t>(p);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                for (std::size_t j = 0; j < kw; ++j) {
                                    std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + j) -
                                                        static_cast<std::ptrdiff_t>(p);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                    acc += x.data[((n * C + c) * H + static_cast<std::size_t>(iy)) * W +
                                                  static_cast<std::size_t>(ix)] *
                                           w_.data[((k * C + c) * kh + i) * kw + j];
                                }
                            }
                        y.data[((n * K + k) * Ho + oy) * Wo + ox] = acc;
                    }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& g) override {
        const std::size_t N = x_.shape[0], C = x_.shape[1], H = x_.shape[2], W = x_.shape[3];
        const std::size_t K = spec_.out_channels, kh = spec_.kh, kw = spec_.kw;
        const std::size_t s = spec_.stride, p = spec_.pad;
        const std::size_t Ho = out_dim(H), Wo = out_dim_w(W);
        if (g.shape != std::vector<std::size_t>{N, K, Ho, Wo})
            throw ShapeMismatch("conv2d backward: grad shape " + g.shape_str() + " does not match output");
        TensorT<T> gx(x_.shape);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        T gv = g.data[((n * K + k) * Ho + oy) * Wo + ox];
                        gb_.data[k] += gv;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t i = 0; i < kh; ++i) {
                                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + i) -
                                                    static_cast<std::ptrdiff_t>(p);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                for (std::size_t j = 0; j < kw; ++j) {
                                    std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + j) -
                                                        static_cast<std::ptrdiff_t>(p);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                    std::size_t xi = ((n * C + c) * H + static_cast<std::size_t>(iy)) * W +
                                                     static_cast<std::size_t>(ix);
                                    gw_.data[((k * C + c) * kh + i) * kw + j] += gv * x_.data[xi];
                                    gx.data[xi] += gv * w_.data[((k * C + c) * kh + i) * kw + j];
                                }
                            }
                    }
        return gx;
    }

    std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
    std::vector<TensorT<T>*> grads() override { return {&gw_, &gb_}; }
    const char* kind() const override { return "conv2d"; }

  private:
    void check_input(const TensorT<T>& x) const {
        if (x.rank() != 4)
            throw ShapeMismatch("conv2d expects [N,C,H,W], got " + x.shape_str());
        if (x.shape[1] != w_.shape[1])
            throw ShapeMismatch("conv2d input channels " + std::to_string(x.shape[1]) +
                                " != weight in_channels " + std::to_string(w_.shape[1]));
        if (x.shape[2] + 2 * spec_.pad < spec_.kh || x.shape[3] + 2 * spec_.pad < spec_.kw)
            throw ShapeMismatch("conv2d kernel does not fit input " + x.shape_str());
    }
    std::size_t out_dim(std::size_t H) const { return (H + 2 * spec_.pad - spec_.kh) / spec_.stride + 1; }
    std::size_t out_dim_w(std::size_t W) const { return (W + 2 * spec_.pad - spec_.kw) / spec_.stride + 1; }

    Conv2DSpec spec_;
    TensorT<T> w_, b_, gw_, gb_;
    TensorT<T> x_;
};

template <typename T>
class MaxPool2DLayerT final : public LayerT<T> {
  public:
    explicit MaxPool2DLayerT(const MaxPool2DSpec& spec) : spec_(spec) {}

    TensorT<T> forward(const TensorT<T>& x) override {
        if (x.rank() != 4) throw ShapeMismatch("maxpool2d expects [N,C,H,W], got " + x.shape_str());
        const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
        if (H < spec_.ph || W < spec_.pw)
            throw ShapeMismatch("maxpool2d window does not fit input " + x.shape_str());
        const std::size_t Ho = (H - spec_.ph) / spec_.stride + 1;
        const std::size_t Wo = (W - spec_.pw) / spec_.stride + 1;
        in_shape_ = x.shape;
        TensorT<T> y({N, C, Ho, Wo});
        argmax_.assign(y.size(), 0);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        // ties keep the first maximal element in row-major scan order
                        std::size_t best = ((n * C + c) * H + oy * spec_.stride) * W + ox * spec_.stride;
                        T bv = x.data[best];
                        for (std::size_t i = 0; i < spec_.ph; ++i)
                            for (std::size_t j = 0; j < spec_.pw; ++j) {
                                std::size_t xi = ((n * C + c) * H + oy * spec_.stride + i) * W +
                                                 ox * spec_.stride + j;
                                if (x.data[xi] > bv) {
                                    bv = x.data[xi];
                                    best = xi;
                                }
                            }
                        std::size_t yi = ((n * C + c) * Ho + oy) * Wo + ox;
                        y.data[yi] = bv;
                        argmax_[yi] = best;
                    }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& g) override {
        if (g.size() != argmax_.size())
            throw ShapeMismatch("maxpool2d backward: grad size does not match forward output");
        TensorT<T> gx(in_shape_);
        for (std::size_t i = 0; i < g.size(); ++i) gx.data[argmax_[i]] += g.data[i];
        return gx;
    }

    const char* kind() const override { return "maxpool2d"; }

  private:
    MaxPool2DSpec spec_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_;
};

template <typename T>
class DenseLayerT final : public LayerT<T> {
  public:
    DenseLayerT(const DenseSpec& spec, std::size_t in_features, SplitMix64& rng) {
        auto p = glorot_init<T>(LayerSpec{spec}, in_features, spec.out_features, rng);
        w_ = std::move(p[0]);
        b_ = std::move(p[1]);
        gw_ = TensorT<T>(w_.shape);
        gb_ = TensorT<T>(b_.shape);
    }

    TensorT<T> forward(const TensorT<T>& x) override {
        if (x.rank() != 2)
            throw ShapeMismatch("dense expects [N,features] (flatten first), got " + x.shape_str());
        if (x.shape[1] != w_.shape[1])
            throw ShapeMismatch("dense input width " + std::to_string(x.shape[1]) +
                                " != weight in_features " + std::to_string(w_.shape[1]));
        x_ = x;
        const std::size_t N = x.shape[0], F = x.shape[1], O = w_.shape[0];
        TensorT<T> y({N, O});
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < O; ++o) {
                T acc = b_.data[o];
                for (std::size_t f = 0; f < F; ++f) acc += x.data[n * F + f] * w_.data[o * F + f];
                y.data[n * O + o] = acc;
            }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& g) override {
        const std::size_t N = x_.shape[0], F = x_.shape[1], O = w_.shape[0];
        if (g.shape != std::vector<std::size_t>{N, O})
            throw ShapeMismatch("dense backward: grad shape " + g.shape_str() + " does not match output");
        TensorT<T> gx(x_.shape);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < O; ++o) {
                T gv = g.data[n * O + o];
                gb_.data[o] += gv;
                for (std::size_t f = 0; f < F; ++f) {
                    gw_.data[o * F + f] += gv * x_.data[n * F + f];
                    gx.data[n * F + f] += gv * w_.data[o * F + f];
                }
            }
        return gx;
    }

    std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
    std::vector<TensorT<T>*> grads() override { return {&gw_, &gb_}; }
    const char* kind() const override { return "dense"; }

  private:
    TensorT<T> w_, b_, gw_, gb_;
    TensorT<T> x_;
};

template <typename T>
class FlattenLayerT final : public LayerT<T> {
  public:
    TensorT<T> forward(const TensorT<T>& x) override {
        in_shape_ = x.shape;
        std::size_t per = x.size() / x.shape[0];
        TensorT<T> y({x.shape[0], per});
        y.data = x.data;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& g) override {
        if (g.size() != TensorT<T>::element_count(in_shape_))
            throw ShapeMismatch("flatten backward: grad size does not match input");
        TensorT<T> gx(in_shape_);
        gx.data = g.data;
        return gx;
    }

    const char* kind() const override { return "flatten"; }

  private:
    std::vector<std::size_t> in_shape_;
};

template <typename T>
class ActivationLayerT final : public LayerT<T> {
  public:
    explicit ActivationLayerT(const ActivationSpec& spec)
        : spec_(spec), alpha_(static_cast<T>(spec.alpha)) {}

    TensorT<T> forward(const TensorT<T>& x) override {
        TensorT<T> y(x.shape);
        if (spec_.kind == ActKind::Sigmoid) {
            for (std::size_t i = 0; i < x.size(); ++i)
                y.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
            out_ = y;  // sigmoid backward uses the output
        } else {
            for (std::size_t i = 0; i < x.size(); ++i)
                y.data[i] = x.data[i] > T(0) ? x.data[i] : alpha_ * x.data[i];
            out_ = x;  // leaky relu backward uses the input sign
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& g) override {
        if (g.shape != out_.shape)
            throw ShapeMismatch("activation backward: grad shape " + g.shape_str() +
                                " does not match forward");
        TensorT<T> gx(g.shape);
        if (spec_.kind == ActKind::Sigmoid) {
            for (std::size_t i = 0; i < g.size(); ++i)
                gx.data[i] = g.data[i] * out_.data[i] * (T(1) - out_.data[i]);
        } else {
            for (std::size_t i = 0; i < g.size(); ++i)
                gx.data[i] = out_.data[i] > T(0) ? g.data[i] : alpha_ * g.data[i];
        }
        return gx;
    }

    const char* kind() const override { return "activation"; }

  private:
    ActivationSpec spec_;
    T alpha_;
    TensorT<T> out_;
};

}  // namespace splitmesh
