#pragma once

#include <memory>
#include <vector>

#include "splitmesh/layers.hpp"
#include "splitmesh/model_spec.hpp"
#include "splitmesh/rng.hpp"
#include "splitmesh/tensor.hpp"

namespace splitmesh {

// Executable stack of layers built from a ModelSpec. Parameter draws consume
// the rng stream in layer order, each layer weights row-major then bias, so a
// given (spec, seed) pair always yields identical parameters.
template <typename T>
class ModelT {
  public:
    ModelT() = default;

    static ModelT build(const ModelSpec& spec, SplitMix64& rng) {
        auto trace = validate_model(spec);
        ModelT m;
        std::vector<std::size_t> cur = spec.input_shape;
        for (std::size_t li = 0; li < spec.layers.size(); ++li) {
            const LayerSpec& ls = spec.layers[li];
            if (const auto* c = std::get_if<Conv2DSpec>(&ls)) {
                m.layers_.push_back(std::make_unique<Conv2DLayerT<T>>(*c, cur[0], rng));
            } else if (const auto* p = std::get_if<MaxPool2DSpec>(&ls)) {
                m.layers_.push_back(std::make_unique<MaxPool2DLayerT<T>>(*p));
            } else if (const auto* d = std::get_if<DenseSpec>(&ls)) {
                m.layers_.push_back(std::make_unique<DenseLayerT<T>>(*d, cur[0], rng));
            } else if (std::holds_alternative<FlattenSpec>(ls)) {
                m.layers_.push_back(std::make_unique<FlattenLayerT<T>>());
            } else {
                m.layers_.push_back(
                    std::make_unique<ActivationLayerT<T>>(std::get<ActivationSpec>(ls)));
            }
            cur = trace[li];
        }
        return m;
    }

    TensorT<T> forward(const TensorT<T>& batch) {
        TensorT<T> x = batch;
        for (auto& l : layers_) x = l->forward(x);
        return x;
    }

    // Propagates grad_out back through the stack, accumulating parameter grads.
    TensorT<T> backward(const TensorT<T>& grad_out) {
        TensorT<T> g = grad_out;
        for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
        return g;
    }

    std::vector<TensorT<T>*> params() {
        std::vector<TensorT<T>*> out;
        for (auto& l : layers_)
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<TensorT<T>*> grads() {
        std::vector<TensorT<T>*> out;
        for (auto& l : layers_)
            for (auto* g : l->grads()) out.push_back(g);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->size();
        return n;
    }

    void zero_grads() {
        for (auto* g : grads())
            for (auto& v : g->data) v = T(0);
    }

    std::size_t layer_count() const { return layers_.size(); }
    LayerT<T>& layer(std::size_t i) { return *layers_[i]; }

  private:
    std::vector<std::unique_ptr<LayerT<T>>> layers_;
};

// params <- params - lr * grads, then grads zeroed.
template <typename T>
void sgd_step(ModelT<T>& model, T lr) {
    auto ps = model.params();
    auto gs = model.grads();
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t j = 0; j < ps[i]->data.size(); ++j)
            ps[i]->data[j] -= lr * gs[i]->data[j];
    model.zero_grads();
}

template <typename T>
std::vector<TensorT<T>> snapshot_params(ModelT<T>& model) {
    std::vector<TensorT<T>> out;
    for (auto* p : model.params()) out.push_back(*p);
    return out;
}

template <typename T>
void load_params(ModelT<T>& model, const std::vector<TensorT<T>>& values) {
    auto ps = model.params();
    if (ps.size() != values.size()) throw ShapeMismatch("load_params: parameter list size mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (ps[i]->shape != values[i].shape)
            throw ShapeMismatch("load_params: parameter shape mismatch at index " + std::to_string(i));
        *ps[i] = values[i];
    }
}

}  // namespace splitmesh
