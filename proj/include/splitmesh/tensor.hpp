#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "splitmesh/errors.hpp"

namespace splitmesh {

// Dense row-major tensor. Rank 1..4 in practice; shape dims must all be >= 1.
template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(element_count(shape), T{});
    }

    TensorT(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != element_count(shape))
            throw ShapeMismatch("tensor data size " + std::to_string(data.size()) +
                                " does not match shape volume " +
                                std::to_string(element_count(shape)));
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        if (s.empty()) throw ShapeMismatch("tensor rank must be >= 1");
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw ShapeMismatch("tensor dims must be >= 1");
            n *= d;
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    T& at(std::size_t i) { return data[i]; }
    const T& at(std::size_t i) const { return data[i]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << ',';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
bool bitwise_equal(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

// Stack along axis 0. All inputs must agree on trailing dims.
template <typename T>
TensorT<T> concat_axis0(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
    std::vector<std::size_t> tail(parts[0].shape.begin() + 1, parts[0].shape.end());
    std::size_t rows = 0;
    for (const auto& p : parts) {
        std::vector<std::size_t> t(p.shape.begin() + 1, p.shape.end());
        if (t != tail || p.rank() != parts[0].rank())
            throw ShapeMismatch("concat: trailing dims differ (" + parts[0].shape_str() + " vs " +
                                p.shape_str() + ")");
        rows += p.shape[0];
    }
    std::vector<std::size_t> shape;
    shape.push_back(rows);
    shape.insert(shape.end(), tail.begin(), tail.end());
    TensorT<T> out(shape);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += p.data.size();
    }
    return out;
}

// Rows [begin, begin+count) along axis 0.
template <typename T>
TensorT<T> slice_axis0(const TensorT<T>& t, std::size_t begin, std::size_t count) {
    if (begin + count > t.shape[0])
        throw ShapeMismatch("slice [" + std::to_string(begin) + "," +
                            std::to_string(begin + count) + ") out of range for axis0 size " +
                            std::to_string(t.shape[0]));
    if (count == 0) throw ShapeMismatch("slice of zero rows");
    std::size_t row = t.size() / t.shape[0];
    std::vector<std::size_t> shape = t.shape;
    shape[0] = count;
    TensorT<T> out(shape);
    std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(begin * row),
              t.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * row),
              out.data.begin());
    return out;
}

// Same data, new shape; element counts must agree.
template <typename T>
TensorT<T> reshape(const TensorT<T>& t, std::vector<std::size_t> shape) {
    if (TensorT<T>::element_count(shape) != t.size())
        throw ShapeMismatch("reshape " + t.shape_str() + " to incompatible volume");
    TensorT<T> out;
    out.shape = std::move(shape);
    out.data = t.data;
    return out;
}

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out(t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
    return out;
}

}  // namespace splitmesh
