// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "sppg/common.hpp"

namespace sppg::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

/// Dense row-major tensor.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_size(shape) != data.size())
            throw ShapeError(str_cat("tensor data size ", data.size(), " != product of shape ", shape_str(shape)));
    }

    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), T{0}); }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what) {
    if (t.shape != expected)
        throw ShapeError(str_cat(what, ": expected shape ", shape_str(expected), ", got ", shape_str(t.shape)));
}

}  // namespace sppg::nn
