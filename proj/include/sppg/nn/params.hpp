// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sppg/nn/tensor.hpp"

namespace sppg::nn {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> value;

    bool operator==(const NamedTensor&) const = default;
};

/// Ordered list of named parameter tensors. Order is part of the model's
/// identity: gradients, optimizer moments and checkpoints follow it.
template <typename T>
class ParamSet {
public:
    Tensor<T>& add(std::string name, Shape shape) {
        for (const auto& p : items_)
            if (p.name == name) throw ValidationError("duplicate parameter name '" + name + "'");
        items_.push_back({std::move(name), Tensor<T>(std::move(shape))});
        return items_.back().value;
    }

    std::size_t size() const { return items_.size(); }
    NamedTensor<T>& operator[](std::size_t i) { return items_[i]; }
    const NamedTensor<T>& operator[](std::size_t i) const { return items_[i]; }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p.value.size();
        return n;
    }

    /// Same names and shapes, zero-filled.
    ParamSet zeros_like() const {
        ParamSet out;
        for (const auto& p : items_) out.items_.push_back({p.name, Tensor<T>(p.value.shape)});
        return out;
    }

    void zero() {
        for (auto& p : items_) p.value.zero();
    }

    void add_scaled(const ParamSet& other, T scale) {
        for (std::size_t i = 0; i < items_.size(); ++i) {
            auto& d = items_[i].value.data;
            const auto& s = other.items_[i].value.data;
            for (std::size_t j = 0; j < d.size(); ++j) d[j] += scale * s[j];
        }
    }

    template <typename U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (const auto& p : items_) out.add(p.name, p.value.shape).data.assign(p.value.data.begin(), p.value.data.end());
        return out;
    }

    bool operator==(const ParamSet&) const = default;

private:
    std::vector<NamedTensor<T>> items_;
};

}  // namespace sppg::nn
