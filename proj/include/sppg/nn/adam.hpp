// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "sppg/nn/params.hpp"

namespace sppg::nn {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step_count = 0;
    ParamSet<T> m;
    ParamSet<T> v;

    AdamState() = default;
    AdamState(const ParamSet<T>& params, AdamConfig cfg)
        : config(cfg), m(params.zeros_like()), v(params.zeros_like()) {}
};

/// One bias-corrected Adam update of `params` in place.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw ShapeError("adam: parameter, gradient and moment lists differ in length");
    state.step_count += 1;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value;
        const auto& g = grads[i].value;
        auto& m = state.m[i].value;
        auto& v = state.v[i].value;
        if (g.shape != p.shape || m.shape != p.shape)
            throw ShapeError("adam: shape mismatch for parameter '" + params[i].name + "'");
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (T{1} - b1) * g[j];
            v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
            const double mhat = static_cast<double>(m[j]) / bc1;
            const double vhat = static_cast<double>(v[j]) / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) - c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon));
        }
    }
}

}  // namespace sppg::nn
