// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sppg/corpus/segments.hpp"
#include "sppg/nn/checkpoint.hpp"
#include "sppg/nn/layers.hpp"
#include "sppg/nn/params.hpp"
#include "sppg/random.hpp"

namespace sppg::model {

using nn::Tensor;

/// Architecture of the CNN -> GRU -> DNN -> softmax segment classifier.
struct ModelConfig {
    std::size_t n_conv_layers = 3;
    std::size_t conv_channels = 64;
    std::size_t kernel = 3;
    std::size_t gru_hidden = 128;
    std::size_t n_dense = 3;
    std::size_t dense_units = 512;
    double dropout_rate = 0.2;
    std::size_t n_coeffs = 13;
    std::size_t inventory_size = 48;

    void validate() const {
        if (n_conv_layers == 0 || conv_channels == 0 || kernel == 0 || gru_hidden == 0 || dense_units == 0 ||
            n_coeffs == 0 || inventory_size == 0)
            throw ValidationError("model sizes must be positive");
        if (kernel % 2 == 0) throw ValidationError("kernel must be odd for same padding");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must lie in [0, 1)");
    }

    /// Flattened channel x coefficient block fed to the GRU per time step.
    std::size_t gru_input_size() const { return conv_channels * n_coeffs; }

    std::vector<nn::LayerSpec> layer_specs() const {
        using nn::LayerKind;
        std::vector<nn::LayerSpec> out;
        for (std::size_t i = 0; i < n_conv_layers; ++i)
            out.push_back({LayerKind::Conv2D, i == 0 ? 1 : conv_channels, conv_channels, kernel, 0.0});
        out.push_back({LayerKind::GRU, gru_input_size(), gru_hidden, 0, 0.0});
        std::size_t width = gru_hidden;
        for (std::size_t i = 0; i < n_dense; ++i) {
            out.push_back({LayerKind::Dense, width, dense_units, 0, 0.0});
            out.push_back({LayerKind::Dropout, dense_units, dense_units, 0, dropout_rate});
            width = dense_units;
        }
        out.push_back({LayerKind::Dense, width, inventory_size, 0, 0.0});
        out.push_back({LayerKind::Softmax, inventory_size, inventory_size, 0, 0.0});
        return out;
    }

    std::uint64_t fingerprint() const {
        return nn::architecture_fingerprint(layer_specs()) ^ fnv1a64(str_cat("n_coeffs=", n_coeffs));
    }
};

/// Everything recorded by a forward pass that backward needs.
template <typename T>
struct ForwardCache {
    std::vector<Tensor<T>> conv_in;   // input of each conv layer
    std::vector<Tensor<T>> conv_out;  // post-ReLU output of each conv layer
    std::vector<Tensor<T>> gru_in;    // one flattened vector per time step
    nn::GruTrace<T> gru;
    std::vector<Tensor<T>> dense_in;   // input of each hidden dense layer
    std::vector<Tensor<T>> dense_act;  // post-ReLU, pre-dropout
    std::vector<Tensor<T>> masks;      // empty tensors in eval mode
    Tensor<T> out_in;
    Tensor<T> logits;
    Tensor<T> probs;
};

/// Segment classifier over scalar type T (float for training, double for
/// gradient checks).
template <typename T>
class SegmentClassifier {
public:
    SegmentClassifier() = default;

    explicit SegmentClassifier(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const std::size_t C = cfg_.conv_channels, K = cfg_.kernel, H = cfg_.gru_hidden;
        for (std::size_t i = 0; i < cfg_.n_conv_layers; ++i) {
            params_.add(str_cat("conv", i, ".weight"), {C, i == 0 ? 1 : C, K, K});
            params_.add(str_cat("conv", i, ".bias"), {C});
        }
        params_.add("gru.w_in", {3 * H, cfg_.gru_input_size()});
        params_.add("gru.w_rec", {3 * H, H});
        params_.add("gru.bias", {3 * H});
        std::size_t width = H;
        for (std::size_t i = 0; i < cfg_.n_dense; ++i) {
            params_.add(str_cat("dense", i, ".weight"), {cfg_.dense_units, width});
            params_.add(str_cat("dense", i, ".bias"), {cfg_.dense_units});
            width = cfg_.dense_units;
        }
        params_.add("out.weight", {cfg_.inventory_size, width});
        params_.add("out.bias", {cfg_.inventory_size});
    }

    const ModelConfig& config() const { return cfg_; }
    nn::ParamSet<T>& params() { return params_; }
    const nn::ParamSet<T>& params() const { return params_; }

    /// Glorot-uniform weights, zero biases.
    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        const std::size_t K2 = cfg_.kernel * cfg_.kernel;
        for (std::size_t i = 0; i < cfg_.n_conv_layers; ++i) {
            auto& w = conv_w(i);
            nn::glorot_uniform(w, w.dim(1) * K2, w.dim(0) * K2, rng);
            conv_b(i).zero();
        }
        // Fans of one gate block.
        nn::glorot_uniform(param(gru_index()), cfg_.gru_input_size(), cfg_.gru_hidden, rng);
        nn::glorot_uniform(param(gru_index() + 1), cfg_.gru_hidden, cfg_.gru_hidden, rng);
        param(gru_index() + 2).zero();
        for (std::size_t i = 0; i <= cfg_.n_dense; ++i) {
            auto& w = param(dense_index(i));
            nn::glorot_uniform(w, w.dim(1), w.dim(0), rng);
            param(dense_index(i) + 1).zero();
        }
    }

    /// Replaces parameters with loaded ones after checking names and shapes.
    void load_params(const nn::ParamSet<float>& loaded) {
        if (loaded.size() != params_.size())
            throw ValidationError(str_cat("checkpoint has ", loaded.size(), " tensors, model has ", params_.size()));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (loaded[i].name != params_[i].name || loaded[i].value.shape != params_[i].value.shape)
                throw ValidationError("checkpoint tensor '" + loaded[i].name + "' does not match model tensor '" +
                                      params_[i].name + "'");
            params_[i].value.data.assign(loaded[i].value.data.begin(), loaded[i].value.data.end());
        }
    }

    Tensor<T> input_tensor(const corpus::SegmentFeatureSequence& seg) const {
        if (static_cast<std::size_t>(seg.n_coeffs) != cfg_.n_coeffs)
            throw ShapeError(str_cat("segment '", seg.segment_id, "' has frame width ", seg.n_coeffs,
                                     ", model expects ", cfg_.n_coeffs));
        if (seg.length() == 0) throw ShapeError("segment '" + seg.segment_id + "' has no frames");
        Tensor<T> x({1, seg.length(), cfg_.n_coeffs});
        std::copy(seg.frames.begin(), seg.frames.end(), x.data.begin());
        return x;
    }

    /// Forward pass over one [1,S,n_coeffs] input. `rng` drives dropout and
    /// is required only when `training` is true.
    Tensor<T> forward(const Tensor<T>& input, bool training, Rng* rng, ForwardCache<T>* cache) const {
        ForwardCache<T> local;
        ForwardCache<T>& c = cache ? *cache : local;
        c = {};
        Tensor<T> x = input;
        for (std::size_t i = 0; i < cfg_.n_conv_layers; ++i) {
            auto y = nn::conv2d_forward(x, conv_w(i), conv_b(i));
            nn::relu_inplace(y);
            if (cache) c.conv_in.push_back(std::move(x));
            x = std::move(y);
            if (cache) c.conv_out.push_back(x);
        }
        const std::size_t S = x.dim(1), F = x.dim(2), C = x.dim(0);
        std::vector<Tensor<T>> steps(S, Tensor<T>({C * F}));
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t t = 0; t < S; ++t)
                for (std::size_t f = 0; f < F; ++f) steps[t][ch * F + f] = x[(ch * S + t) * F + f];
        auto h = nn::gru_forward<T>(steps, param(gru_index()), param(gru_index() + 1), param(gru_index() + 2),
                                    cache ? &c.gru : nullptr);
        if (cache) c.gru_in = std::move(steps);

        Tensor<T> a = std::move(h);
        for (std::size_t i = 0; i < cfg_.n_dense; ++i) {
            auto z = nn::dense_forward(a, param(dense_index(i)), param(dense_index(i) + 1));
            nn::relu_inplace(z);
            if (cache) {
                c.dense_in.push_back(std::move(a));
                c.dense_act.push_back(z);
            }
            if (training && cfg_.dropout_rate > 0.0) {
                if (!rng) throw ValidationError("training-mode forward needs a random source");
                auto mask = nn::dropout_mask<T>(z.size(), cfg_.dropout_rate, *rng);
                nn::apply_mask_inplace(z, mask);
                if (cache) c.masks.push_back(std::move(mask));
            } else if (cache) {
                c.masks.emplace_back();
            }
            a = std::move(z);
        }
        auto logits = nn::dense_forward(a, param(dense_index(cfg_.n_dense)), param(dense_index(cfg_.n_dense) + 1));
        if (cache) {
            c.out_in = std::move(a);
            c.logits = logits;
            c.probs = nn::softmax(logits);
        }
        return logits;
    }

    Tensor<T> posterior(const corpus::SegmentFeatureSequence& seg) const {
        return nn::softmax(forward(input_tensor(seg), false, nullptr, nullptr));
    }

    /// Backward pass of CE(label)/batch given a populated cache; accumulates
    /// into `grads` (same layout as params()). Throws DivergenceError naming
    /// the first layer whose gradient is non-finite.
    void backward(const ForwardCache<T>& c, std::size_t label, std::size_t batch, nn::ParamSet<T>& grads) const {
        auto g = nn::softmax_cross_entropy_grad(c.probs, label, batch);
        const std::size_t oi = dense_index(cfg_.n_dense);
        g = nn::dense_backward(c.out_in, param(oi), g, grads[oi].value, grads[oi + 1].value);
        check_finite(g, "out");
        for (std::size_t i = cfg_.n_dense; i-- > 0;) {
            if (c.masks[i].size() != 0) nn::apply_mask_inplace(g, c.masks[i]);
            nn::relu_backward_inplace(c.dense_act[i], g);
            const std::size_t di = dense_index(i);
            g = nn::dense_backward(c.dense_in[i], param(di), g, grads[di].value, grads[di + 1].value);
            check_finite(g, str_cat("dense", i));
        }
        const std::size_t gi = gru_index();
        auto gsteps = nn::gru_backward<T>(c.gru_in, param(gi), param(gi + 1), c.gru, g, grads[gi].value,
                                          grads[gi + 1].value, grads[gi + 2].value);
        for (const auto& s : gsteps) check_finite(s, "gru");

        const auto& last = c.conv_out.back();
        const std::size_t C = last.dim(0), S = last.dim(1), F = last.dim(2);
        Tensor<T> gx(last.shape);
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t t = 0; t < S; ++t)
                for (std::size_t f = 0; f < F; ++f) gx[(ch * S + t) * F + f] = gsteps[t][ch * F + f];
        for (std::size_t i = cfg_.n_conv_layers; i-- > 0;) {
            nn::relu_backward_inplace(c.conv_out[i], gx);
            gx = nn::conv2d_backward(c.conv_in[i], conv_w(i), gx, grads[2 * i].value, grads[2 * i + 1].value);
            check_finite(gx, str_cat("conv", i));
        }
    }

    /// Mean-CE loss contribution (loss/batch) of one example, with gradients.
    T loss_and_grad(const corpus::SegmentFeatureSequence& seg, std::size_t label, std::size_t batch, bool training,
                    Rng* rng, nn::ParamSet<T>& grads) const {
        ForwardCache<T> c;
        forward(input_tensor(seg), training, rng, &c);
        const T loss = nn::cross_entropy_from_logits(c.logits, label);
        if (!std::isfinite(loss)) throw DivergenceError("non-finite loss at segment '" + seg.segment_id + "'");
        backward(c, label, batch, grads);
        return loss / static_cast<T>(batch);
    }

    std::size_t gru_index() const { return 2 * cfg_.n_conv_layers; }
    /// i == n_dense addresses the output projection.
    std::size_t dense_index(std::size_t i) const { return gru_index() + 3 + 2 * i; }

private:
    const Tensor<T>& param(std::size_t i) const { return params_[i].value; }
    Tensor<T>& param(std::size_t i) { return params_[i].value; }
    const Tensor<T>& conv_w(std::size_t i) const { return params_[2 * i].value; }
    const Tensor<T>& conv_b(std::size_t i) const { return params_[2 * i + 1].value; }
    Tensor<T>& conv_w(std::size_t i) { return params_[2 * i].value; }
    Tensor<T>& conv_b(std::size_t i) { return params_[2 * i + 1].value; }

    static void check_finite(const Tensor<T>& g, const std::string& layer) {
        if (!g.all_finite()) throw DivergenceError("non-finite gradient in layer " + layer);
    }

    ModelConfig cfg_;
    nn::ParamSet<T> params_;
};

}  // namespace sppg::model
