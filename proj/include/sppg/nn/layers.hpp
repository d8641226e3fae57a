// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sppg/nn/tensor.hpp"
#include "sppg/random.hpp"

namespace sppg::nn {

// Layer kernels with explicit backward passes. Every backward accumulates
// (+=) into parameter gradients so per-example gradients can be summed
// without extra buffers; input gradients are overwritten.

enum class LayerKind { Conv2D, GRU, Dense, Dropout, Softmax };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::GRU: return "gru";
        case LayerKind::Dense: return "dense";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t in = 0;       // input channels / features
    std::size_t out = 0;      // output channels / units / hidden size
    std::size_t kernel = 0;   // conv only
    double rate = 0.0;        // dropout only

    void validate() const {
        switch (kind) {
            case LayerKind::Conv2D:
                if (in == 0 || out == 0 || kernel == 0) throw ValidationError("conv2d sizes must be positive");
                if (kernel % 2 == 0) throw ValidationError("conv2d same-padding needs an odd kernel");
                break;
            case LayerKind::GRU:
            case LayerKind::Dense:
                if (in == 0 || out == 0) throw ValidationError(str_cat(to_string(kind), " sizes must be positive"));
                break;
            case LayerKind::Dropout:
                if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout rate must lie in [0, 1)");
                break;
            case LayerKind::Softmax:
                if (out == 0) throw ValidationError("softmax width must be positive");
                break;
        }
    }

    std::string describe() const {
        return str_cat(to_string(kind), "(in=", in, ",out=", out, ",k=", kernel, ",rate=", rate, ")");
    }
};

/// Glorot-uniform fill: U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------- conv2d

/// Same-padded cross-correlation. input [C_in,H,W], weight [C_out,C_in,K,K],
/// bias [C_out] -> [C_out,H,W].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (input.shape.size() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_str(input.shape));
    if (weight.shape.size() != 4 || weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0)
        throw ShapeError("conv2d: weight must be [C_out,C_in,K,K] with odd K, got " + shape_str(weight.shape));
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != cin)
        throw ShapeError(str_cat("conv2d: weight expects ", weight.dim(1), " input channels, input has ", cin));
    require_shape(bias, {cout}, "conv2d bias");
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);

    Tensor<T> out({cout, h, w});
    for (std::size_t co = 0; co < cout; ++co) {
        T* o = out.ptr() + co * h * w;
        std::fill(o, o + h * w, bias[co]);
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* in = input.ptr() + ci * h * w;
            const T* wk = weight.ptr() + (co * cin + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const T wv = wk[ky * k + kx];
                    const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t x1 = dx > 0 ? w - std::min(w, static_cast<std::size_t>(dx)) : w;
                    for (std::size_t y = 0; y < h; ++y) {
                        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* irow = in + static_cast<std::size_t>(sy) * w;
                        T* orow = o + y * w;
                        for (std::size_t x = x0; x < x1; ++x)
                            orow[x] += wv * irow[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx)];
                    }
                }
            }
        }
    }
    return out;
}

/// Returns dL/dinput; accumulates dL/dweight and dL/dbias.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                          Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    require_shape(grad_out, {cout, h, w}, "conv2d grad_out");
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    Tensor<T> grad_in(input.shape);
    for (std::size_t co = 0; co < cout; ++co) {
        const T* g = grad_out.ptr() + co * h * w;
        T gb = 0;
        for (std::size_t i = 0; i < h * w; ++i) gb += g[i];
        grad_bias[co] += gb;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* in = input.ptr() + ci * h * w;
            T* gin = grad_in.ptr() + ci * h * w;
            const T* wk = weight.ptr() + (co * cin + ci) * k * k;
            T* gwk = grad_weight.ptr() + (co * cin + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const T wv = wk[ky * k + kx];
                    const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t x1 = dx > 0 ? w - std::min(w, static_cast<std::size_t>(dx)) : w;
                    T gw = 0;
                    for (std::size_t y = 0; y < h; ++y) {
                        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* irow = in + static_cast<std::size_t>(sy) * w;
                        T* girow = gin + static_cast<std::size_t>(sy) * w;
                        const T* grow = g + y * w;
                        for (std::size_t x = x0; x < x1; ++x) {
                            const auto sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx);
                            gw += grow[x] * irow[sx];
                            girow[sx] += wv * grow[x];
                        }
                    }
                    gwk[ky * k + kx] += gw;
                }
            }
        }
    }
    return grad_in;
}

// ------------------------------------------------------------- activation

template <typename T>
void relu_inplace(Tensor<T>& t) {
    for (auto& v : t.data) v = v > T{0} ? v : T{0};
}

/// grad *= 1[activated > 0], where `activated` is the ReLU output.
template <typename T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(activated[i] > T{0})) grad[i] = T{0};
}

template <typename T>
T sigmoid(T x) {
    if (x >= 0) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

// ------------------------------------------------------------------ dense

/// weight [out,in], bias [out], x [in] -> [out].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (weight.shape.size() != 2) throw ShapeError("dense: weight must be 2-D, got " + shape_str(weight.shape));
    const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
    if (x.size() != in_n) throw ShapeError(str_cat("dense: input has ", x.size(), " values, weight expects ", in_n));
    require_shape(bias, {out_n}, "dense bias");
    Tensor<T> y({out_n});
    for (std::size_t o = 0; o < out_n; ++o) {
        const T* wr = weight.ptr() + o * in_n;
        T s = bias[o];
        for (std::size_t i = 0; i < in_n; ++i) s += wr[i] * x[i];
        y[o] = s;
    }
    return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                         Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
    const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
    Tensor<T> gx({in_n});
    for (std::size_t o = 0; o < out_n; ++o) {
        const T g = grad_out[o];
        grad_bias[o] += g;
        if (g == T{0}) continue;
        const T* wr = weight.ptr() + o * in_n;
        T* gwr = grad_weight.ptr() + o * in_n;
        for (std::size_t i = 0; i < in_n; ++i) {
            gwr[i] += g * x[i];
            gx[i] += g * wr[i];
        }
    }
    return gx;
}

// ---------------------------------------------------------------- dropout

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// 1/(1-rate). Eval mode uses no mask at all.
template <typename T>
Tensor<T> dropout_mask(std::size_t n, double rate, Rng& rng) {
    Tensor<T> mask({n});
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : mask.data) m = rng.uniform() < rate ? T{0} : keep_scale;
    return mask;
}

template <typename T>
void apply_mask_inplace(Tensor<T>& x, const Tensor<T>& mask) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, bool training, Rng& rng) {
    if (!training || rate == 0.0) return x;
    auto y = x;
    apply_mask_inplace(y, dropout_mask<T>(x.size(), rate, rng));
    return y;
}

// ---------------------------------------------------------------- softmax

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.size() == 0) throw ShapeError("softmax: empty logits");
    const T mx = *std::max_element(logits.data.begin(), logits.data.end());
    // Accumulate in double so float models still sum to 1 within ~1e-7.
    std::vector<double> e(logits.size());
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(mx));
        sum += e[i];
    }
    Tensor<T> p(logits.shape);
    for (std::size_t i = 0; i < logits.size(); ++i) p[i] = static_cast<T>(e[i] / sum);
    return p;
}

/// -log p[label], computed from logits via log-sum-exp.
template <typename T>
T cross_entropy_from_logits(const Tensor<T>& logits, std::size_t label) {
    const T mx = *std::max_element(logits.data.begin(), logits.data.end());
    T sum = 0;
    for (auto v : logits.data) sum += std::exp(v - mx);
    return std::log(sum) + mx - logits[label];
}

/// d(CE)/d(logits) for one example scaled by 1/batch: (p - onehot)/batch.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::size_t label, std::size_t batch) {
    Tensor<T> g = probs;
    g[label] -= T{1};
    const T inv = T{1} / static_cast<T>(batch);
    for (auto& v : g.data) v *= inv;
    return g;
}

// -------------------------------------------------------------------- gru

/// GRU with gate blocks stacked as [z; r; n]:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + r * (Un h) + bn)
///   h' = (1 - z) * n + z * h
/// w_in [3H,D], w_rec [3H,H], bias [3H]. h0 = 0.
template <typename T>
struct GruTrace {
    std::vector<Tensor<T>> h;   // h[0] = h0, h[t+1] after step t
    std::vector<Tensor<T>> z, r, n, un;
};

template <typename T>
Tensor<T> gru_forward(std::span<const Tensor<T>> inputs, const Tensor<T>& w_in, const Tensor<T>& w_rec,
                      const Tensor<T>& bias, GruTrace<T>* trace = nullptr) {
    if (inputs.empty()) throw ValidationError("gru: empty input sequence");
    if (w_rec.shape.size() != 2 || w_rec.dim(0) != 3 * w_rec.dim(1))
        throw ShapeError("gru: recurrent weight must be [3H,H], got " + shape_str(w_rec.shape));
    const std::size_t H = w_rec.dim(1);
    if (w_in.shape.size() != 2 || w_in.dim(0) != 3 * H)
        throw ShapeError("gru: input weight must be [3H,D], got " + shape_str(w_in.shape));
    const std::size_t D = w_in.dim(1);
    require_shape(bias, {3 * H}, "gru bias");

    Tensor<T> h({H});
    if (trace) {
        *trace = {};
        trace->h.push_back(h);
    }
    std::vector<T> ax(3 * H), ah(3 * H);
    for (const auto& x : inputs) {
        if (x.size() != D) throw ShapeError(str_cat("gru: step input has ", x.size(), " values, expected ", D));
        for (std::size_t j = 0; j < 3 * H; ++j) {
            const T* wr = w_in.ptr() + j * D;
            T s = bias[j];
            for (std::size_t i = 0; i < D; ++i) s += wr[i] * x[i];
            ax[j] = s;
            const T* ur = w_rec.ptr() + j * H;
            T u = 0;
            for (std::size_t i = 0; i < H; ++i) u += ur[i] * h[i];
            ah[j] = u;
        }
        Tensor<T> z({H}), r({H}), n({H}), un({H}), hn({H});
        for (std::size_t i = 0; i < H; ++i) {
            z[i] = sigmoid(ax[i] + ah[i]);
            r[i] = sigmoid(ax[H + i] + ah[H + i]);
            un[i] = ah[2 * H + i];
            n[i] = std::tanh(ax[2 * H + i] + r[i] * un[i]);
            hn[i] = (T{1} - z[i]) * n[i] + z[i] * h[i];
        }
        h = std::move(hn);
        if (trace) {
            trace->z.push_back(std::move(z));
            trace->r.push_back(std::move(r));
            trace->n.push_back(std::move(n));
            trace->un.push_back(std::move(un));
            trace->h.push_back(h);
        }
    }
    return h;
}

/// Backpropagates dL/dh_final through time. Returns dL/dx_t per step and
/// accumulates parameter gradients.
template <typename T>
std::vector<Tensor<T>> gru_backward(std::span<const Tensor<T>> inputs, const Tensor<T>& w_in, const Tensor<T>& w_rec,
                                    const GruTrace<T>& trace, const Tensor<T>& grad_h_final, Tensor<T>& g_w_in,
                                    Tensor<T>& g_w_rec, Tensor<T>& g_bias) {
    const std::size_t H = w_rec.dim(1), D = w_in.dim(1);
    const std::size_t steps = inputs.size();
    std::vector<Tensor<T>> gx(steps, Tensor<T>({D}));
    Tensor<T> dh = grad_h_final;
    std::vector<T> da(3 * H);  // [da_z; da_r; da_n]
    std::vector<T> dun(H);
    for (std::size_t s = steps; s-- > 0;) {
        const auto& hp = trace.h[s];
        const auto& z = trace.z[s];
        const auto& r = trace.r[s];
        const auto& n = trace.n[s];
        const auto& un = trace.un[s];
        Tensor<T> dh_prev({H});
        for (std::size_t i = 0; i < H; ++i) {
            const T dn = dh[i] * (T{1} - z[i]);
            const T dz = dh[i] * (hp[i] - n[i]);
            dh_prev[i] = dh[i] * z[i];
            const T dan = dn * (T{1} - n[i] * n[i]);
            const T dr = dan * un[i];
            dun[i] = dan * r[i];
            da[i] = dz * z[i] * (T{1} - z[i]);
            da[H + i] = dr * r[i] * (T{1} - r[i]);
            da[2 * H + i] = dan;
        }
        const auto& x = inputs[s];
        auto& gxs = gx[s];
        for (std::size_t j = 0; j < 3 * H; ++j) {
            const T a = da[j];
            g_bias[j] += a;
            const T* wr = w_in.ptr() + j * D;
            T* gwr = g_w_in.ptr() + j * D;
            for (std::size_t i = 0; i < D; ++i) {
                gwr[i] += a * x[i];
                gxs[i] += a * wr[i];
            }
            // Recurrent path: the candidate block sees r-gated Un h.
            const T ar = j < 2 * H ? a : dun[j - 2 * H];
            const T* ur = w_rec.ptr() + j * H;
            T* gur = g_w_rec.ptr() + j * H;
            for (std::size_t i = 0; i < H; ++i) {
                gur[i] += ar * hp[i];
                dh_prev[i] += ar * ur[i];
            }
        }
        dh = std::move(dh_prev);
    }
    return gx;
}

}  // namespace sppg::nn
