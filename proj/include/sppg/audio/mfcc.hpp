// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "sppg/audio/wav.hpp"
#include "sppg/common.hpp"

namespace sppg::audio {

struct FeatureConfig {
    double window_ms = 25.0;
    double hop_ms = 10.0;
    int n_mel_filters = 26;
    int n_coeffs = 13;
    double pre_emphasis = 0.97;
    /// Filterbank energies are clamped here before the log.
    double log_floor = 1e-10;

    int window_samples(int rate) const { return static_cast<int>(std::lround(window_ms * rate / 1000.0)); }
    int hop_samples(int rate) const { return static_cast<int>(std::lround(hop_ms * rate / 1000.0)); }

    void validate() const {
        if (!(hop_ms > 0.0)) throw ValidationError("hop_ms must be positive");
        if (window_ms < hop_ms) throw ValidationError("window_ms must be >= hop_ms");
        if (n_mel_filters <= 0 || n_coeffs <= 0) throw ValidationError("filter and coefficient counts must be positive");
        if (n_coeffs > n_mel_filters) throw ValidationError("n_coeffs must not exceed n_mel_filters");
        if (pre_emphasis < 0.0 || pre_emphasis >= 1.0) throw ValidationError("pre_emphasis must lie in [0, 1)");
    }
};

/// T x n_coeffs frame features of one utterance.
struct FrameFeatureMatrix {
    std::string source_id;
    int n_coeffs = 0;
    std::vector<double> values;          // row-major, T * n_coeffs
    std::vector<std::size_t> frame_centers;  // in samples

    std::size_t frames() const { return n_coeffs == 0 ? 0 : values.size() / static_cast<std::size_t>(n_coeffs); }
    const double* row(std::size_t t) const { return values.data() + t * static_cast<std::size_t>(n_coeffs); }
    double at(std::size_t t, int c) const { return values[t * static_cast<std::size_t>(n_coeffs) + static_cast<std::size_t>(c)]; }
};

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// In-place iterative radix-2 FFT. a.size() must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filters over [0, rate/2], as n_filters rows of
/// (fft_size/2 + 1) weights. Edges are placed at fractional bin positions.
inline std::vector<std::vector<double>> mel_filterbank(int n_filters, int fft_size, int rate) {
    const int n_bins = fft_size / 2 + 1;
    const double mel_hi = hz_to_mel(rate / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double hz = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_filters + 1));
        edges[i] = hz * fft_size / rate;
    }
    std::vector<std::vector<double>> fb(static_cast<std::size_t>(n_filters), std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
    for (int m = 0; m < n_filters; ++m) {
        const double l = edges[static_cast<std::size_t>(m)];
        const double c = edges[static_cast<std::size_t>(m) + 1];
        const double r = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            double w = 0.0;
            if (k > l && k <= c) w = (k - l) / (c - l);
            else if (k > c && k < r) w = (r - k) / (r - c);
            fb[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w;
        }
    }
    return fb;
}

/// MFCC front end: pre-emphasis, Hamming window, magnitude FFT, mel
/// filterbank, floored log, orthonormal DCT-II keeping c0..c{n_coeffs-1}.
class MfccExtractor {
public:
    MfccExtractor(const FeatureConfig& cfg, int sample_rate) : cfg_(cfg), rate_(sample_rate) {
        cfg_.validate();
        if (rate_ <= 0) throw ValidationError("sample rate must be positive");
        win_ = cfg_.window_samples(rate_);
        hop_ = cfg_.hop_samples(rate_);
        if (hop_ <= 0 || win_ < hop_) throw ValidationError("window/hop round to an invalid sample geometry");
        fft_size_ = next_pow2(win_);
        window_.resize(static_cast<std::size_t>(win_));
        for (int n = 0; n < win_; ++n)
            window_[static_cast<std::size_t>(n)] =
                win_ == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (win_ - 1));
        filters_ = mel_filterbank(cfg_.n_mel_filters, fft_size_, rate_);
        const int m = cfg_.n_mel_filters;
        dct_.assign(static_cast<std::size_t>(cfg_.n_coeffs) * static_cast<std::size_t>(m), 0.0);
        for (int k = 0; k < cfg_.n_coeffs; ++k) {
            const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
            for (int j = 0; j < m; ++j)
                dct_[static_cast<std::size_t>(k * m + j)] = scale * std::cos(std::numbers::pi * k * (j + 0.5) / m);
        }
    }

    int window_samples() const { return win_; }
    int hop_samples() const { return hop_; }
    int fft_size() const { return fft_size_; }

    FrameFeatureMatrix compute(const AudioSignal& signal, const std::string& source_id = {}) const {
        if (signal.sample_rate_hz != rate_)
            throw ValidationError(str_cat("signal rate ", signal.sample_rate_hz, " != extractor rate ", rate_));
        const std::size_t len = signal.samples.size();
        if (len < static_cast<std::size_t>(win_))
            throw DataError(str_cat("signal '", source_id, "' has ", len, " samples, shorter than one window (",
                                    win_, "); no frames"));
        const std::size_t n_frames = 1 + (len - static_cast<std::size_t>(win_)) / static_cast<std::size_t>(hop_);

        std::vector<double> emph(len);
        emph[0] = signal.samples[0];
        for (std::size_t i = 1; i < len; ++i) emph[i] = signal.samples[i] - cfg_.pre_emphasis * signal.samples[i - 1];

        FrameFeatureMatrix out;
        out.source_id = source_id;
        out.n_coeffs = cfg_.n_coeffs;
        out.values.resize(n_frames * static_cast<std::size_t>(cfg_.n_coeffs));
        out.frame_centers.resize(n_frames);

        const std::size_t n_bins = static_cast<std::size_t>(fft_size_ / 2 + 1);
        std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size_));
        std::vector<double> mag(n_bins);
        std::vector<double> logmel(static_cast<std::size_t>(cfg_.n_mel_filters));
        for (std::size_t t = 0; t < n_frames; ++t) {
            const std::size_t off = t * static_cast<std::size_t>(hop_);
            out.frame_centers[t] = off + static_cast<std::size_t>(win_) / 2;
            for (std::size_t n = 0; n < buf.size(); ++n)
                buf[n] = n < static_cast<std::size_t>(win_) ? emph[off + n] * window_[n] : 0.0;
            fft_inplace(buf);
            for (std::size_t k = 0; k < n_bins; ++k) mag[k] = std::abs(buf[k]);
            for (std::size_t m = 0; m < logmel.size(); ++m) {
                double e = 0.0;
                const auto& f = filters_[m];
                for (std::size_t k = 0; k < n_bins; ++k) e += f[k] * mag[k];
                logmel[m] = std::log(std::max(e, cfg_.log_floor));
            }
            double* row = out.values.data() + t * static_cast<std::size_t>(cfg_.n_coeffs);
            const std::size_t m = logmel.size();
            for (std::size_t k = 0; k < static_cast<std::size_t>(cfg_.n_coeffs); ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < m; ++j) s += dct_[k * m + j] * logmel[j];
                row[k] = s;
            }
        }
        return out;
    }

private:
    FeatureConfig cfg_;
    int rate_;
    int win_ = 0;
    int hop_ = 0;
    int fft_size_ = 0;
    std::vector<double> window_;
    std::vector<std::vector<double>> filters_;
    std::vector<double> dct_;
};

inline FrameFeatureMatrix compute_mfcc(const AudioSignal& signal, const FeatureConfig& cfg,
                                       const std::string& source_id = {}) {
    return MfccExtractor(cfg, signal.sample_rate_hz).compute(signal, source_id);
}

}  // namespace sppg::audio
