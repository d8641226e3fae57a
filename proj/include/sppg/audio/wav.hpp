// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sppg/common.hpp"

namespace sppg::audio {

struct AudioSignal {
    std::vector<double> samples;  // normalized to [-1, 1]
    int sample_rate_hz = 16000;

    double duration_seconds() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

/// Parses a PCM-16 mono RIFF/WAVE byte buffer. `name` is used in messages.
inline AudioSignal parse_wav(std::string_view bytes, const std::string& name = "<memory>") {
    ByteReader r(bytes, name);
    if (r.remaining() < 12) throw FormatError(name + ": too short for a RIFF header");
    if (r.bytes(4) != "RIFF") throw FormatError(name + ": missing RIFF magic");
    r.u32();
    if (r.bytes(4) != "WAVE") throw FormatError(name + ": RIFF form type is not WAVE");

    bool have_fmt = false;
    int rate = 0;
    while (r.remaining() >= 8) {
        const std::string id(r.bytes(4));
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) throw FormatError(str_cat(name, ": fmt chunk too small (", size, " bytes)"));
            ByteReader f(r.bytes(size), name + " fmt");
            const auto format = f.u16();
            const auto channels = f.u16();
            const auto sample_rate = f.u32();
            f.u32();  // byte rate
            f.u16();  // block align
            const auto bits = f.u16();
            if (format != 1)
                throw FormatError(str_cat(name, ": unsupported audio_format ", format,
                                          " (only 1 = integer PCM is supported)"));
            if (channels != 1)
                throw FormatError(str_cat(name, ": unsupported num_channels ", channels,
                                          " (only mono is supported)"));
            if (bits != 16)
                throw FormatError(str_cat(name, ": unsupported bits_per_sample ", bits,
                                          " (only 16 is supported)"));
            if (sample_rate == 0) throw FormatError(name + ": sample_rate is zero");
            rate = static_cast<int>(sample_rate);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError(name + ": data chunk precedes fmt chunk");
            const std::size_t n_bytes = std::min<std::size_t>(size, r.remaining());
            if (n_bytes % 2 != 0) throw FormatError(name + ": data chunk has odd byte count");
            auto data = r.bytes(n_bytes);
            AudioSignal sig;
            sig.sample_rate_hz = rate;
            sig.samples.resize(n_bytes / 2);
            for (std::size_t i = 0; i < sig.samples.size(); ++i) {
                auto lo = static_cast<unsigned char>(data[2 * i]);
                auto hi = static_cast<unsigned char>(data[2 * i + 1]);
                auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
                sig.samples[i] = v / 32768.0;
            }
            return sig;
        } else {
            r.skip(std::min<std::size_t>(size + (size & 1), r.remaining()));
        }
    }
    throw FormatError(name + ": no data chunk");
}

inline AudioSignal read_wav(const std::string& path) { return parse_wav(read_file_bytes(path), path); }

/// Serializes as PCM-16 mono. Samples are clipped to the int16 range.
inline std::string encode_wav(const AudioSignal& sig) {
    if (sig.sample_rate_hz <= 0) throw ValidationError("sample_rate_hz must be positive");
    const auto n = static_cast<std::uint32_t>(sig.samples.size());
    std::string out;
    out.reserve(44 + 2 * n);
    out += "RIFF";
    put_u32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    put_u32(out, 16);
    out.push_back(1), out.push_back(0);  // PCM
    out.push_back(1), out.push_back(0);  // mono
    put_u32(out, static_cast<std::uint32_t>(sig.sample_rate_hz));
    put_u32(out, static_cast<std::uint32_t>(sig.sample_rate_hz) * 2);
    out.push_back(2), out.push_back(0);
    out.push_back(16), out.push_back(0);
    out += "data";
    put_u32(out, 2 * n);
    for (double s : sig.samples) {
        double scaled = std::nearbyint(s * 32768.0);
        scaled = std::clamp(scaled, -32768.0, 32767.0);
        auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled));
        out.push_back(static_cast<char>(v & 0xFF));
        out.push_back(static_cast<char>(v >> 8));
    }
    return out;
}

inline void write_wav(const std::string& path, const AudioSignal& sig) {
    write_file_bytes(path, encode_wav(sig));
}

/// Cuts [start, end) plus `context` samples on each side (clamped to the
/// signal) and applies a linear fade of `fade` samples at both clip edges.
inline AudioSignal cut_clip(const AudioSignal& sig, std::size_t start, std::size_t end,
                            std::size_t context, std::size_t fade) {
    const std::size_t n = sig.samples.size();
    const std::size_t b = start > context ? start - context : 0;
    const std::size_t e = std::min(n, end + context);
    AudioSignal clip;
    clip.sample_rate_hz = sig.sample_rate_hz;
    if (e <= b) return clip;
    clip.samples.assign(sig.samples.begin() + static_cast<std::ptrdiff_t>(b),
                        sig.samples.begin() + static_cast<std::ptrdiff_t>(e));
    const std::size_t len = clip.samples.size();
    const std::size_t f = std::min(fade, len / 2);
    for (std::size_t i = 0; i < f; ++i) {
        const double g = static_cast<double>(i) / static_cast<double>(f);
        clip.samples[i] *= g;
        clip.samples[len - 1 - i] *= g;
    }
    return clip;
}

}  // namespace sppg::audio
