// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sppg/audio/mfcc.hpp"
#include "sppg/common.hpp"

namespace sppg::audio {

// Feature file: "SPG1", u32 T, u32 n_coeffs, T*n_coeffs LE float32.

inline std::string encode_features(const FrameFeatureMatrix& m) {
    std::string out = "SPG1";
    put_u32(out, static_cast<std::uint32_t>(m.frames()));
    put_u32(out, static_cast<std::uint32_t>(m.n_coeffs));
    for (double v : m.values) put_f32(out, static_cast<float>(v));
    return out;
}

/// Frame timing is not stored in the file; pass the geometry that produced
/// it so frame_centers can be rebuilt (center = t*hop + window/2).
inline FrameFeatureMatrix decode_features(std::string_view bytes, const std::string& source_id,
                                          int window_samples, int hop_samples,
                                          const std::string& name = "<memory>") {
    ByteReader r(bytes, name);
    if (r.bytes(4) != "SPG1") throw FormatError(name + ": bad feature file magic (expected SPG1)");
    const std::uint32_t t = r.u32();
    const std::uint32_t c = r.u32();
    if (c == 0) throw FormatError(name + ": n_coeffs is zero");
    if (r.remaining() != static_cast<std::size_t>(t) * c * 4)
        throw FormatError(str_cat(name, ": payload size ", r.remaining(), " does not match T=", t, " n_coeffs=", c));
    FrameFeatureMatrix m;
    m.source_id = source_id;
    m.n_coeffs = static_cast<int>(c);
    m.values.resize(static_cast<std::size_t>(t) * c);
    for (auto& v : m.values) {
        v = r.f32();
        if (!std::isfinite(v)) throw FormatError(name + ": non-finite feature value");
    }
    m.frame_centers.resize(t);
    for (std::uint32_t i = 0; i < t; ++i)
        m.frame_centers[i] = static_cast<std::size_t>(i) * static_cast<std::size_t>(hop_samples) +
                             static_cast<std::size_t>(window_samples) / 2;
    return m;
}

inline void write_features(const std::string& path, const FrameFeatureMatrix& m) {
    write_file_bytes(path, encode_features(m));
}

inline FrameFeatureMatrix read_features(const std::string& path, const std::string& source_id,
                                        int window_samples, int hop_samples) {
    return decode_features(read_file_bytes(path), source_id, window_samples, hop_samples, path);
}

/// One line of the sidecar manifest: source_id<TAB>path<TAB>T.
struct FeatureManifestEntry {
    std::string source_id;
    std::string path;
    std::size_t frames = 0;
};

inline std::string manifest_line(const FeatureManifestEntry& e) {
    return str_cat(e.source_id, '\t', e.path, '\t', e.frames, '\n');
}

inline std::vector<FeatureManifestEntry> read_feature_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature manifest: " + path);
    std::vector<FeatureManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || line[0] == '#') continue;
        auto f = split(line, '\t');
        if (f.size() != 3) throw FormatError(str_cat(path, ":", lineno, ": expected 3 tab-separated fields"));
        FeatureManifestEntry e{f[0], f[1], 0};
        try {
            e.frames = std::stoul(f[2]);
        } catch (const std::exception&) {
            throw FormatError(str_cat(path, ":", lineno, ": bad frame count '", f[2], "'"));
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace sppg::audio
