// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sppg/common.hpp"
#include "sppg/nn/layers.hpp"
#include "sppg/nn/params.hpp"

namespace sppg::nn {

// Checkpoint layout (little-endian):
//   "SPGW" | u32 version | u64 architecture fingerprint | u32 n_params |
//   per param: u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data[]

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Digest of an ordered layer list; any change in kind or size changes it.
inline std::uint64_t architecture_fingerprint(const std::vector<LayerSpec>& layers) {
    std::string canon;
    for (const auto& l : layers) canon += l.describe() + ";";
    return fnv1a64(canon);
}

template <typename T>
std::string encode_checkpoint(const ParamSet<T>& params, std::uint64_t fingerprint) {
    std::string out = "SPGW";
    put_u32(out, kCheckpointVersion);
    put_u64(out, fingerprint);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (auto d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (auto v : p.value.data) put_f32(out, static_cast<float>(v));
    }
    return out;
}

/// Decodes a checkpoint and checks it against the expected architecture.
inline ParamSet<float> decode_checkpoint(std::string_view bytes, std::uint64_t expected_fingerprint,
                                         const std::string& name = "<memory>") {
    ByteReader r(bytes, name);
    if (r.bytes(4) != "SPGW") throw FormatError(name + ": bad checkpoint magic (expected SPGW)");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(str_cat(name, ": unsupported checkpoint version ", version));
    const auto fp = r.u64();
    if (fp != expected_fingerprint)
        throw ValidationError(str_cat(name, ": architecture fingerprint mismatch (file ", fp, ", model ",
                                      expected_fingerprint, ")"));
    const auto n = r.u32();
    ParamSet<float> params;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = r.u32();
        std::string pname(r.bytes(len));
        const auto rank = r.u32();
        Shape shape(rank);
        for (auto& d : shape) d = r.u32();
        auto& t = params.add(pname, shape);
        for (auto& v : t.data) {
            v = r.f32();
            if (!std::isfinite(v)) throw FormatError(name + ": non-finite value in parameter '" + pname + "'");
        }
    }
    if (r.remaining() != 0) throw FormatError(str_cat(name, ": ", r.remaining(), " trailing bytes"));
    return params;
}

}  // namespace sppg::nn
