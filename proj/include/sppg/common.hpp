// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sppg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Tensor or layer dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a contract (overlaps, bad option, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Missing files, empty datasets and other problems with the data itself.
class DataError : public Error {
public:
    using Error::Error;
};

/// Not enough candidates to draw the requested sample.
class ShortageError : public Error {
public:
    ShortageError(const std::string& what, std::size_t available)
        : Error(what), available_(available) {}
    std::size_t available() const { return available_; }

private:
    std::size_t available_;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Bad command-line usage; the CLI maps this to exit status 1.
class UsageError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string concat_impl(std::ostringstream& os) { return os.str(); }

template <typename T, typename... Rest>
std::string concat_impl(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    return concat_impl(os, rest...);
}

}  // namespace detail

/// Stream-formats all arguments into one string.
template <typename... Args>
std::string str_cat(const Args&... args) {
    std::ostringstream os;
    os.precision(17);
    return detail::concat_impl(os, args...);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(str_cat("cannot open file: ", path));
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(str_cat("cannot write file: ", path));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(str_cat("write failed: ", path));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

// Little-endian binary helpers. All on-disk formats in this project are LE.

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

/// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
public:
    ByteReader(std::string_view data, std::string context)
        : data_(data), context_(std::move(context)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(data_[pos_]) |
                                            (static_cast<unsigned char>(data_[pos_ + 1]) << 8));
        pos_ += 2;
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    std::string_view bytes(std::size_t n) {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    void skip(std::size_t n) { bytes(n); }
    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw FormatError(str_cat(context_, ": truncated at byte ", pos_));
    }

    std::string_view data_;
    std::string context_;
    std::size_t pos_ = 0;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ b); }

/// printf-style fixed-point formatting.
inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

/// Shortest decimal form that parses back to the same double.
inline std::string shortest(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace sppg
