// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sppg/common.hpp"

namespace sppg::corpus {

/// Ordered phone label set. Symbols are kept in sorted order so that the
/// index of a phone never depends on file order.
class PhoneInventory {
public:
    PhoneInventory() = default;

    explicit PhoneInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
        if (symbols_.empty()) throw ValidationError("phone inventory is empty");
        std::sort(symbols_.begin(), symbols_.end());
        for (std::size_t i = 0; i < symbols_.size(); ++i) {
            if (symbols_[i].empty()) throw ValidationError("phone inventory contains an empty symbol");
            if (i > 0 && symbols_[i] == symbols_[i - 1])
                throw ValidationError("duplicate phone symbol '" + symbols_[i] + "'");
            index_[symbols_[i]] = i;
        }
    }

    std::size_t size() const { return symbols_.size(); }
    const std::vector<std::string>& symbols() const { return symbols_; }
    const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
    bool contains(const std::string& s) const { return index_.count(s) != 0; }

    std::optional<std::size_t> find(const std::string& s) const {
        auto it = index_.find(s);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index_of(const std::string& s) const {
        auto it = index_.find(s);
        if (it == index_.end()) throw ValidationError("phone '" + s + "' not in inventory");
        return it->second;
    }

    bool operator==(const PhoneInventory& o) const { return symbols_ == o.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::map<std::string, std::size_t> index_;
};

/// Label folding table. Unlisted labels map to themselves; a target of "-"
/// deletes the label.
class FoldingTable {
public:
    static constexpr const char* kDrop = "-";

    FoldingTable() = default;

    explicit FoldingTable(std::map<std::string, std::string> mapping) : map_(std::move(mapping)) {
        // Resolve chains so a single lookup is already a fixed point.
        for (auto& [from, to] : map_) {
            std::string cur = to;
            for (std::size_t hops = 0; hops <= map_.size(); ++hops) {
                auto it = map_.find(cur);
                if (it == map_.end() || it->second == cur) break;
                if (hops == map_.size()) throw ValidationError("folding table contains a cycle at '" + from + "'");
                cur = it->second;
            }
            to = cur;
        }
    }

    /// std::nullopt means the label is dropped.
    std::optional<std::string> fold(const std::string& label) const {
        auto it = map_.find(label);
        const std::string& out = it == map_.end() ? label : it->second;
        if (out == kDrop) return std::nullopt;
        return out;
    }

    const std::map<std::string, std::string>& mapping() const { return map_; }

private:
    std::map<std::string, std::string> map_;
};

/// The 48-phone set used for TIMIT phone classification.
inline const std::vector<std::string>& timit48_symbols() {
    static const std::vector<std::string> syms = {
        "aa", "ae", "ah", "ao", "aw", "ax", "ay", "b",  "ch", "cl", "d",  "dh",
        "dx", "eh", "el", "en", "epi", "er", "ey", "f",  "g",  "hh", "ih", "ix",
        "iy", "jh", "k",  "l",  "m",  "n",  "ng", "ow", "oy", "p",  "r",  "s",
        "sh", "sil", "t", "th", "uh", "uw", "v",  "vcl", "w", "y",  "z",  "zh"};
    return syms;
}

/// TIMIT 61 -> 48 folding (closures merged into cl/vcl, pauses into sil,
/// glottal stop deleted).
inline const std::map<std::string, std::string>& timit61_to_48() {
    static const std::map<std::string, std::string> m = {
        {"ux", "uw"},  {"axr", "er"},  {"ax-h", "ax"}, {"em", "m"},    {"nx", "n"},
        {"eng", "ng"}, {"hv", "hh"},   {"pcl", "cl"},  {"tcl", "cl"},  {"kcl", "cl"},
        {"qcl", "cl"}, {"bcl", "vcl"}, {"dcl", "vcl"}, {"gcl", "vcl"}, {"h#", "sil"},
        {"pau", "sil"}, {"q", "-"}};
    return m;
}

inline PhoneInventory default_inventory() { return PhoneInventory(timit48_symbols()); }
inline FoldingTable default_folding() { return FoldingTable(timit61_to_48()); }

/// One symbol per line; blank lines and '#' comments ignored.
inline PhoneInventory read_inventory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open inventory file: " + path);
    std::vector<std::string> syms;
    std::string line;
    while (std::getline(in, line)) {
        auto s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        syms.push_back(s);
    }
    return PhoneInventory(std::move(syms));
}

/// `from<TAB>to` lines.
inline FoldingTable read_folding(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open folding file: " + path);
    std::map<std::string, std::string> m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto f = split(s, '\t');
        if (f.size() != 2 || trim(f[0]).empty() || trim(f[1]).empty())
            throw FormatError(str_cat(path, ":", lineno, ": expected from<TAB>to"));
        m[trim(f[0])] = trim(f[1]);
    }
    return FoldingTable(std::move(m));
}

inline std::string format_inventory(const PhoneInventory& inv) {
    std::string out;
    for (const auto& s : inv.symbols()) out += s + "\n";
    return out;
}

inline std::string format_folding(const FoldingTable& f) {
    std::string out;
    for (const auto& [from, to] : f.mapping()) out += from + "\t" + to + "\n";
    return out;
}

}  // namespace sppg::corpus
