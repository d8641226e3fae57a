// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sppg/common.hpp"
#include "sppg/corpus/inventory.hpp"

namespace sppg::model {

/// Segmental phonetic posterior-gram: one segment's posterior over the
/// phone inventory.
struct Sppg {
    std::string segment_id;
    std::size_t label = 0;  // reference label index
    std::vector<double> probs;
    std::size_t predicted = 0;

    static std::size_t argmax(const std::vector<double>& p) {
        return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    }
};

// SPPG file: "#inventory: s0,s1,...", then one line per segment:
//   segment_id<TAB>label<TAB>p_0,...,p_{P-1}   (6 decimals)

inline std::string format_sppg_header(const corpus::PhoneInventory& inv) {
    std::string out = "#inventory: ";
    for (std::size_t i = 0; i < inv.size(); ++i) out += (i ? "," : "") + inv.symbol(i);
    return out + "\n";
}

inline std::string format_sppg_line(const Sppg& s, const corpus::PhoneInventory& inv) {
    std::string out = s.segment_id + "\t" + inv.symbol(s.label) + "\t";
    for (std::size_t i = 0; i < s.probs.size(); ++i) {
        if (i) out += ',';
        out += fixed(s.probs[i], 6);
    }
    return out + "\n";
}

inline std::string format_sppg_file(const std::vector<Sppg>& records, const corpus::PhoneInventory& inv) {
    std::string out = format_sppg_header(inv);
    for (const auto& r : records) out += format_sppg_line(r, inv);
    return out;
}

struct SppgFile {
    corpus::PhoneInventory inventory;
    std::vector<Sppg> records;
};

inline SppgFile parse_sppg_file(std::string_view text, const std::string& name = "<memory>") {
    SppgFile f;
    bool have_header = false;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        if (raw.empty()) continue;
        if (!have_header) {
            const std::string prefix = "#inventory: ";
            if (raw.rfind(prefix, 0) != 0) throw FormatError(name + ": missing '#inventory: ' header");
            f.inventory = corpus::PhoneInventory(split(std::string_view(raw).substr(prefix.size()), ','));
            // The header order is the probability order; it must already be canonical.
            auto listed = split(std::string_view(raw).substr(prefix.size()), ',');
            if (listed != f.inventory.symbols()) throw FormatError(name + ": inventory header is not in sorted order");
            have_header = true;
            continue;
        }
        auto cols = split(raw, '\t');
        if (cols.size() != 3) throw FormatError(str_cat(name, ":", lineno, ": expected 3 tab-separated fields"));
        Sppg s;
        s.segment_id = cols[0];
        auto idx = f.inventory.find(cols[1]);
        if (!idx) throw FormatError(str_cat(name, ":", lineno, ": label '", cols[1], "' not in inventory"));
        s.label = *idx;
        for (const auto& p : split(cols[2], ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(p, &used);
                if (used != p.size() || !std::isfinite(v) || v < 0.0) throw std::invalid_argument("bad");
                s.probs.push_back(v);
            } catch (const std::exception&) {
                throw FormatError(str_cat(name, ":", lineno, ": bad probability '", p, "'"));
            }
        }
        if (s.probs.size() != f.inventory.size())
            throw FormatError(str_cat(name, ":", lineno, ": ", s.probs.size(), " probabilities for an inventory of ",
                                      f.inventory.size()));
        s.predicted = Sppg::argmax(s.probs);
        f.records.push_back(std::move(s));
    }
    if (!have_header) throw FormatError(name + ": empty SPPG file");
    return f;
}

inline SppgFile read_sppg_file(const std::string& path) { return parse_sppg_file(read_file_bytes(path), path); }

}  // namespace sppg::model
