// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <iterator>
#include <vector>

#include "json.hpp"

#include "sppg/common.hpp"
#include "sppg/corpus/inventory.hpp"
#include "sppg/model/sppg.hpp"
#include "sppg/random.hpp"

namespace sppg::discovery {

inline constexpr double kDefaultTheta = 0.4;
inline constexpr double kDefaultExemplarConfidence = 0.9;
inline constexpr std::size_t kDefaultMinSupport = 20;

inline void check_threshold(double theta, const char* what) {
    if (!(theta > 0.0 && theta < 1.0)) throw ValidationError(str_cat(what, " must lie in (0, 1), got ", theta));
}

/// Indices whose probability is strictly greater than theta, ascending.
inline std::vector<std::size_t> find_peaks(const std::vector<double>& probs, double theta) {
    check_threshold(theta, "theta");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] > theta) out.push_back(i);
    return out;
}

/// Largest number of entries of a probability vector that can exceed theta.
inline std::size_t max_peaks(double theta) {
    check_threshold(theta, "theta");
    const double inv = 1.0 / theta;
    const double r = std::round(inv);
    if (std::abs(inv - r) < 1e-12) return static_cast<std::size_t>(r) - 1;
    return static_cast<std::size_t>(std::floor(inv));
}

/// Members joined with '_' in ascending lexicographic order.
inline std::string canonical_name(std::vector<std::string> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.size() < 2)
        throw ValidationError(str_cat("a non-categorical pattern needs at least two members, got ", members.size()));
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) out += (i ? "_" : "") + members[i];
    return out;
}

/// Splits a canonical pattern name into its members.
inline std::vector<std::string> pattern_members(const std::string& name) { return split(name, '_'); }

enum class VerdictKind { Categorical, NonCategorical, Uncategorized };

inline const char* to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Categorical: return "categorical";
        case VerdictKind::NonCategorical: return "noncategorical";
        case VerdictKind::Uncategorized: return "uncategorized";
    }
    return "?";
}

struct Peak {
    std::size_t index = 0;
    std::string phone;
    double prob = 0.0;
};

struct SegmentVerdict {
    std::string segment_id;
    VerdictKind kind = VerdictKind::Uncategorized;
    /// Phone for Categorical, pattern name for NonCategorical, empty otherwise.
    std::string name;
    std::vector<Peak> peaks;
};

inline SegmentVerdict classify_segment(const model::Sppg& sppg, const corpus::PhoneInventory& inv, double theta) {
    if (sppg.probs.size() != inv.size())
        throw ShapeError(str_cat("SPPG '", sppg.segment_id, "' has ", sppg.probs.size(),
                                 " entries for an inventory of ", inv.size()));
    SegmentVerdict v;
    v.segment_id = sppg.segment_id;
    for (auto i : find_peaks(sppg.probs, theta)) v.peaks.push_back({i, inv.symbol(i), sppg.probs[i]});
    if (v.peaks.empty()) {
        v.kind = VerdictKind::Uncategorized;
    } else if (v.peaks.size() == 1) {
        v.kind = VerdictKind::Categorical;
        v.name = v.peaks[0].phone;
    } else {
        v.kind = VerdictKind::NonCategorical;
        std::vector<std::string> members;
        for (const auto& p : v.peaks) members.push_back(p.phone);
        v.name = canonical_name(std::move(members));
    }
    return v;
}

inline nlohmann::json verdict_to_json(const SegmentVerdict& v) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : v.peaks) peaks.push_back({{"phone", p.phone}, {"prob", p.prob}});
    nlohmann::json j = {{"id", v.segment_id}, {"verdict", to_string(v.kind)}, {"peaks", peaks}};
    if (!v.name.empty()) j["name"] = v.name;
    return j;
}

/// Verdicts as JSONL, one record per segment.
inline std::string format_verdicts_jsonl(const std::vector<SegmentVerdict>& vs) {
    std::string out;
    for (const auto& v : vs) out += verdict_to_json(v).dump() + "\n";
    return out;
}

struct NonCatPattern {
    std::string name;
    std::vector<std::string> members;
    std::size_t count = 0;
    std::vector<std::string> support_segments;
};

struct PatternSummary {
    std::vector<NonCatPattern> patterns;        // count >= min_support
    std::vector<NonCatPattern> under_supported;  // observed, below min_support
    std::size_t n_categorical = 0;
    std::size_t n_noncategorical = 0;
    std::size_t n_uncategorized = 0;
};

/// Groups NonCategorical verdicts by pattern name. Result ordering is by
/// count descending then name, and support lists are sorted, so the output
/// does not depend on verdict order.
inline PatternSummary aggregate_patterns(const std::vector<SegmentVerdict>& verdicts, std::size_t min_support) {
    if (min_support < 1) throw ValidationError("min_support must be at least 1");
    PatternSummary s;
    std::map<std::string, NonCatPattern> groups;
    for (const auto& v : verdicts) {
        switch (v.kind) {
            case VerdictKind::Categorical: ++s.n_categorical; break;
            case VerdictKind::Uncategorized: ++s.n_uncategorized; break;
            case VerdictKind::NonCategorical: {
                ++s.n_noncategorical;
                auto& g = groups[v.name];
                g.name = v.name;
                g.support_segments.push_back(v.segment_id);
                break;
            }
        }
    }
    std::vector<NonCatPattern> all;
    for (auto& [name, g] : groups) {
        g.members = pattern_members(name);
        std::sort(g.support_segments.begin(), g.support_segments.end());
        g.count = g.support_segments.size();
        all.push_back(std::move(g));
    }
    std::stable_sort(all.begin(), all.end(), [](const NonCatPattern& a, const NonCatPattern& b) {
        return a.count != b.count ? a.count > b.count : a.name < b.name;
    });
    for (auto& p : all) (p.count >= min_support ? s.patterns : s.under_supported).push_back(std::move(p));
    return s;
}

/// pattern<TAB>count<TAB>example_segment_ids (comma-separated, at most
/// `max_examples`). Under-supported patterns follow a comment line.
inline std::string format_pattern_report(const PatternSummary& s, std::size_t max_examples = 10) {
    auto rows = [&](const std::vector<NonCatPattern>& ps) {
        std::string out;
        for (const auto& p : ps) {
            out += p.name + "\t" + std::to_string(p.count) + "\t";
            for (std::size_t i = 0; i < std::min(max_examples, p.support_segments.size()); ++i)
                out += (i ? "," : "") + p.support_segments[i];
            out += "\n";
        }
        return out;
    };
    std::string out = "pattern\tcount\texample_segment_ids\n";
    out += rows(s.patterns);
    out += str_cat("#under_supported\n");
    out += rows(s.under_supported);
    out += str_cat("#segments: categorical=", s.n_categorical, " noncategorical=", s.n_noncategorical,
                   " uncategorized=", s.n_uncategorized, "\n");
    return out;
}

/// k segment ids drawn uniformly (seeded) among those with
/// prob[phone] >= confidence. Candidates are taken in segment_id order so
/// the draw does not depend on input order.
inline std::vector<std::string> select_exemplars(const std::vector<model::Sppg>& sppgs, std::size_t phone,
                                                 double confidence, std::size_t k, std::uint64_t seed) {
    check_threshold(confidence, "confidence");
    if (k == 0) return {};
    std::vector<std::string> pool;
    for (const auto& s : sppgs)
        if (phone < s.probs.size() && s.probs[phone] >= confidence) pool.push_back(s.segment_id);
    std::sort(pool.begin(), pool.end());
    if (pool.size() < k)
        throw ShortageError(str_cat("need ", k, " exemplars at confidence ", confidence, ", only ", pool.size(),
                                    " qualify"),
                            pool.size());
    Rng rng(seed);
    std::vector<std::string> out;
    for (auto i : rng.sample_without_replacement(pool.size(), k)) out.push_back(pool[i]);
    return out;
}

struct PatternSetDiff {
    std::vector<std::string> additional;  // current \ reference
    std::vector<std::string> existing;    // current & reference
    std::vector<std::string> missing;     // reference \ current
};

inline PatternSetDiff compare_pattern_sets(const std::vector<std::string>& current,
                                           const std::vector<std::string>& reference) {
    const std::set<std::string> cur(current.begin(), current.end()), ref(reference.begin(), reference.end());
    PatternSetDiff d;
    std::set_difference(cur.begin(), cur.end(), ref.begin(), ref.end(), std::back_inserter(d.additional));
    std::set_intersection(cur.begin(), cur.end(), ref.begin(), ref.end(), std::back_inserter(d.existing));
    std::set_difference(ref.begin(), ref.end(), cur.begin(), cur.end(), std::back_inserter(d.missing));
    return d;
}

/// Three columns (additional, existing, missing), padded with empty cells,
/// followed by a count line.
inline std::string format_diff_report(const PatternSetDiff& d) {
    std::string out = "additional\texisting\tmissing\n";
    const std::size_t n = std::max({d.additional.size(), d.existing.size(), d.missing.size()});
    auto cell = [](const std::vector<std::string>& v, std::size_t i) { return i < v.size() ? v[i] : std::string(); };
    for (std::size_t i = 0; i < n; ++i)
        out += cell(d.additional, i) + "\t" + cell(d.existing, i) + "\t" + cell(d.missing, i) + "\n";
    out += str_cat("#counts\t", d.additional.size(), '\t', d.existing.size(), '\t', d.missing.size(), '\n');
    return out;
}

/// One pattern name per line; blank lines and '#' comments ignored. Names
/// are canonicalized so "n_l" and "l_n" compare equal.
inline std::vector<std::string> parse_pattern_list(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& raw : split(text, '\n')) {
        auto s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        out.push_back(canonical_name(pattern_members(s)));
    }
    return out;
}

}  // namespace sppg::discovery
