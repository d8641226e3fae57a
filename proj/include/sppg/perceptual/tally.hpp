// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sppg/common.hpp"
#include "sppg/perceptual/groups.hpp"

namespace sppg::perceptual {

/// One listener judgment. Options: 1 = more similar to P1, 2 = more
/// similar to P2, 3 = equally similar to both, 4 = similar to neither.
struct ResponseRecord {
    std::string listener_id;
    std::string item_id;
    int option = 0;
    std::string timestamp;

    bool operator==(const ResponseRecord&) const = default;
};

inline bool valid_option(int option) { return option >= 1 && option <= 4; }

inline std::string format_response_line(const ResponseRecord& r) {
    return json{{"listener_id", r.listener_id}, {"item_id", r.item_id}, {"option", r.option}, {"timestamp", r.timestamp}}
               .dump() +
           "\n";
}

struct ParsedLog {
    std::vector<ResponseRecord> records;
    std::size_t malformed_lines = 0;
};

/// Parses an append-only JSONL log. A trailing line without '\n' may be a
/// write in progress and is ignored; other unparseable lines are counted.
inline ParsedLog parse_response_log(std::string_view text) {
    ParsedLog out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) break;
        auto line = text.substr(start, nl - start);
        start = nl + 1;
        if (trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            out.records.push_back({j.at("listener_id").get<std::string>(), j.at("item_id").get<std::string>(),
                                   j.at("option").get<int>(), j.value("timestamp", "")});
        } catch (const json::exception&) {
            ++out.malformed_lines;
        }
    }
    return out;
}

/// Option counts for one cell (pattern x true class).
struct OptionCounts {
    std::array<std::size_t, 4> counts{};

    std::size_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
    std::array<double, 4> proportions() const {
        std::array<double, 4> p{};
        const auto n = static_cast<double>(total());
        if (n == 0) return p;
        for (std::size_t i = 0; i < 4; ++i) p[i] = static_cast<double>(counts[i]) / n;
        return p;
    }
};

/// Per-pattern option proportions in [0, 1] with the |opt1 - opt2| gap.
struct OptionProportions {
    std::string pattern;
    std::array<double, 4> option{};

    double score_gap() const { return std::abs(option[0] - option[1]); }
};

struct ScoreAverages {
    std::size_t n_patterns = 0;
    std::array<double, 4> option{};
    double score_gap = 0.0;
};

/// Unweighted means across patterns.
inline ScoreAverages average_scores(const std::vector<OptionProportions>& rows) {
    ScoreAverages a;
    a.n_patterns = rows.size();
    if (rows.empty()) return a;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < 4; ++i) a.option[i] += r.option[i];
        a.score_gap += r.score_gap();
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& v : a.option) v /= n;
    a.score_gap /= n;
    return a;
}

struct PatternScores {
    std::string pattern;
    std::string p1, p2;
    std::map<TrueClass, OptionCounts> by_class;

    const OptionCounts& noncat() const {
        static const OptionCounts empty;
        auto it = by_class.find(TrueClass::NonCat);
        return it == by_class.end() ? empty : it->second;
    }
    bool has_data() const { return noncat().total() > 0; }
    OptionProportions proportions() const { return {pattern, noncat().proportions()}; }
};

struct ConfusionScores {
    std::vector<PatternScores> patterns;  // in group order
    ScoreAverages averages;               // over patterns with non-category data
    std::size_t accepted = 0;             // effective (last-wins) responses
    std::size_t rejected_unknown_item = 0;
    std::size_t rejected_invalid_option = 0;
};

/// Folds the response log into scores. Later records for the same
/// (listener, item) replace earlier ones. Table-style proportions use
/// non-category items only; every class is kept in `by_class`.
inline ConfusionScores tally(const std::vector<ResponseRecord>& responses, const std::vector<ConfusionGroup>& groups) {
    ConfusionScores s;
    std::map<std::string, std::pair<std::size_t, const GroupItem*>> item_index;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        PatternScores ps;
        ps.pattern = groups[g].pattern;
        ps.p1 = groups[g].p1;
        ps.p2 = groups[g].p2;
        s.patterns.push_back(std::move(ps));
        for (const auto& it : groups[g].items) item_index[it.item_id] = {g, &it};
    }
    std::map<std::pair<std::string, std::string>, int> latest;
    for (const auto& r : responses) {
        if (!item_index.count(r.item_id)) {
            ++s.rejected_unknown_item;
            continue;
        }
        if (!valid_option(r.option)) {
            ++s.rejected_invalid_option;
            continue;
        }
        latest[{r.listener_id, r.item_id}] = r.option;
    }
    for (const auto& [key, option] : latest) {
        const auto& [g, item] = item_index.at(key.second);
        ++s.patterns[g].by_class[item->true_class].counts[static_cast<std::size_t>(option - 1)];
        ++s.accepted;
    }
    std::vector<OptionProportions> rows;
    for (const auto& p : s.patterns)
        if (p.has_data()) rows.push_back(p.proportions());
    s.averages = average_scores(rows);
    return s;
}

inline json scores_to_json(const ConfusionScores& s) {
    json patterns = json::array();
    for (const auto& p : s.patterns) {
        json classes = json::object();
        for (const auto& [cls, oc] : p.by_class)
            classes[to_string(cls)] = {{"counts", oc.counts}, {"total", oc.total()}, {"proportions", oc.proportions()}};
        json row = {{"pattern", p.pattern}, {"p1", p.p1}, {"p2", p.p2}, {"by_class", classes}};
        if (p.has_data()) {
            auto pr = p.proportions();
            row["options"] = pr.option;
            row["score_gap"] = pr.score_gap();
        } else {
            row["options"] = nullptr;
            row["score_gap"] = nullptr;
        }
        patterns.push_back(row);
    }
    json avg = {{"n_patterns", s.averages.n_patterns}};
    if (s.averages.n_patterns > 0) {
        avg["options"] = s.averages.option;
        avg["score_gap"] = s.averages.score_gap;
    } else {
        avg["options"] = nullptr;
        avg["score_gap"] = nullptr;
    }
    return {{"patterns", patterns},
            {"averages", avg},
            {"accepted", s.accepted},
            {"rejected_unknown_item", s.rejected_unknown_item},
            {"rejected_invalid_option", s.rejected_invalid_option}};
}

inline std::string pct(double v) { return fixed(100.0 * v, 2); }

/// One row per pattern (option 1-4 and score gap, in percent over the
/// non-category items) and a final averages row. Patterns without
/// responses print "no data" instead of zeros.
inline std::string format_option_table(const ConfusionScores& s) {
    std::string out = "pattern\toption1\toption2\toption3\toption4\tscore_gap\n";
    const std::string none = "no data\tno data\tno data\tno data\tno data";
    for (const auto& p : s.patterns) {
        if (!p.has_data()) {
            out += p.pattern + "\t" + none + "\n";
            continue;
        }
        auto pr = p.proportions();
        out += p.pattern + "\t" + pct(pr.option[0]) + "\t" + pct(pr.option[1]) + "\t" + pct(pr.option[2]) + "\t" +
               pct(pr.option[3]) + "\t" + pct(pr.score_gap()) + "\n";
    }
    if (s.averages.n_patterns == 0) {
        out += "average\t" + none + "\n";
    } else {
        const auto& a = s.averages;
        out += "average\t" + pct(a.option[0]) + "\t" + pct(a.option[1]) + "\t" + pct(a.option[2]) + "\t" +
               pct(a.option[3]) + "\t" + pct(a.score_gap) + "\n";
    }
    return out;
}

/// pattern, true_class, n, option1..4 (percent) for every cell.
inline std::string format_class_table(const ConfusionScores& s) {
    std::string out = "pattern\ttrue_class\tn\toption1\toption2\toption3\toption4\n";
    for (const auto& p : s.patterns) {
        for (auto cls : {TrueClass::NonCat, TrueClass::CatP1, TrueClass::CatP2}) {
            auto it = p.by_class.find(cls);
            if (it == p.by_class.end() || it->second.total() == 0) {
                out += p.pattern + "\t" + to_string(cls) + "\t0\tno data\tno data\tno data\tno data\n";
                continue;
            }
            auto pr = it->second.proportions();
            out += p.pattern + "\t" + to_string(cls) + "\t" + std::to_string(it->second.total()) + "\t" + pct(pr[0]) +
                   "\t" + pct(pr[1]) + "\t" + pct(pr[2]) + "\t" + pct(pr[3]) + "\n";
        }
    }
    return out;
}

/// Pie chart of one cell's option proportions.
inline std::string pie_svg(const std::string& title, const OptionCounts& oc) {
    static const std::array<const char*, 4> colors = {"#4e79a7", "#f28e2b", "#59a14f", "#bab0ac"};
    const double cx = 110, cy = 110, r = 90;
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"240\">\n";
    out += "<text x=\"10\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
    const auto p = oc.proportions();
    if (oc.total() == 0) {
        out += "<text x=\"80\" y=\"120\" font-family=\"sans-serif\" font-size=\"13\">no data</text>\n</svg>\n";
        return out;
    }
    double angle = -std::numbers::pi / 2;
    for (std::size_t i = 0; i < 4; ++i) {
        if (p[i] <= 0) continue;
        if (p[i] >= 1.0) {
            out += str_cat("<circle cx=\"", cx, "\" cy=\"", cy + 10, "\" r=\"", r, "\" fill=\"", colors[i], "\"/>\n");
            break;
        }
        const double a1 = angle + 2 * std::numbers::pi * p[i];
        const int large = p[i] > 0.5 ? 1 : 0;
        out += "<path d=\"M " + fixed(cx, 2) + " " + fixed(cy + 10, 2) + " L " + fixed(cx + r * std::cos(angle), 2) +
               " " + fixed(cy + 10 + r * std::sin(angle), 2) + " A " + fixed(r, 2) + " " + fixed(r, 2) + " 0 " +
               std::to_string(large) + " 1 " + fixed(cx + r * std::cos(a1), 2) + " " +
               fixed(cy + 10 + r * std::sin(a1), 2) + " Z\" fill=\"" + colors[i] + "\"/>\n";
        angle = a1;
    }
    for (std::size_t i = 0; i < 4; ++i)
        out += str_cat("<rect x=\"225\" y=\"", 50 + 25 * i, "\" width=\"12\" height=\"12\" fill=\"", colors[i],
                       "\"/><text x=\"242\" y=\"", 61 + 25 * i, "\" font-family=\"sans-serif\" font-size=\"12\">Option ",
                       i + 1, ": ", pct(p[i]), "%</text>\n");
    out += "</svg>\n";
    return out;
}

}  // namespace sppg::perceptual
