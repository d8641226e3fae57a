// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "sppg/common.hpp"
#include "sppg/discovery/noncat.hpp"
#include "sppg/random.hpp"

namespace sppg::perceptual {

using nlohmann::json;

enum class TrueClass { NonCat, CatP1, CatP2 };

inline const char* to_string(TrueClass c) {
    switch (c) {
        case TrueClass::NonCat: return "noncat";
        case TrueClass::CatP1: return "cat_P1";
        case TrueClass::CatP2: return "cat_P2";
    }
    return "?";
}

inline TrueClass parse_true_class(const std::string& s) {
    if (s == "noncat") return TrueClass::NonCat;
    if (s == "cat_P1") return TrueClass::CatP1;
    if (s == "cat_P2") return TrueClass::CatP2;
    throw FormatError("unknown true_class '" + s + "'");
}

inline constexpr std::size_t kNonCatItems = 6;
inline constexpr std::size_t kCatItemsEach = 3;
inline constexpr std::size_t kGroupSize = kNonCatItems + 2 * kCatItemsEach;

/// A candidate clip for a listening-test item.
struct PoolEntry {
    std::string segment_id;
    std::string audio;

    bool operator==(const PoolEntry&) const = default;
};

struct GroupItem {
    std::string item_id;
    std::string segment_id;
    TrueClass true_class = TrueClass::NonCat;
    std::string audio;

    bool operator==(const GroupItem&) const = default;
};

/// One listening-test bundle. `items` is stored in presentation order and
/// item ids are assigned by presentation position, so neither reveals the
/// composition.
struct ConfusionGroup {
    std::string pattern;
    std::string p1;
    std::string p2;
    std::uint64_t seed = 0;
    std::vector<GroupItem> items;

    std::vector<std::string> presentation_order() const {
        std::vector<std::string> ids;
        for (const auto& it : items) ids.push_back(it.item_id);
        return ids;
    }

    const GroupItem* find(const std::string& item_id) const {
        for (const auto& it : items)
            if (it.item_id == item_id) return &it;
        return nullptr;
    }

    bool operator==(const ConfusionGroup&) const = default;
};

inline std::vector<PoolEntry> draw(std::vector<PoolEntry> pool, std::size_t k, Rng& rng, const char* pool_name) {
    if (pool.size() < k)
        throw ShortageError(str_cat("pool '", pool_name, "' has ", pool.size(), " clip(s), need ", k), pool.size());
    std::sort(pool.begin(), pool.end(), [](const PoolEntry& a, const PoolEntry& b) { return a.segment_id < b.segment_id; });
    std::vector<PoolEntry> out;
    for (auto i : rng.sample_without_replacement(pool.size(), k)) out.push_back(pool[i]);
    return out;
}

/// 6 non-category clips plus 3 from each neighbouring category, shuffled.
inline ConfusionGroup build_group(const std::string& pattern, const std::vector<PoolEntry>& noncat_pool,
                                  const std::vector<PoolEntry>& cat1_pool, const std::vector<PoolEntry>& cat2_pool,
                                  std::uint64_t seed) {
    auto members = discovery::pattern_members(pattern);
    if (members.size() != 2 || discovery::canonical_name(members) != pattern)
        throw ValidationError("confusion groups need a canonical two-member pattern, got '" + pattern + "'");
    Rng rng(mix_seed(seed, fnv1a64(pattern)));
    auto nc = draw(noncat_pool, kNonCatItems, rng, "noncat");
    auto c1 = draw(cat1_pool, kCatItemsEach, rng, members[0].c_str());
    auto c2 = draw(cat2_pool, kCatItemsEach, rng, members[1].c_str());

    std::vector<GroupItem> items;
    for (auto& e : nc) items.push_back({"", e.segment_id, TrueClass::NonCat, e.audio});
    for (auto& e : c1) items.push_back({"", e.segment_id, TrueClass::CatP1, e.audio});
    for (auto& e : c2) items.push_back({"", e.segment_id, TrueClass::CatP2, e.audio});
    rng.shuffle(items);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].item_id = str_cat(pattern, (i < 9 ? "-0" : "-"), i + 1);

    ConfusionGroup g;
    g.pattern = pattern;
    g.p1 = members[0];
    g.p2 = members[1];
    g.seed = seed;
    g.items = std::move(items);
    return g;
}

inline json group_to_json(const ConfusionGroup& g) {
    json items = json::array();
    for (const auto& it : g.items)
        items.push_back({{"item_id", it.item_id},
                         {"segment_id", it.segment_id},
                         {"true_class", to_string(it.true_class)},
                         {"audio", it.audio}});
    return {{"pattern", g.pattern},       {"p1", g.p1},       {"p2", g.p2},
            {"seed", g.seed},             {"items", items},   {"presentation_order", g.presentation_order()}};
}

inline ConfusionGroup group_from_json(const json& j) {
    ConfusionGroup g;
    try {
        g.pattern = j.at("pattern").get<std::string>();
        g.p1 = j.at("p1").get<std::string>();
        g.p2 = j.at("p2").get<std::string>();
        g.seed = j.value("seed", std::uint64_t{0});
        std::vector<GroupItem> items;
        for (const auto& it : j.at("items"))
            items.push_back({it.at("item_id").get<std::string>(), it.at("segment_id").get<std::string>(),
                             parse_true_class(it.at("true_class").get<std::string>()), it.value("audio", "")});
        std::vector<std::string> order = j.at("presentation_order").get<std::vector<std::string>>();
        if (order.size() != items.size()) throw FormatError("presentation_order length differs from items");
        for (const auto& id : order) {
            auto it = std::find_if(items.begin(), items.end(), [&](const GroupItem& x) { return x.item_id == id; });
            if (it == items.end()) throw FormatError("presentation_order names unknown item '" + id + "'");
            g.items.push_back(*it);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad group manifest: ") + e.what());
    }
    std::vector<std::string> ids = g.presentation_order();
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw FormatError("group manifest '" + g.pattern + "' has duplicate item ids");
    return g;
}

/// What a listener may see: ids, audio locations and option labels only.
inline json listener_payload(const ConfusionGroup& g, const std::string& audio_prefix = "/audio/") {
    json items = json::array();
    for (const auto& it : g.items) items.push_back({{"item_id", it.item_id}, {"audio_url", audio_prefix + it.item_id}});
    return {{"options", {"More similar to " + g.p1, "More similar to " + g.p2,
                         "Equal similarity to " + g.p1 + " and " + g.p2, "Not similar to either " + g.p1 + " or " + g.p2}},
            {"items", items}};
}

}  // namespace sppg::perceptual
