// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "sppg/common.hpp"
#include "sppg/perceptual/groups.hpp"
#include "sppg/perceptual/tally.hpp"
#include "sppg/random.hpp"

namespace sppg::service {

using nlohmann::json;
using perceptual::ConfusionGroup;
using perceptual::ResponseRecord;

class NotFound : public Error {
public:
    using Error::Error;
};

inline std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

/// Append-only JSONL response log. Appends are serialized and each record
/// is written and flushed as one line.
class ResponseLog {
public:
    explicit ResponseLog(std::string path) : path_(std::move(path)) {
        std::ofstream touch(path_, std::ios::app);
        if (!touch) throw DataError("cannot open response log: " + path_);
    }

    void append(const ResponseRecord& r) {
        const auto line = perceptual::format_response_line(r);
        std::lock_guard lock(mu_);
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        out.flush();
        if (!out) throw DataError("append to response log failed: " + path_);
    }

    /// Reads up to the current end; a partial trailing line is ignored.
    perceptual::ParsedLog snapshot() const {
        std::string bytes;
        {
            std::lock_guard lock(mu_);
            bytes = read_file_bytes(path_);
        }
        return perceptual::parse_response_log(bytes);
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    mutable std::mutex mu_;
};

/// Listener sessions over confusion groups. Every listener is assigned
/// every group; the group sequence is shuffled per listener under the
/// service seed, items keep the manifest's presentation order.
class ListeningService {
public:
    ListeningService(std::vector<ConfusionGroup> groups, std::vector<std::string> tokens, std::string log_path,
                     std::uint64_t seed, std::function<std::string()> clock = utc_timestamp_now)
        : groups_(std::move(groups)), log_(std::move(log_path)), clock_(std::move(clock)) {
        for (std::size_t g = 0; g < groups_.size(); ++g)
            for (const auto& it : groups_[g].items) {
                if (!item_group_.emplace(it.item_id, g).second)
                    throw ValidationError("item id '" + it.item_id + "' appears in more than one group");
            }
        for (const auto& tok : tokens) {
            if (tok.empty()) throw ValidationError("empty listener token");
            Session s;
            s.group_order.resize(groups_.size());
            for (std::size_t g = 0; g < groups_.size(); ++g) s.group_order[g] = g;
            Rng rng(mix_seed(seed, fnv1a64(tok)));
            rng.shuffle(s.group_order);
            for (auto g : s.group_order)
                for (const auto& it : groups_[g].items) s.items.push_back(it.item_id);
            sessions_.emplace(tok, std::move(s));
        }
        // Resume from whatever the log already holds.
        for (const auto& r : log_.snapshot().records) {
            auto it = sessions_.find(r.listener_id);
            if (it != sessions_.end() && item_group_.count(r.item_id) && perceptual::valid_option(r.option))
                it->second.answered.insert(r.item_id);
        }
    }

    json session(const std::string& token) const {
        std::lock_guard lock(mu_);
        const auto& s = find_session(token);
        json groups = json::array();
        for (auto g : s.group_order) groups.push_back(groups_[g].pattern);
        return {{"listener_id", token}, {"groups", groups}, {"answered", s.answered.size()},
                {"total", s.items.size()}, {"cursor", cursor(s)}, {"done", cursor(s) == s.items.size()}};
    }

    /// Next unanswered item, or {"done": true}.
    json next(const std::string& token) const {
        std::lock_guard lock(mu_);
        const auto& s = find_session(token);
        const auto c = cursor(s);
        json progress = {{"answered", s.answered.size()}, {"total", s.items.size()}};
        if (c == s.items.size()) return {{"done", true}, {"progress", progress}};
        const auto& item_id = s.items[c];
        const auto& g = groups_[item_group_.at(item_id)];
        auto payload = perceptual::listener_payload(g);
        return {{"done", false},
                {"item_id", item_id},
                {"audio_url", "/audio/" + item_id},
                {"options", payload.at("options")},
                {"progress", progress}};
    }

    /// Validates and appends a response. Resubmissions are appended too;
    /// the tally keeps the latest.
    json respond(const std::string& token, const std::string& item_id, int option) {
        if (!perceptual::valid_option(option))
            throw ValidationError(str_cat("option must be 1, 2, 3 or 4, got ", option));
        {
            std::lock_guard lock(mu_);
            auto& s = find_session(token);
            if (std::find(s.items.begin(), s.items.end(), item_id) == s.items.end())
                throw ValidationError("item '" + item_id + "' is not assigned to this listener");
            log_.append({token, item_id, option, clock_()});
            s.answered.insert(item_id);
        }
        return {{"ok", true}, {"item_id", item_id}};
    }

    json report() const {
        return perceptual::scores_to_json(perceptual::tally(log_.snapshot().records, groups_));
    }

    /// Audio file path of an item.
    std::string audio_path(const std::string& item_id) const {
        auto it = item_group_.find(item_id);
        if (it == item_group_.end()) throw NotFound("unknown item '" + item_id + "'");
        const auto* item = groups_[it->second].find(item_id);
        if (item->audio.empty()) throw NotFound("item '" + item_id + "' has no audio");
        return item->audio;
    }

    const std::vector<ConfusionGroup>& groups() const { return groups_; }
    const ResponseLog& log() const { return log_; }

private:
    struct Session {
        std::vector<std::size_t> group_order;
        std::vector<std::string> items;
        std::set<std::string> answered;
    };

    Session& find_session(const std::string& token) {
        auto it = sessions_.find(token);
        if (it == sessions_.end()) throw NotFound("unknown listener token");
        return it->second;
    }
    const Session& find_session(const std::string& token) const {
        auto it = sessions_.find(token);
        if (it == sessions_.end()) throw NotFound("unknown listener token");
        return it->second;
    }
    static std::size_t cursor(const Session& s) {
        std::size_t i = 0;
        while (i < s.items.size() && s.answered.count(s.items[i])) ++i;
        return i;
    }

    std::vector<ConfusionGroup> groups_;
    std::map<std::string, std::size_t> item_group_;
    std::map<std::string, Session> sessions_;
    ResponseLog log_;
    std::function<std::string()> clock_;
    mutable std::mutex mu_;
};

}  // namespace sppg::service
