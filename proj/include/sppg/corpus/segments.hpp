// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sppg/audio/feature_io.hpp"
#include "sppg/audio/mfcc.hpp"
#include "sppg/common.hpp"
#include "sppg/corpus/inventory.hpp"
#include "sppg/random.hpp"

namespace sppg::corpus {

struct PhoneSegment {
    std::string source_id;
    std::size_t start_sample = 0;
    std::size_t end_sample = 0;
    std::string label;

    bool operator==(const PhoneSegment&) const = default;
};

struct PhnParseResult {
    std::vector<PhoneSegment> segments;
    /// Labels (after folding) absent from the inventory, with counts. Such
    /// segments are excluded from `segments`.
    std::map<std::string, std::size_t> unknown_labels;
    std::size_t dropped_by_folding = 0;
};

/// Parses TIMIT-style `start end label` lines (sample offsets).
inline PhnParseResult parse_phn(std::string_view text, const std::string& source_id,
                                const PhoneInventory& inventory, const FoldingTable& folding,
                                const std::string& name = "<memory>") {
    PhnParseResult res;
    std::size_t lineno = 0;
    std::size_t prev_end = 0;
    bool have_prev = false;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto f = split_ws(line);
        if (f.size() != 3) throw FormatError(str_cat(name, ": malformed line ", lineno, ": expected 'start end label'"));
        long long s = 0, e = 0;
        try {
            std::size_t ps = 0, pe = 0;
            s = std::stoll(f[0], &ps);
            e = std::stoll(f[1], &pe);
            if (ps != f[0].size() || pe != f[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw FormatError(str_cat(name, ": malformed line ", lineno, ": non-integer sample offset"));
        }
        if (s < 0) throw ValidationError(str_cat(name, ": negative start, line ", lineno));
        if (e <= s) throw ValidationError(str_cat(name, ": end before start, line ", lineno));
        const auto start = static_cast<std::size_t>(s);
        const auto end = static_cast<std::size_t>(e);
        if (have_prev && start < prev_end)
            throw ValidationError(str_cat(name, ": overlapping or unordered span, line ", lineno));
        prev_end = end;
        have_prev = true;

        auto folded = folding.fold(f[2]);
        if (!folded) {
            ++res.dropped_by_folding;
            continue;
        }
        if (!inventory.contains(*folded)) {
            ++res.unknown_labels[*folded];
            continue;
        }
        res.segments.push_back({source_id, start, end, *folded});
    }
    return res;
}

inline PhnParseResult load_phn(const std::string& path, const std::string& source_id,
                               const PhoneInventory& inventory, const FoldingTable& folding) {
    return parse_phn(read_file_bytes(path), source_id, inventory, folding, path);
}

struct SegmentFeatureSequence {
    std::string segment_id;
    std::string source_id;
    std::size_t start_sample = 0;
    std::size_t end_sample = 0;
    std::size_t label = 0;
    int n_coeffs = 0;
    std::vector<double> frames;  // S x n_coeffs, row-major

    std::size_t length() const { return n_coeffs == 0 ? 0 : frames.size() / static_cast<std::size_t>(n_coeffs); }
};

inline std::string make_segment_id(const std::string& source_id, std::size_t start) {
    return str_cat(source_id, ':', start);
}

struct SliceResult {
    std::vector<SegmentFeatureSequence> segments;
    std::size_t dropped_segments = 0;  // segments that received no frame
    std::size_t unassigned_frames = 0;  // frames whose center lies in no segment
};

/// Assigns each frame to the segment whose [start, end) contains its center.
inline SliceResult slice_segments(const audio::FrameFeatureMatrix& features,
                                  const std::vector<PhoneSegment>& segs,
                                  const PhoneInventory& inventory) {
    SliceResult res;
    const std::size_t T = features.frames();
    std::vector<bool> used(T, false);
    for (const auto& seg : segs) {
        if (!seg.source_id.empty() && !features.source_id.empty() && seg.source_id != features.source_id)
            throw ValidationError("segment source '" + seg.source_id + "' does not match features '" +
                                  features.source_id + "'");
        auto lo = std::lower_bound(features.frame_centers.begin(), features.frame_centers.end(), seg.start_sample);
        auto hi = std::lower_bound(lo, features.frame_centers.end(), seg.end_sample);
        const auto b = static_cast<std::size_t>(lo - features.frame_centers.begin());
        const auto e = static_cast<std::size_t>(hi - features.frame_centers.begin());
        if (e <= b) {
            ++res.dropped_segments;
            continue;
        }
        SegmentFeatureSequence s;
        s.source_id = features.source_id;
        s.segment_id = make_segment_id(features.source_id, seg.start_sample);
        s.start_sample = seg.start_sample;
        s.end_sample = seg.end_sample;
        s.label = inventory.index_of(seg.label);
        s.n_coeffs = features.n_coeffs;
        s.frames.assign(features.row(b), features.row(b) + (e - b) * static_cast<std::size_t>(features.n_coeffs));
        for (std::size_t i = b; i < e; ++i) used[i] = true;
        res.segments.push_back(std::move(s));
    }
    res.unassigned_frames = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
    return res;
}

enum class CorpusTag { L1, L2 };
enum class Split { Train, Validation, Eval };

inline std::string to_string(CorpusTag t) { return t == CorpusTag::L1 ? "L1" : "L2"; }
inline std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Eval: return "eval";
    }
    return "?";
}

inline CorpusTag parse_corpus_tag(const std::string& s) {
    if (s == "L1") return CorpusTag::L1;
    if (s == "L2") return CorpusTag::L2;
    throw ValidationError("unknown corpus tag '" + s + "' (expected L1 or L2)");
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "eval") return Split::Eval;
    throw ValidationError("unknown split '" + s + "' (expected train, validation or eval)");
}

struct SegmentItem {
    SegmentFeatureSequence seq;
    CorpusTag corpus = CorpusTag::L1;
    Split split = Split::Train;
};

/// Labeled segment collection; may mix corpora (combined L1+L2 training).
class SegmentDataset {
public:
    SegmentDataset() = default;
    explicit SegmentDataset(PhoneInventory inventory) : inventory_(std::move(inventory)) {}

    const PhoneInventory& inventory() const { return inventory_; }
    const std::vector<SegmentItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const SegmentItem& operator[](std::size_t i) const { return items_[i]; }

    void add(SegmentItem item) {
        if (item.seq.label >= inventory_.size())
            throw ValidationError(str_cat("label index ", item.seq.label, " outside inventory of ", inventory_.size()));
        if (item.seq.length() == 0) throw ValidationError("segment '" + item.seq.segment_id + "' has no frames");
        for (double v : item.seq.frames)
            if (!std::isfinite(v)) throw ValidationError("segment '" + item.seq.segment_id + "' has non-finite values");
        if (!ids_.insert(item.seq.segment_id).second)
            throw ValidationError("duplicate segment_id '" + item.seq.segment_id + "'");
        items_.push_back(std::move(item));
    }

    void append(const SegmentDataset& other) {
        if (!(other.inventory_ == inventory_)) throw ValidationError("cannot merge datasets with different inventories");
        for (const auto& it : other.items_) add(it);
    }

    SegmentDataset filter(const std::function<bool(const SegmentItem&)>& keep) const {
        SegmentDataset out(inventory_);
        for (const auto& it : items_)
            if (keep(it)) out.add(it);
        return out;
    }

private:
    PhoneInventory inventory_;
    std::vector<SegmentItem> items_;
    std::set<std::string> ids_;
};

/// Speaker key for an utterance id of the form "speaker/utterance";
/// without a '/', the utterance itself is the grouping unit.
inline std::string grouping_key(const std::string& source_id) {
    auto pos = source_id.find('/');
    return pos == std::string::npos ? source_id : source_id.substr(0, pos);
}

/// Holds out round(fraction * groups) speaker (or utterance) groups.
inline std::pair<SegmentDataset, SegmentDataset> split_train_validation(const SegmentDataset& ds, double fraction,
                                                                         std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
    std::vector<std::string> groups;
    {
        std::set<std::string> seen;
        for (const auto& it : ds.items()) {
            auto k = grouping_key(it.seq.source_id);
            if (seen.insert(k).second) groups.push_back(k);
        }
    }
    std::sort(groups.begin(), groups.end());
    if (groups.size() < 2)
        throw DataError(str_cat("dataset too small to split: ", groups.size(), " speaker/utterance group(s)"));
    auto n_valid = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(groups.size())));
    n_valid = std::clamp<std::size_t>(n_valid, 1, groups.size() - 1);

    Rng rng(seed);
    rng.shuffle(groups);
    std::set<std::string> valid(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_valid));

    SegmentDataset train(ds.inventory()), validation(ds.inventory());
    for (const auto& it : ds.items()) {
        SegmentItem copy = it;
        if (valid.count(grouping_key(it.seq.source_id))) {
            copy.split = Split::Validation;
            validation.add(std::move(copy));
        } else {
            train.add(std::move(copy));
        }
    }
    return {std::move(train), std::move(validation)};
}

// Dataset manifest: TSV segment_id, source_id, start, end, label, split,
// corpus_tag. The first line records the frame geometry used to rebuild
// frame centers, and the path of the feature manifest the rows refer to.

struct DatasetManifestRow {
    std::string segment_id;
    std::string source_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string label;
    Split split = Split::Train;
    CorpusTag corpus = CorpusTag::L1;
};

struct DatasetManifest {
    int window_samples = 0;
    int hop_samples = 0;
    std::string feature_manifest;
    std::vector<DatasetManifestRow> rows;
};

inline std::string format_dataset_manifest(const DatasetManifest& m) {
    std::string out = str_cat("#window_samples=", m.window_samples, "\thop_samples=", m.hop_samples,
                              "\tfeatures=", m.feature_manifest, "\n");
    out += "segment_id\tsource_id\tstart\tend\tlabel\tsplit\tcorpus_tag\n";
    for (const auto& r : m.rows)
        out += str_cat(r.segment_id, '\t', r.source_id, '\t', r.start, '\t', r.end, '\t', r.label, '\t',
                       to_string(r.split), '\t', to_string(r.corpus), '\n');
    return out;
}

inline DatasetManifest parse_dataset_manifest(std::string_view text, const std::string& name) {
    DatasetManifest m;
    bool have_header = false;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        if (raw.empty()) continue;
        if (raw[0] == '#') {
            for (const auto& kv : split(std::string_view(raw).substr(1), '\t')) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
                if (k == "window_samples") m.window_samples = std::stoi(v);
                else if (k == "hop_samples") m.hop_samples = std::stoi(v);
                else if (k == "features") m.feature_manifest = v;
            }
            continue;
        }
        if (!have_header) {
            have_header = true;
            if (raw.rfind("segment_id\t", 0) == 0) continue;
        }
        auto f = split(raw, '\t');
        if (f.size() != 7) throw FormatError(str_cat(name, ":", lineno, ": expected 7 tab-separated fields"));
        DatasetManifestRow r;
        r.segment_id = f[0];
        r.source_id = f[1];
        try {
            r.start = std::stoul(f[2]);
            r.end = std::stoul(f[3]);
        } catch (const std::exception&) {
            throw FormatError(str_cat(name, ":", lineno, ": bad sample offsets"));
        }
        r.label = f[4];
        r.split = parse_split(f[5]);
        r.corpus = parse_corpus_tag(f[6]);
        m.rows.push_back(std::move(r));
    }
    if (m.window_samples <= 0 || m.hop_samples <= 0)
        throw FormatError(name + ": missing frame geometry header (#window_samples=..\\thop_samples=..)");
    return m;
}

inline std::filesystem::path resolve_relative(const std::filesystem::path& base_file, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return path;
    return base_file.parent_path() / path;
}

/// Rebuilds a dataset from its manifest by re-slicing the referenced
/// feature files.
inline SegmentDataset load_dataset(const std::string& manifest_path, const PhoneInventory& inventory) {
    const auto m = parse_dataset_manifest(read_file_bytes(manifest_path), manifest_path);
    if (m.feature_manifest.empty()) throw FormatError(manifest_path + ": header names no feature manifest");
    const auto fm_path = resolve_relative(manifest_path, m.feature_manifest);
    std::map<std::string, std::string> feature_files;
    for (const auto& e : audio::read_feature_manifest(fm_path.string()))
        feature_files[e.source_id] = resolve_relative(fm_path, e.path).string();

    std::map<std::string, std::vector<const DatasetManifestRow*>> by_source;
    std::vector<std::string> order;
    for (const auto& r : m.rows) {
        if (!by_source.count(r.source_id)) order.push_back(r.source_id);
        by_source[r.source_id].push_back(&r);
    }
    SegmentDataset ds(inventory);
    for (const auto& src : order) {
        auto it = feature_files.find(src);
        if (it == feature_files.end()) throw DataError("no features for source '" + src + "' in " + fm_path.string());
        const auto feats = audio::read_features(it->second, src, m.window_samples, m.hop_samples);
        std::vector<PhoneSegment> segs;
        for (const auto* r : by_source[src]) segs.push_back({src, r->start, r->end, r->label});
        auto sliced = slice_segments(feats, segs, inventory);
        if (sliced.dropped_segments != 0)
            throw DataError(str_cat(manifest_path, ": ", sliced.dropped_segments, " segment(s) of '", src,
                                    "' no longer receive frames"));
        const auto& rows = by_source[src];
        for (std::size_t i = 0; i < sliced.segments.size(); ++i) {
            auto seq = std::move(sliced.segments[i]);
            seq.segment_id = rows[i]->segment_id;
            ds.add({std::move(seq), rows[i]->corpus, rows[i]->split});
        }
    }
    return ds;
}

}  // namespace sppg::corpus
