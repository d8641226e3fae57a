// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "sppg/audio/feature_io.hpp"
#include "sppg/audio/mfcc.hpp"
#include "sppg/audio/wav.hpp"
#include "sppg/corpus/inventory.hpp"
#include "sppg/corpus/segments.hpp"
#include "sppg/discovery/noncat.hpp"
#include "sppg/model/classifier.hpp"
#include "sppg/model/sppg.hpp"
#include "sppg/model/train.hpp"
#include "sppg/perceptual/groups.hpp"
#include "sppg/perceptual/tally.hpp"
#include "sppg/pipeline/config.hpp"
#include "sppg/service/http.hpp"
#include "sppg/service/listening_service.hpp"

namespace sppg::pipeline {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace cli_detail {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;  // section.key=value
    std::optional<double> theta;
    std::optional<double> confidence;
    std::optional<std::size_t> min_support;
    std::optional<std::uint64_t> seed;
    std::string out;
};

class StageTimer {
public:
    StageTimer(std::ostream& log, std::string stage) : log_(log), stage_(std::move(stage)) {}
    void done(const std::string& summary) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        log_ << "[sppg] " << stage_ << ": " << summary << " (" << fixed(secs, 2) << " s)\n";
    }

private:
    std::ostream& log_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw UsageError(std::string("missing required ") + what);
    if (!fs::exists(path)) throw DataError(std::string(what) + " not found: " + path);
}

inline PipelineConfig resolve_config(const Common& c) {
    PipelineConfig cfg;
    if (const char* wd = std::getenv("SPPG_WORKDIR"); wd && *wd) cfg.work_dir = wd;
    if (!c.config_path.empty()) {
        require_file(c.config_path, "config file");
        cfg.apply(ConfigFile::load(c.config_path).values());
    }
    for (const auto& kv : c.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + kv + "'");
        cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (c.theta) cfg.theta = *c.theta;
    if (c.confidence) cfg.confidence = *c.confidence;
    if (c.min_support) cfg.min_support = *c.min_support;
    cfg.validate();
    return cfg;
}

inline corpus::PhoneInventory load_inventory(const PipelineConfig& cfg) {
    if (cfg.inventory == "default") return corpus::default_inventory();
    require_file(cfg.inventory, "inventory file");
    return corpus::read_inventory(cfg.inventory);
}

inline corpus::FoldingTable load_folding(const PipelineConfig& cfg) {
    if (cfg.folding == "default") return corpus::default_folding();
    require_file(cfg.folding, "folding file");
    return corpus::read_folding(cfg.folding);
}

inline model::ModelConfig model_config(const PipelineConfig& cfg, const corpus::PhoneInventory& inv) {
    auto m = cfg.model;
    m.inventory_size = inv.size();
    m.n_coeffs = static_cast<std::size_t>(cfg.features.n_coeffs);
    return m;
}

inline std::string out_path(const Common& c, const PipelineConfig& cfg, const std::string& fallback) {
    return c.out.empty() ? (fs::path(cfg.work_dir) / fallback).string() : c.out;
}

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

inline void write_resolved(const fs::path& dir, const PipelineConfig& cfg) {
    ensure_dir(dir);
    write_file_bytes((dir / "resolved.cfg").string(), cfg.to_text());
}

/// `key<TAB>path` list; relative paths resolve against the list's directory.
inline std::vector<std::pair<std::string, std::string>> read_pair_list(const std::string& path, const char* what) {
    require_file(path, what);
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t lineno = 0;
    for (const auto& raw : split(read_file_bytes(path), '\n')) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto f = split(line, '\t');
        if (f.size() != 2) throw FormatError(str_cat(path, ":", lineno, ": expected id<TAB>path"));
        out.emplace_back(f[0], corpus::resolve_relative(path, f[1]).string());
    }
    return out;
}

inline std::string file_stem_for(const std::string& id) {
    std::string s = id;
    for (auto& ch : s)
        if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
    return s;
}

inline corpus::SegmentDataset load_datasets(const std::vector<std::string>& paths,
                                            const corpus::PhoneInventory& inv) {
    if (paths.empty()) throw UsageError("at least one --data manifest is required");
    corpus::SegmentDataset ds(inv);
    for (const auto& p : paths) {
        require_file(p, "dataset manifest");
        ds.append(corpus::load_dataset(p, inv));
    }
    return ds;
}

inline model::SegmentClassifier<float> load_model(const std::string& path, const model::ModelConfig& mcfg) {
    require_file(path, "model checkpoint");
    model::SegmentClassifier<float> m(mcfg);
    m.load_params(nn::decode_checkpoint(read_file_bytes(path), mcfg.fingerprint(), path));
    return m;
}

/// "L2:eval", "L1:train", "L2", "eval" or "all".
inline std::function<bool(const corpus::SegmentItem&)> selector(const std::string& spec) {
    if (spec == "all" || spec.empty()) return [](const corpus::SegmentItem&) { return true; };
    std::optional<corpus::CorpusTag> tag;
    std::optional<corpus::Split> sp;
    for (const auto& part : split(spec, ':')) {
        if (part == "L1" || part == "L2") tag = corpus::parse_corpus_tag(part);
        else sp = corpus::parse_split(part);
    }
    return [tag, sp](const corpus::SegmentItem& it) {
        return (!tag || it.corpus == *tag) && (!sp || it.split == *sp);
    };
}

inline std::vector<perceptual::ConfusionGroup> load_groups(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("groups directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<perceptual::ConfusionGroup> groups;
    for (const auto& f : files) {
        auto g = perceptual::group_from_json(nlohmann::json::parse(read_file_bytes(f.string())));
        for (auto& it : g.items)
            if (!it.audio.empty()) it.audio = corpus::resolve_relative(f, it.audio).string();
        groups.push_back(std::move(g));
    }
    return groups;
}

// --------------------------------------------------------------- commands

inline int cmd_featurize(const Common& c, const std::string& list, std::ostream& log) {
    StageTimer timer(log, "featurize");
    auto cfg = resolve_config(c);
    const fs::path out = out_path(c, cfg, "features");
    ensure_dir(out);
    audio::MfccExtractor ex(cfg.features, cfg.sample_rate);
    std::string manifest;
    std::size_t n = 0;
    for (const auto& [id, wav_path] : read_pair_list(list, "wav list")) {
        require_file(wav_path, "wav file");
        auto sig = audio::read_wav(wav_path);
        if (sig.sample_rate_hz != cfg.sample_rate)
            throw DataError(str_cat(wav_path, ": sample rate ", sig.sample_rate_hz, " differs from configured ",
                                    cfg.sample_rate));
        auto feats = ex.compute(sig, id);
        const std::string fname = file_stem_for(id) + ".spg";
        audio::write_features((out / fname).string(), feats);
        manifest += audio::manifest_line({id, fname, feats.frames()});
        ++n;
    }
    write_file_bytes((out / "features.manifest").string(), manifest);
    write_resolved(out, cfg);
    timer.done(str_cat(n, " utterance(s) -> ", (out / "features.manifest").string()));
    return kExitOk;
}

inline int cmd_segments(const Common& c, const std::string& features, const std::string& alignments,
                        const std::string& tag, const std::string& split_name, std::ostream& log) {
    StageTimer timer(log, "segments");
    auto cfg = resolve_config(c);
    const auto inv = load_inventory(cfg);
    const auto folding = load_folding(cfg);
    const auto corpus_tag = corpus::parse_corpus_tag(tag);
    const auto split_v = corpus::parse_split(split_name);
    require_file(features, "feature manifest");
    const fs::path out_file = out_path(c, cfg, "segments.tsv");
    ensure_dir(out_file.parent_path().empty() ? fs::path(".") : out_file.parent_path());

    audio::MfccExtractor ex(cfg.features, cfg.sample_rate);
    std::map<std::string, std::string> feature_files;
    for (const auto& e : audio::read_feature_manifest(features))
        feature_files[e.source_id] = corpus::resolve_relative(features, e.path).string();

    corpus::DatasetManifest m;
    m.window_samples = ex.window_samples();
    m.hop_samples = ex.hop_samples();
    const auto out_dir = fs::absolute(out_file).parent_path();
    m.feature_manifest = fs::relative(fs::absolute(features), out_dir).generic_string();

    std::size_t dropped = 0, unassigned = 0, folded_out = 0;
    std::map<std::string, std::size_t> unknown;
    for (const auto& [id, phn_path] : read_pair_list(alignments, "alignment list")) {
        auto it = feature_files.find(id);
        if (it == feature_files.end()) throw DataError("no features for source '" + id + "' in " + features);
        require_file(phn_path, "alignment file");
        auto parsed = corpus::load_phn(phn_path, id, inv, folding);
        folded_out += parsed.dropped_by_folding;
        for (const auto& [lab, k] : parsed.unknown_labels) unknown[lab] += k;
        auto feats = audio::read_features(it->second, id, m.window_samples, m.hop_samples);
        auto sliced = corpus::slice_segments(feats, parsed.segments, inv);
        dropped += sliced.dropped_segments;
        unassigned += sliced.unassigned_frames;
        for (const auto& s : sliced.segments)
            m.rows.push_back({s.segment_id, id, s.start_sample, s.end_sample, inv.symbol(s.label), split_v, corpus_tag});
    }
    write_file_bytes(out_file.string(), corpus::format_dataset_manifest(m));
    write_resolved(out_dir, cfg);
    for (const auto& [lab, k] : unknown) log << "[sppg] segments: unknown label '" << lab << "' x" << k << "\n";
    timer.done(str_cat(m.rows.size(), " segment(s), ", dropped, " dropped (no frame), ", folded_out,
                       " deleted by folding, ", unassigned, " frame(s) outside segments"));
    return kExitOk;
}

inline int cmd_train(const Common& c, const std::vector<std::string>& data, std::ostream& log) {
    StageTimer timer(log, "train");
    auto cfg = resolve_config(c);
    if (c.seed) cfg.train.seed = *c.seed;
    const auto inv = load_inventory(cfg);
    const auto all = load_datasets(data, inv);
    const auto wanted = selector(cfg.train_corpus == "L1+L2" ? std::string("train") : cfg.train_corpus + ":train");
    const auto pool = all.filter(wanted);
    if (pool.empty()) throw DataError("no training segments match corpus selection '" + cfg.train_corpus + "'");
    auto [train_ds, valid_ds] = corpus::split_train_validation(pool, model::kValidationFraction, cfg.split_seed);
    log << "[sppg] train: " << train_ds.size() << " training / " << valid_ds.size() << " validation segments\n";
    const auto mcfg = model_config(cfg, inv);
    auto res = model::train(train_ds, valid_ds, mcfg, cfg.train, [&](const model::EpochRecord& e) {
        log << "[sppg] train: epoch " << e.epoch << " loss " << fixed(e.train_loss, 4) << " acc "
            << fixed(e.train_accuracy, 4) << " | valid loss " << fixed(e.valid_loss, 4) << " acc "
            << fixed(e.valid_accuracy, 4) << "\n";
    });
    const fs::path out = out_path(c, cfg, "model");
    ensure_dir(out);
    write_file_bytes((out / "model.spgw").string(), nn::encode_checkpoint(res.model.params(), mcfg.fingerprint()));
    write_file_bytes((out / "training_log.tsv").string(), res.log.to_tsv());
    write_resolved(out, cfg);
    timer.done(str_cat("best epoch ", res.log.best_epoch, " of ", res.log.epochs.size(), " -> ",
                       (out / "model.spgw").string()));
    return kExitOk;
}

inline int cmd_eval(const Common& c, const std::string& model_path, const std::vector<std::string>& data,
                    const std::vector<std::string>& train_data, std::string name, std::ostream& out,
                    std::ostream& log) {
    StageTimer timer(log, "eval");
    auto cfg = resolve_config(c);
    const auto inv = load_inventory(cfg);
    const auto m = load_model(model_path, model_config(cfg, inv));
    const auto eval_ds = load_datasets(data, inv).filter(selector("eval"));
    if (eval_ds.empty()) throw DataError("no evaluation segments (split=eval) in the given manifests");
    const auto r = model::evaluate(m, eval_ds, cfg.train.threads);
    model::RecognitionRow row;
    row.training_set = name.empty() ? cfg.train_corpus : name;
    row.l1_eval = r.corpus_rate(corpus::CorpusTag::L1);
    row.l2_eval = r.corpus_rate(corpus::CorpusTag::L2);
    if (!train_data.empty()) {
        const auto tr = load_datasets(train_data, inv).filter(selector("train"));
        if (!tr.empty()) row.train_rate = model::evaluate(m, tr, cfg.train.threads).rate();
    }
    const auto table = model::format_recognition_table({row});
    out << table;
    if (!c.out.empty()) {
        ensure_dir(fs::absolute(c.out).parent_path());
        write_file_bytes(c.out, table);
    }
    timer.done(str_cat(r.total, " segment(s), overall ", fixed(100.0 * r.rate(), 2), "%"));
    return kExitOk;
}

inline int cmd_sppg(const Common& c, const std::string& model_path, const std::vector<std::string>& data,
                    const std::string& select, std::ostream& log) {
    StageTimer timer(log, "sppg");
    auto cfg = resolve_config(c);
    const auto inv = load_inventory(cfg);
    const auto m = load_model(model_path, model_config(cfg, inv));
    const auto ds = load_datasets(data, inv).filter(selector(select.empty() ? cfg.discover_on : select));
    const auto records = model::batch_sppg(m, ds, cfg.train.threads);
    const std::string out = out_path(c, cfg, "segments.sppg");
    ensure_dir(fs::absolute(out).parent_path());
    write_file_bytes(out, model::format_sppg_file(records, inv));
    timer.done(str_cat(records.size(), " record(s) -> ", out));
    return kExitOk;
}

inline int cmd_discover(const Common& c, const std::string& sppg_path, std::ostream& out, std::ostream& log) {
    StageTimer timer(log, "discover");
    auto cfg = resolve_config(c);
    require_file(sppg_path, "SPPG file");
    const auto file = model::read_sppg_file(sppg_path);
    std::vector<discovery::SegmentVerdict> verdicts;
    for (const auto& s : file.records) verdicts.push_back(discovery::classify_segment(s, file.inventory, cfg.theta));
    const auto summary = discovery::aggregate_patterns(verdicts, cfg.min_support);
    const fs::path dir = out_path(c, cfg, "discovery");
    ensure_dir(dir);
    const auto report = discovery::format_pattern_report(summary);
    write_file_bytes((dir / "patterns.tsv").string(), report);
    write_file_bytes((dir / "verdicts.jsonl").string(), discovery::format_verdicts_jsonl(verdicts));
    write_resolved(dir, cfg);
    out << report;
    timer.done(str_cat(summary.patterns.size(), " pattern(s) at theta ", shortest(cfg.theta), ", ",
                       summary.under_supported.size(), " under-supported"));
    return kExitOk;
}

inline int cmd_compare(const Common& c, const std::string& current, const std::string& reference,
                       std::ostream& out, std::ostream& log) {
    StageTimer timer(log, "compare-sets");
    require_file(current, "current pattern list");
    require_file(reference, "reference pattern list");
    const auto d = discovery::compare_pattern_sets(discovery::parse_pattern_list(read_file_bytes(current)),
                                                   discovery::parse_pattern_list(read_file_bytes(reference)));
    const auto report = discovery::format_diff_report(d);
    out << report;
    if (!c.out.empty()) write_file_bytes(c.out, report);
    timer.done(str_cat(d.additional.size(), " additional / ", d.existing.size(), " existing / ", d.missing.size(),
                       " missing"));
    return kExitOk;
}

inline int cmd_groups(const Common& c, const std::string& sppg_path, const std::vector<std::string>& data,
                      const std::string& audio_list, std::ostream& log) {
    StageTimer timer(log, "groups");
    auto cfg = resolve_config(c);
    if (c.seed) cfg.group_seed = *c.seed;
    require_file(sppg_path, "SPPG file");
    const auto file = model::read_sppg_file(sppg_path);
    const auto& inv = file.inventory;

    std::vector<discovery::SegmentVerdict> verdicts;
    for (const auto& s : file.records) verdicts.push_back(discovery::classify_segment(s, inv, cfg.theta));
    const auto summary = discovery::aggregate_patterns(verdicts, cfg.min_support);

    // Segment spans, for clip cutting.
    std::map<std::string, corpus::DatasetManifestRow> spans;
    for (const auto& p : data) {
        require_file(p, "dataset manifest");
        for (auto& r : corpus::parse_dataset_manifest(read_file_bytes(p), p).rows) spans[r.segment_id] = r;
    }
    std::map<std::string, std::string> wavs;
    if (!audio_list.empty())
        for (auto& [id, path] : read_pair_list(audio_list, "wav list")) wavs[id] = path;

    const fs::path dir = out_path(c, cfg, "groups");
    ensure_dir(dir);
    ensure_dir(dir / "clips");
    std::map<std::string, audio::AudioSignal> wav_cache;
    auto clip_for = [&](const std::string& segment_id, const std::string& item_id) -> std::string {
        auto sp = spans.find(segment_id);
        if (sp == spans.end()) return {};
        auto w = wavs.find(sp->second.source_id);
        if (w == wavs.end()) return {};
        auto& sig = wav_cache[w->second];
        if (sig.samples.empty()) sig = audio::read_wav(w->second);
        const auto ctx = static_cast<std::size_t>(std::lround(cfg.context_ms * sig.sample_rate_hz / 1000.0));
        const auto fade = static_cast<std::size_t>(std::lround(cfg.fade_ms * sig.sample_rate_hz / 1000.0));
        const std::string rel = "clips/" + file_stem_for(item_id) + ".wav";
        audio::write_wav((dir / rel).string(), audio::cut_clip(sig, sp->second.start, sp->second.end, ctx, fade));
        return rel;
    };
    auto pool_for_phone = [&](const std::string& phone) {
        std::vector<perceptual::PoolEntry> pool;
        const auto idx = inv.index_of(phone);
        for (const auto& s : file.records)
            if (s.probs[idx] >= cfg.confidence) pool.push_back({s.segment_id, ""});
        return pool;
    };

    std::size_t built = 0;
    for (const auto& p : summary.patterns) {
        if (p.members.size() != 2) {
            log << "[sppg] groups: skipping " << p.name << " (" << p.members.size() << " members)\n";
            continue;
        }
        std::vector<perceptual::PoolEntry> nc;
        for (const auto& id : p.support_segments) nc.push_back({id, ""});
        try {
            auto g = perceptual::build_group(p.name, nc, pool_for_phone(p.members[0]), pool_for_phone(p.members[1]),
                                             cfg.group_seed);
            for (auto& it : g.items) it.audio = clip_for(it.segment_id, it.item_id);
            write_file_bytes((dir / (p.name + ".json")).string(), perceptual::group_to_json(g).dump(2) + "\n");
            ++built;
        } catch (const ShortageError& e) {
            log << "[sppg] groups: skipping " << p.name << ": " << e.what() << "\n";
        }
    }
    write_resolved(dir, cfg);
    timer.done(str_cat(built, " group(s) -> ", dir.string()));
    return kExitOk;
}

inline int cmd_report(const Common& c, const std::string& groups_dir, const std::string& log_path, bool svg,
                      std::ostream& out, std::ostream& log) {
    StageTimer timer(log, "report");
    auto cfg = resolve_config(c);
    const auto groups = load_groups(groups_dir);
    require_file(log_path, "response log");
    const auto parsed = perceptual::parse_response_log(read_file_bytes(log_path));
    const auto scores = perceptual::tally(parsed.records, groups);
    const fs::path dir = out_path(c, cfg, "report");
    ensure_dir(dir);
    const auto table = perceptual::format_option_table(scores);
    write_file_bytes((dir / "option_table.tsv").string(), table);
    write_file_bytes((dir / "class_table.tsv").string(), perceptual::format_class_table(scores));
    write_file_bytes((dir / "scores.json").string(), perceptual::scores_to_json(scores).dump(2) + "\n");
    if (svg) {
        ensure_dir(dir / "pies");
        for (const auto& p : scores.patterns)
            for (auto cls : {perceptual::TrueClass::NonCat, perceptual::TrueClass::CatP1, perceptual::TrueClass::CatP2}) {
                auto it = p.by_class.find(cls);
                const perceptual::OptionCounts oc = it == p.by_class.end() ? perceptual::OptionCounts{} : it->second;
                write_file_bytes((dir / "pies" / (p.pattern + "." + perceptual::to_string(cls) + ".svg")).string(),
                                 perceptual::pie_svg(p.pattern + " / " + perceptual::to_string(cls), oc));
            }
    }
    out << table;
    timer.done(str_cat(scores.accepted, " response(s), ", scores.rejected_unknown_item + scores.rejected_invalid_option,
                       " rejected, ", parsed.malformed_lines, " malformed line(s)"));
    return kExitOk;
}

inline int cmd_serve(const Common& c, const std::string& groups_dir, const std::string& tokens_path,
                     const std::string& log_path, const std::string& host, int port, const std::string& static_dir,
                     std::ostream& log) {
    auto cfg = resolve_config(c);
    if (c.seed) cfg.service_seed = *c.seed;
    auto groups = load_groups(groups_dir);
    require_file(tokens_path, "token file");
    std::vector<std::string> tokens;
    for (const auto& raw : split(read_file_bytes(tokens_path), '\n')) {
        auto t = trim(raw);
        if (!t.empty() && t[0] != '#') tokens.push_back(t);
    }
    if (log_path.empty()) throw UsageError("--log is required");
    service::ListeningService svc(std::move(groups), tokens, log_path, cfg.service_seed);
    httplib::Server server;
    service::mount_routes(server, svc, static_dir);
    log << "[sppg] serve: " << svc.groups().size() << " group(s), " << tokens.size() << " listener(s) on http://"
        << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw DataError(str_cat("cannot listen on ", host, ":", port));
    return kExitOk;
}

}  // namespace cli_detail

/// Entry point of the `sppg` tool. Returns 0 on success, 1 on usage errors
/// and 2 on data errors.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    using namespace cli_detail;
    CLI::App app{"Segmental phonetic posterior-gram pipeline for non-category discovery", "sppg"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", c.config_path, "Configuration file (sectioned key = value)");
        sub->add_option("--set", c.overrides, "Override a configuration key: section.key=value");
        sub->add_option("--out", c.out, "Output location");
    };
    auto add_discovery = [&](CLI::App* sub) {
        sub->add_option("--theta", c.theta, "Peak threshold");
        sub->add_option("--min-support", c.min_support, "Minimum segments per reported pattern");
    };

    std::string list, features, alignments, tag = "L1", split_name = "train", model_path, sppg_path, select,
                current, reference, audio_list, groups_dir, log_path, tokens, host = "127.0.0.1", static_dir, name;
    std::vector<std::string> data, train_data;
    int port = 8080;
    bool svg = false;

    auto* featurize = app.add_subcommand("featurize", "Compute MFCC feature files from WAV audio");
    add_common(featurize);
    featurize->add_option("--list", list, "source_id<TAB>wav path list")->required();

    auto* segments = app.add_subcommand("segments", "Slice features into phone segments using alignments");
    add_common(segments);
    segments->add_option("--features", features, "Feature manifest")->required();
    segments->add_option("--alignments", alignments, "source_id<TAB>.PHN path list")->required();
    segments->add_option("--corpus-tag", tag, "L1 or L2");
    segments->add_option("--split", split_name, "train or eval");

    auto* train = app.add_subcommand("train", "Train the segment classifier");
    add_common(train);
    train->add_option("--data", data, "Dataset manifest (repeatable)")->required();
    train->add_option("--seed", c.seed, "Training seed");

    auto* eval = app.add_subcommand("eval", "Segment-level recognition rates");
    add_common(eval);
    eval->add_option("--model", model_path, "Model checkpoint")->required();
    eval->add_option("--data", data, "Dataset manifest with eval segments (repeatable)")->required();
    eval->add_option("--train-data", train_data, "Training manifests, for the training-set rate");
    eval->add_option("--name", name, "Training-set label for the output row");

    auto* sppg = app.add_subcommand("sppg", "Write segmental posterior-grams");
    add_common(sppg);
    sppg->add_option("--model", model_path, "Model checkpoint")->required();
    sppg->add_option("--data", data, "Dataset manifest (repeatable)")->required();
    sppg->add_option("--select", select, "Segment selection: all, L1, L2, train, eval or corpus:split");

    auto* discover = app.add_subcommand("discover", "Find multi-peak SPPGs and aggregate patterns");
    add_common(discover);
    add_discovery(discover);
    discover->add_option("--sppg", sppg_path, "SPPG file")->required();

    auto* compare = app.add_subcommand("compare-sets", "Compare two pattern name lists");
    add_common(compare);
    compare->add_option("--current", current, "Current pattern list")->required();
    compare->add_option("--reference", reference, "Reference pattern list")->required();

    auto* groups = app.add_subcommand("groups", "Build listening-test confusion groups");
    add_common(groups);
    add_discovery(groups);
    groups->add_option("--confidence", c.confidence, "Exemplar confidence for categorical clips");
    groups->add_option("--seed", c.seed, "Sampling seed");
    groups->add_option("--sppg", sppg_path, "SPPG file")->required();
    groups->add_option("--data", data, "Dataset manifests giving segment spans");
    groups->add_option("--audio", audio_list, "source_id<TAB>wav path list for clip cutting");

    auto* serve = app.add_subcommand("serve", "Run the listening-test HTTP service");
    add_common(serve);
    serve->add_option("--groups", groups_dir, "Directory of group manifests")->required();
    serve->add_option("--tokens", tokens, "Listener tokens, one per line")->required();
    serve->add_option("--log", log_path, "Append-only response log")->required();
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--static", static_dir, "Static UI assets");
    serve->add_option("--seed", c.seed, "Per-listener ordering seed");

    auto* report = app.add_subcommand("report", "Tally listening-test responses");
    add_common(report);
    report->add_option("--groups", groups_dir, "Directory of group manifests")->required();
    report->add_option("--log", log_path, "Response log")->required();
    report->add_flag("--svg", svg, "Also write pie charts");

    std::vector<const char*> argv{"sppg"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "sppg: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*featurize) return cmd_featurize(c, list, err);
        if (*segments) return cmd_segments(c, features, alignments, tag, split_name, err);
        if (*train) return cmd_train(c, data, err);
        if (*eval) return cmd_eval(c, model_path, data, train_data, name, out, err);
        if (*sppg) return cmd_sppg(c, model_path, data, select, err);
        if (*discover) return cmd_discover(c, sppg_path, out, err);
        if (*compare) return cmd_compare(c, current, reference, out, err);
        if (*groups) return cmd_groups(c, sppg_path, data, audio_list, err);
        if (*serve) return cmd_serve(c, groups_dir, tokens, log_path, host, port, static_dir, err);
        if (*report) return cmd_report(c, groups_dir, log_path, svg, out, err);
    } catch (const UsageError& e) {
        err << "sppg: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "sppg: error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace sppg::pipeline
