// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sppg/audio/mfcc.hpp"
#include "sppg/common.hpp"
#include "sppg/discovery/noncat.hpp"
#include "sppg/model/classifier.hpp"
#include "sppg/model/train.hpp"

namespace sppg::pipeline {

/// Sectioned `key = value` text. Keys are addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, const std::string& name = "<memory>") {
        ConfigFile cf;
        std::string section;
        std::size_t lineno = 0;
        for (const auto& raw : split(text, '\n')) {
            ++lineno;
            auto line = trim(raw);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw FormatError(str_cat(name, ":", lineno, ": unterminated section header"));
                section = trim(std::string_view(line).substr(1, line.size() - 2));
                if (section.empty()) throw FormatError(str_cat(name, ":", lineno, ": empty section name"));
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError(str_cat(name, ":", lineno, ": expected 'key = value'"));
            if (section.empty()) throw FormatError(str_cat(name, ":", lineno, ": key outside of any [section]"));
            auto key = trim(std::string_view(line).substr(0, eq));
            if (key.empty()) throw FormatError(str_cat(name, ":", lineno, ": empty key"));
            cf.values_[section + "." + key] = trim(std::string_view(line).substr(eq + 1));
        }
        return cf;
    }

    static ConfigFile load(const std::string& path) {
        return parse(read_file_bytes(path), path);
    }

    const std::map<std::string, std::string>& values() const { return values_; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

private:
    std::map<std::string, std::string> values_;
};

/// Every tunable of the pipeline. Defaults are the published settings.
struct PipelineConfig {
    std::string work_dir = ".";
    std::string inventory = "default";  // path, or "default" for the built-in 48-phone set
    std::string folding = "default";

    int sample_rate = 16000;
    audio::FeatureConfig features;
    model::ModelConfig model;
    model::TrainConfig train;
    std::string train_corpus = "L1+L2";  // L1, L2 or L1+L2

    double theta = discovery::kDefaultTheta;
    double confidence = discovery::kDefaultExemplarConfidence;
    std::size_t min_support = discovery::kDefaultMinSupport;
    std::string discover_on = "L2:eval";  // corpus:split selection for discovery

    double context_ms = 150.0;
    double fade_ms = 10.0;

    std::uint64_t split_seed = 7;
    std::uint64_t group_seed = 11;
    std::uint64_t service_seed = 13;

    void validate() const {
        features.validate();
        model.validate();
        train.validate();
        discovery::check_threshold(theta, "theta");
        discovery::check_threshold(confidence, "confidence");
        if (min_support < 1) throw ValidationError("min_support must be at least 1");
        if (sample_rate <= 0) throw ValidationError("sample_rate must be positive");
        if (static_cast<std::size_t>(features.n_coeffs) != model.n_coeffs)
            throw ValidationError("features.n_coeffs and the model input width differ");
        if (train_corpus != "L1" && train_corpus != "L2" && train_corpus != "L1+L2")
            throw ValidationError("train.corpus must be L1, L2 or L1+L2");
    }

    /// Applies "section.key" overrides. Unknown keys are an error.
    void apply(const std::map<std::string, std::string>& kv) {
        for (const auto& [key, value] : kv) set(key, value);
    }

    void set(const std::string& key, const std::string& value) {
        auto to_d = [&] { return parse_double(key, value); };
        auto to_u = [&] { return static_cast<std::size_t>(parse_u64(key, value)); };
        if (key == "paths.work_dir") work_dir = value;
        else if (key == "paths.inventory") inventory = value;
        else if (key == "paths.folding") folding = value;
        else if (key == "features.sample_rate") sample_rate = static_cast<int>(parse_u64(key, value));
        else if (key == "features.window_ms") features.window_ms = to_d();
        else if (key == "features.hop_ms") features.hop_ms = to_d();
        else if (key == "features.n_mel_filters") features.n_mel_filters = static_cast<int>(to_u());
        else if (key == "features.n_coeffs") {
            features.n_coeffs = static_cast<int>(to_u());
            model.n_coeffs = to_u();
        }
        else if (key == "features.pre_emphasis") features.pre_emphasis = to_d();
        else if (key == "features.log_floor") features.log_floor = to_d();
        else if (key == "model.n_conv_layers") model.n_conv_layers = to_u();
        else if (key == "model.conv_channels") model.conv_channels = to_u();
        else if (key == "model.kernel") model.kernel = to_u();
        else if (key == "model.gru_hidden") model.gru_hidden = to_u();
        else if (key == "model.n_dense") model.n_dense = to_u();
        else if (key == "model.dense_units") model.dense_units = to_u();
        else if (key == "model.dropout_rate") model.dropout_rate = to_d();
        else if (key == "train.learning_rate") train.learning_rate = to_d();
        else if (key == "train.batch_size") train.batch_size = to_u();
        else if (key == "train.max_epochs") train.max_epochs = to_u();
        else if (key == "train.patience") train.patience = to_u();
        else if (key == "train.threads") train.threads = to_u();
        else if (key == "train.corpus") train_corpus = value;
        else if (key == "train.select_on") {
            try {
                train.select_on = model::parse_selection(value);
            } catch (const ValidationError& e) {
                throw UsageError(str_cat("configuration key '", key, "': ", e.what()));
            }
        }
        else if (key == "discovery.theta") theta = to_d();
        else if (key == "discovery.confidence") confidence = to_d();
        else if (key == "discovery.min_support") min_support = to_u();
        else if (key == "discovery.on") discover_on = value;
        else if (key == "listening.context_ms") context_ms = to_d();
        else if (key == "listening.fade_ms") fade_ms = to_d();
        else if (key == "seeds.train") train.seed = parse_u64(key, value);
        else if (key == "seeds.split") split_seed = parse_u64(key, value);
        else if (key == "seeds.groups") group_seed = parse_u64(key, value);
        else if (key == "seeds.service") service_seed = parse_u64(key, value);
        else throw UsageError("unknown configuration key '" + key + "'");
    }

    /// Fully resolved configuration in the same format `ConfigFile` reads.
    std::string to_text() const {
        auto d = [](double v) { return shortest(v); };
        std::string out;
        out += "[paths]\n";
        out += "work_dir = " + work_dir + "\ninventory = " + inventory + "\nfolding = " + folding + "\n\n";
        out += "[features]\n";
        out += str_cat("sample_rate = ", sample_rate, "\nwindow_ms = ", d(features.window_ms), "\nhop_ms = ",
                       d(features.hop_ms), "\nn_mel_filters = ", features.n_mel_filters, "\nn_coeffs = ",
                       features.n_coeffs, "\npre_emphasis = ", d(features.pre_emphasis), "\nlog_floor = ",
                       d(features.log_floor), "\n\n");
        out += "[model]\n";
        out += str_cat("n_conv_layers = ", model.n_conv_layers, "\nconv_channels = ", model.conv_channels,
                       "\nkernel = ", model.kernel, "\ngru_hidden = ", model.gru_hidden, "\nn_dense = ", model.n_dense,
                       "\ndense_units = ", model.dense_units, "\ndropout_rate = ", d(model.dropout_rate), "\n\n");
        out += "[train]\n";
        out += str_cat("learning_rate = ", d(train.learning_rate), "\nbatch_size = ", train.batch_size,
                       "\nmax_epochs = ", train.max_epochs, "\npatience = ", train.patience, "\nthreads = ",
                       train.threads, "\ncorpus = ", train_corpus, "\nselect_on = ", model::to_string(train.select_on),
                       "\n\n");
        out += "[discovery]\n";
        out += str_cat("theta = ", d(theta), "\nconfidence = ", d(confidence), "\nmin_support = ", min_support,
                       "\non = ", discover_on, "\n\n");
        out += "[listening]\n";
        out += str_cat("context_ms = ", d(context_ms), "\nfade_ms = ", d(fade_ms), "\n\n");
        out += "[seeds]\n";
        out += str_cat("train = ", train.seed, "\nsplit = ", split_seed, "\ngroups = ", group_seed,
                       "\nservice = ", service_seed, "\n");
        return out;
    }

private:
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw UsageError("configuration key '" + key + "' expects a number, got '" + v + "'");
        }
    }
    static std::uint64_t parse_u64(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            auto n = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
            return n;
        } catch (const std::exception&) {
            throw UsageError("configuration key '" + key + "' expects a non-negative integer, got '" + v + "'");
        }
    }
};

inline PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig cfg;
    cfg.apply(ConfigFile::load(path).values());
    return cfg;
}

}  // namespace sppg::pipeline
