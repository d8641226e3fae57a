// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <sstream>

#include "sppg/audio/wav.hpp"
#include "sppg/pipeline/cli.hpp"
#include "sppg/pipeline/config.hpp"
#include "synthetic_corpus.hpp"
#include "test_util.hpp"

namespace sppg::pipeline {
namespace {

using testing::TempDir;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

// ----------------------------------------------------------------- config

TEST(Config, ParsesSectionsAndComments) {
    auto cf = ConfigFile::parse("# c\n[model]\n gru_hidden = 64 \n; x\n[discovery]\ntheta=0.3\n");
    EXPECT_EQ(cf.values().at("model.gru_hidden"), "64");
    EXPECT_EQ(cf.values().at("discovery.theta"), "0.3");
}

TEST(Config, ParseErrorsNameTheLine) {
    auto msg = [](const char* text) {
        try {
            ConfigFile::parse(text, "x.cfg");
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_EQ(msg("[a\n"), "x.cfg:1: unterminated section header");
    EXPECT_EQ(msg("[a]\nfoo\n"), "x.cfg:2: expected 'key = value'");
    EXPECT_EQ(msg("k = v\n"), "x.cfg:1: key outside of any [section]");
    EXPECT_EQ(msg("[]\n"), "x.cfg:1: empty section name");
}

TEST(Config, UnknownKeysAndBadValues) {
    PipelineConfig cfg;
    EXPECT_THROW(cfg.set("model.bogus", "1"), UsageError);
    EXPECT_THROW(cfg.set("model.gru_hidden", "-3"), UsageError);
    EXPECT_THROW(cfg.set("discovery.theta", "0.4x"), UsageError);
    EXPECT_THROW(cfg.set("train.select_on", "f1"), UsageError);
    cfg.set("train.select_on", "accuracy");
    EXPECT_EQ(cfg.train.select_on, model::Selection::ValidAccuracy);
    cfg.set("discovery.theta", "1.5");
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Config, DefaultsArePublishedSettings) {
    PipelineConfig cfg;
    EXPECT_DOUBLE_EQ(cfg.theta, 0.4);
    EXPECT_EQ(cfg.model.n_conv_layers, 3u);
    EXPECT_EQ(cfg.model.conv_channels, 64u);
    EXPECT_EQ(cfg.model.gru_hidden, 128u);
    EXPECT_EQ(cfg.model.n_dense, 3u);
    EXPECT_EQ(cfg.model.dense_units, 512u);
    EXPECT_DOUBLE_EQ(cfg.model.dropout_rate, 0.2);
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.001);
    EXPECT_EQ(cfg.train.batch_size, 32u);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ResolvedTextRoundTrips) {
    PipelineConfig cfg;
    cfg.set("model.gru_hidden", "17");
    cfg.set("discovery.theta", "0.34");
    cfg.set("seeds.groups", "99");
    cfg.set("paths.work_dir", "/tmp/x y");
    PipelineConfig back;
    back.apply(ConfigFile::parse(cfg.to_text()).values());
    EXPECT_EQ(back.to_text(), cfg.to_text());
    EXPECT_EQ(back.model.gru_hidden, 17u);
    EXPECT_DOUBLE_EQ(back.theta, 0.34);
}

// -------------------------------------------------------------------- cli

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"discover"}).code, kExitUsage);
    EXPECT_EQ(run({"discover", "--sppg", "x", "--bogus"}).code, kExitUsage);
    auto r = run({"discover", "--sppg", "x", "--set", "model.nope=1"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("model.nope"), std::string::npos);
    EXPECT_EQ(run({"discover", "--sppg", "x", "--set", "novalue"}).code, kExitUsage);
    EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, MissingConfigExitsTwoNamingPath) {
    auto r = run({"train", "--config", "/nonexistent/missing.cfg", "--data", "x.tsv"});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_NE(r.err.find("/nonexistent/missing.cfg"), std::string::npos) << r.err;
}

TEST(Cli, MissingInputExitsTwo) {
    TempDir dir;
    auto r = run({"discover", "--sppg", dir / "none.sppg", "--out", dir / "d"});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_NE(r.err.find("none.sppg"), std::string::npos);
}

TEST(Cli, CompareSetsPublishedLists) {
    TempDir dir;
    write_file_bytes(dir / "current.txt",
                     "ah_ax\nax_ix\nih_ix\ner_r\nch_t\ng_k\nr_w\ndh_l\ns_z\n"
                     "ax_er\naa_ao\ney_ih\neh_ey\nae_ay\nd_t\nl_n\nb_p\nf_v\nm_n\n");
    write_file_bytes(dir / "reference.txt",
                     "ax_er\naa_ao\ney_ih\neh_ey\nae_ay\nd_t\nl_n\nb_p\nf_v\nm_n\naa_ax\naw_ax\n");
    auto r = run({"compare-sets", "--current", dir / "current.txt", "--reference", dir / "reference.txt"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("#counts\t9\t10\t2\n"), std::string::npos) << r.out;
}

TEST(Cli, ConfigPrecedence) {
    TempDir dir;
    write_file_bytes(dir / "a.cfg", "[discovery]\ntheta = 0.3\nmin_support = 4\n[model]\ngru_hidden = 9\n");
    cli_detail::Common c;
    c.config_path = dir / "a.cfg";
    c.overrides = {"discovery.theta=0.25", "model.gru_hidden = 11"};
    auto cfg = cli_detail::resolve_config(c);
    EXPECT_DOUBLE_EQ(cfg.theta, 0.25);
    EXPECT_EQ(cfg.model.gru_hidden, 11u);
    EXPECT_EQ(cfg.min_support, 4u);
    c.theta = 0.5;
    EXPECT_DOUBLE_EQ(cli_detail::resolve_config(c).theta, 0.5);
}

// --------------------------------------------------------- audio pipeline

const std::vector<std::string> kTinyModel = {
    "--set", "model.n_conv_layers=1", "--set", "model.conv_channels=2", "--set", "model.gru_hidden=8",
    "--set", "model.n_dense=1",       "--set", "model.dense_units=16",  "--set", "train.max_epochs=3",
    "--set", "train.batch_size=8"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// Utterances of tone/noise "phones" with TIMIT-style labels, including a
// label the folding deletes and one the inventory does not know.
void write_audio_corpus(const TempDir& dir, std::size_t n_utts, const std::string& prefix) {
    std::string wavs, phns;
    const std::vector<std::pair<std::string, double>> phones = {{"aa", 500}, {"iy", 2500}, {"sh", 0}};
    for (std::size_t u = 0; u < n_utts; ++u) {
        const std::string id = str_cat("spk", u % 3, "/", prefix, u);
        const std::string stem = str_cat(prefix, u);
        audio::AudioSignal sig;
        std::string phn;
        std::size_t pos = 0;
        auto add = [&](const std::string& label, const audio::AudioSignal& piece) {
            phn += str_cat(pos, " ", pos + piece.samples.size(), " ", label, "\n");
            sig.samples.insert(sig.samples.end(), piece.samples.begin(), piece.samples.end());
            pos += piece.samples.size();
        };
        add("h#", testing::noise(1600, u, 16000, 0.001));
        for (std::size_t k = 0; k < 6; ++k) {
            const auto& [label, hz] = phones[(u + k) % 3];
            const double secs = 0.06 + 0.01 * static_cast<double>((u * 7 + k) % 5);
            add(label, hz > 0 ? testing::tone(hz, secs) : testing::noise(static_cast<std::size_t>(secs * 16000), u * 31 + k));
        }
        add("q", testing::noise(800, u + 100, 16000, 0.01));
        add("xx", testing::noise(800, u + 200, 16000, 0.01));
        add("h#", testing::noise(1600, u + 300, 16000, 0.001));
        audio::write_wav(dir / (stem + ".wav"), sig);
        write_file_bytes(dir / (stem + ".phn"), phn);
        wavs += id + "\t" + stem + ".wav\n";
        phns += id + "\t" + stem + ".phn\n";
    }
    write_file_bytes(dir / (prefix + "wav.list"), wavs);
    write_file_bytes(dir / (prefix + "phn.list"), phns);
}

TEST(CliPipeline, AudioToReport) {
    TempDir dir;
    write_audio_corpus(dir, 8, "t");
    write_audio_corpus(dir, 4, "e");

    for (const char* p : {"t", "e"}) {
        auto f = run({"featurize", "--list", dir / (std::string(p) + "wav.list"), "--out", dir / (std::string(p) + "feat")});
        ASSERT_EQ(f.code, kExitOk) << f.err;
        EXPECT_TRUE(std::filesystem::exists(dir / (std::string(p) + "feat/resolved.cfg")));
        auto s = run({"segments", "--features", dir / (std::string(p) + "feat/features.manifest"), "--alignments",
                      dir / (std::string(p) + "phn.list"), "--corpus-tag", "L2", "--split",
                      std::string(p) == "t" ? "train" : "eval", "--out", dir / (std::string(p) + "seg/segments.tsv")});
        ASSERT_EQ(s.code, kExitOk) << s.err;
        EXPECT_NE(s.err.find("unknown label 'xx'"), std::string::npos) << s.err;
    }
    auto manifest = read_file_bytes(dir / "tseg/segments.tsv");
    EXPECT_EQ(manifest.find("\tq\t"), std::string::npos);
    EXPECT_NE(manifest.find("\tsil\t"), std::string::npos);

    auto t = run(with({"train", "--data", dir / "tseg/segments.tsv", "--seed", "3", "--out", dir / "model"}, kTinyModel));
    ASSERT_EQ(t.code, kExitOk) << t.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "model/model.spgw"));
    EXPECT_TRUE(std::filesystem::exists(dir / "model/resolved.cfg"));
    EXPECT_NE(read_file_bytes(dir / "model/resolved.cfg").find("seed"), std::string::npos);
    EXPECT_EQ(split(read_file_bytes(dir / "model/training_log.tsv"), '\n').size(), 6u);  // header, 3 epochs, best, ''

    auto e = run(with({"eval", "--model", dir / "model/model.spgw", "--data", dir / "eseg/segments.tsv"}, kTinyModel));
    ASSERT_EQ(e.code, kExitOk) << e.err;
    EXPECT_NE(e.out.find("L1+L2"), std::string::npos) << e.out;

    auto sp = run(with({"sppg", "--model", dir / "model/model.spgw", "--data", dir / "eseg/segments.tsv", "--data",
                        dir / "tseg/segments.tsv", "--out", dir / "out.sppg"},
                       kTinyModel));
    ASSERT_EQ(sp.code, kExitOk) << sp.err;
    auto file = model::read_sppg_file(dir / "out.sppg");
    EXPECT_EQ(file.records.size(), 4u * 8u);  // L2:eval only: 4 utts x (h#, 6 phones, h#)
    for (const auto& r : file.records) {
        double sum = 0;
        for (double p : r.probs) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-5);
    }

    auto d = run({"discover", "--sppg", dir / "out.sppg", "--theta", "0.1", "--min-support", "1", "--out",
                  dir / "disc"});
    ASSERT_EQ(d.code, kExitOk) << d.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "disc/patterns.tsv"));
    EXPECT_EQ(split(read_file_bytes(dir / "disc/verdicts.jsonl"), '\n').size(), file.records.size() + 1);

    // Mismatched architecture must be refused.
    auto bad = run({"sppg", "--model", dir / "model/model.spgw", "--data", dir / "eseg/segments.tsv", "--out",
                    dir / "bad.sppg"});
    EXPECT_EQ(bad.code, kExitData);
}

// Groups and report on a hand-built SPPG file so the pools are known.
TEST(CliPipeline, GroupsServeReport) {
    TempDir dir;
    const corpus::PhoneInventory inv({"a", "b", "c"});
    std::vector<model::Sppg> recs;
    audio::AudioSignal sig = testing::tone(300, 4.0);
    audio::write_wav(dir / "u.wav", sig);
    write_file_bytes(dir / "wav.list", "u\tu.wav\n");
    corpus::DatasetManifest man;
    man.window_samples = 400;
    man.hop_samples = 160;
    man.feature_manifest = "none";
    for (std::size_t i = 0; i < 30; ++i) {
        std::vector<double> p;
        if (i < 10) p = {0.5, 0.45, 0.05};
        else if (i < 20) p = {0.95, 0.03, 0.02};
        else p = {0.03, 0.95, 0.02};
        const std::size_t start = 3000 + i * 1500;
        const auto id = corpus::make_segment_id("u", start);
        recs.push_back({id, 0, p, model::Sppg::argmax(p)});
        man.rows.push_back({id, "u", start, start + 1200, "a", corpus::Split::Eval, corpus::CorpusTag::L2});
    }
    write_file_bytes(dir / "s.sppg", model::format_sppg_file(recs, inv));
    write_file_bytes(dir / "m.tsv", corpus::format_dataset_manifest(man));
    auto g = run({"groups", "--sppg", dir / "s.sppg", "--data", dir / "m.tsv", "--audio", dir / "wav.list",
                  "--min-support", "5", "--out", dir / "groups"});
    ASSERT_EQ(g.code, kExitOk) << g.err;
    auto groups = cli_detail::load_groups(dir / "groups");
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].pattern, "a_b");
    for (const auto& it : groups[0].items) {
        ASSERT_TRUE(std::filesystem::exists(it.audio)) << it.audio;
        auto clip = audio::read_wav(it.audio);
        EXPECT_EQ(clip.samples.size(), 1200u + 2u * 2400u);
    }

    // Shortage is a skip, not a failure.
    auto short_run = run({"groups", "--sppg", dir / "s.sppg", "--confidence", "0.99", "--min-support", "5", "--out",
                          dir / "g2"});
    EXPECT_EQ(short_run.code, kExitOk);
    EXPECT_NE(short_run.err.find("skipping a_b"), std::string::npos) << short_run.err;

    std::string log;
    for (const auto& it : groups[0].items) log += perceptual::format_response_line({"L1", it.item_id, 1, "t"});
    write_file_bytes(dir / "r.jsonl", log);
    auto rep = run({"report", "--groups", dir / "groups", "--log", dir / "r.jsonl", "--svg", "--out", dir / "rep"});
    ASSERT_EQ(rep.code, kExitOk) << rep.err;
    EXPECT_NE(rep.out.find("a_b\t100.00\t0.00\t0.00\t0.00\t100.00"), std::string::npos) << rep.out;
    EXPECT_TRUE(std::filesystem::exists(dir / "rep/pies/a_b.noncat.svg"));
    EXPECT_TRUE(std::filesystem::exists(dir / "rep/scores.json"));
}

TEST(CliPipeline, SyntheticTrainAndDiscoverAreByteIdentical) {
    TempDir dir;
    testing::SyntheticSpec spec;
    spec.train_utterances = 10;
    spec.eval_utterances = 4;
    spec.segments_per_utterance = 8;
    const auto sc = testing::write_synthetic_corpus(dir.path(), spec);
    auto args = with({"--set", "paths.inventory=" + sc.inventory_path, "--set", "discovery.on=eval"}, kTinyModel);
    for (const char* tag : {"r1", "r2"}) {
        const std::string t = tag;
        ASSERT_EQ(run(with({"train", "--data", sc.manifest_path, "--out", dir / (t + "m")}, args)).code, kExitOk);
        ASSERT_EQ(run(with({"sppg", "--model", dir / (t + "m/model.spgw"), "--data", sc.manifest_path, "--out",
                            dir / (t + ".sppg")},
                           args))
                      .code,
                  kExitOk);
        ASSERT_EQ(run(with({"discover", "--sppg", dir / (t + ".sppg"), "--min-support", "1", "--out", dir / (t + "d")},
                           args))
                      .code,
                  kExitOk);
    }
    for (const char* f : {"m/model.spgw", "m/training_log.tsv", "m/resolved.cfg", ".sppg", "d/patterns.tsv",
                          "d/verdicts.jsonl", "d/resolved.cfg"})
        EXPECT_EQ(read_file_bytes(dir / (std::string("r1") + f)), read_file_bytes(dir / (std::string("r2") + f))) << f;

    // The resolved snapshot alone reproduces the run.
    ASSERT_EQ(run({"train", "--config", dir / "r1m/resolved.cfg", "--data", sc.manifest_path, "--out", dir / "r3m"}).code,
              kExitOk);
    EXPECT_EQ(read_file_bytes(dir / "r3m/model.spgw"), read_file_bytes(dir / "r1m/model.spgw"));
    EXPECT_EQ(read_file_bytes(dir / "r3m/resolved.cfg"), read_file_bytes(dir / "r1m/resolved.cfg"));
}

}  // namespace
}  // namespace sppg::pipeline
