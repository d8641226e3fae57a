// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "perceptual_fixtures.hpp"
#include "sppg/perceptual/groups.hpp"
#include "sppg/perceptual/tally.hpp"
#include "test_util.hpp"

namespace sppg::perceptual {
namespace {

using testing::fixture_group;
using testing::fixture_groups;
using testing::pool;

TEST(Groups, CompositionAndIds) {
    auto g = fixture_group("l_n", 4);
    ASSERT_EQ(g.items.size(), 12u);
    std::map<TrueClass, int> n;
    std::set<std::string> ids, segs;
    for (const auto& it : g.items) {
        ++n[it.true_class];
        ids.insert(it.item_id);
        segs.insert(it.segment_id);
    }
    EXPECT_EQ(n[TrueClass::NonCat], 6);
    EXPECT_EQ(n[TrueClass::CatP1], 3);
    EXPECT_EQ(n[TrueClass::CatP2], 3);
    EXPECT_EQ(ids.size(), 12u);
    EXPECT_EQ(segs.size(), 12u);
    EXPECT_EQ(g.items[0].item_id, "l_n-01");
    EXPECT_EQ(g.items[11].item_id, "l_n-12");
    EXPECT_EQ(g.p1, "l");
    EXPECT_EQ(g.p2, "n");
    for (const auto& it : g.items)
        if (it.true_class == TrueClass::CatP1) EXPECT_EQ(it.segment_id.substr(0, 2), "l:");
}

TEST(Groups, DeterministicAndSeedSensitive) {
    EXPECT_EQ(fixture_group("d_t", 1), fixture_group("d_t", 1));
    EXPECT_NE(fixture_group("d_t", 1).items, fixture_group("d_t", 2).items);
    // Pool order does not matter; pools are sorted by segment id first.
    auto p = pool("d_t/nc", 10);
    std::reverse(p.begin(), p.end());
    EXPECT_EQ(build_group("d_t", p, pool("d", 5), pool("t", 5), 1), fixture_group("d_t", 1));
}

TEST(Groups, ShortageNamesThePool) {
    try {
        build_group("d_t", pool("nc", 10), pool("d", 5), pool("t", 2), 1);
        FAIL();
    } catch (const ShortageError& e) {
        EXPECT_NE(std::string(e.what()).find("'t'"), std::string::npos) << e.what();
        EXPECT_EQ(e.available(), 2u);
    }
    EXPECT_THROW(build_group("t_d", pool("nc", 10), pool("d", 5), pool("t", 5), 1), ValidationError);
    EXPECT_THROW(build_group("a_b_c", pool("nc", 10), pool("d", 5), pool("t", 5), 1), ValidationError);
}

TEST(Groups, JsonRoundTripAndPayload) {
    auto g = fixture_group("ax_er", 9);
    g.items[3].audio = "clips/x.wav";
    auto back = group_from_json(nlohmann::json::parse(group_to_json(g).dump()));
    EXPECT_EQ(back, g);

    const auto payload = listener_payload(g).dump();
    for (const auto& it : g.items) EXPECT_EQ(payload.find(it.segment_id), std::string::npos);
    for (const char* leak : {"true_class", "noncat", "cat_P", "segment_id", "pattern"})
        EXPECT_EQ(payload.find(leak), std::string::npos) << leak;
    auto j = listener_payload(g);
    EXPECT_EQ(j["options"].size(), 4u);
    EXPECT_EQ(j["options"][0], "More similar to ax");

    auto bad = group_to_json(g);
    bad["presentation_order"][0] = "nope";
    EXPECT_THROW(group_from_json(bad), FormatError);
}

TEST(Log, ParsesAndSkipsPartialLine) {
    std::string text = format_response_line({"L1", "d_t-01", 2, "t0"}) + "not json\n" +
                       format_response_line({"L2", "d_t-02", 3, "t1"}) + "{\"listener_id\":\"L3\"";
    auto p = parse_response_log(text);
    ASSERT_EQ(p.records.size(), 2u);
    EXPECT_EQ(p.malformed_lines, 1u);
    EXPECT_EQ(p.records[1].option, 3);
}

std::vector<ResponseRecord> answers(const ConfusionGroup& g, const std::string& listener, int option) {
    std::vector<ResponseRecord> out;
    for (const auto& it : g.items) out.push_back({listener, it.item_id, option, ""});
    return out;
}

TEST(Tally, LastSubmissionWins) {
    auto gs = fixture_groups();
    auto log = answers(gs[0], "A", 1);
    auto again = answers(gs[0], "A", 3);
    log.insert(log.end(), again.begin(), again.end());
    auto s = tally(log, gs);
    EXPECT_EQ(s.accepted, 12u);
    EXPECT_EQ(s.patterns[0].noncat().counts[2], 6u);
    EXPECT_EQ(s.patterns[0].noncat().counts[0], 0u);
    EXPECT_EQ(s.averages.n_patterns, 1u);
}

TEST(Tally, RejectsUnknownAndInvalid) {
    auto gs = fixture_groups();
    auto s = tally({{"A", "zz-01", 1, ""}, {"A", gs[0].items[0].item_id, 5, ""}}, gs);
    EXPECT_EQ(s.accepted, 0u);
    EXPECT_EQ(s.rejected_unknown_item, 1u);
    EXPECT_EQ(s.rejected_invalid_option, 1u);
}

TEST(Tally, ProportionsSumToOne) {
    auto gs = fixture_groups();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto s = tally(testing::fuzz_log(gs, seed, 300), gs);
        for (const auto& p : s.patterns)
            for (const auto& [cls, oc] : p.by_class) {
                if (oc.total() == 0) continue;
                auto pr = oc.proportions();
                double sum = 0;
                for (double v : pr) {
                    EXPECT_GE(v, 0.0);
                    sum += v;
                }
                EXPECT_NEAR(sum, 1.0, 1e-9);
            }
        for (const auto& p : s.patterns)
            if (p.has_data()) EXPECT_GE(p.proportions().score_gap(), 0.0);
    }
}

TEST(Tally, OrderAndRelabelInvariant) {
    auto gs = fixture_groups();
    Rng rng(4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto log = testing::fuzz_log(gs, seed, 200);
        const auto base = scores_to_json(tally(log, gs));

        // Reordering must keep each (listener, item)'s last valid record last.
        std::map<std::pair<std::string, std::string>, std::size_t> last;
        for (std::size_t i = 0; i < log.size(); ++i)
            if (valid_option(log[i].option)) last[{log[i].listener_id, log[i].item_id}] = i;
        std::vector<ResponseRecord> finals;
        for (const auto& [k, i] : last) finals.push_back(log[i]);
        rng.shuffle(finals);
        EXPECT_EQ(scores_to_json(tally(finals, gs))["patterns"], base["patterns"]);

        auto relabeled = log;
        for (auto& r : relabeled) r.listener_id = "x" + r.listener_id + "y";
        EXPECT_EQ(scores_to_json(tally(relabeled, gs)), base);
    }
}

TEST(Tally, RemovingAListenerHasNoHiddenState) {
    auto gs = fixture_groups();
    auto log = testing::fuzz_log(gs, 77, 400);
    std::vector<ResponseRecord> without;
    for (const auto& r : log)
        if (r.listener_id != "L0") without.push_back(r);
    auto full = tally(log, gs);
    auto reduced = tally(without, gs);
    auto again = tally(without, gs);
    EXPECT_EQ(scores_to_json(reduced), scores_to_json(again));
    EXPECT_LE(reduced.accepted, full.accepted);
}

TEST(Report, EmptyLogSaysNoData) {
    auto gs = fixture_groups();
    auto s = tally({}, gs);
    const auto t = format_option_table(s);
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 5);
    EXPECT_NE(t.find("ax_er\tno data"), std::string::npos);
    EXPECT_NE(t.find("average\tno data"), std::string::npos);
    EXPECT_EQ(t.find("0.00"), std::string::npos);
}

TEST(Report, TenPatternsTenRowsPlusAverage) {
    std::vector<ConfusionGroup> gs;
    for (const auto& c : testing::published_table()) gs.push_back(fixture_group(c.pattern, 3));
    std::vector<ResponseRecord> log;
    for (const auto& g : gs) {
        auto a = answers(g, "A", 2);
        log.insert(log.end(), a.begin(), a.end());
    }
    auto t = format_option_table(tally(log, gs));
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 12);
    EXPECT_NE(t.find("average\t0.00\t100.00\t0.00\t0.00\t100.00"), std::string::npos);
}

TEST(Report, GoldenFixture) {
    auto gs = fixture_groups();
    auto s = tally(testing::fuzz_log(gs, 2026, 250), gs);
    const auto text = format_option_table(s) + "\n" + format_class_table(s);
    std::string expected;
    EXPECT_TRUE(testing::matches_golden("report.tsv", text, &expected)) << text << "\nvs\n" << expected;
}

TEST(Report, PublishedAveragesThroughAveragingPath) {
    auto cur = average_scores(testing::published_rows(false));
    EXPECT_NEAR(100 * cur.option[2], 14.6, 0.05);
    EXPECT_NEAR(100 * cur.score_gap, 18.8, 0.05);
    auto prior = average_scores(testing::published_rows(true));
    EXPECT_NEAR(100 * prior.option[2], 7.1, 0.05);
}

TEST(Report, PublishedTableAsSyntheticLog) {
    auto cur = testing::published_log(false);
    auto s = tally(cur.records, cur.groups);
    EXPECT_EQ(s.accepted, 10000u);
    ASSERT_EQ(s.averages.n_patterns, 10u);
    EXPECT_NEAR(100 * s.averages.option[2], 14.6, 0.05);
    EXPECT_NEAR(100 * s.averages.score_gap, 18.8, 0.05);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& c = testing::published_table()[i];
        EXPECT_NEAR(100 * s.patterns[i].proportions().score_gap(), c.printed_gap, 0.051) << c.pattern;
    }
    auto prior = testing::published_log(true);
    auto ps = tally(prior.records, prior.groups);
    EXPECT_NEAR(100 * ps.averages.option[2], 7.1, 0.05);
}

TEST(Report, AllOptionOneGivesFullGap) {
    auto gs = fixture_groups();
    auto s = tally(answers(gs[1], "A", 1), gs);
    auto pr = s.patterns[1].proportions();
    EXPECT_DOUBLE_EQ(pr.option[0], 1.0);
    EXPECT_DOUBLE_EQ(pr.score_gap(), 1.0);
}

TEST(Report, PieChart) {
    OptionCounts oc;
    oc.counts = {3, 1, 0, 0};
    auto svg = pie_svg("d_t / noncat", oc);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("75.00%"), std::string::npos);
    EXPECT_NE(pie_svg("empty", {}).find("no data"), std::string::npos);
}

}  // namespace
}  // namespace sppg::perceptual
