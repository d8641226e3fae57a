// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

// Sweeps the synthetic generator's separation and seed and prints what the
// end-to-end discovery run achieves. Used to choose the frozen acceptance
// thresholds; not part of the test suite.

#include <cstdio>

#include "synthetic_e2e.hpp"
#include "test_util.hpp"

int main(int argc, char** argv) {
    using namespace sppg;
    // calibrate_synthetic [seeds] [train_utterances] [max_epochs] [separation...]
    const std::size_t n_seeds = argc > 1 ? std::stoul(argv[1]) : 3;
    testing::SyntheticSpec base;
    auto tc0 = testing::synthetic_train_config();
    if (argc > 2) base.train_utterances = std::stoul(argv[2]);
    if (argc > 3) tc0.max_epochs = std::stoul(argv[3]);
    std::vector<double> seps;
    for (int i = 4; i < argc; ++i) seps.push_back(std::stod(argv[i]));
    if (seps.empty()) seps = {2.0, 3.0, 4.0, 5.0};
    std::printf("separation\tseed\tpure_acc\tblend_ab\ttop\tseconds\n");
    for (double sep : seps)
        for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
            testing::TempDir dir("sppg-cal");
            auto spec = base;
            spec.separation = sep;
            spec.seed = seed;
            auto tc = tc0;
            tc.seed = seed;
            auto o = testing::run_synthetic_e2e(dir.path(), spec, 0.4, testing::synthetic_model_config(), tc);
            std::printf("%.1f\t%llu\t%.4f\t%.4f\t%s\t%.1f\n", sep, static_cast<unsigned long long>(seed),
                        o.pure_accuracy, o.blend_rate(), o.top_pattern.c_str(), o.seconds);
            std::fflush(stdout);
        }
    return 0;
}
