// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "sppg/corpus/segments.hpp"
#include "sppg/model/classifier.hpp"
#include "sppg/model/sppg.hpp"
#include "sppg/nn/adam.hpp"
#include "sppg/random.hpp"

namespace sppg::model {

/// Early-stopping criterion on the validation split.
enum class Selection { ValidLoss, ValidAccuracy };

inline const char* to_string(Selection s) { return s == Selection::ValidLoss ? "loss" : "accuracy"; }

inline Selection parse_selection(const std::string& s) {
    if (s == "loss") return Selection::ValidLoss;
    if (s == "accuracy") return Selection::ValidAccuracy;
    throw ValidationError("selection must be 'loss' or 'accuracy', got '" + s + "'");
}

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::uint64_t seed = 1;
    Selection select_on = Selection::ValidLoss;
    /// Worker threads for per-example gradients. Results do not depend on it.
    std::size_t threads = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
        if (batch_size == 0 || max_epochs == 0 || patience == 0)
            throw ValidationError("batch_size, max_epochs and patience must be positive");
    }
};

/// Held-out share of the training set used for model selection.
inline constexpr double kValidationFraction = 0.1;

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // dropout active
    double valid_loss = 0.0;
    double valid_accuracy = 0.0;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    std::string to_tsv() const {
        std::string out = "epoch\ttrain_loss\ttrain_accuracy\tvalid_loss\tvalid_accuracy\n";
        for (const auto& e : epochs)
            out += str_cat(e.epoch, '\t', fixed(e.train_loss, 9), '\t', fixed(e.train_accuracy, 6), '\t',
                           fixed(e.valid_loss, 9), '\t', fixed(e.valid_accuracy, 6), '\n');
        out += str_cat("#best_epoch=", best_epoch, "\tstopped_early=", stopped_early ? 1 : 0, '\n');
        return out;
    }
};

namespace detail {

/// Runs fn(shard) for shard in [0, n_shards) on up to `threads` workers.
inline void run_shards(std::size_t n_shards, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n_shards);
    if (threads <= 1) {
        for (std::size_t s = 0; s < n_shards; ++s) fn(s);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t s = w; s < n_shards; s += threads) fn(s);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Shard count per batch. Fixed so the summation order, and therefore the
/// result, never depends on the machine's thread count.
inline constexpr std::size_t kGradShards = 8;

}  // namespace detail

/// Fraction of segments whose argmax matches the label.
struct EvalResult {
    std::size_t correct = 0;
    std::size_t total = 0;
    double loss = 0.0;  // mean cross-entropy
    std::map<corpus::CorpusTag, std::pair<std::size_t, std::size_t>> per_corpus;  // correct, total

    double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
    double corpus_rate(corpus::CorpusTag t) const {
        auto it = per_corpus.find(t);
        if (it == per_corpus.end() || it->second.second == 0) return std::nan("");
        return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
    }
};

/// Eval-mode posteriors for every segment, in dataset order.
template <typename T>
std::vector<Sppg> batch_sppg(const SegmentClassifier<T>& model, const corpus::SegmentDataset& ds,
                             std::size_t threads = 0) {
    std::vector<Sppg> out(ds.size());
    const std::size_t n_shards = std::max<std::size_t>(1, std::min<std::size_t>(ds.size(), 64));
    detail::run_shards(n_shards, threads, [&](std::size_t shard) {
        for (std::size_t i = shard; i < ds.size(); i += n_shards) {
            const auto& seq = ds[i].seq;
            auto p = model.posterior(seq);
            Sppg s;
            s.segment_id = seq.segment_id;
            s.label = seq.label;
            s.probs.assign(p.data.begin(), p.data.end());
            s.predicted = Sppg::argmax(s.probs);
            out[i] = std::move(s);
        }
    });
    return out;
}

template <typename T>
EvalResult evaluate(const SegmentClassifier<T>& model, const corpus::SegmentDataset& ds, std::size_t threads = 0) {
    if (ds.empty()) throw DataError("cannot evaluate on an empty dataset");
    const auto sppgs = batch_sppg(model, ds, threads);
    EvalResult r;
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const bool ok = sppgs[i].predicted == ds[i].seq.label;
        loss += -std::log(std::max(sppgs[i].probs[ds[i].seq.label], 1e-300));
        r.correct += ok;
        r.total += 1;
        auto& pc = r.per_corpus[ds[i].corpus];
        pc.first += ok;
        pc.second += 1;
    }
    r.loss = loss / static_cast<double>(r.total);
    return r;
}

/// Orders examples for one epoch: seeded shuffle, then within windows of
/// several batches sort by length so batches hold similar-length segments,
/// then shuffle batch order.
inline std::vector<std::vector<std::size_t>> make_batches(const corpus::SegmentDataset& ds, std::size_t batch_size,
                                                          Rng& rng) {
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t window = batch_size * 8;
    for (std::size_t b = 0; b < order.size(); b += window) {
        auto first = order.begin() + static_cast<std::ptrdiff_t>(b);
        auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + window));
        std::stable_sort(first, last, [&](std::size_t a, std::size_t c) {
            return ds[a].seq.length() < ds[c].seq.length();
        });
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + batch_size)));
    rng.shuffle(batches);
    return batches;
}

struct TrainResult {
    SegmentClassifier<float> model;
    TrainingLog log;
};

/// Mean-CE minimization with Adam; keeps the best validation-accuracy epoch.
inline TrainResult train(const corpus::SegmentDataset& train_ds, const corpus::SegmentDataset& valid_ds,
                         const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    tcfg.validate();
    if (train_ds.empty()) throw DataError("training dataset is empty");
    if (valid_ds.empty()) throw DataError("validation dataset is empty");
    for (const auto* ds : {&train_ds, &valid_ds})
        for (const auto& it : ds->items())
            if (it.seq.label >= mcfg.inventory_size)
                throw ValidationError(str_cat("label ", it.seq.label, " of '", it.seq.segment_id,
                                              "' outside inventory of ", mcfg.inventory_size));

    SegmentClassifier<float> model(mcfg);
    model.initialize(mix_seed(tcfg.seed, 0x1417));
    nn::AdamState<float> adam(model.params(), nn::AdamConfig{tcfg.learning_rate, 0.9, 0.999, 1e-8});

    TrainResult result{model, {}};
    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<nn::ParamSet<float>> shard_grads(detail::kGradShards, model.params().zeros_like());
    auto grads = model.params().zeros_like();

    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        Rng order_rng(mix_seed(tcfg.seed, epoch));
        const auto batches = make_batches(train_ds, tcfg.batch_size, order_rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            const std::size_t n_shards = std::min(detail::kGradShards, batch.size());
            std::vector<double> shard_loss(n_shards, 0.0);
            std::vector<std::size_t> shard_correct(n_shards, 0);
            detail::run_shards(n_shards, tcfg.threads, [&](std::size_t s) {
                auto& g = shard_grads[s];
                g.zero();
                const std::size_t lo = batch.size() * s / n_shards, hi = batch.size() * (s + 1) / n_shards;
                for (std::size_t k = lo; k < hi; ++k) {
                    const auto& seq = train_ds[batch[k]].seq;
                    Rng drop_rng(mix_seed(mix_seed(tcfg.seed, epoch), mix_seed(bi, k)));
                    ForwardCache<float> cache;
                    model.forward(model.input_tensor(seq), true, &drop_rng, &cache);
                    const double loss = nn::cross_entropy_from_logits(cache.logits, seq.label);
                    if (!std::isfinite(loss))
                        throw DivergenceError(str_cat("non-finite loss at epoch ", epoch, ", batch ", bi));
                    model.backward(cache, seq.label, batch.size(), g);
                    shard_loss[s] += loss;
                    const auto& p = cache.probs.data;
                    if (static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == seq.label)
                        ++shard_correct[s];
                }
            });
            grads.zero();
            for (std::size_t s = 0; s < n_shards; ++s) {
                grads.add_scaled(shard_grads[s], 1.0f);
                loss_sum += shard_loss[s];
                correct += shard_correct[s];
            }
            for (const auto& g : grads)
                if (!g.value.all_finite())
                    throw DivergenceError(str_cat("non-finite gradient for '", g.name, "' at epoch ", epoch,
                                                  ", batch ", bi));
            nn::adam_step(model.params(), grads, adam);
        }

        const auto ev = evaluate(model, valid_ds, tcfg.threads);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(train_ds.size()),
                        static_cast<double>(correct) / static_cast<double>(train_ds.size()), ev.loss, ev.rate()};
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.valid_loss))
            throw DivergenceError(str_cat("non-finite loss at epoch ", epoch));
        result.log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        const bool better = tcfg.select_on == Selection::ValidLoss
                                ? rec.valid_loss < best_loss
                                : rec.valid_accuracy > best_acc ||
                                      (rec.valid_accuracy == best_acc && rec.valid_loss < best_loss);
        if (better) {
            best_acc = rec.valid_accuracy;
            best_loss = rec.valid_loss;
            result.log.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= tcfg.patience) {
            result.log.stopped_early = epoch < tcfg.max_epochs;
            break;
        }
    }
    return result;
}

/// Segment-level recognition rates in the layout: training set, L1 eval, L2 eval.
struct RecognitionRow {
    std::string training_set;
    double train_rate = std::nan("");
    double l1_eval = std::nan("");
    double l2_eval = std::nan("");
};

inline std::string format_recognition_table(const std::vector<RecognitionRow>& rows) {
    auto pct = [](double v) { return std::isnan(v) ? std::string("n/a") : fixed(100.0 * v, 2) + "%"; };
    std::string out = "training_set\ttraining_set_rate\teval_L1\teval_L2\n";
    for (const auto& r : rows)
        out += r.training_set + "\t" + pct(r.train_rate) + "\t" + pct(r.l1_eval) + "\t" + pct(r.l2_eval) + "\n";
    return out;
}

}  // namespace sppg::model
