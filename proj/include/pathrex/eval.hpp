#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "pathrex/corpus.hpp"
#include "pathrex/joint.hpp"
#include "pathrex/model.hpp"
#include "pathrex/rng.hpp"

namespace pathrex::eval {

struct RankedFact {
    std::string head;
    std::string relation;
    std::string tail;
    double score = 0.0;
};

struct PRPoint {
    std::int64_t cutoff = 0;
    double precision = 0.0;
    double recall = 0.0;
};

using FactKey = std::tuple<std::string, std::string, std::string>;
using FactSet = std::set<FactKey>;

// Descending by score, ties by (head, relation, tail) lexicographic.
void sort_ranked(std::vector<RankedFact>& ranked);

// Relational (non-NA) facts present in a split's labels.
FactSet gold_facts(const corpus::CorpusText& text, const corpus::StringTable& entities,
                   const corpus::StringTable& relations);

// One point per cutoff: precision = correct(n)/n, recall = correct(n)/|gold|.
std::vector<PRPoint> pr_curve(const std::vector<RankedFact>& ranked, const FactSet& gold);

struct FractionPrecision {
    double fraction = 0.0;
    std::int64_t cutoff = 0;
    double precision = 0.0;
};

// Precision among the top floor(n * fraction) facts; rankings shorter than n
// fall back to their full length (flagged in *warned).
std::vector<FractionPrecision> p_at_fractions(const std::vector<RankedFact>& ranked,
                                              const FactSet& gold, std::int64_t n = 20000,
                                              const std::vector<double>& fractions = {0.1, 0.2, 0.5},
                                              bool* warned = nullptr);

double max_f1(const std::vector<PRPoint>& curve);

// Keeps facts backed by at most max_sentences test sentences, their
// sentences, and every NA sentence.
corpus::CorpusText longtail_slice(const corpus::CorpusText& test, int max_sentences);

// Keeps all relational sentences and subsamples NA sentences toward the
// target NA fraction; falls back to all available NA with a warning.
corpus::CorpusText noise_slice(const corpus::CorpusText& test, double na_target, SeededRng& rng,
                               bool* warned = nullptr);

// --- zero-shot feature probe ---

struct ProbeExample {
    std::vector<double> feature;
    std::int32_t label = 0;
};

struct ProbeOptions {
    double l2 = 1e-4;
    int epochs = 100;
    double learning_rate = 0.1;
    std::uint64_t seed = 7;
};

// Multinomial logistic classifier trained by SGD with cross-entropy loss and
// L2 weight decay; returns accuracy over the test examples.
double logistic_probe_accuracy(const std::vector<ProbeExample>& train,
                               const std::vector<ProbeExample>& test, std::int32_t n_classes,
                               const ProbeOptions& opt);

// --- report files ---

void write_pr_csv(const std::string& path, const std::vector<PRPoint>& curve);
void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& metrics);
// Pure generated markup, no external renderer.
void write_pr_svg(const std::string& path, const std::vector<PRPoint>& curve);

// --- model-dependent glue ---

// Every (pair, non-NA relation) candidate of every test bag, scored and
// sorted with the deterministic tie-break. Pairs are independent, so the
// workers write into preallocated slots and any thread count produces the
// same ranking.
template <typename T>
std::vector<RankedFact> rank_predictions(const ModelT<T>& model, const joint::BoundData& data,
                                         const corpus::StringTable& entities,
                                         const corpus::StringTable& relations,
                                         const joint::ScoreOptions<T>& opt, std::uint64_t seed,
                                         int threads = 1) {
    std::vector<std::int32_t> candidates;
    for (std::int32_t r = 0; r < model.enc.n_r; ++r)
        if (r != corpus::kNaRelation) candidates.push_back(r);

    const SeededRng root(seed);
    std::vector<std::vector<T>> scores(data.bags.size());
    auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b)
            scores[b] = joint::score_candidates(model, data, static_cast<std::int32_t>(b),
                                                candidates, opt, root.fork(b));
    };
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(data.bags.size())));
    if (workers <= 1) {
        score_range(0, data.bags.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk =
            (data.bags.size() + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
            const std::size_t hi = std::min(data.bags.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(score_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    std::vector<RankedFact> out;
    out.reserve(data.bags.size() * candidates.size());
    for (std::size_t b = 0; b < data.bags.size(); ++b) {
        const corpus::Bag& bag = data.bags[b];
        for (std::size_t c = 0; c < candidates.size(); ++c)
            out.push_back({entities.name(bag.head), relations.name(candidates[c]),
                           entities.name(bag.tail), static_cast<double>(scores[b][c])});
    }
    sort_ranked(out);
    return out;
}

// Probe dataset for one split: KB facts whose pair has no direct bag but at
// least one usable two-hop path; the feature is the concatenation of the two
// hop sentence representations.
template <typename T>
std::vector<ProbeExample> zero_shot_examples(const ModelT<T>& model,
                                             const corpus::CorpusText& text,
                                             const corpus::Vocabulary& vocab,
                                             const std::vector<corpus::Triple>& kb, int path_cap,
                                             textenc::BagMode bag_mode, std::uint64_t seed) {
    std::vector<corpus::Triple> pairless;
    std::vector<corpus::PairKey> extra;
    {
        std::set<corpus::PairKey> seen;
        for (const corpus::Triple& t : kb) {
            if (t.relation == corpus::kNaRelation) continue;
            if (t.head >= 0 && t.tail >= 0 && text.find_bag(t.head, t.tail) == nullptr) {
                pairless.push_back(t);
                if (seen.insert({t.head, t.tail}).second) extra.push_back({t.head, t.tail});
            }
        }
    }
    std::sort(pairless.begin(), pairless.end());

    const std::vector<corpus::PathRecord> records = corpus::extract_paths(text, path_cap, extra);
    std::map<corpus::PairKey, std::vector<corpus::PathRecord>> by_pair;
    for (const corpus::PathRecord& r : records) by_pair[{r.head, r.tail}].push_back(r);

    joint::BoundData data;
    data.sentences = corpus::index_sentences(text, vocab);
    data.bags = text.bags;
    data.paths_by_bag.resize(data.bags.size());

    const SeededRng root(seed);
    std::vector<ProbeExample> out;
    std::uint64_t stream = 0;
    for (const corpus::Triple& t : pairless) {
        auto it = by_pair.find({t.head, t.tail});
        ++stream;
        if (it == by_pair.end()) continue;
        for (const corpus::PathRecord& rec : it->second) {
            const auto feature =
                joint::hop_pair_feature(model, data, rec, bag_mode, root.fork(stream));
            if (feature) {
                out.push_back({*feature, t.relation});
                break;  // one path per fact, the strongest usable one
            }
        }
    }
    return out;
}

}  // namespace pathrex::eval
