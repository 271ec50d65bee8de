#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pathrex/checkpoint.hpp"
#include "pathrex/config.hpp"
#include "pathrex/corpus.hpp"
#include "pathrex/model.hpp"
#include "pathrex/path_encoder.hpp"
#include "pathrex/text_encoder.hpp"
#include "pathrex/util.hpp"

namespace pathrex::joint {

// L = E + alpha * G with alpha = (1 - E) * beta: path evidence matters less
// the more confident the text side already is.
template <typename T>
T global_score(T text_score, T path_score, T beta) {
    const T alpha = (T(1) - text_score) * beta;
    return text_score + alpha * path_score;
}

// One (h, r, t) training fact, pointing at its pair's bag.
struct TrainItem {
    std::int32_t bag = -1;
    std::int32_t relation = corpus::kNaRelation;
};

// A split bound for scoring: indexed sentences, its bags, and the two-hop
// paths resolved to bag indices (grouped per target bag).
struct BoundData {
    std::vector<corpus::IndexedSentence> sentences;
    std::vector<corpus::Bag> bags;
    std::vector<std::vector<corpus::PathRecord>> paths_by_bag;
};

inline BoundData bind_data(const corpus::CorpusText& text, const corpus::Vocabulary& vocab,
                           const std::vector<corpus::PathRecord>& paths) {
    BoundData out;
    out.sentences = corpus::index_sentences(text, vocab);
    out.bags = text.bags;
    out.paths_by_bag.resize(out.bags.size());
    for (const corpus::PathRecord& p : paths) {
        const std::int32_t target = text.find_bag_index(p.head, p.tail);
        if (target < 0) continue;  // zero-shot pair, handled by the probe
        out.paths_by_bag[static_cast<std::size_t>(target)].push_back(p);
    }
    return out;
}

// NA bags train with gold NA so the model learns to park mass there.
inline std::vector<TrainItem> training_items(const BoundData& data) {
    std::vector<TrainItem> items;
    for (std::size_t i = 0; i < data.bags.size(); ++i)
        for (std::int32_t r : data.bags[i].gold)
            items.push_back({static_cast<std::int32_t>(i), r});
    return items;
}

template <typename T>
struct ItemContext {
    const ModelT<T>* model = nullptr;
    const BoundData* data = nullptr;
    textenc::BagMode bag_mode = textenc::BagMode::kMax;
    double dropout_keep = 1.0;  // 1.0 disables dropout
    T beta = T(0.5);
    bool freeze_hop_confidence = false;
    const corpus::StringTable* entities = nullptr;  // names in error messages
};

namespace detail {

template <typename T>
struct PathForward {
    textenc::BagForward<T> hop1, hop2;
    pathenc::HopAssignment<T> a, b;
    std::vector<T> probs;
    T score = T(0);
};

inline std::string pair_label(const corpus::Bag& bag, const corpus::StringTable* entities) {
    if (entities != nullptr)
        return "(" + entities->name(bag.head) + ", " + entities->name(bag.tail) + ")";
    return "(" + std::to_string(bag.head) + ", " + std::to_string(bag.tail) + ")";
}

inline const std::vector<corpus::PathRecord>& no_paths() {
    static const std::vector<corpus::PathRecord> empty;
    return empty;
}

}  // namespace detail

// Forward (and, when grads is non-null, backward) for one item:
// J contribution log L with L = E + (1-E)*beta*G. Gradient treats alpha as a
// function of E, so dL/dE = 1 - beta*G and dL/dG = (1-E)*beta; the direct
// gradient goes to the selected sentence, the path gradient only to the
// maximizing path (and, unless frozen, its hop sentences).
template <typename T>
double item_objective(const ItemContext<T>& ctx, const TrainItem& item, SeededRng item_rng,
                      GradView<T>* grads) {
    const ModelT<T>& model = *ctx.model;
    const BoundData& data = *ctx.data;
    const ParamView<T> pv = model.view();
    const EncoderConfig& enc = model.enc;
    const corpus::Bag& bag = data.bags[static_cast<std::size_t>(item.bag)];
    const bool training = grads != nullptr && ctx.dropout_keep < 1.0;
    const double keep = training ? ctx.dropout_keep : 1.0;

    const textenc::BagForward<T> direct =
        textenc::forward_bag(bag, data.sentences, pv, enc, keep, &item_rng);
    const auto [text_score, selected] = textenc::bag_score(direct, item.relation, ctx.bag_mode, &item_rng);

    std::vector<detail::PathForward<T>> paths;
    int best_path = -1;
    // beta == 0 is exactly the text-only model: no path forwards, no draws
    const auto& path_records = ctx.beta != T(0)
                                   ? data.paths_by_bag[static_cast<std::size_t>(item.bag)]
                                   : detail::no_paths();
    for (const corpus::PathRecord& pr : path_records) {
        detail::PathForward<T> pf;
        pf.hop1 = textenc::forward_bag(data.bags[static_cast<std::size_t>(pr.hop1_bag)],
                                       data.sentences, pv, enc, keep, &item_rng);
        pf.hop2 = textenc::forward_bag(data.bags[static_cast<std::size_t>(pr.hop2_bag)],
                                       data.sentences, pv, enc, keep, &item_rng);
        auto a = pathenc::infer_hop_relation(data.bags[static_cast<std::size_t>(pr.hop1_bag)],
                                             pf.hop1, pathenc::HopMode::kGold);
        auto b = pathenc::infer_hop_relation(data.bags[static_cast<std::size_t>(pr.hop2_bag)],
                                             pf.hop2, pathenc::HopMode::kGold);
        if (!a || !b) continue;  // hop through an NA bag carries no chain semantics
        pf.a = *a;
        pf.b = *b;
        pf.probs = pathenc::path_relation_prob(pf.a.relation, pf.b.relation, *pv.rel_emb);
        pf.score = pf.a.confidence * pf.b.confidence *
                   pf.probs[static_cast<std::size_t>(item.relation)];
        paths.push_back(std::move(pf));
        if (best_path < 0 || paths.back().score > paths[static_cast<std::size_t>(best_path)].score)
            best_path = static_cast<int>(paths.size()) - 1;
    }

    const T path_agg = best_path < 0 ? T(0) : paths[static_cast<std::size_t>(best_path)].score;
    const T L = global_score(text_score, path_agg, ctx.beta);
    if (!(static_cast<double>(L) > 0.0) || !std::isfinite(static_cast<double>(L)))
        throw NumericError("objective: non-finite global score for pair " +
                           detail::pair_label(bag, ctx.entities) + " relation " +
                           std::to_string(item.relation));

    if (grads != nullptr) {
        const double dj_dl = 1.0 / static_cast<double>(L);
        const T dl_de = T(1) - ctx.beta * path_agg;
        std::vector<T> dprobs(static_cast<std::size_t>(enc.n_r), T(0));
        dprobs[static_cast<std::size_t>(item.relation)] = static_cast<T>(dj_dl) * dl_de;
        textenc::encoder_backward(direct.sents[static_cast<std::size_t>(selected)], dprobs, pv,
                                  *grads, enc);

        if (best_path >= 0) {
            const detail::PathForward<T>& pf = paths[static_cast<std::size_t>(best_path)];
            const T dl_dg = (T(1) - text_score) * ctx.beta;
            const T upstream = static_cast<T>(dj_dl) * dl_dg;
            const auto [d_e_a, d_e_b] = pathenc::path_backward(
                item.relation, pf.a, pf.b, pf.probs, upstream, *pv.rel_emb, *grads->rel_emb);
            if (!ctx.freeze_hop_confidence) {
                std::vector<T> dp(static_cast<std::size_t>(enc.n_r), T(0));
                dp[static_cast<std::size_t>(pf.a.relation)] = d_e_a;
                textenc::encoder_backward(pf.hop1.sents[static_cast<std::size_t>(pf.a.sentence)],
                                          dp, pv, *grads, enc);
                dp.assign(static_cast<std::size_t>(enc.n_r), T(0));
                dp[static_cast<std::size_t>(pf.b.relation)] = d_e_b;
                textenc::encoder_backward(pf.hop2.sents[static_cast<std::size_t>(pf.b.sentence)],
                                          dp, pv, *grads, enc);
            }
        }
    }
    return std::log(static_cast<double>(L));
}

// Sum of log L over items; item i draws its randomness from
// root.fork(stream_base + i) so results do not depend on scheduling.
template <typename T>
double batch_objective(const ItemContext<T>& ctx, const std::vector<TrainItem>& items,
                       const SeededRng& root, std::uint64_t stream_base, GradView<T>* grads) {
    double j = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i)
        j += item_objective(ctx, items[i], root.fork(stream_base + i), grads);
    return j;
}

struct TrainResult {
    std::vector<double> epoch_objective;
    std::int64_t item_count = 0;
    bool diverged = false;
    std::string message;
};

// Mini-batch SGD ascent over entity-pair items, shuffled each epoch from the
// seed. With threads > 1 each worker accumulates into its own buffer and the
// buffers merge in worker order, so a given (seed, threads) pair is
// deterministic; threads == 1 is the bitwise-reproducible reference path.
template <typename T>
TrainResult train(ModelT<T>& model, const BoundData& data, const RunConfig& cfg,
                  const corpus::StringTable* entities = nullptr,
                  const std::string& checkpoint_path = "") {
    ItemContext<T> ctx;
    ctx.model = &model;
    ctx.data = &data;
    ctx.bag_mode = textenc::bag_mode_from(cfg.bag_mode);
    ctx.dropout_keep = cfg.dropout_keep;
    ctx.beta = static_cast<T>(cfg.beta);
    ctx.freeze_hop_confidence = cfg.freeze_hop_confidence;
    ctx.entities = entities;

    std::vector<TrainItem> items = training_items(data);
    TrainResult result;
    result.item_count = static_cast<std::int64_t>(items.size());
    if (items.empty()) throw std::invalid_argument("train: no training items");

    const SeededRng root(cfg.seed);
    std::vector<std::size_t> order(items.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        SeededRng shuffle_rng = root.fork(0x53484600u + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        const std::uint64_t epoch_stream = (static_cast<std::uint64_t>(epoch) + 1) << 32;

        double epoch_j = 0.0;
        for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(items.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainItem> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(items[order[i]]);

            double batch_j = 0.0;
            try {
                if (cfg.threads <= 1) {
                    GradView<T> gv = model.grad_view();
                    batch_j = batch_objective(ctx, batch, root, epoch_stream + start, &gv);
                } else {
                    const int workers = std::min<int>(cfg.threads, static_cast<int>(batch.size()));
                    std::vector<GradBuffer<T>> buffers;
                    buffers.reserve(static_cast<std::size_t>(workers));
                    for (int w = 0; w < workers; ++w) buffers.emplace_back(model.params);
                    std::vector<double> partial(static_cast<std::size_t>(workers), 0.0);
                    std::vector<std::string> failures(static_cast<std::size_t>(workers));
                    std::vector<std::thread> pool;
                    const std::size_t chunk = (batch.size() + static_cast<std::size_t>(workers) - 1) /
                                              static_cast<std::size_t>(workers);
                    for (int w = 0; w < workers; ++w) {
                        pool.emplace_back([&, w] {
                            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
                            const std::size_t hi = std::min(batch.size(), lo + chunk);
                            try {
                                GradView<T> gv = buffers[static_cast<std::size_t>(w)].view(model.params);
                                for (std::size_t i = lo; i < hi; ++i)
                                    partial[static_cast<std::size_t>(w)] += item_objective(
                                        ctx, batch[i], root.fork(epoch_stream + start + i), &gv);
                            } catch (const std::exception& e) {
                                failures[static_cast<std::size_t>(w)] = e.what();
                            }
                        });
                    }
                    for (auto& t : pool) t.join();
                    for (const auto& f : failures)
                        if (!f.empty()) throw NumericError(f);
                    for (int w = 0; w < workers; ++w) {
                        buffers[static_cast<std::size_t>(w)].add_into(model.params);
                        batch_j += partial[static_cast<std::size_t>(w)];
                    }
                }
                if (!std::isfinite(batch_j))
                    throw NumericError("objective: non-finite batch objective");
                sgd_step(model.params, static_cast<T>(cfg.learning_rate));
            } catch (const NumericError& e) {
                result.diverged = true;
                result.message = e.what();
                log_warn(std::string("training aborted: ") + e.what() +
                         (checkpoint_path.empty() ? "" : "; last good checkpoint retained"));
                return result;
            }
            epoch_j += batch_j;
        }
        result.epoch_objective.push_back(epoch_j);
        if (!checkpoint_path.empty()) save_checkpoint(model, checkpoint_path);
        log_info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
                 " objective " + std::to_string(epoch_j));
    }
    return result;
}

enum class HopSelect { kGreedy, kExhaustive };

inline HopSelect hop_select_from(const std::string& name) {
    return name == "exhaustive" ? HopSelect::kExhaustive : HopSelect::kGreedy;
}

template <typename T>
struct ScoreOptions {
    textenc::BagMode bag_mode = textenc::BagMode::kMax;
    HopSelect hop_select = HopSelect::kGreedy;
    T beta = T(0.5);
};

// Inference-time L for every candidate relation of one pair; dropout off.
// Greedy hop selection picks each hop's best non-NA relation once; exhaustive
// maximizes the hop-product score over all non-NA relation pairs.
template <typename T>
std::vector<T> score_candidates(const ModelT<T>& model, const BoundData& data,
                                std::int32_t bag_index,
                                const std::vector<std::int32_t>& candidates,
                                const ScoreOptions<T>& opt, SeededRng pair_rng) {
    const ParamView<T> pv = model.view();
    const EncoderConfig& enc = model.enc;
    const corpus::Bag& bag = data.bags[static_cast<std::size_t>(bag_index)];
    const textenc::BagForward<T> direct = textenc::forward_bag(bag, data.sentences, pv, enc);

    // Random setting draws one representative sentence per pair, shared by
    // every candidate relation.
    int rand_pick = -1;
    if (opt.bag_mode == textenc::BagMode::kRand)
        rand_pick = static_cast<int>(pair_rng.next_below(direct.sents.size()));

    std::vector<T> path_best(candidates.size(), T(0));
    const auto& path_records = opt.beta != T(0)
                                   ? data.paths_by_bag[static_cast<std::size_t>(bag_index)]
                                   : detail::no_paths();
    for (const corpus::PathRecord& pr : path_records) {
        const corpus::Bag& bag1 = data.bags[static_cast<std::size_t>(pr.hop1_bag)];
        const corpus::Bag& bag2 = data.bags[static_cast<std::size_t>(pr.hop2_bag)];
        const textenc::BagForward<T> hop1 = textenc::forward_bag(bag1, data.sentences, pv, enc);
        const textenc::BagForward<T> hop2 = textenc::forward_bag(bag2, data.sentences, pv, enc);
        if (opt.hop_select == HopSelect::kGreedy) {
            const auto a = pathenc::infer_hop_relation(bag1, hop1, pathenc::HopMode::kGreedy);
            const auto b = pathenc::infer_hop_relation(bag2, hop2, pathenc::HopMode::kGreedy);
            if (!a || !b) continue;
            const std::vector<T> probs =
                pathenc::path_relation_prob(a->relation, b->relation, *pv.rel_emb);
            const T conf = a->confidence * b->confidence;
            for (std::size_t c = 0; c < candidates.size(); ++c)
                path_best[c] = std::max(path_best[c],
                                        conf * probs[static_cast<std::size_t>(candidates[c])]);
        } else {
            for (std::int32_t ra = 0; ra < enc.n_r; ++ra) {
                if (ra == corpus::kNaRelation) continue;
                const T ea = textenc::bag_score_max(hop1, ra).first;
                for (std::int32_t rb = 0; rb < enc.n_r; ++rb) {
                    if (rb == corpus::kNaRelation) continue;
                    const T eb = textenc::bag_score_max(hop2, rb).first;
                    const std::vector<T> probs = pathenc::path_relation_prob(ra, rb, *pv.rel_emb);
                    const T conf = ea * eb;
                    for (std::size_t c = 0; c < candidates.size(); ++c)
                        path_best[c] = std::max(path_best[c],
                                                conf * probs[static_cast<std::size_t>(candidates[c])]);
                }
            }
        }
    }

    std::vector<T> out(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const std::int32_t r = candidates[c];
        const T e = opt.bag_mode == textenc::BagMode::kRand
                        ? direct.sents[static_cast<std::size_t>(rand_pick)].probs[static_cast<std::size_t>(r)]
                        : textenc::bag_score_max(direct, r).first;
        out[c] = global_score(e, path_best[c], opt.beta);
    }
    return out;
}

// Concatenated hop sentence representations [s_hop1 ; s_hop2] for a pair seen
// only through a path. Each hop contributes the sentence its bag mode selects
// for the hop's gold relation; NA hop bags make the path unusable.
template <typename T>
std::optional<std::vector<double>> hop_pair_feature(const ModelT<T>& model, const BoundData& data,
                                                    const corpus::PathRecord& path,
                                                    textenc::BagMode mode, SeededRng rng) {
    const ParamView<T> pv = model.view();
    const EncoderConfig& enc = model.enc;
    std::vector<double> feature;
    feature.reserve(2 * static_cast<std::size_t>(enc.d_c));
    for (std::int32_t hop_bag : {path.hop1_bag, path.hop2_bag}) {
        const corpus::Bag& bag = data.bags[static_cast<std::size_t>(hop_bag)];
        const textenc::BagForward<T> fwd = textenc::forward_bag(bag, data.sentences, pv, enc);
        const auto gold = pathenc::infer_hop_relation(bag, fwd, pathenc::HopMode::kGold);
        if (!gold) return std::nullopt;
        int pick = gold->sentence;
        if (mode == textenc::BagMode::kRand) pick = static_cast<int>(rng.next_below(fwd.sents.size()));
        const auto& repr = fwd.sents[static_cast<std::size_t>(pick)].repr;
        for (T x : repr) feature.push_back(static_cast<double>(x));
    }
    return feature;
}

}  // namespace pathrex::joint
