#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pathrex/corpus.hpp"
#include "pathrex/model.hpp"
#include "pathrex/numkernel.hpp"
#include "pathrex/text_encoder.hpp"

namespace pathrex::pathenc {

enum class HopMode { kGold, kGreedy };

template <typename T>
struct HopAssignment {
    std::int32_t relation = -1;
    T confidence = T(0);   // E of this hop, from the max-one text score
    std::int32_t sentence = -1;  // position within the hop bag
    bool from_gold = false;
};

// p(r | r_a, r_b): similarity of each relation embedding to the composed path
// embedding r_a + r_b under negative L1 distance, softmax-normalized.
template <typename T>
std::vector<T> path_relation_prob(std::int32_t rel_a, std::int32_t rel_b,
                                  const TensorT<T>& rel_emb) {
    const std::int64_t n_r = rel_emb.rows();
    const std::int64_t d_r = rel_emb.cols();
    const T* ra = rel_emb.row(rel_a);
    const T* rb = rel_emb.row(rel_b);
    std::vector<T> scores(static_cast<std::size_t>(n_r));
    for (std::int64_t i = 0; i < n_r; ++i) {
        const T* ri = rel_emb.row(i);
        T dist = T(0);
        for (std::int64_t c = 0; c < d_r; ++c) dist += std::abs(ri[c] - (ra[c] + rb[c]));
        scores[static_cast<std::size_t>(i)] = -dist;
    }
    softmax_inplace(scores.data(), scores.size());
    return scores;
}

// Hop relation and confidence for one leg of a path. Gold mode uses the bag's
// KB relation (the best-scoring one when the pair has several) and signals an
// NA bag by returning nothing; such a path is discarded, not an error.
// Greedy mode picks the argmax over non-NA relations; ties go to the lowest
// relation id. Confidence always comes from the max-one setting.
template <typename T>
std::optional<HopAssignment<T>> infer_hop_relation(const corpus::Bag& bag,
                                                   const textenc::BagForward<T>& fwd,
                                                   HopMode mode) {
    HopAssignment<T> out;
    if (mode == HopMode::kGold) {
        out.from_gold = true;
        bool found = false;
        for (std::int32_t r : bag.gold) {
            if (r == corpus::kNaRelation) continue;
            const auto [score, idx] = textenc::bag_score_max(fwd, r);
            if (!found || score > out.confidence) {
                out.relation = r;
                out.confidence = score;
                out.sentence = idx;
                found = true;
            }
        }
        if (!found) return std::nullopt;  // NA bag: no inference-chain semantics
        return out;
    }
    const auto n_r = static_cast<std::int32_t>(fwd.sents[0].probs.size());
    bool found = false;
    for (std::int32_t r = 0; r < n_r; ++r) {
        if (r == corpus::kNaRelation) continue;
        const auto [score, idx] = textenc::bag_score_max(fwd, r);
        if (!found || score > out.confidence) {
            out.relation = r;
            out.confidence = score;
            out.sentence = idx;
            found = true;
        }
    }
    if (!found) return std::nullopt;  // single-relation inventory of just NA
    return out;
}

// G(h, r, t | p) = E_a * E_b * p(r | r_a, r_b).
template <typename T>
T path_score(std::int32_t relation, const HopAssignment<T>& a, const HopAssignment<T>& b,
             const TensorT<T>& rel_emb) {
    const std::vector<T> probs = path_relation_prob(a.relation, b.relation, rel_emb);
    return a.confidence * b.confidence * probs[static_cast<std::size_t>(relation)];
}

// Max over paths filters the noisy ones; no path means no evidence (0).
template <typename T>
T aggregate_paths(const std::vector<T>& scores) {
    T best = T(0);
    for (T s : scores) best = std::max(best, s);
    return best;
}

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Gradient of G = E_a * E_b * probs[relation] into the relation-embedding
// table. The L1 subgradient uses sign(r_i - (r_a + r_b)) with sign(0) = 0.
// Returns (dG/dE_a, dG/dE_b) scaled by `upstream` for routing into the hop
// text scores.
template <typename T>
std::pair<T, T> path_backward(std::int32_t relation, const HopAssignment<T>& a,
                              const HopAssignment<T>& b, const std::vector<T>& probs, T upstream,
                              const TensorT<T>& rel_emb, TensorT<T>& rel_emb_grad) {
    const std::int64_t n_r = rel_emb.rows();
    const std::int64_t d_r = rel_emb.cols();
    const T p_r = probs[static_cast<std::size_t>(relation)];
    const T d_e_a = upstream * b.confidence * p_r;
    const T d_e_b = upstream * a.confidence * p_r;

    // upstream into the probability vector: only the scored relation
    const T dp_r = upstream * a.confidence * b.confidence;
    // softmax backward with one-hot upstream: do_i = p_i * dp_r * ([i==r] - p_r)
    const T* ra = rel_emb.row(a.relation);
    const T* rb = rel_emb.row(b.relation);
    T* ga = rel_emb_grad.row(a.relation);
    T* gb = rel_emb_grad.row(b.relation);
    for (std::int64_t i = 0; i < n_r; ++i) {
        const T pi = probs[static_cast<std::size_t>(i)];
        const T doi = pi * dp_r * ((i == relation ? T(1) : T(0)) - p_r);
        if (doi == T(0)) continue;
        const T* ri = rel_emb.row(i);
        T* gi = rel_emb_grad.row(i);
        for (std::int64_t c = 0; c < d_r; ++c) {
            const T s = static_cast<T>(sign_of(static_cast<double>(ri[c] - (ra[c] + rb[c]))));
            gi[c] -= doi * s;
            ga[c] += doi * s;
            gb[c] += doi * s;
        }
    }
    return {d_e_a, d_e_b};
}

}  // namespace pathrex::pathenc
