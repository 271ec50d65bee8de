#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <utility>
#include <vector>

#include "pathrex/corpus.hpp"
#include "pathrex/model.hpp"
#include "pathrex/numkernel.hpp"

namespace pathrex::textenc {

enum class BagMode { kMax, kRand };

inline BagMode bag_mode_from(const std::string& name) {
    return name == "rand" ? BagMode::kRand : BagMode::kMax;
}

// Everything the backward pass needs from one sentence forward.
template <typename T>
struct SentenceForward {
    std::vector<std::int32_t> tokens;
    std::vector<std::int32_t> head_rows;  // clipped-offset row per position
    std::vector<std::int32_t> tail_rows;
    TensorT<T> input;                  // l x d
    std::vector<std::int32_t> argmax;  // per column of the conv output
    std::vector<T> repr;               // s = tanh(column max), d_c
    std::vector<T> dropout;            // empty in test mode
    std::vector<T> probs;              // n_r
};

// Input row i = [word(w_i) ; pos_head(clip(i - head)) ; pos_tail(clip(i - tail))].
template <typename T>
TensorT<T> embed_tokens(const corpus::IndexedSentence& inst, const ParamView<T>& p,
                        const EncoderConfig& cfg) {
    const auto len = static_cast<std::int64_t>(inst.tokens.size());
    const int d = cfg.input_dim();
    TensorT<T> input({len, d});
    for (std::int64_t i = 0; i < len; ++i) {
        T* row = input.row(i);
        const std::int32_t tok = inst.tokens[static_cast<std::size_t>(i)];
        const T* w = p.word_emb->row(tok);
        std::copy(w, w + cfg.d_w, row);
        const int ho = std::clamp(static_cast<int>(i) - inst.head_pos, -cfg.pos_clip, cfg.pos_clip);
        const int to = std::clamp(static_cast<int>(i) - inst.tail_pos, -cfg.pos_clip, cfg.pos_clip);
        const T* ph = p.pos_head->row(ho + cfg.pos_clip);
        std::copy(ph, ph + cfg.d_p, row + cfg.d_w);
        const T* pt = p.pos_tail->row(to + cfg.pos_clip);
        std::copy(pt, pt + cfg.d_p, row + cfg.d_w + cfg.d_p);
    }
    return input;
}

// Sliding window of size k over the input rows, out-of-range rows are zero;
// exactly l+k-1 output rows, each an affine map by the convolution matrix.
template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const ParamView<T>& p, const EncoderConfig& cfg) {
    const std::int64_t len = input.rows();
    if (len < 1) throw std::invalid_argument("conv_forward: empty input");
    const int d = cfg.input_dim();
    const int k = cfg.window;
    const std::int64_t n_out = len + k - 1;
    TensorT<T> out({n_out, cfg.d_c});
    for (std::int64_t i = 0; i < n_out; ++i) {
        T* hi = out.row(i);
        for (int j = 0; j < cfg.d_c; ++j) hi[j] = p.conv_b->v[static_cast<std::size_t>(j)];
        for (int r = 0; r < k; ++r) {
            const std::int64_t src = i - k + 1 + r;
            if (src < 0 || src >= len) continue;
            const T* x = input.row(src);
            for (int j = 0; j < cfg.d_c; ++j) {
                const T* wj = p.conv_w->row(j) + static_cast<std::int64_t>(r) * d;
                T acc = T(0);
                for (int c = 0; c < d; ++c) acc += wj[c] * x[c];
                hi[j] += acc;
            }
        }
    }
    return out;
}

// s_j = tanh(max_i h[i][j]); ties go to the lowest row index.
template <typename T>
void pool_tanh(const TensorT<T>& conv_out, std::vector<T>& repr,
               std::vector<std::int32_t>& argmax) {
    const std::int64_t rows = conv_out.rows();
    const std::int64_t cols = conv_out.cols();
    if (rows < 1) throw std::invalid_argument("pool_tanh: no rows");
    repr.assign(static_cast<std::size_t>(cols), T(0));
    argmax.assign(static_cast<std::size_t>(cols), 0);
    for (std::int64_t j = 0; j < cols; ++j) {
        T best = conv_out.at(0, j);
        std::int32_t best_i = 0;
        for (std::int64_t i = 1; i < rows; ++i) {
            const T x = conv_out.at(i, j);
            if (x > best) {
                best = x;
                best_i = static_cast<std::int32_t>(i);
            }
        }
        repr[static_cast<std::size_t>(j)] = std::tanh(best);
        argmax[static_cast<std::size_t>(j)] = best_i;
    }
}

// softmax(cls_w * s + cls_b); a dropout mask, when given, scales s first.
template <typename T>
std::vector<T> sentence_prob(const std::vector<T>& repr, const ParamView<T>& p,
                             std::type_identity_t<const std::vector<T>*> dropout = nullptr) {
    const std::int64_t n_r = p.cls_w->rows();
    const std::int64_t d_c = p.cls_w->cols();
    std::vector<T> logits(static_cast<std::size_t>(n_r));
    for (std::int64_t r = 0; r < n_r; ++r) {
        const T* ur = p.cls_w->row(r);
        T acc = p.cls_b->v[static_cast<std::size_t>(r)];
        if (dropout != nullptr) {
            for (std::int64_t c = 0; c < d_c; ++c)
                acc += ur[c] * repr[static_cast<std::size_t>(c)] * (*dropout)[static_cast<std::size_t>(c)];
        } else {
            for (std::int64_t c = 0; c < d_c; ++c) acc += ur[c] * repr[static_cast<std::size_t>(c)];
        }
        logits[static_cast<std::size_t>(r)] = acc;
    }
    softmax_inplace(logits.data(), logits.size());
    return logits;
}

template <typename T>
SentenceForward<T> encode_sentence(const corpus::IndexedSentence& inst, const ParamView<T>& p,
                                   const EncoderConfig& cfg, std::vector<T> dropout = {}) {
    SentenceForward<T> fwd;
    fwd.tokens = inst.tokens;
    const auto len = static_cast<std::int64_t>(inst.tokens.size());
    fwd.head_rows.resize(static_cast<std::size_t>(len));
    fwd.tail_rows.resize(static_cast<std::size_t>(len));
    for (std::int64_t i = 0; i < len; ++i) {
        fwd.head_rows[static_cast<std::size_t>(i)] =
            std::clamp(static_cast<int>(i) - inst.head_pos, -cfg.pos_clip, cfg.pos_clip) + cfg.pos_clip;
        fwd.tail_rows[static_cast<std::size_t>(i)] =
            std::clamp(static_cast<int>(i) - inst.tail_pos, -cfg.pos_clip, cfg.pos_clip) + cfg.pos_clip;
    }
    fwd.input = embed_tokens(inst, p, cfg);
    const TensorT<T> conv = conv_forward(fwd.input, p, cfg);
    pool_tanh(conv, fwd.repr, fwd.argmax);
    fwd.dropout = std::move(dropout);
    fwd.probs = sentence_prob(fwd.repr, p, fwd.dropout.empty() ? nullptr : &fwd.dropout);
    return fwd;
}

// One forward per member sentence; probs are rows of a bag-local matrix.
template <typename T>
struct BagForward {
    std::vector<SentenceForward<T>> sents;
};

// keep_prob < 1 draws one inverted-dropout mask per sentence from item_rng.
template <typename T>
BagForward<T> forward_bag(const corpus::Bag& bag,
                          const std::vector<corpus::IndexedSentence>& instances,
                          const ParamView<T>& p, const EncoderConfig& cfg, double keep_prob = 1.0,
                          SeededRng* item_rng = nullptr) {
    if (bag.sentences.empty()) throw std::invalid_argument("forward_bag: empty bag");
    BagForward<T> fwd;
    fwd.sents.reserve(bag.sentences.size());
    for (std::int32_t idx : bag.sentences) {
        std::vector<T> mask;
        if (keep_prob < 1.0 && item_rng != nullptr)
            mask = dropout_mask<T>(*item_rng, keep_prob, static_cast<std::size_t>(cfg.d_c));
        fwd.sents.push_back(
            encode_sentence(instances[static_cast<std::size_t>(idx)], p, cfg, std::move(mask)));
    }
    return fwd;
}

// Max-one setting: the most confident sentence for this relation wins,
// ties to the lowest index. Returns (score, sentence position in the bag).
template <typename T>
std::pair<T, int> bag_score_max(const BagForward<T>& fwd, std::int32_t relation) {
    if (fwd.sents.empty()) throw std::invalid_argument("bag_score: empty bag");
    T best = fwd.sents[0].probs[static_cast<std::size_t>(relation)];
    int best_i = 0;
    for (std::size_t i = 1; i < fwd.sents.size(); ++i) {
        const T x = fwd.sents[i].probs[static_cast<std::size_t>(relation)];
        if (x > best) {
            best = x;
            best_i = static_cast<int>(i);
        }
    }
    return {best, best_i};
}

template <typename T>
std::pair<T, int> bag_score(const BagForward<T>& fwd, std::int32_t relation, BagMode mode,
                            SeededRng* rng) {
    if (fwd.sents.empty()) throw std::invalid_argument("bag_score: empty bag");
    if (mode == BagMode::kMax) return bag_score_max(fwd, relation);
    if (rng == nullptr) throw std::invalid_argument("bag_score: rand mode needs an rng");
    const auto i = static_cast<int>(rng->next_below(fwd.sents.size()));
    return {fwd.sents[static_cast<std::size_t>(i)].probs[static_cast<std::size_t>(relation)], i};
}

// Chain rule from a gradient at the probability output back to every
// parameter this sentence touched. Pooling routes gradient only to the
// cached argmax rows; embedding tables receive sparse row updates.
template <typename T>
void encoder_backward(const SentenceForward<T>& fwd, const std::vector<T>& dprobs,
                      const ParamView<T>& p, GradView<T>& g, const EncoderConfig& cfg) {
    const std::int64_t n_r = p.cls_w->rows();
    const int d_c = cfg.d_c;
    const int d = cfg.input_dim();
    const int k = cfg.window;
    const auto len = static_cast<std::int64_t>(fwd.tokens.size());
    if (fwd.repr.empty() || fwd.probs.empty())
        throw std::logic_error("encoder_backward: forward cache missing");
    if (static_cast<std::int64_t>(dprobs.size()) != n_r)
        throw DimError("encoder_backward: upstream gradient has wrong length");

    // softmax
    T dot = T(0);
    for (std::int64_t r = 0; r < n_r; ++r)
        dot += dprobs[static_cast<std::size_t>(r)] * fwd.probs[static_cast<std::size_t>(r)];
    std::vector<T> dlogits(static_cast<std::size_t>(n_r));
    for (std::int64_t r = 0; r < n_r; ++r)
        dlogits[static_cast<std::size_t>(r)] =
            fwd.probs[static_cast<std::size_t>(r)] * (dprobs[static_cast<std::size_t>(r)] - dot);

    // classifier affine; s_tilde is the (possibly dropped-out) representation
    const bool has_dropout = !fwd.dropout.empty();
    std::vector<T> ds(static_cast<std::size_t>(d_c), T(0));
    for (std::int64_t r = 0; r < n_r; ++r) {
        const T dr = dlogits[static_cast<std::size_t>(r)];
        if (dr == T(0)) continue;
        const T* ur = p.cls_w->row(r);
        T* gur = g.cls_w->row(r);
        for (int c = 0; c < d_c; ++c) {
            const T s_tilde = has_dropout
                                  ? fwd.repr[static_cast<std::size_t>(c)] * fwd.dropout[static_cast<std::size_t>(c)]
                                  : fwd.repr[static_cast<std::size_t>(c)];
            gur[c] += dr * s_tilde;
            ds[static_cast<std::size_t>(c)] += dr * ur[c];
        }
        g.cls_b->v[static_cast<std::size_t>(r)] += dr;
    }
    if (has_dropout)
        for (int c = 0; c < d_c; ++c) ds[static_cast<std::size_t>(c)] *= fwd.dropout[static_cast<std::size_t>(c)];

    // tanh, then route each column's gradient to its argmax conv row
    std::vector<T> dmax(static_cast<std::size_t>(d_c));
    for (int c = 0; c < d_c; ++c) {
        const T s = fwd.repr[static_cast<std::size_t>(c)];
        dmax[static_cast<std::size_t>(c)] = ds[static_cast<std::size_t>(c)] * (T(1) - s * s);
    }

    std::vector<std::vector<std::int32_t>> cols_by_row;
    {
        std::int32_t max_row = 0;
        for (std::int32_t r : fwd.argmax) max_row = std::max(max_row, r);
        cols_by_row.resize(static_cast<std::size_t>(max_row) + 1);
        for (int c = 0; c < d_c; ++c)
            if (dmax[static_cast<std::size_t>(c)] != T(0))
                cols_by_row[static_cast<std::size_t>(fwd.argmax[static_cast<std::size_t>(c)])].push_back(c);
    }

    TensorT<T> dinput({len, d});
    std::vector<T> q(static_cast<std::size_t>(k) * d);
    for (std::size_t row = 0; row < cols_by_row.size(); ++row) {
        const auto& cols = cols_by_row[row];
        if (cols.empty()) continue;
        // materialize the window for this conv row (zeros outside the sentence)
        std::fill(q.begin(), q.end(), T(0));
        const auto i = static_cast<std::int64_t>(row);
        for (int r = 0; r < k; ++r) {
            const std::int64_t src = i - k + 1 + r;
            if (src < 0 || src >= len) continue;
            const T* x = fwd.input.row(src);
            std::copy(x, x + d, q.begin() + static_cast<std::ptrdiff_t>(r) * d);
        }
        for (std::int32_t c : cols) {
            const T dh = dmax[static_cast<std::size_t>(c)];
            T* gw = g.conv_w->row(c);
            const T* w = p.conv_w->row(c);
            for (int r = 0; r < k; ++r) {
                const std::int64_t src = i - k + 1 + r;
                if (src < 0 || src >= len) continue;
                const std::int64_t off = static_cast<std::int64_t>(r) * d;
                const T* qr = q.data() + off;
                T* din = dinput.row(src);
                const T* wr = w + off;
                T* gwr = gw + off;
                for (int cc = 0; cc < d; ++cc) {
                    gwr[cc] += dh * qr[cc];
                    din[cc] += dh * wr[cc];
                }
            }
            g.conv_b->v[static_cast<std::size_t>(c)] += dh;
        }
    }

    // scatter into the embedding tables
    for (std::int64_t i = 0; i < len; ++i) {
        const T* din = dinput.row(i);
        T* gw = g.word_emb->row(fwd.tokens[static_cast<std::size_t>(i)]);
        for (int c = 0; c < cfg.d_w; ++c) gw[c] += din[c];
        T* gh = g.pos_head->row(fwd.head_rows[static_cast<std::size_t>(i)]);
        for (int c = 0; c < cfg.d_p; ++c) gh[c] += din[cfg.d_w + c];
        T* gt = g.pos_tail->row(fwd.tail_rows[static_cast<std::size_t>(i)]);
        for (int c = 0; c < cfg.d_p; ++c) gt[c] += din[cfg.d_w + cfg.d_p + c];
    }
}

}  // namespace pathrex::textenc
