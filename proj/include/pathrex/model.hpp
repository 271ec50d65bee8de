#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pathrex/config.hpp"
#include "pathrex/corpus.hpp"
#include "pathrex/numkernel.hpp"
#include "pathrex/rng.hpp"

namespace pathrex {

struct EncoderConfig {
    int d_w = 50;
    int d_p = 5;
    int d_c = 230;
    int window = 3;
    int n_r = 0;
    int max_len = 120;
    int pos_clip = 30;

    int input_dim() const { return d_w + 2 * d_p; }   // d = d_w + 2*d_p
    int pos_rows() const { return 2 * pos_clip + 1; }

    void validate() const {
        if (d_w < 1 || d_p < 1 || d_c < 1 || window < 1 || n_r < 1 || max_len < 1 || pos_clip < 0)
            throw ConfigError("encoder config: all dimensions must be positive");
    }
};

namespace param {
inline constexpr const char* kWordEmb = "word_emb";
inline constexpr const char* kPosHead = "pos_head";
inline constexpr const char* kPosTail = "pos_tail";
inline constexpr const char* kConvW = "conv_w";
inline constexpr const char* kConvB = "conv_b";
inline constexpr const char* kClsW = "cls_w";
inline constexpr const char* kClsB = "cls_b";
inline constexpr const char* kRelEmb = "rel_emb";

// Checkpoint serialization order.
inline constexpr std::array<const char*, 8> kOrder = {kWordEmb, kPosHead, kPosTail, kConvW,
                                                      kConvB,   kClsW,    kClsB,    kRelEmb};
}  // namespace param

// Resolved read-only pointers into a ParamStore, one lookup per pass.
template <typename T>
struct ParamView {
    const TensorT<T>* word_emb;
    const TensorT<T>* pos_head;
    const TensorT<T>* pos_tail;
    const TensorT<T>* conv_w;
    const TensorT<T>* conv_b;
    const TensorT<T>* cls_w;
    const TensorT<T>* cls_b;
    const TensorT<T>* rel_emb;
};

// Mutable gradient sinks in the same layout; may point into a ParamStore's own
// gradient buffers or into a per-worker GradBuffer.
template <typename T>
struct GradView {
    TensorT<T>* word_emb;
    TensorT<T>* pos_head;
    TensorT<T>* pos_tail;
    TensorT<T>* conv_w;
    TensorT<T>* conv_b;
    TensorT<T>* cls_w;
    TensorT<T>* cls_b;
    TensorT<T>* rel_emb;
};

template <typename T>
struct ModelT {
    EncoderConfig enc;
    int d_r = 40;
    std::int64_t vocab_size = 0;
    std::uint64_t vocab_hash = 0;
    ParamStoreT<T> params;

    ParamView<T> view() const {
        return {&params.value(param::kWordEmb), &params.value(param::kPosHead),
                &params.value(param::kPosTail), &params.value(param::kConvW),
                &params.value(param::kConvB),   &params.value(param::kClsW),
                &params.value(param::kClsB),    &params.value(param::kRelEmb)};
    }

    GradView<T> grad_view() {
        return {&params.grad(param::kWordEmb), &params.grad(param::kPosHead),
                &params.grad(param::kPosTail), &params.grad(param::kConvW),
                &params.grad(param::kConvB),   &params.grad(param::kClsW),
                &params.grad(param::kClsB),    &params.grad(param::kRelEmb)};
    }
};

using Model32 = ModelT<float>;
using Model64 = ModelT<double>;

// Per-worker gradient accumulation, merged into the store in declared order.
template <typename T>
struct GradBuffer {
    std::vector<TensorT<T>> tensors;

    explicit GradBuffer(const ParamStoreT<T>& store) {
        tensors.reserve(store.size());
        for (std::size_t i = 0; i < store.size(); ++i)
            tensors.emplace_back(store.entry(i).value.shape);
    }

    GradView<T> view(const ParamStoreT<T>& store) {
        auto at = [&](const char* name) { return &tensors[store.entry_index(name)]; };
        return {at(param::kWordEmb), at(param::kPosHead), at(param::kPosTail), at(param::kConvW),
                at(param::kConvB),   at(param::kClsW),    at(param::kClsB),    at(param::kRelEmb)};
    }

    void add_into(ParamStoreT<T>& store) const {
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            auto& dst = store.entry(i).grad.v;
            const auto& src = tensors[i].v;
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
    }

    void clear() {
        for (auto& t : tensors) t.fill(T(0));
    }
};

// Word table from pretrained vectors when given, otherwise uniform
// [-0.25, 0.25]/d_w like the loader's fallback rows. Convolution and
// classifier weights use the symmetric fan-in/fan-out bound, their biases
// start at zero, and the position/relation embeddings start near zero.
template <typename T>
ModelT<T> init_model(const EncoderConfig& enc, int d_r, std::int64_t vocab_size,
                     std::uint64_t vocab_hash, SeededRng& rng,
                     const TensorT<T>* pretrained_words = nullptr) {
    enc.validate();
    if (d_r < 1) throw ConfigError("init_model: d_r must be positive");
    if (vocab_size < 2) throw ConfigError("init_model: vocabulary too small");

    ModelT<T> m;
    m.enc = enc;
    m.d_r = d_r;
    m.vocab_size = vocab_size;
    m.vocab_hash = vocab_hash;

    auto uniform_fill = [&rng](TensorT<T>& t, double lo, double hi) {
        for (auto& x : t.v) x = static_cast<T>(rng.next_range(lo, hi));
    };

    const int d = enc.input_dim();
    {
        TensorT<T> w({vocab_size, enc.d_w});
        if (pretrained_words != nullptr) {
            if (!pretrained_words->same_shape(w))
                throw DimError("init_model: pretrained word table " + pretrained_words->shape_str() +
                               " does not match " + w.shape_str());
            w = *pretrained_words;
        } else {
            uniform_fill(w, -0.25 / enc.d_w, 0.25 / enc.d_w);
        }
        m.params.add(param::kWordEmb, std::move(w));
    }
    {
        TensorT<T> ph({enc.pos_rows(), enc.d_p});
        uniform_fill(ph, -0.01, 0.01);
        m.params.add(param::kPosHead, std::move(ph));
        TensorT<T> pt({enc.pos_rows(), enc.d_p});
        uniform_fill(pt, -0.01, 0.01);
        m.params.add(param::kPosTail, std::move(pt));
    }
    {
        const double bound = std::sqrt(6.0 / (static_cast<double>(enc.window) * d + enc.d_c));
        TensorT<T> w({enc.d_c, static_cast<std::int64_t>(enc.window) * d});
        uniform_fill(w, -bound, bound);
        m.params.add(param::kConvW, std::move(w));
        m.params.add(param::kConvB, TensorT<T>({enc.d_c}));
    }
    {
        const double bound = std::sqrt(6.0 / (static_cast<double>(enc.d_c) + enc.n_r));
        TensorT<T> u({enc.n_r, enc.d_c});
        uniform_fill(u, -bound, bound);
        m.params.add(param::kClsW, std::move(u));
        m.params.add(param::kClsB, TensorT<T>({enc.n_r}));
    }
    {
        TensorT<T> r({enc.n_r, d_r});
        uniform_fill(r, -0.01, 0.01);
        m.params.add(param::kRelEmb, std::move(r));
    }
    return m;
}

inline EncoderConfig encoder_config(const RunConfig& cfg, int n_r) {
    EncoderConfig enc;
    enc.d_w = cfg.d_w;
    enc.d_p = cfg.d_p;
    enc.d_c = cfg.d_c;
    enc.window = cfg.window;
    enc.n_r = n_r;
    enc.max_len = cfg.max_len;
    enc.pos_clip = cfg.pos_clip;
    return enc;
}

}  // namespace pathrex
