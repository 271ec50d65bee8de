#pragma once

#include <string>
#include <vector>

#include "pathrex/corpus.hpp"
#include "pathrex/joint.hpp"
#include "pathrex/model.hpp"

namespace pathrex::verify {

// Self-contained tiny world for the gradient suite: 3 entities, relations
// NA + r1..r4, four facts, and exactly two two-hop paths ((A,B) via C and
// (A,C) via B). One sentence has length 7.
struct TinyWorld {
    corpus::StringTable entities;
    corpus::StringTable relations;
    corpus::CorpusText text;
    corpus::Vocabulary vocab;
    joint::BoundData data;
    std::vector<joint::TrainItem> items;
};

inline corpus::TaggedSentence tiny_sentence(const std::vector<std::string>& tokens,
                                            std::int32_t head, std::int32_t head_at,
                                            std::int32_t tail, std::int32_t tail_at) {
    corpus::TaggedSentence s;
    s.tokens = tokens;
    s.head = {head, head_at, head_at + 1};
    s.tail = {tail, tail_at, tail_at + 1};
    return s;
}

inline TinyWorld make_tiny_world() {
    TinyWorld w;
    w.relations = corpus::make_relation_table();
    const auto a = w.entities.intern("A");
    const auto b = w.entities.intern("B");
    const auto c = w.entities.intern("C");
    const auto r1 = w.relations.intern("r1");
    const auto r2 = w.relations.intern("r2");
    const auto r3 = w.relations.intern("r3");
    const auto r4 = w.relations.intern("r4");

    const std::vector<corpus::Triple> kb = {{a, r1, b}, {a, r2, c}, {c, r3, b}, {b, r4, c}};
    const std::vector<corpus::TaggedSentence> raw = {
        tiny_sentence({"ent", "lives", "in", "town", "near", "the", "sea"}, a, 0, b, 3),
        tiny_sentence({"ent", "moved", "to", "town"}, a, 0, b, 3),
        tiny_sentence({"ent", "works", "with", "firm", "now"}, a, 0, c, 3),
        tiny_sentence({"firm", "is", "based", "in", "town"}, c, 0, b, 4),
        tiny_sentence({"town", "hosts", "the", "firm"}, b, 0, c, 3),
    };
    w.text = corpus::align(kb, {}, raw);
    w.vocab = corpus::build_vocab(w.text.sentences, 0);
    w.data = joint::bind_data(w.text, w.vocab, corpus::extract_paths(w.text, 8));
    w.items = joint::training_items(w.data);
    return w;
}

inline EncoderConfig tiny_encoder(int n_r) {
    EncoderConfig enc;
    enc.d_w = 4;
    enc.d_p = 2;
    enc.d_c = 6;
    enc.window = 3;
    enc.n_r = n_r;
    enc.max_len = 120;
    enc.pos_clip = 4;
    return enc;
}

// Full-pipeline finite-difference suite at 64-bit with dropout off: builds
// the tiny world, runs one analytic backward over all items, and compares
// every parameter coordinate against central differences.
inline double full_pipeline_grad_check(double eps = 1e-5, std::uint64_t seed = 31) {
    TinyWorld world = make_tiny_world();
    SeededRng rng(seed);
    auto model = init_model<double>(tiny_encoder(world.relations.size()), 6, world.vocab.size(),
                                    0, rng);

    joint::ItemContext<double> ctx;
    ctx.model = &model;
    ctx.data = &world.data;
    ctx.bag_mode = textenc::BagMode::kMax;
    ctx.dropout_keep = 1.0;
    ctx.beta = 0.5;
    ctx.entities = &world.entities;

    const SeededRng root(1000 + seed);
    auto gv = model.grad_view();
    joint::batch_objective(ctx, world.items, root, 0, &gv);
    auto loss = [&](const ParamStoreT<double>&) {
        return joint::batch_objective<double>(ctx, world.items, root, 0, nullptr);
    };
    return finite_diff_check<double>(loss, model.params, eps);
}

}  // namespace pathrex::verify
