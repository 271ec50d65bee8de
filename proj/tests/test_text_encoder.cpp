#include <doctest.h>

#include <cmath>

#include "pathrex/text_encoder.hpp"
#include "toy_world.hpp"

using namespace pathrex;
using namespace pathrex::textenc;

namespace {

corpus::IndexedSentence make_inst(std::vector<std::int32_t> tokens, std::int32_t head_pos,
                                  std::int32_t tail_pos, std::int32_t label = 1) {
    corpus::IndexedSentence s;
    s.tokens = std::move(tokens);
    s.head_pos = head_pos;
    s.tail_pos = tail_pos;
    s.label = label;
    return s;
}

Model64 random_model(const EncoderConfig& enc, int d_r, std::int64_t vocab, std::uint64_t seed) {
    SeededRng rng(seed);
    return init_model<double>(enc, d_r, vocab, 0, rng);
}

}  // namespace

TEST_CASE("embed_tokens: offsets, clipping, shape") {
    EncoderConfig enc = toy::tiny_encoder_config(3);
    auto model = random_model(enc, 6, 10, 1);
    const auto pv = model.view();

    auto inst = make_inst({2, 3, 4, 5}, 1, 3);
    auto input = embed_tokens(inst, pv, enc);
    CHECK(input.shape == std::vector<std::int64_t>{4, enc.input_dim()});

    // token at the head position uses the zero-offset row of pos_head
    const double* row1 = input.row(1);
    const double* zero_row = pv.pos_head->row(enc.pos_clip);
    for (int c = 0; c < enc.d_p; ++c) CHECK(row1[enc.d_w + c] == zero_row[c]);

    // far offsets clip to the boundary rows
    auto far = make_inst({2, 3, 4, 5}, 0, 0);
    far.head_pos = 50;  // offset i-50 clips to -pos_clip for all i
    auto clipped = embed_tokens(far, pv, enc);
    for (int i = 0; i < 4; ++i) {
        const double* prow = pv.pos_head->row(0);
        for (int c = 0; c < enc.d_p; ++c) CHECK(clipped.row(i)[enc.d_w + c] == prow[c]);
    }
}

TEST_CASE("conv_forward: window counts l+k-1 for l in [1,50], k in [1,5]") {
    for (int k = 1; k <= 5; ++k) {
        EncoderConfig enc = toy::tiny_encoder_config(3);
        enc.window = k;
        auto model = random_model(enc, 6, 60, static_cast<std::uint64_t>(k));
        const auto pv = model.view();
        for (int l = 1; l <= 50; ++l) {
            std::vector<std::int32_t> tokens;
            for (int i = 0; i < l; ++i) tokens.push_back(static_cast<std::int32_t>(i % 60));
            auto input = embed_tokens(make_inst(std::move(tokens), 0, l - 1), pv, enc);
            auto conv = conv_forward(input, pv, enc);
            CHECK(conv.rows() == l + k - 1);
            CHECK(conv.cols() == enc.d_c);
        }
    }
}

TEST_CASE("conv_forward: unit window reduces to a per-row affine map") {
    EncoderConfig enc = toy::tiny_encoder_config(3);
    enc.window = 1;
    auto model = random_model(enc, 6, 10, 3);
    const auto pv = model.view();
    auto input = embed_tokens(make_inst({1, 2, 3}, 0, 2), pv, enc);
    auto conv = conv_forward(input, pv, enc);
    REQUIRE(conv.rows() == 3);
    for (std::int64_t i = 0; i < 3; ++i) {
        TensorT<double> x({enc.input_dim()});
        std::copy(input.row(i), input.row(i) + enc.input_dim(), x.v.begin());
        auto expect = affine(*pv.conv_w, x, *pv.conv_b);
        for (int j = 0; j < enc.d_c; ++j)
            CHECK(conv.at(i, j) == doctest::Approx(expect.v[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
}

TEST_CASE("conv_forward: zero input with zero bias gives zero output") {
    EncoderConfig enc = toy::tiny_encoder_config(3);
    auto model = random_model(enc, 6, 10, 4);
    model.params.value(param::kWordEmb).fill(0);
    model.params.value(param::kPosHead).fill(0);
    model.params.value(param::kPosTail).fill(0);
    model.params.value(param::kConvB).fill(0);
    const auto pv = model.view();
    auto input = embed_tokens(make_inst({1, 2, 3, 4}, 0, 3), pv, enc);
    auto conv = conv_forward(input, pv, enc);
    for (double x : conv.v) CHECK(x == 0.0);
}

TEST_CASE("pool_tanh: single row, hand column, permutation invariance") {
    TensorT<double> one({1, 3}, {0.5, -2.0, 0.0});
    std::vector<double> repr;
    std::vector<std::int32_t> argmax;
    pool_tanh(one, repr, argmax);
    CHECK(repr[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
    CHECK(repr[1] == doctest::Approx(std::tanh(-2.0)).epsilon(1e-15));

    TensorT<double> col({3, 1}, {-1.0, 2.0, 0.0});
    pool_tanh(col, repr, argmax);
    CHECK(repr[0] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
    CHECK(argmax[0] == 1);

    SeededRng rng(5);
    TensorT<double> h({4, 6});
    for (auto& x : h.v) x = rng.next_range(-2, 2);
    std::vector<double> base;
    pool_tanh(h, base, argmax);
    // swap two rows: the pooled representation cannot change
    for (int c = 0; c < 6; ++c) std::swap(h.at(0, c), h.at(3, c));
    std::vector<double> permuted;
    pool_tanh(h, permuted, argmax);
    CHECK(base == permuted);

    // components live strictly inside (-1, 1)
    for (double x : base) {
        CHECK(x > -1.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("pool_tanh: ties resolve to the lowest row index") {
    TensorT<double> h({3, 1}, {2.0, 2.0, 1.0});
    std::vector<double> repr;
    std::vector<std::int32_t> argmax;
    pool_tanh(h, repr, argmax);
    CHECK(argmax[0] == 0);
}

TEST_CASE("sentence_prob: uniform and exact-exponential cases") {
    EncoderConfig enc = toy::tiny_encoder_config(2);
    auto model = random_model(enc, 6, 10, 6);
    model.params.value(param::kClsW).fill(0);
    model.params.value(param::kClsB).fill(0);
    const auto pv = model.view();

    std::vector<double> repr(static_cast<std::size_t>(enc.d_c), 0.3);
    auto p = sentence_prob(repr, pv, nullptr);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));

    model.params.value(param::kClsB).v = {std::log(1.0), std::log(3.0)};
    p = sentence_prob(repr, model.view(), nullptr);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("sentence_prob sums to one for random parameters") {
    EncoderConfig enc = toy::tiny_encoder_config(7);
    auto model = random_model(enc, 6, 10, 7);
    const auto pv = model.view();
    SeededRng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> repr(static_cast<std::size_t>(enc.d_c));
        for (auto& x : repr) x = rng.next_range(-1, 1);
        auto p = sentence_prob(repr, pv, nullptr);
        double sum = 0;
        for (double x : p) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("bag_score: hand max, singleton agreement, brute-force equivalence") {
    // craft a bag forward with known probability columns
    BagForward<double> fwd;
    for (double pr : {0.2, 0.9, 0.5}) {
        SentenceForward<double> s;
        s.probs = {1.0 - pr, pr};
        fwd.sents.push_back(std::move(s));
    }
    auto [score, idx] = bag_score_max(fwd, 1);
    CHECK(score == 0.9);
    CHECK(idx == 1);

    // singleton: both modes agree
    BagForward<double> single;
    single.sents.push_back(fwd.sents[0]);
    SeededRng rng(3);
    CHECK(bag_score(single, 1, BagMode::kMax, &rng) == bag_score(single, 1, BagMode::kRand, &rng));

    // brute force over random bags
    SeededRng gen(9);
    for (int trial = 0; trial < 1000; ++trial) {
        BagForward<double> bag;
        const auto n = 1 + gen.next_below(10);
        const auto n_r = 2 + gen.next_below(6);
        for (std::uint64_t i = 0; i < n; ++i) {
            SentenceForward<double> s;
            std::vector<double> logits(n_r);
            for (auto& x : logits) x = gen.next_range(-3, 3);
            s.probs = softmax(logits);
            bag.sents.push_back(std::move(s));
        }
        const auto r = static_cast<std::int32_t>(gen.next_below(n_r));
        const auto [got, got_idx] = bag_score_max(bag, r);
        double want = -1;
        int want_idx = -1;
        for (std::size_t i = 0; i < bag.sents.size(); ++i)
            if (bag.sents[i].probs[static_cast<std::size_t>(r)] > want) {
                want = bag.sents[i].probs[static_cast<std::size_t>(r)];
                want_idx = static_cast<int>(i);
            }
        CHECK(got == want);
        CHECK(got_idx == want_idx);
    }
}

TEST_CASE("bag operations reject empty bags") {
    BagForward<double> empty;
    SeededRng rng(1);
    CHECK_THROWS_AS(bag_score_max(empty, 0), std::invalid_argument);
    CHECK_THROWS_AS(bag_score(empty, 0, BagMode::kRand, &rng), std::invalid_argument);

    corpus::Bag bag;  // no sentences
    EncoderConfig enc = toy::tiny_encoder_config(3);
    auto model = random_model(enc, 6, 10, 2);
    std::vector<corpus::IndexedSentence> none;
    CHECK_THROWS_AS(forward_bag(bag, none, model.view(), enc), std::invalid_argument);
}

TEST_CASE("bag_score(max) dominates every member sentence") {
    SeededRng gen(13);
    BagForward<double> bag;
    for (int i = 0; i < 6; ++i) {
        SentenceForward<double> s;
        std::vector<double> logits(4);
        for (auto& x : logits) x = gen.next_range(-2, 2);
        s.probs = softmax(logits);
        bag.sents.push_back(std::move(s));
    }
    for (std::int32_t r = 0; r < 4; ++r) {
        const auto best = bag_score_max(bag, r).first;
        for (const auto& s : bag.sents) CHECK(best >= s.probs[static_cast<std::size_t>(r)]);
    }
}

TEST_CASE("encoder gradient matches central finite differences (l up to 7)") {
    auto world = toy::make_world();
    EncoderConfig enc = toy::tiny_encoder_config(world.relations.size());
    SeededRng rng(21);
    auto model = init_model<double>(enc, 6, world.vocab.size(), 0, rng);

    // loss: sum over all instances of log p(label | sentence)
    auto loss = [&](const ParamStore64&) {
        const auto pv = model.view();
        double acc = 0;
        for (const auto& inst : world.data.sentences) {
            auto fwd = encode_sentence(inst, pv, enc);
            acc += std::log(fwd.probs[static_cast<std::size_t>(inst.label)]);
        }
        return acc;
    };

    // analytic gradients
    {
        const auto pv = model.view();
        auto gv = model.grad_view();
        for (const auto& inst : world.data.sentences) {
            auto fwd = encode_sentence(inst, pv, enc);
            std::vector<double> dprobs(static_cast<std::size_t>(enc.n_r), 0.0);
            dprobs[static_cast<std::size_t>(inst.label)] =
                1.0 / fwd.probs[static_cast<std::size_t>(inst.label)];
            encoder_backward(fwd, dprobs, pv, gv, enc);
        }
    }
    const double err = finite_diff_check<double>(loss, model.params, 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("encoder_backward: zero upstream gradient leaves all parameters untouched") {
    auto world = toy::make_world();
    EncoderConfig enc = toy::tiny_encoder_config(world.relations.size());
    SeededRng rng(22);
    auto model = init_model<double>(enc, 6, world.vocab.size(), 0, rng);
    const auto pv = model.view();
    auto gv = model.grad_view();
    auto fwd = encode_sentence(world.data.sentences[0], pv, enc);
    std::vector<double> zero(static_cast<std::size_t>(enc.n_r), 0.0);
    encoder_backward(fwd, zero, pv, gv, enc);
    for (std::size_t i = 0; i < model.params.size(); ++i)
        for (double g : model.params.entry(i).grad.v) CHECK(g == 0.0);
}

TEST_CASE("encoder_backward: tokens outside every argmax window get zero gradient") {
    EncoderConfig enc = toy::tiny_encoder_config(3);
    enc.window = 1;  // conv row i sees only input row i
    SeededRng rng(23);
    auto model = init_model<double>(enc, 6, 8, 0, rng);
    // token 2 dominates (without saturating tanh): conv weights positive
    model.params.value(param::kWordEmb).fill(0.0);
    for (int c = 0; c < enc.d_w; ++c) model.params.value(param::kWordEmb).row(2)[c] = 0.9;
    for (auto& x : model.params.value(param::kConvW).v) x = std::abs(x) + 0.1;
    model.params.value(param::kPosHead).fill(0.0);
    model.params.value(param::kPosTail).fill(0.0);

    const auto pv = model.view();
    auto gv = model.grad_view();
    auto fwd = encode_sentence(make_inst({2, 3, 4, 5}, 0, 3), pv, enc);
    for (std::int32_t m : fwd.argmax) CHECK(m == 0);  // row of token 2

    std::vector<double> up(3, 0.0);
    up[1] = 1.0;
    encoder_backward(fwd, up, pv, gv, enc);
    const auto& gw = model.params.grad(param::kWordEmb);
    for (std::int32_t tok : {3, 4, 5})
        for (int c = 0; c < enc.d_w; ++c) CHECK(gw.row(tok)[c] == 0.0);
    bool any = false;
    for (int c = 0; c < enc.d_w; ++c) any = any || gw.row(2)[c] != 0.0;
    CHECK(any);
}
