#include <doctest.h>

#include <cmath>

#include "pathrex/numkernel.hpp"
#include "pathrex/rng.hpp"

using namespace pathrex;

TEST_CASE("affine identity, hand case, zero matrix") {
    Tensor64 eye({2, 2}, {1, 0, 0, 1});
    Tensor64 x({2}, {3, 4});
    Tensor64 zero_b({2}, {0, 0});
    auto r = affine(eye, x, zero_b);
    CHECK(r.v == std::vector<double>{3, 4});

    Tensor64 w({2, 2}, {1, 2, 3, 4});
    Tensor64 ones({2}, {1, 1});
    r = affine(w, ones, ones);
    CHECK(r.v == std::vector<double>{4, 8});

    Tensor64 zeros({1, 3});
    Tensor64 any({3}, {7, -2, 9});
    Tensor64 b({1}, {5});
    r = affine(zeros, any, b);
    CHECK(r.v == std::vector<double>{5});
}

TEST_CASE("affine rejects shape mismatch naming both shapes") {
    Tensor64 w({2, 3});
    Tensor64 x({2});
    Tensor64 b({2});
    CHECK_THROWS_WITH_AS(affine(w, x, b), doctest::Contains("[2x3]"), DimError);
}

TEST_CASE("softmax exact cases and stability") {
    auto r = softmax(std::vector<double>{0, 0, 0});
    for (double p : r) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));

    r = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
    CHECK(r[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.75).epsilon(1e-12));

    r = softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::isfinite(r[0]));

    CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("softmax properties: simplex and shift invariance") {
    SeededRng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(1 + rng.next_below(12));
        std::vector<double> z(n);
        for (auto& x : z) x = rng.next_range(-30, 30);
        const auto p = softmax(z);
        double sum = 0;
        for (double x : p) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        const double shift = rng.next_range(-100, 100);
        auto zs = z;
        for (auto& x : zs) x += shift;
        const auto ps = softmax(zs);
        for (std::size_t i = 0; i < n; ++i) CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-9));
    }
}

TEST_CASE("l1_distance hand cases") {
    CHECK(l1_distance<double>({1, 2}, {1, 2}) == 0.0);
    CHECK(l1_distance<double>({1, 2}, {0, 0}) == 3.0);
    CHECK(l1_distance<double>({-1}, {1}) == 2.0);
    CHECK_THROWS_AS(l1_distance<double>({1}, {1, 2}), DimError);
}

TEST_CASE("l1_distance properties: symmetry, triangle, zero iff equal") {
    SeededRng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = static_cast<std::size_t>(1 + rng.next_below(8));
        std::vector<double> a(n), b(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.next_range(-10, 10);
            b[i] = rng.next_range(-10, 10);
            c[i] = rng.next_range(-10, 10);
        }
        CHECK(l1_distance(a, b) == l1_distance(b, a));
        CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12);
        CHECK(l1_distance(a, a) == 0.0);
        if (a != b) CHECK(l1_distance(a, b) > 0.0);
    }
}

TEST_CASE("sgd_step performs ascent and zeroes gradients") {
    ParamStore64 store;
    store.add("p", Tensor64({1}, {1.0}));
    store.grad("p").v[0] = 2.0;
    sgd_step(store, 0.1);
    CHECK(store.value("p").v[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(store.grad("p").v[0] == 0.0);

    sgd_step(store, 0.1);  // zero gradient: nothing moves
    CHECK(store.value("p").v[0] == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("param store: per-parameter gradient buffers, zero_grads") {
    ParamStore64 store;
    store.add("a", Tensor64({2, 3}));
    store.add("b", Tensor64({4}));
    CHECK(store.grad("a").shape == store.value("a").shape);
    CHECK(store.coord_count() == 10);
    store.grad("a").v[4] = 7.0;
    store.grad("b").v[0] = -1.0;
    store.zero_grads();
    for (std::size_t i = 0; i < store.size(); ++i)
        for (double g : store.entry(i).grad.v) CHECK(g == 0.0);
    CHECK_THROWS_AS(store.add("a", Tensor64({1})), std::invalid_argument);
    CHECK_THROWS_AS(store.value("missing"), std::invalid_argument);
}

TEST_CASE("sgd_step ascends J(p) = -p^2 monotonically") {
    ParamStore64 store;
    store.add("p", Tensor64({1}, {1.0}));
    auto objective = [&] { return -store.value("p").v[0] * store.value("p").v[0]; };
    double last = objective();
    for (int step = 0; step < 2; ++step) {
        store.grad("p").v[0] = -2.0 * store.value("p").v[0];  // dJ/dp
        sgd_step(store, 0.1);
        const double now = objective();
        CHECK(now > last);
        last = now;
    }
}

TEST_CASE("sgd_step changes each parameter by exactly +lr*grad") {
    SeededRng rng(77);
    ParamStore64 store;
    store.add("a", Tensor64({3, 2}));
    store.add("b", Tensor64({4}));
    std::vector<double> before;
    std::vector<double> grads;
    for (std::size_t i = 0; i < store.size(); ++i) {
        for (auto& x : store.entry(i).value.v) x = rng.next_range(-1, 1);
        for (auto& g : store.entry(i).grad.v) g = rng.next_range(-1, 1);
        before.insert(before.end(), store.entry(i).value.v.begin(), store.entry(i).value.v.end());
        grads.insert(grads.end(), store.entry(i).grad.v.begin(), store.entry(i).grad.v.end());
    }
    const double lr = 0.037;
    sgd_step(store, lr);
    std::size_t k = 0;
    for (std::size_t i = 0; i < store.size(); ++i)
        for (double x : store.entry(i).value.v) {
            CHECK(x == before[k] + lr * grads[k]);
            ++k;
        }
}

TEST_CASE("sgd_step rejects non-finite gradients naming the parameter") {
    ParamStore64 store;
    store.add("conv_w", Tensor64({2}));
    store.grad("conv_w").v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(sgd_step(store, 0.1), doctest::Contains("conv_w"), NumericError);
    CHECK_THROWS_AS(sgd_step(store, 0.0), std::invalid_argument);
}

TEST_CASE("dropout_mask degenerate and error cases") {
    SeededRng rng(3);
    auto mask = dropout_mask<double>(rng, 1.0, 64);
    for (double m : mask) CHECK(m == 1.0);
    CHECK_THROWS_AS(dropout_mask<double>(rng, 0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(dropout_mask<double>(rng, -0.5, 4), std::invalid_argument);
}

TEST_CASE("dropout_mask has unit expectation within 2%") {
    for (double keep : {0.25, 0.5, 0.9}) {
        SeededRng rng(101);
        const auto mask = dropout_mask<double>(rng, keep, 100000);
        double mean = 0;
        for (double m : mask) mean += m;
        mean /= static_cast<double>(mask.size());
        CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("dropout_mask is bit-identical under the same seed") {
    SeededRng a(99), b(99);
    const auto ma = dropout_mask<float>(a, 0.5, 4096);
    const auto mb = dropout_mask<float>(b, 0.5, 4096);
    CHECK(ma == mb);
}

TEST_CASE("SeededRng: identical seed gives identical sequences, forks differ") {
    SeededRng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    SeededRng base(42);
    auto f1 = base.fork(1);
    auto f2 = base.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
    // forking does not advance the parent
    SeededRng c(42), d(42);
    (void)c.fork(9);
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("finite_diff_check on quadratic loss") {
    ParamStore64 store;
    store.add("p", Tensor64({5}, {0.3, -1.2, 2.0, 0.0, 4.5}));
    auto loss = [](const ParamStore64& s) {
        double acc = 0;
        for (double x : s.value("p").v) acc += x * x;
        return acc;
    };
    for (std::size_t j = 0; j < 5; ++j) store.grad("p").v[j] = 2.0 * store.value("p").v[j];
    CHECK(finite_diff_check<double>(loss, store, 1e-5) < 1e-8);

    // analytic gradient doubled: relative error lands at |2g-g|/max(2g,g) = 1/2
    for (std::size_t j = 0; j < 5; ++j) store.grad("p").v[j] = 4.0 * store.value("p").v[j];
    CHECK(finite_diff_check<double>(loss, store, 1e-5) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("finite_diff_check on constant loss is exactly zero") {
    ParamStore64 store;
    store.add("p", Tensor64({3}, {1, 2, 3}));
    auto loss = [](const ParamStore64&) { return 7.0; };
    CHECK(finite_diff_check<double>(loss, store, 1e-5) == 0.0);
}

TEST_CASE("tensor invariants: shape product and finiteness checks") {
    CHECK_THROWS_AS(Tensor64({2, 2}, {1, 2, 3}), DimError);
    Tensor64 t({2, 2}, {1, 2, 3, 4});
    CHECK(t.all_finite());
    t.v[2] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
}
