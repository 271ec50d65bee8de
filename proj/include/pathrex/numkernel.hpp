#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathrex/errors.hpp"
#include "pathrex/rng.hpp"

namespace pathrex {

// Dense row-major tensor. Training runs on float, gradient verification on
// double; everything downstream is templated on the scalar type.
template <typename T>
struct TensorT {
    std::vector<std::int64_t> shape;
    std::vector<T> v;

    TensorT() = default;

    explicit TensorT(std::vector<std::int64_t> dims)
        : shape(std::move(dims)), v(static_cast<std::size_t>(numel_of(shape)), T{}) {}

    TensorT(std::vector<std::int64_t> dims, std::vector<T> values)
        : shape(std::move(dims)), v(std::move(values)) {
        if (numel_of(shape) != static_cast<std::int64_t>(v.size()))
            throw DimError("tensor: value count " + std::to_string(v.size()) +
                           " does not match shape " + shape_str());
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& dims) {
        std::int64_t n = 1;
        for (std::int64_t d : dims) {
            if (d < 0) throw DimError("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    std::int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T* row(std::int64_t r) { return v.data() + r * cols(); }
    const T* row(std::int64_t r) const { return v.data() + r * cols(); }

    T& at(std::int64_t r, std::int64_t c) { return v[static_cast<std::size_t>(r * cols() + c)]; }
    T at(std::int64_t r, std::int64_t c) const { return v[static_cast<std::size_t>(r * cols() + c)]; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

// result[i] = sum_j W[i][j] * x[j] + b[i]
template <typename T>
TensorT<T> affine(const TensorT<T>& w, const TensorT<T>& x, const TensorT<T>& b) {
    if (w.shape.size() != 2 || x.shape.size() != 1 || b.shape.size() != 1 ||
        w.shape[1] != x.shape[0] || w.shape[0] != b.shape[0])
        throw DimError("affine: incompatible shapes W=" + w.shape_str() + " x=" + x.shape_str() +
                       " b=" + b.shape_str());
    const std::int64_t m = w.shape[0], n = w.shape[1];
    TensorT<T> out({m});
    for (std::int64_t i = 0; i < m; ++i) {
        const T* wi = w.row(i);
        T acc = b.v[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < n; ++j) acc += wi[j] * x.v[static_cast<std::size_t>(j)];
        out.v[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

// Max-shifted softmax, stable for large logits.
template <typename T>
void softmax_inplace(T* z, std::size_t n) {
    if (n == 0) throw std::invalid_argument("softmax: empty input");
    T mx = z[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    T sum = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] /= sum;
}

template <typename T>
std::vector<T> softmax(std::vector<T> z) {
    softmax_inplace(z.data(), z.size());
    return z;
}

template <typename T>
T l1_distance(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size())
        throw DimError("l1_distance: length mismatch " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
    T d = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

template <typename T>
T l1_distance(const T* a, const T* b, std::int64_t n) {
    T d = T(0);
    for (std::int64_t i = 0; i < n; ++i) d += std::abs(a[i] - b[i]);
    return d;
}

// Named parameters, each with one gradient buffer of identical shape.
// Declaration order is stable; the checkpoint writer walks it.
template <typename T>
class ParamStoreT {
public:
    struct Entry {
        std::string name;
        TensorT<T> value;
        TensorT<T> grad;
    };

    TensorT<T>& add(const std::string& name, TensorT<T> value) {
        if (index_.count(name)) throw std::invalid_argument("param already declared: " + name);
        index_[name] = entries_.size();
        Entry e;
        e.name = name;
        e.grad = TensorT<T>(value.shape);
        e.value = std::move(value);
        entries_.push_back(std::move(e));
        return entries_.back().value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    TensorT<T>& value(const std::string& name) { return entries_[idx(name)].value; }
    const TensorT<T>& value(const std::string& name) const { return entries_[idx(name)].value; }
    TensorT<T>& grad(const std::string& name) { return entries_[idx(name)].grad; }
    const TensorT<T>& grad(const std::string& name) const { return entries_[idx(name)].grad; }

    std::size_t size() const { return entries_.size(); }
    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t entry_index(const std::string& name) const { return idx(name); }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(T(0));
    }

    std::int64_t coord_count() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) n += e.value.numel();
        return n;
    }

private:
    std::size_t idx(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("unknown param: " + name);
        return it->second;
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore32 = ParamStoreT<float>;
using ParamStore64 = ParamStoreT<double>;

// Gradient ASCENT step (the objective is maximized): p += lr * grad, then
// gradients are zeroed. Non-finite gradients abort, naming the parameter.
template <typename T>
void sgd_step(ParamStoreT<T>& store, T lr) {
    if (!(lr > T(0))) throw std::invalid_argument("sgd_step: learning rate must be positive");
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entry(i);
        if (!e.grad.all_finite())
            throw NumericError("sgd_step: non-finite gradient in parameter '" + e.name + "'");
        for (std::size_t j = 0; j < e.value.v.size(); ++j) e.value.v[j] += lr * e.grad.v[j];
        e.grad.fill(T(0));
    }
}

// Inverted dropout: entries are 0 with probability 1-keep_p, else 1/keep_p,
// so the mask has unit expectation and inference needs no rescaling.
template <typename T>
std::vector<T> dropout_mask(SeededRng& rng, double keep_p, std::size_t n) {
    if (!(keep_p > 0.0) || keep_p > 1.0)
        throw std::invalid_argument("dropout_mask: keep probability must be in (0, 1]");
    std::vector<T> mask(n);
    const T scale = static_cast<T>(1.0 / keep_p);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.next_real() < keep_p ? scale : T(0);
    return mask;
}

// Central-difference gradient verification. The loss must be pure and
// deterministic (dropout off). Analytic gradients are read from the store's
// gradient buffers as passed in; the loss callback never sees them.
// Returns max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8);
// a NaN numeric gradient reports as infinity.
template <typename T>
double finite_diff_check(const std::function<double(const ParamStoreT<T>&)>& loss,
                         ParamStoreT<T>& store, double eps) {
    std::vector<std::vector<T>> analytic;
    analytic.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) analytic.push_back(store.entry(i).grad.v);

    double worst = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& val = store.entry(i).value.v;
        for (std::size_t j = 0; j < val.size(); ++j) {
            const T saved = val[j];
            val[j] = saved + static_cast<T>(eps);
            const double up = loss(store);
            val[j] = saved - static_cast<T>(eps);
            const double down = loss(store);
            val[j] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = static_cast<double>(analytic[i][j]);
            if (std::isnan(numeric)) return std::numeric_limits<double>::infinity();
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace pathrex
