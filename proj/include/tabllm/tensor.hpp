#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tabllm/error.hpp"

namespace tabllm {

// Dense row-major tensor. Real is float for training, double for gradient
// verification.
template <typename Real>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<Real> v;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), Real(0));
    }
    Tensor(std::vector<size_t> s, std::vector<Real> data) : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != count(shape)) fail(errc::shape_mismatch, "value count != shape product");
    }

    static size_t count(const std::vector<size_t>& s) {
        return std::accumulate(s.begin(), s.end(), size_t(1), std::multiplies<>());
    }

    size_t size() const { return v.size(); }
    size_t dim(size_t i) const { return shape.at(i); }
    size_t rank() const { return shape.size(); }

    // rows/cols view: everything but the last axis collapses into rows
    size_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
    size_t outer_count() const { return last_dim() == 0 ? 0 : size() / last_dim(); }

    Real* data() { return v.data(); }
    const Real* data() const { return v.data(); }

    void fill(Real x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(Real(0)); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (Real x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<Other>(v[i]);
        return out;
    }

    std::string debug_dump(const std::string& name = "") const {
        std::ostringstream os;
        os << name << " [";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        for (size_t i = 0; i < v.size(); ++i) os << (i % 8 == 0 ? "\n  " : " ") << v[i];
        os << "\n";
        return os.str();
    }
};

template <typename Real>
inline void check_shape(bool cond, const std::string& what) {
    if (!cond) fail(errc::shape_mismatch, what);
}

// Deterministic normal(0, std) fill, used for weight init.
template <typename Real>
inline void fill_normal(Tensor<Real>& t, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.v) x = static_cast<Real>(dist(rng));
}

}  // namespace tabllm
