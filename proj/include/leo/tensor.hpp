#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "leo/errors.hpp"

namespace leo {

/// Deterministic RNG. Gaussians come from an explicit Box-Muller transform on
/// top of mt19937_64 so that streams are reproducible across platforms and
/// standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [lo, hi).
    int randint(int lo, int hi);

    double gaussian();

    /// Derives an independent stream seed (splitmix64 finalizer).
    static uint64_t mix(uint64_t seed, uint64_t stream);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Dense row-major N-d array. Kept deliberately small: shape + flat data.
template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(count(shape)) {}
    TensorT(std::vector<int> s, T fill) : shape(std::move(s)), data(count(shape), fill) {}

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
    static TensorT full(std::vector<int> s, T v) { return TensorT(std::move(s), v); }
    static TensorT randn(std::vector<int> s, Rng& rng, T scale = T(1)) {
        TensorT t(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.gaussian()) * scale;
        return t;
    }

    long numel() const { return static_cast<long>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](long i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](long i) const { return data[static_cast<size_t>(i)]; }

    // Index helpers for the common ranks.
    T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    T& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    T& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    TensorT reshaped(std::vector<int> s) const {
        if (count(s) != numel()) throw ParamError("reshape: element count mismatch");
        TensorT t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    bool all_finite() const;
    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    static long count(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d < 0) throw ParamError("negative dimension");
            n *= d;
        }
        return n;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

std::string shape_str(const std::vector<int>& s);

}  // namespace leo
