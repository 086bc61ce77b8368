#pragma once

#include <cmath>
#include <string>

#include "leo/autograd.hpp"

namespace leo {

template <class T>
TensorT<T> he_init(std::vector<int> shape, long fan_in, Rng& rng) {
    return TensorT<T>::randn(std::move(shape), rng, static_cast<T>(std::sqrt(2.0 / fan_in)));
}

template <class T>
struct LinearT {
    ParamT<T>* w = nullptr;
    ParamT<T>* b = nullptr;

    LinearT() = default;
    LinearT(ParamStoreT<T>& ps, const std::string& name, int din, int dout, Rng& rng,
            bool zero_init = false) {
        w = &ps.add(name + ".w", zero_init ? TensorT<T>::zeros({dout, din})
                                           : he_init<T>({dout, din}, din, rng));
        b = &ps.add(name + ".b", TensorT<T>::zeros({dout}));
    }
    typename Tape<T>::Var fwd(Tape<T>& t, typename Tape<T>::Var x) const {
        return t.linear(x, t.param(*w), t.param(*b));
    }
};

template <class T>
struct Conv2dT {
    ParamT<T>* w = nullptr;
    ParamT<T>* b = nullptr;
    int stride = 1, pad = 1;

    Conv2dT() = default;
    Conv2dT(ParamStoreT<T>& ps, const std::string& name, int cin, int cout, int k, int stride,
            int pad, Rng& rng, bool zero_init = false)
        : stride(stride), pad(pad) {
        w = &ps.add(name + ".w", zero_init ? TensorT<T>::zeros({cout, cin, k, k})
                                           : he_init<T>({cout, cin, k, k},
                                                        static_cast<long>(cin) * k * k, rng));
        b = &ps.add(name + ".b", TensorT<T>::zeros({cout}));
    }
    typename Tape<T>::Var fwd(Tape<T>& t, typename Tape<T>::Var x) const {
        return t.conv2d(x, t.param(*w), t.param(*b), stride, pad);
    }
};

template <class T>
struct Conv1dT {
    ParamT<T>* w = nullptr;
    ParamT<T>* b = nullptr;
    int stride = 1, pad = 1;

    Conv1dT() = default;
    Conv1dT(ParamStoreT<T>& ps, const std::string& name, int cin, int cout, int k, int stride,
            int pad, Rng& rng, bool zero_init = false)
        : stride(stride), pad(pad) {
        w = &ps.add(name + ".w", zero_init ? TensorT<T>::zeros({cout, cin, k})
                                           : he_init<T>({cout, cin, k},
                                                        static_cast<long>(cin) * k, rng));
        b = &ps.add(name + ".b", TensorT<T>::zeros({cout}));
    }
    typename Tape<T>::Var fwd(Tape<T>& t, typename Tape<T>::Var x) const {
        return t.conv1d(x, t.param(*w), t.param(*b), stride, pad);
    }
};

template <class T>
struct LayerNormT {
    ParamT<T>* gain = nullptr;
    ParamT<T>* bias = nullptr;

    LayerNormT() = default;
    LayerNormT(ParamStoreT<T>& ps, const std::string& name, int channels) {
        gain = &ps.add(name + ".g", TensorT<T>::full({channels}, T(1)));
        bias = &ps.add(name + ".b", TensorT<T>::zeros({channels}));
    }
    typename Tape<T>::Var fwd(Tape<T>& t, typename Tape<T>::Var x) const {
        return t.layer_norm(x, t.param(*gain), t.param(*bias));
    }
};

/// Standard sinusoidal embedding of per-sample diffusion step indices,
/// shape [B, dim].
template <class T>
TensorT<T> timestep_embedding(const std::vector<int>& ts, int dim) {
    int batch = static_cast<int>(ts.size());
    TensorT<T> e({batch, dim});
    int half = dim / 2;
    for (int n = 0; n < batch; ++n) {
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
            e.at(n, i) = static_cast<T>(std::sin(ts[n] * freq));
            e.at(n, half + i) = static_cast<T>(std::cos(ts[n] * freq));
        }
        if (dim % 2) e.at(n, dim - 1) = T(0);
    }
    return e;
}

template <class T>
TensorT<T> timestep_embedding(int t, int dim, int batch) {
    return timestep_embedding<T>(std::vector<int>(batch, t), dim);
}

template <class T>
class AdamT {
public:
    AdamT(T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStoreT<T>& ps, T lr) {
        if (m_.empty()) {
            for (auto& p : ps.items) {
                m_.push_back(TensorT<T>::zeros(p.value.shape));
                v_.push_back(TensorT<T>::zeros(p.value.shape));
            }
        }
        ++t_;
        T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
        T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
        size_t k = 0;
        for (auto& p : ps.items) {
            auto& m = m_[k];
            auto& v = v_[k];
            for (long i = 0; i < p.value.numel(); ++i) {
                T g = p.grad[i];
                m[i] = beta1_ * m[i] + (T(1) - beta1_) * g;
                v[i] = beta2_ * v[i] + (T(1) - beta2_) * g * g;
                p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
            ++k;
        }
    }

private:
    T beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<TensorT<T>> m_, v_;
};

using Adam = AdamT<float>;

}  // namespace leo
