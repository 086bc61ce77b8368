#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "leo/tensor.hpp"

namespace leo {

template <class T>
struct ParamT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
};

/// Named parameter registry. Uses a deque so Param addresses stay stable.
template <class T>
struct ParamStoreT {
    std::deque<ParamT<T>> items;

    ParamT<T>& add(std::string name, TensorT<T> init) {
        items.push_back({std::move(name), std::move(init), {}});
        auto& p = items.back();
        p.grad = TensorT<T>::zeros(p.value.shape);
        return p;
    }
    void zero_grad() {
        for (auto& p : items) p.grad.fill(T(0));
    }
    long numel() const {
        long n = 0;
        for (auto& p : items) n += p.value.numel();
        return n;
    }
    ParamT<T>* find(const std::string& name) {
        for (auto& p : items)
            if (p.name == name) return &p;
        return nullptr;
    }
};

using ParamStore = ParamStoreT<float>;

/// Reverse-mode tape. Every op appends a node holding the forward value and a
/// closure that scatters the node's gradient to its inputs. Creation order is
/// a valid topological order, so backward() is a single reverse sweep.
template <class T>
class Tape {
public:
    struct Var {
        int i = -1;
        bool valid() const { return i >= 0; }
    };

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Var input(TensorT<T> v);     // constant w.r.t. parameters
    Var param(ParamT<T>& p);     // leaf; backward accumulates into p.grad

    const TensorT<T>& val(Var v) const { return nodes_[v.i].val; }
    TensorT<T>& grad(Var v) { return nodes_[v.i].grad; }

    // --- elementwise ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var affine(Var a, T k, T c);  // k*a + c
    Var silu(Var a);
    Var relu(Var a);
    Var sigmoid(Var a);

    // --- dense / conv ---
    Var linear(Var x, Var w, Var b);                       // x[B,Din] w[Dout,Din] b[Dout]
    Var conv2d(Var x, Var w, Var b, int stride, int pad);  // x[B,C,H,W] w[Co,Ci,kh,kw]
    Var conv1d(Var x, Var w, Var b, int stride, int pad);  // x[B,C,L]  w[Co,Ci,k]

    // --- normalization ---
    Var layer_norm(Var x, Var gain, Var bias);  // normalize over channel dim 1

    // --- structural ---
    Var flatten(Var x);                       // [B,...] -> [B,rest]
    Var concat_ch(Var a, Var b);              // along dim 1
    Var slice_ch(Var a, int from, int to);    // along dim 1
    Var broadcast_hw(Var v, int h, int w);    // [B,N] -> [B,N,h,w]
    Var add_chvec(Var x, Var v);              // x[B,C,...] + v[B,C] broadcast
    Var upsample2x_2d(Var x);                 // nearest
    Var upsample1d(Var x, int out_len);       // nearest 2x, cropped to out_len

    // --- warping ---
    /// Backward bilinear warp with border clamping. frame [B,C,H,W],
    /// flow [B,2,H,W] in pixels (channel 0 = dx, 1 = dy).
    Var warp(Var frame, Var flow);
    /// mask*a + (1-mask)*b with mask [B,1,H,W] broadcast over channels.
    Var blend(Var mask, Var a, Var b);

    // --- reductions / losses ---
    Var mean_all(Var a);
    Var mse_to(Var a, const TensorT<T>& target);
    Var mse_masked(Var a, const TensorT<T>& target, const TensorT<T>& mask);
    Var l1_to(Var a, const TensorT<T>& target);
    /// L1 between horizontal+vertical pixel differences of a and target.
    Var grad_l1_to(Var a, const TensorT<T>& target);

    void backward(Var loss);

    size_t size() const { return nodes_.size(); }
    bool grad_enabled() const { return grad_enabled_; }

private:
    struct Node {
        TensorT<T> val;
        TensorT<T> grad;
        std::function<void()> back;  // null for leaves/constants
        ParamT<T>* leaf = nullptr;
    };

    Var push(TensorT<T> v) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }
    Node& node(Var v) { return nodes_[v.i]; }
    Var conv2d_impl(Var x, Var w, Var b, int stride, int pad_h, int pad_w);

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace leo
