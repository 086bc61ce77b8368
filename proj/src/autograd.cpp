#include "leo/autograd.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>

namespace leo {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using CMatMap = Eigen::Map<const Mat<T>>;

// Gathers conv patches into a [Cin*k, P] matrix. kh/kw of 1xk covers conv1d.
template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad_h, int pad_w,
            int Ho, int Wo, T* col) {
    int P = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                T* row = col + (static_cast<long>(c) * kh * kw + i * kw + j) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    int y = oy * stride - pad_h + i;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int xx = ox * stride - pad_w + j;
                        row[oy * Wo + ox] = (y >= 0 && y < H && xx >= 0 && xx < W)
                                                ? x[(static_cast<long>(c) * H + y) * W + xx]
                                                : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_acc(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad_h,
                int pad_w, int Ho, int Wo, T* dx) {
    int P = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const T* row = col + (static_cast<long>(c) * kh * kw + i * kw + j) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    int y = oy * stride - pad_h + i;
                    if (y < 0 || y >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int xx = ox * stride - pad_w + j;
                        if (xx < 0 || xx >= W) continue;
                        dx[(static_cast<long>(c) * H + y) * W + xx] += row[oy * Wo + ox];
                    }
                }
            }
        }
    }
}

int conv_out(int n, int k, int stride, int pad) { return (n + 2 * pad - k) / stride + 1; }

}  // namespace

template <class T>
typename Tape<T>::Var Tape<T>::input(TensorT<T> v) {
    return push(std::move(v));
}

template <class T>
typename Tape<T>::Var Tape<T>::param(ParamT<T>& p) {
    Var v = push(p.value);
    if (grad_enabled_) node(v).leaf = &p;
    return v;
}

template <class T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (!av.same_shape(bv)) throw ParamError("add: shape mismatch");
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, b, o] {
            auto& g = grad(o);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (long i = 0; i < g.numel(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::sub(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (!av.same_shape(bv)) throw ParamError("sub: shape mismatch");
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, b, o] {
            auto& g = grad(o);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (long i = 0; i < g.numel(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::mul(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (!av.same_shape(bv)) throw ParamError("mul: shape mismatch");
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, b, o] {
            auto& g = grad(o);
            const auto& av = val(a);
            const auto& bv = val(b);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (long i = 0; i < g.numel(); ++i) {
                ga[i] += g[i] * bv[i];
                gb[i] += g[i] * av[i];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::affine(Var a, T k, T c) {
    const auto& av = val(a);
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = k * av[i] + c;
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o, k] {
            auto& g = grad(o);
            auto& ga = grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += k * g[i];
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::silu(Var a) {
    const auto& av = val(a);
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) {
        T s = T(1) / (T(1) + std::exp(-av[i]));
        out[i] = av[i] * s;
    }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o] {
            auto& g = grad(o);
            const auto& av = val(a);
            auto& ga = grad(a);
            for (long i = 0; i < g.numel(); ++i) {
                T s = T(1) / (T(1) + std::exp(-av[i]));
                ga[i] += g[i] * (s + av[i] * s * (T(1) - s));
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::relu(Var a) {
    const auto& av = val(a);
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o] {
            auto& g = grad(o);
            const auto& av = val(a);
            auto& ga = grad(a);
            for (long i = 0; i < g.numel(); ++i)
                if (av[i] > T(0)) ga[i] += g[i];
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::sigmoid(Var a) {
    const auto& av = val(a);
    TensorT<T> out(av.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-av[i]));
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o] {
            auto& g = grad(o);
            const auto& ov = val(o);
            auto& ga = grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * ov[i] * (T(1) - ov[i]);
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::linear(Var x, Var w, Var b) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    const auto& bv = val(b);
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(1))
        throw ParamError("linear: shape mismatch " + shape_str(xv.shape) + " vs " +
                         shape_str(wv.shape));
    int B = xv.dim(0), Din = xv.dim(1), Dout = wv.dim(0);
    TensorT<T> out({B, Dout});
    CMatMap<T> X(xv.ptr(), B, Din), W(wv.ptr(), Dout, Din);
    MatMap<T> Y(out.ptr(), B, Dout);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < Dout; ++j) out.at(i, j) += bv[j];
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, x, w, b, o, B, Din, Dout] {
            const auto& g = grad(o);
            const auto& xv = val(x);
            const auto& wv = val(w);
            CMatMap<T> G(g.ptr(), B, Dout), X(xv.ptr(), B, Din), W(wv.ptr(), Dout, Din);
            MatMap<T> GX(grad(x).ptr(), B, Din), GW(grad(w).ptr(), Dout, Din);
            GX.noalias() += G * W;
            GW.noalias() += G.transpose() * X;
            auto& gb = grad(b);
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < Dout; ++j) gb[j] += g.at(i, j);
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::conv2d(Var x, Var w, Var b, int stride, int pad) {
    return conv2d_impl(x, w, b, stride, pad, pad);
}

template <class T>
typename Tape<T>::Var Tape<T>::conv2d_impl(Var x, Var w, Var b, int stride, int pad_h,
                                           int pad_w) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    if (xv.ndim() != 4 || wv.ndim() != 4 || xv.dim(1) != wv.dim(1))
        throw ParamError("conv2d: shape mismatch");
    int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W_ = xv.dim(3);
    int Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    int Ho = conv_out(H, kh, stride, pad_h), Wo = conv_out(W_, kw, stride, pad_w);
    if (Ho <= 0 || Wo <= 0) throw ParamError("conv2d: output would be empty");
    int K = C * kh * kw, P = Ho * Wo;
    TensorT<T> out({B, Co, Ho, Wo});
    const auto& bv = val(b);
#pragma omp parallel for schedule(static) if (B > 1)
    for (int n = 0; n < B; ++n) {
        std::vector<T> col(static_cast<size_t>(K) * P);
        im2col(xv.ptr() + static_cast<long>(n) * C * H * W_, C, H, W_, kh, kw, stride, pad_h,
               pad_w, Ho, Wo, col.data());
        CMatMap<T> Wm(wv.ptr(), Co, K), Cm(col.data(), K, P);
        MatMap<T> Ym(out.ptr() + static_cast<long>(n) * Co * P, Co, P);
        Ym.noalias() = Wm * Cm;
        for (int c = 0; c < Co; ++c) {
            T* row = out.ptr() + (static_cast<long>(n) * Co + c) * P;
            for (int p = 0; p < P; ++p) row[p] += bv[c];
        }
    }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, x, w, b, o, B, C, H, W_, Co, kh, kw, stride, pad_h, pad_w, Ho, Wo, K,
                        P] {
            const auto& g = grad(o);
            const auto& xv = val(x);
            const auto& wv = val(w);
            auto& gx = grad(x);
            auto& gw = grad(w);
            auto& gb = grad(b);
            // Per-sample weight/bias gradients are reduced in a fixed order
            // afterwards so the result is independent of thread scheduling.
            std::vector<T> gw_part(static_cast<size_t>(B) * Co * K);
            std::vector<T> gb_part(static_cast<size_t>(B) * Co);
#pragma omp parallel for schedule(static) if (B > 1)
            for (int n = 0; n < B; ++n) {
                std::vector<T> col(static_cast<size_t>(K) * P);
                std::vector<T> dcol(static_cast<size_t>(K) * P);
                const T* xn = xv.ptr() + static_cast<long>(n) * C * H * W_;
                const T* gn = g.ptr() + static_cast<long>(n) * Co * P;
                im2col(xn, C, H, W_, kh, kw, stride, pad_h, pad_w, Ho, Wo, col.data());
                CMatMap<T> Gm(gn, Co, P), Cm(col.data(), K, P), Wm(wv.ptr(), Co, K);
                MatMap<T> GWm(gw_part.data() + static_cast<size_t>(n) * Co * K, Co, K);
                MatMap<T> DCm(dcol.data(), K, P);
                GWm.noalias() = Gm * Cm.transpose();
                DCm.noalias() = Wm.transpose() * Gm;
                col2im_acc(dcol.data(), C, H, W_, kh, kw, stride, pad_h, pad_w, Ho, Wo,
                           gx.ptr() + static_cast<long>(n) * C * H * W_);
                for (int c = 0; c < Co; ++c) {
                    const T* row = gn + static_cast<long>(c) * P;
                    T s = T(0);
                    for (int p = 0; p < P; ++p) s += row[p];
                    gb_part[static_cast<size_t>(n) * Co + c] = s;
                }
            }
            for (int n = 0; n < B; ++n) {
                const T* gwp = gw_part.data() + static_cast<size_t>(n) * Co * K;
                for (long i = 0; i < static_cast<long>(Co) * K; ++i) gw[i] += gwp[i];
                for (int c = 0; c < Co; ++c) gb[c] += gb_part[static_cast<size_t>(n) * Co + c];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::conv1d(Var x, Var w, Var b, int stride, int pad) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    if (xv.ndim() != 3 || wv.ndim() != 3 || xv.dim(1) != wv.dim(1))
        throw ParamError("conv1d: shape mismatch");
    // Reuse the 2d kernels with H=1 by viewing [B,C,L] as [B,C,1,L].
    int B = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
    int Co = wv.dim(0), k = wv.dim(2);
    Var x4 = push(xv.reshaped({B, C, 1, L}));
    if (grad_enabled_)
        node(x4).back = [this, x, x4] {
            auto& g = grad(x4);
            auto& gx = grad(x);
            for (long i = 0; i < g.numel(); ++i) gx[i] += g[i];
        };
    Var w4 = push(wv.reshaped({Co, C, 1, k}));
    if (grad_enabled_)
        node(w4).back = [this, w, w4] {
            auto& g = grad(w4);
            auto& gw = grad(w);
            for (long i = 0; i < g.numel(); ++i) gw[i] += g[i];
        };
    Var o4 = conv2d_impl(x4, w4, b, stride, /*pad_h=*/0, /*pad_w=*/pad);
    const auto& ov = val(o4);
    int Lo = ov.dim(3);
    Var o = push(ov.reshaped({B, Co, Lo}));
    if (grad_enabled_)
        node(o).back = [this, o4, o] {
            auto& g = grad(o);
            auto& g4 = grad(o4);
            for (long i = 0; i < g.numel(); ++i) g4[i] += g[i];
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::layer_norm(Var x, Var gain, Var bias) {
    const auto& xv = val(x);
    if (xv.ndim() < 2) throw ParamError("layer_norm: rank too small");
    int B = xv.dim(0), C = xv.dim(1);
    long S = xv.numel() / (static_cast<long>(B) * C);  // spatial positions
    const T eps = static_cast<T>(1e-5);
    TensorT<T> out(xv.shape);
    TensorT<T> xhat(xv.shape);
    const auto& gv = val(gain);
    const auto& bv = val(bias);
    if (gv.numel() != C || bv.numel() != C) throw ParamError("layer_norm: gain/bias dim");
    std::vector<T> inv_std(static_cast<size_t>(B) * S);
    for (int n = 0; n < B; ++n) {
        for (long s = 0; s < S; ++s) {
            T mean = T(0);
            for (int c = 0; c < C; ++c) mean += xv[(static_cast<long>(n) * C + c) * S + s];
            mean /= static_cast<T>(C);
            T var = T(0);
            for (int c = 0; c < C; ++c) {
                T d = xv[(static_cast<long>(n) * C + c) * S + s] - mean;
                var += d * d;
            }
            var /= static_cast<T>(C);
            T is = T(1) / std::sqrt(var + eps);
            inv_std[static_cast<size_t>(n) * S + s] = is;
            for (int c = 0; c < C; ++c) {
                long idx = (static_cast<long>(n) * C + c) * S + s;
                xhat[idx] = (xv[idx] - mean) * is;
                out[idx] = xhat[idx] * gv[c] + bv[c];
            }
        }
    }
    Var o = push(std::move(out));
    if (grad_enabled_) {
        auto xh = std::make_shared<TensorT<T>>(std::move(xhat));
        auto istd = std::make_shared<std::vector<T>>(std::move(inv_std));
        node(o).back = [this, x, gain, bias, o, B, C, S, xh, istd] {
            const auto& g = grad(o);
            const auto& gv = val(gain);
            auto& gx = grad(x);
            auto& gg = grad(gain);
            auto& gb = grad(bias);
            for (int n = 0; n < B; ++n) {
                for (long s = 0; s < S; ++s) {
                    T sum_gy = T(0), sum_gyx = T(0);
                    for (int c = 0; c < C; ++c) {
                        long idx = (static_cast<long>(n) * C + c) * S + s;
                        T gy = g[idx] * gv[c];
                        sum_gy += gy;
                        sum_gyx += gy * (*xh)[idx];
                    }
                    T is = (*istd)[static_cast<size_t>(n) * S + s];
                    for (int c = 0; c < C; ++c) {
                        long idx = (static_cast<long>(n) * C + c) * S + s;
                        T gy = g[idx] * gv[c];
                        gx[idx] += is * (gy - (sum_gy + (*xh)[idx] * sum_gyx) / static_cast<T>(C));
                        gg[c] += g[idx] * (*xh)[idx];
                        gb[c] += g[idx];
                    }
                }
            }
        };
    }
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::flatten(Var x) {
    const auto& xv = val(x);
    int B = xv.dim(0);
    long rest = xv.numel() / B;
    Var o = push(xv.reshaped({B, static_cast<int>(rest)}));
    if (grad_enabled_)
        node(o).back = [this, x, o] {
            auto& g = grad(o);
            auto& gx = grad(x);
            for (long i = 0; i < g.numel(); ++i) gx[i] += g[i];
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::concat_ch(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.ndim() != bv.ndim() || av.dim(0) != bv.dim(0))
        throw ParamError("concat_ch: rank/batch mismatch");
    for (int d = 2; d < av.ndim(); ++d)
        if (av.dim(d) != bv.dim(d)) throw ParamError("concat_ch: spatial mismatch");
    int B = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1);
    long S = av.numel() / (static_cast<long>(B) * Ca);
    auto shape = av.shape;
    shape[1] = Ca + Cb;
    TensorT<T> out(shape);
    for (int n = 0; n < B; ++n) {
        std::copy(av.ptr() + static_cast<long>(n) * Ca * S, av.ptr() + (static_cast<long>(n) + 1) * Ca * S,
                  out.ptr() + static_cast<long>(n) * (Ca + Cb) * S);
        std::copy(bv.ptr() + static_cast<long>(n) * Cb * S, bv.ptr() + (static_cast<long>(n) + 1) * Cb * S,
                  out.ptr() + static_cast<long>(n) * (Ca + Cb) * S + Ca * S);
    }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, b, o, B, Ca, Cb, S] {
            const auto& g = grad(o);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (int n = 0; n < B; ++n) {
                const T* gn = g.ptr() + static_cast<long>(n) * (Ca + Cb) * S;
                T* gan = ga.ptr() + static_cast<long>(n) * Ca * S;
                T* gbn = gb.ptr() + static_cast<long>(n) * Cb * S;
                for (long i = 0; i < static_cast<long>(Ca) * S; ++i) gan[i] += gn[i];
                for (long i = 0; i < static_cast<long>(Cb) * S; ++i) gbn[i] += gn[Ca * S + i];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::slice_ch(Var a, int from, int to) {
    const auto& av = val(a);
    int B = av.dim(0), C = av.dim(1);
    if (from < 0 || to > C || from >= to) throw ParamError("slice_ch: bad range");
    long S = av.numel() / (static_cast<long>(B) * C);
    auto shape = av.shape;
    shape[1] = to - from;
    TensorT<T> out(shape);
    for (int n = 0; n < B; ++n)
        std::copy(av.ptr() + (static_cast<long>(n) * C + from) * S,
                  av.ptr() + (static_cast<long>(n) * C + to) * S,
                  out.ptr() + static_cast<long>(n) * (to - from) * S);
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o, B, C, S, from, to] {
            const auto& g = grad(o);
            auto& ga = grad(a);
            for (int n = 0; n < B; ++n) {
                const T* gn = g.ptr() + static_cast<long>(n) * (to - from) * S;
                T* gan = ga.ptr() + (static_cast<long>(n) * C + from) * S;
                for (long i = 0; i < static_cast<long>(to - from) * S; ++i) gan[i] += gn[i];
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::broadcast_hw(Var v, int h, int w) {
    const auto& vv = val(v);
    if (vv.ndim() != 2) throw ParamError("broadcast_hw: want [B,N]");
    int B = vv.dim(0), N = vv.dim(1);
    TensorT<T> out({B, N, h, w});
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < N; ++c) {
            T x = vv.at(n, c);
            T* p = out.ptr() + (static_cast<long>(n) * N + c) * h * w;
            for (int i = 0; i < h * w; ++i) p[i] = x;
        }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, v, o, B, N, h, w] {
            const auto& g = grad(o);
            auto& gv = grad(v);
            for (int n = 0; n < B; ++n)
                for (int c = 0; c < N; ++c) {
                    const T* p = g.ptr() + (static_cast<long>(n) * N + c) * h * w;
                    T s = T(0);
                    for (int i = 0; i < h * w; ++i) s += p[i];
                    gv.at(n, c) += s;
                }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::add_chvec(Var x, Var v) {
    const auto& xv = val(x);
    const auto& vv = val(v);
    int B = xv.dim(0), C = xv.dim(1);
    if (vv.ndim() != 2 || vv.dim(0) != B || vv.dim(1) != C)
        throw ParamError("add_chvec: shape mismatch");
    long S = xv.numel() / (static_cast<long>(B) * C);
    TensorT<T> out(xv.shape);
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            const T* xp = xv.ptr() + (static_cast<long>(n) * C + c) * S;
            T* op = out.ptr() + (static_cast<long>(n) * C + c) * S;
            T b = vv.at(n, c);
            for (long i = 0; i < S; ++i) op[i] = xp[i] + b;
        }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, x, v, o, B, C, S] {
            const auto& g = grad(o);
            auto& gx = grad(x);
            auto& gv = grad(v);
            for (int n = 0; n < B; ++n)
                for (int c = 0; c < C; ++c) {
                    const T* gp = g.ptr() + (static_cast<long>(n) * C + c) * S;
                    T* gxp = gx.ptr() + (static_cast<long>(n) * C + c) * S;
                    T s = T(0);
                    for (long i = 0; i < S; ++i) {
                        gxp[i] += gp[i];
                        s += gp[i];
                    }
                    gv.at(n, c) += s;
                }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::upsample2x_2d(Var x) {
    const auto& xv = val(x);
    if (xv.ndim() != 4) throw ParamError("upsample2x_2d: want [B,C,H,W]");
    int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    TensorT<T> out({B, C, 2 * H, 2 * W});
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            const T* xp = xv.ptr() + (static_cast<long>(n) * C + c) * H * W;
            T* op = out.ptr() + (static_cast<long>(n) * C + c) * 4 * H * W;
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx) op[y * 2 * W + xx] = xp[(y / 2) * W + xx / 2];
        }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, x, o, B, C, H, W] {
            const auto& g = grad(o);
            auto& gx = grad(x);
            for (int n = 0; n < B; ++n)
                for (int c = 0; c < C; ++c) {
                    const T* gp = g.ptr() + (static_cast<long>(n) * C + c) * 4 * H * W;
                    T* gxp = gx.ptr() + (static_cast<long>(n) * C + c) * H * W;
                    for (int y = 0; y < 2 * H; ++y)
                        for (int xx = 0; xx < 2 * W; ++xx)
                            gxp[(y / 2) * W + xx / 2] += gp[y * 2 * W + xx];
                }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::upsample1d(Var x, int out_len) {
    const auto& xv = val(x);
    if (xv.ndim() != 3) throw ParamError("upsample1d: want [B,C,L]");
    int B = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
    if (out_len > 2 * L || out_len < L) throw ParamError("upsample1d: bad target length");
    TensorT<T> out({B, C, out_len});
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            const T* xp = xv.ptr() + (static_cast<long>(n) * C + c) * L;
            T* op = out.ptr() + (static_cast<long>(n) * C + c) * out_len;
            for (int l = 0; l < out_len; ++l) op[l] = xp[l / 2];
        }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, x, o, B, C, L, out_len] {
            const auto& g = grad(o);
            auto& gx = grad(x);
            for (int n = 0; n < B; ++n)
                for (int c = 0; c < C; ++c) {
                    const T* gp = g.ptr() + (static_cast<long>(n) * C + c) * out_len;
                    T* gxp = gx.ptr() + (static_cast<long>(n) * C + c) * L;
                    for (int l = 0; l < out_len; ++l) gxp[l / 2] += gp[l];
                }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::warp(Var frame, Var flow) {
    const auto& fv = val(frame);
    const auto& dv = val(flow);
    if (fv.ndim() != 4 || dv.ndim() != 4 || dv.dim(1) != 2 || fv.dim(0) != dv.dim(0) ||
        fv.dim(2) != dv.dim(2) || fv.dim(3) != dv.dim(3))
        throw ParamError("warp: shape mismatch");
    int B = fv.dim(0), C = fv.dim(1), H = fv.dim(2), W = fv.dim(3);
    TensorT<T> out(fv.shape);
    for (int n = 0; n < B; ++n) {
        const T* dx = dv.ptr() + static_cast<long>(n) * 2 * H * W;
        const T* dy = dx + static_cast<long>(H) * W;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                T sx = static_cast<T>(x) + dx[y * W + x];
                T sy = static_cast<T>(y) + dy[y * W + x];
                sx = std::min(std::max(sx, T(0)), static_cast<T>(W - 1));
                sy = std::min(std::max(sy, T(0)), static_cast<T>(H - 1));
                int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
                int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
                T fx = sx - static_cast<T>(x0), fy = sy - static_cast<T>(y0);
                for (int c = 0; c < C; ++c) {
                    const T* src = fv.ptr() + (static_cast<long>(n) * C + c) * H * W;
                    T v0 = src[y0 * W + x0] * (T(1) - fx) + src[y0 * W + x1] * fx;
                    T v1 = src[y1 * W + x0] * (T(1) - fx) + src[y1 * W + x1] * fx;
                    out[((static_cast<long>(n) * C + c) * H + y) * W + x] =
                        v0 * (T(1) - fy) + v1 * fy;
                }
            }
    }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, frame, flow, o, B, C, H, W] {
            const auto& g = grad(o);
            const auto& fv = val(frame);
            const auto& dv = val(flow);
            auto& gf = grad(frame);
            auto& gd = grad(flow);
            for (int n = 0; n < B; ++n) {
                const T* dx = dv.ptr() + static_cast<long>(n) * 2 * H * W;
                const T* dy = dx + static_cast<long>(H) * W;
                T* gdx = gd.ptr() + static_cast<long>(n) * 2 * H * W;
                T* gdy = gdx + static_cast<long>(H) * W;
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        T rx = static_cast<T>(x) + dx[y * W + x];
                        T ry = static_cast<T>(y) + dy[y * W + x];
                        bool cx = rx <= T(0) || rx >= static_cast<T>(W - 1);
                        bool cy = ry <= T(0) || ry >= static_cast<T>(H - 1);
                        T sx = std::min(std::max(rx, T(0)), static_cast<T>(W - 1));
                        T sy = std::min(std::max(ry, T(0)), static_cast<T>(H - 1));
                        int x0 = static_cast<int>(std::floor(sx));
                        int y0 = static_cast<int>(std::floor(sy));
                        int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
                        T fx = sx - static_cast<T>(x0), fy = sy - static_cast<T>(y0);
                        T acc_dx = T(0), acc_dy = T(0);
                        for (int c = 0; c < C; ++c) {
                            const T* src = fv.ptr() + (static_cast<long>(n) * C + c) * H * W;
                            T* gsrc = gf.ptr() + (static_cast<long>(n) * C + c) * H * W;
                            T go = g[((static_cast<long>(n) * C + c) * H + y) * W + x];
                            gsrc[y0 * W + x0] += go * (T(1) - fx) * (T(1) - fy);
                            gsrc[y0 * W + x1] += go * fx * (T(1) - fy);
                            gsrc[y1 * W + x0] += go * (T(1) - fx) * fy;
                            gsrc[y1 * W + x1] += go * fx * fy;
                            T v00 = src[y0 * W + x0], v01 = src[y0 * W + x1];
                            T v10 = src[y1 * W + x0], v11 = src[y1 * W + x1];
                            acc_dx += go * ((v01 - v00) * (T(1) - fy) + (v11 - v10) * fy);
                            acc_dy += go * ((v10 - v00) * (T(1) - fx) + (v11 - v01) * fx);
                        }
                        if (!cx) gdx[y * W + x] += acc_dx;
                        if (!cy) gdy[y * W + x] += acc_dy;
                    }
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::blend(Var mask, Var a, Var b) {
    const auto& mv = val(mask);
    const auto& av = val(a);
    const auto& bv = val(b);
    if (!av.same_shape(bv)) throw ParamError("blend: a/b shape mismatch");
    if (mv.ndim() != 4 || mv.dim(1) != 1 || mv.dim(0) != av.dim(0) || mv.dim(2) != av.dim(2) ||
        mv.dim(3) != av.dim(3))
        throw ParamError("blend: mask shape mismatch");
    int B = av.dim(0), C = av.dim(1);
    long S = static_cast<long>(av.dim(2)) * av.dim(3);
    TensorT<T> out(av.shape);
    for (int n = 0; n < B; ++n) {
        const T* m = mv.ptr() + static_cast<long>(n) * S;
        for (int c = 0; c < C; ++c) {
            long off = (static_cast<long>(n) * C + c) * S;
            for (long i = 0; i < S; ++i)
                out[off + i] = m[i] * av[off + i] + (T(1) - m[i]) * bv[off + i];
        }
    }
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, mask, a, b, o, B, C, S] {
            const auto& g = grad(o);
            const auto& mv = val(mask);
            const auto& av = val(a);
            const auto& bv = val(b);
            auto& gm = grad(mask);
            auto& ga = grad(a);
            auto& gb = grad(b);
            for (int n = 0; n < B; ++n) {
                const T* m = mv.ptr() + static_cast<long>(n) * S;
                T* gmp = gm.ptr() + static_cast<long>(n) * S;
                for (int c = 0; c < C; ++c) {
                    long off = (static_cast<long>(n) * C + c) * S;
                    for (long i = 0; i < S; ++i) {
                        T go = g[off + i];
                        ga[off + i] += go * m[i];
                        gb[off + i] += go * (T(1) - m[i]);
                        gmp[i] += go * (av[off + i] - bv[off + i]);
                    }
                }
            }
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::mean_all(Var a) {
    const auto& av = val(a);
    T s = T(0);
    for (long i = 0; i < av.numel(); ++i) s += av[i];
    TensorT<T> out({1});
    out[0] = s / static_cast<T>(av.numel());
    Var o = push(std::move(out));
    if (grad_enabled_)
        node(o).back = [this, a, o] {
            T g = grad(o)[0] / static_cast<T>(val(a).numel());
            auto& ga = grad(a);
            for (long i = 0; i < ga.numel(); ++i) ga[i] += g;
        };
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::mse_to(Var a, const TensorT<T>& target) {
    const auto& av = val(a);
    if (!av.same_shape(target)) throw ParamError("mse_to: shape mismatch");
    T s = T(0);
    for (long i = 0; i < av.numel(); ++i) {
        T d = av[i] - target[i];
        s += d * d;
    }
    TensorT<T> out({1});
    out[0] = s / static_cast<T>(av.numel());
    Var o = push(std::move(out));
    if (grad_enabled_) {
        auto tgt = std::make_shared<TensorT<T>>(target);
        node(o).back = [this, a, o, tgt] {
            T g = grad(o)[0];
            const auto& av = val(a);
            auto& ga = grad(a);
            T k = T(2) / static_cast<T>(av.numel());
            for (long i = 0; i < av.numel(); ++i) ga[i] += g * k * (av[i] - (*tgt)[i]);
        };
    }
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::mse_masked(Var a, const TensorT<T>& target, const TensorT<T>& mask) {
    const auto& av = val(a);
    if (!av.same_shape(target) || !av.same_shape(mask)) throw ParamError("mse_masked: shape mismatch");
    T s = T(0), w = T(0);
    for (long i = 0; i < av.numel(); ++i) {
        T d = av[i] - target[i];
        s += mask[i] * d * d;
        w += mask[i];
    }
    if (w <= T(0)) throw ParamError("mse_masked: empty mask");
    TensorT<T> out({1});
    out[0] = s / w;
    Var o = push(std::move(out));
    if (grad_enabled_) {
        auto tgt = std::make_shared<TensorT<T>>(target);
        auto msk = std::make_shared<TensorT<T>>(mask);
        node(o).back = [this, a, o, tgt, msk, w] {
            T g = grad(o)[0];
            const auto& av = val(a);
            auto& ga = grad(a);
            T k = T(2) / w;
            for (long i = 0; i < av.numel(); ++i)
                ga[i] += g * k * (*msk)[i] * (av[i] - (*tgt)[i]);
        };
    }
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::l1_to(Var a, const TensorT<T>& target) {
    const auto& av = val(a);
    if (!av.same_shape(target)) throw ParamError("l1_to: shape mismatch");
    T s = T(0);
    for (long i = 0; i < av.numel(); ++i) s += std::abs(av[i] - target[i]);
    TensorT<T> out({1});
    out[0] = s / static_cast<T>(av.numel());
    Var o = push(std::move(out));
    if (grad_enabled_) {
        auto tgt = std::make_shared<TensorT<T>>(target);
        node(o).back = [this, a, o, tgt] {
            T g = grad(o)[0];
            const auto& av = val(a);
            auto& ga = grad(a);
            T k = T(1) / static_cast<T>(av.numel());
            for (long i = 0; i < av.numel(); ++i) {
                T d = av[i] - (*tgt)[i];
                ga[i] += g * k * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
            }
        };
    }
    return o;
}

template <class T>
typename Tape<T>::Var Tape<T>::grad_l1_to(Var a, const TensorT<T>& target) {
    const auto& av = val(a);
    if (av.ndim() != 4 || !av.same_shape(target)) throw ParamError("grad_l1_to: want [B,C,H,W]");
    int B = av.dim(0), C = av.dim(1), H = av.dim(2), W = av.dim(3);
    long count = static_cast<long>(B) * C * (static_cast<long>(H) * (W - 1) + static_cast<long>(H - 1) * W);
    if (count == 0) throw ParamError("grad_l1_to: degenerate image");
    T s = T(0);
    for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
            long off = (static_cast<long>(n) * C + c) * H * W;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x + 1 < W; ++x) {
                    T da = av[off + y * W + x + 1] - av[off + y * W + x];
                    T dt = target[off + y * W + x + 1] - target[off + y * W + x];
                    s += std::abs(da - dt);
                }
            for (int y = 0; y + 1 < H; ++y)
                for (int x = 0; x < W; ++x) {
                    T da = av[off + (y + 1) * W + x] - av[off + y * W + x];
                    T dt = target[off + (y + 1) * W + x] - target[off + y * W + x];
                    s += std::abs(da - dt);
                }
        }
    TensorT<T> out({1});
    out[0] = s / static_cast<T>(count);
    Var o = push(std::move(out));
    if (grad_enabled_) {
        auto tgt = std::make_shared<TensorT<T>>(target);
        node(o).back = [this, a, o, tgt, B, C, H, W, count] {
            T g = grad(o)[0] / static_cast<T>(count);
            const auto& av = val(a);
            auto& ga = grad(a);
            auto sgn = [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); };
            for (int n = 0; n < B; ++n)
                for (int c = 0; c < C; ++c) {
                    long off = (static_cast<long>(n) * C + c) * H * W;
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x + 1 < W; ++x) {
                            T da = av[off + y * W + x + 1] - av[off + y * W + x];
                            T dt = (*tgt)[off + y * W + x + 1] - (*tgt)[off + y * W + x];
                            T sg = sgn(da - dt) * g;
                            ga[off + y * W + x + 1] += sg;
                            ga[off + y * W + x] -= sg;
                        }
                    for (int y = 0; y + 1 < H; ++y)
                        for (int x = 0; x < W; ++x) {
                            T da = av[off + (y + 1) * W + x] - av[off + y * W + x];
                            T dt = (*tgt)[off + (y + 1) * W + x] - (*tgt)[off + y * W + x];
                            T sg = sgn(da - dt) * g;
                            ga[off + (y + 1) * W + x] += sg;
                            ga[off + y * W + x] -= sg;
                        }
                }
        };
    }
    return o;
}

template <class T>
void Tape<T>::backward(Var loss) {
    if (!grad_enabled_) throw ParamError("backward on a no-grad tape");
    if (val(loss).numel() != 1) throw ParamError("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = TensorT<T>::zeros(n.val.shape);
    nodes_[loss.i].grad[0] = T(1);
    for (int i = loss.i; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back();
        if (nodes_[i].leaf) {
            auto& g = nodes_[i].grad;
            auto& pg = nodes_[i].leaf->grad;
            for (long k = 0; k < g.numel(); ++k) pg[k] += g[k];
        }
    }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace leo
