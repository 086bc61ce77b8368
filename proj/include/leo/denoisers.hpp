#pragma once

#include "leo/diffusion.hpp"
#include "leo/nn.hpp"

namespace leo {

/// Residual block: conv(silu(LN(x))) + t-embedding, conv(silu(LN(.))), skip.
template <class T, class ConvT>
struct ResBlockT {
    LayerNormT<T> ln1, ln2;
    ConvT c1, c2;
    LinearT<T> tproj;

    ResBlockT() = default;
    ResBlockT(ParamStoreT<T>& ps, const std::string& name, int ch, int temb_dim, Rng& rng)
        : ln1(ps, name + ".ln1", ch),
          ln2(ps, name + ".ln2", ch),
          c1(ps, name + ".c1", ch, ch, 3, 1, 1, rng),
          c2(ps, name + ".c2", ch, ch, 3, 1, 1, rng),
          tproj(ps, name + ".tproj", temb_dim, ch, rng) {}

    typename Tape<T>::Var fwd(Tape<T>& t, typename Tape<T>::Var x,
                              typename Tape<T>::Var temb) const {
        auto h = c1.fwd(t, t.silu(ln1.fwd(t, x)));
        h = t.add_chvec(h, tproj.fwd(t, temb));
        h = c2.fwd(t, t.silu(ln2.fwd(t, h)));
        return t.add(x, h);
    }
};

/// 1D U-Net over motion-code sequences: input [B,N,L], three resolution
/// levels with stride-2 temporal downsampling, sinusoidal step embedding
/// added per block. Output has the input's shape.
template <class T>
class TemporalUnetT {
public:
    struct Config {
        int channels = 20;  // code dimension N
        int base = 48;
        int temb_dim = 64;
    };

    TemporalUnetT(Config cfg, uint64_t init_seed);
    TemporalUnetT(const TemporalUnetT&) = delete;
    TemporalUnetT& operator=(const TemporalUnetT&) = delete;

    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x,
                                  const std::vector<int>& steps) const;
    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x, int step) const;
    TensorT<T> predict(const TensorT<T>& x, int step) const;

    const Config& config() const { return cfg_; }
    ParamStoreT<T>& params() { return ps_; }
    const ParamStoreT<T>& params() const { return ps_; }

private:
    Config cfg_;
    ParamStoreT<T> ps_;
    Conv1dT<T> conv_in_, down0_, down1_, fuse1_, fuse0_, conv_out_;
    LinearT<T> temb1_, temb2_;
    ResBlockT<T, Conv1dT<T>> rb0_, rb1_, rb_mid_, rb_up1_, rb_up0_;
};

using TemporalUnet = TemporalUnetT<float>;

/// Frame-wise denoiser over single codes: a 4-layer MLP with a step
/// embedding injected after the first layer.
template <class T>
class DenoiseMlpT {
public:
    struct Config {
        int dim = 20;
        int hidden = 128;
        int temb_dim = 64;
    };

    DenoiseMlpT(Config cfg, uint64_t init_seed);
    DenoiseMlpT(const DenoiseMlpT&) = delete;
    DenoiseMlpT& operator=(const DenoiseMlpT&) = delete;

    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x,
                                  const std::vector<int>& steps) const;
    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x, int step) const;
    TensorT<T> predict(const TensorT<T>& x, int step) const;

    const Config& config() const { return cfg_; }
    ParamStoreT<T>& params() { return ps_; }
    const ParamStoreT<T>& params() const { return ps_; }

private:
    Config cfg_;
    ParamStoreT<T> ps_;
    LinearT<T> temb1_, tproj_, l1_, l2_, l3_, l4_;
};

using DenoiseMlp = DenoiseMlpT<float>;

/// 2D U-Net over frames, optionally conditioned on a motion code whose linear
/// embedding is added to the step embedding feeding every block.
template <class T>
class ImageUnetT {
public:
    struct Config {
        int channels = 3;
        int height = 64;  // divisible by 4
        int width = 64;
        int cond_dim = 0;  // 0 = unconditional
        int base = 24;
        int temb_dim = 64;
    };

    ImageUnetT(Config cfg, uint64_t init_seed);
    ImageUnetT(const ImageUnetT&) = delete;
    ImageUnetT& operator=(const ImageUnetT&) = delete;

    /// cond is [B,cond_dim] (ignored when cond_dim == 0).
    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x,
                                  const std::vector<int>& steps, const TensorT<T>* cond) const;
    typename Tape<T>::Var forward(Tape<T>& t, typename Tape<T>::Var x, int step,
                                  const TensorT<T>* cond) const;
    TensorT<T> predict(const TensorT<T>& x, int step, const TensorT<T>* cond) const;

    const Config& config() const { return cfg_; }
    ParamStoreT<T>& params() { return ps_; }
    const ParamStoreT<T>& params() const { return ps_; }

private:
    Config cfg_;
    ParamStoreT<T> ps_;
    Conv2dT<T> conv_in_, down0_, down1_, fuse1_, fuse0_, conv_out_;
    LinearT<T> temb1_, temb2_, cond_lin_;
    ResBlockT<T, Conv2dT<T>> rb0_, rb1_, rb_mid_, rb_up1_, rb_up0_;
};

using ImageUnet = ImageUnetT<float>;

}  // namespace leo
