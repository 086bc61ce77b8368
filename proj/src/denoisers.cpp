#include "leo/denoisers.hpp"

namespace leo {

template <class T>
TemporalUnetT<T>::TemporalUnetT(Config cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(init_seed);
    int n = cfg.channels, c = cfg.base, e = cfg.temb_dim;
    conv_in_ = Conv1dT<T>(ps_, "in", n, c, 3, 1, 1, rng);
    temb1_ = LinearT<T>(ps_, "temb1", e, 2 * c, rng);
    temb2_ = LinearT<T>(ps_, "temb2", 2 * c, e, rng);
    rb0_ = ResBlockT<T, Conv1dT<T>>(ps_, "rb0", c, e, rng);
    down0_ = Conv1dT<T>(ps_, "down0", c, 2 * c, 3, 2, 1, rng);
    rb1_ = ResBlockT<T, Conv1dT<T>>(ps_, "rb1", 2 * c, e, rng);
    down1_ = Conv1dT<T>(ps_, "down1", 2 * c, 2 * c, 3, 2, 1, rng);
    rb_mid_ = ResBlockT<T, Conv1dT<T>>(ps_, "mid", 2 * c, e, rng);
    fuse1_ = Conv1dT<T>(ps_, "fuse1", 4 * c, 2 * c, 3, 1, 1, rng);
    rb_up1_ = ResBlockT<T, Conv1dT<T>>(ps_, "up1", 2 * c, e, rng);
    fuse0_ = Conv1dT<T>(ps_, "fuse0", 3 * c, c, 3, 1, 1, rng);
    rb_up0_ = ResBlockT<T, Conv1dT<T>>(ps_, "up0", c, e, rng);
    conv_out_ = Conv1dT<T>(ps_, "out", c, n, 3, 1, 1, rng, /*zero_init=*/true);
}

template <class T>
typename Tape<T>::Var TemporalUnetT<T>::forward(Tape<T>& t, typename Tape<T>::Var x,
                                                int step) const {
    return forward(t, x, std::vector<int>(t.val(x).dim(0), step));
}

template <class T>
typename Tape<T>::Var TemporalUnetT<T>::forward(Tape<T>& t, typename Tape<T>::Var x,
                                                const std::vector<int>& steps) const {
    if (static_cast<int>(steps.size()) != t.val(x).dim(0))
        throw ParamError("TemporalUnet: steps/batch mismatch");
    auto emb = t.input(timestep_embedding<T>(steps, cfg_.temb_dim));
    auto base = t.silu(temb2_.fwd(t, t.silu(temb1_.fwd(t, emb))));
    auto s0 = rb0_.fwd(t, conv_in_.fwd(t, x), base);
    auto s1 = rb1_.fwd(t, down0_.fwd(t, s0), base);
    auto m = rb_mid_.fwd(t, down1_.fwd(t, s1), base);
    auto u1 = t.upsample1d(m, t.val(s1).dim(2));
    auto b1 = rb_up1_.fwd(t, fuse1_.fwd(t, t.concat_ch(u1, s1)), base);
    auto u0 = t.upsample1d(b1, t.val(s0).dim(2));
    auto b0 = rb_up0_.fwd(t, fuse0_.fwd(t, t.concat_ch(u0, s0)), base);
    return conv_out_.fwd(t, b0);
}

template <class T>
TensorT<T> TemporalUnetT<T>::predict(const TensorT<T>& x, int step) const {
    Tape<T> t(false);
    auto out = forward(t, t.input(x), step);
    return t.val(out);
}

template class TemporalUnetT<float>;
template class TemporalUnetT<double>;

template <class T>
DenoiseMlpT<T>::DenoiseMlpT(Config cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(init_seed);
    temb1_ = LinearT<T>(ps_, "temb1", cfg.temb_dim, cfg.hidden, rng);
    tproj_ = LinearT<T>(ps_, "tproj", cfg.hidden, cfg.hidden, rng);
    l1_ = LinearT<T>(ps_, "l1", cfg.dim, cfg.hidden, rng);
    l2_ = LinearT<T>(ps_, "l2", cfg.hidden, cfg.hidden, rng);
    l3_ = LinearT<T>(ps_, "l3", cfg.hidden, cfg.hidden, rng);
    l4_ = LinearT<T>(ps_, "l4", cfg.hidden, cfg.dim, rng, /*zero_init=*/true);
}

template <class T>
typename Tape<T>::Var DenoiseMlpT<T>::forward(Tape<T>& t, typename Tape<T>::Var x,
                                              int step) const {
    return forward(t, x, std::vector<int>(t.val(x).dim(0), step));
}

template <class T>
typename Tape<T>::Var DenoiseMlpT<T>::forward(Tape<T>& t, typename Tape<T>::Var x,
                                              const std::vector<int>& steps) const {
    if (static_cast<int>(steps.size()) != t.val(x).dim(0))
        throw ParamError("DenoiseMlp: steps/batch mismatch");
    auto e = t.silu(temb1_.fwd(t, t.input(timestep_embedding<T>(steps, cfg_.temb_dim))));
    auto h = t.silu(t.add(l1_.fwd(t, x), tproj_.fwd(t, e)));
    h = t.silu(l2_.fwd(t, h));
    h = t.silu(l3_.fwd(t, h));
    return l4_.fwd(t, h);
}

template <class T>
TensorT<T> DenoiseMlpT<T>::predict(const TensorT<T>& x, int step) const {
    Tape<T> t(false);
    auto out = forward(t, t.input(x), step);
    return t.val(out);
}

template class DenoiseMlpT<float>;
template class DenoiseMlpT<double>;

template <class T>
ImageUnetT<T>::ImageUnetT(Config cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg.height % 4 || cfg.width % 4)
        throw ParamError("ImageUnet: H and W must be divisible by 4");
    Rng rng(init_seed);
    int ch = cfg.channels, c = cfg.base, e = cfg.temb_dim;
    conv_in_ = Conv2dT<T>(ps_, "in", ch, c, 3, 1, 1, rng);
    temb1_ = LinearT<T>(ps_, "temb1", e, 2 * c, rng);
    temb2_ = LinearT<T>(ps_, "temb2", 2 * c, e, rng);
    if (cfg.cond_dim > 0) cond_lin_ = LinearT<T>(ps_, "cond", cfg.cond_dim, 2 * c, rng);
    rb0_ = ResBlockT<T, Conv2dT<T>>(ps_, "rb0", c, e, rng);
    down0_ = Conv2dT<T>(ps_, "down0", c, 2 * c, 3, 2, 1, rng);
    rb1_ = ResBlockT<T, Conv2dT<T>>(ps_, "rb1", 2 * c, e, rng);
    down1_ = Conv2dT<T>(ps_, "down1", 2 * c, 2 * c, 3, 2, 1, rng);
    rb_mid_ = ResBlockT<T, Conv2dT<T>>(ps_, "mid", 2 * c, e, rng);
    fuse1_ = Conv2dT<T>(ps_, "fuse1", 4 * c, 2 * c, 3, 1, 1, rng);
    rb_up1_ = ResBlockT<T, Conv2dT<T>>(ps_, "up1", 2 * c, e, rng);
    fuse0_ = Conv2dT<T>(ps_, "fuse0", 3 * c, c, 3, 1, 1, rng);
    rb_up0_ = ResBlockT<T, Conv2dT<T>>(ps_, "up0", c, e, rng);
    conv_out_ = Conv2dT<T>(ps_, "out", c, ch, 3, 1, 1, rng, /*zero_init=*/true);
}

template <class T>
typename Tape<T>::Var ImageUnetT<T>::forward(Tape<T>& t, typename Tape<T>::Var x, int step,
                                             const TensorT<T>* cond) const {
    return forward(t, x, std::vector<int>(t.val(x).dim(0), step), cond);
}

template <class T>
typename Tape<T>::Var ImageUnetT<T>::forward(Tape<T>& t, typename Tape<T>::Var x,
                                             const std::vector<int>& steps,
                                             const TensorT<T>* cond) const {
    int B = t.val(x).dim(0);
    if (static_cast<int>(steps.size()) != B)
        throw ParamError("ImageUnet: steps/batch mismatch");
    auto raw = t.silu(temb1_.fwd(t, t.input(timestep_embedding<T>(steps, cfg_.temb_dim))));
    if (cfg_.cond_dim > 0) {
        if (!cond || cond->ndim() != 2 || cond->dim(0) != B || cond->dim(1) != cfg_.cond_dim)
            throw ParamError("ImageUnet: conditioning code missing or misshaped");
        raw = t.add(raw, cond_lin_.fwd(t, t.input(*cond)));
    }
    auto base = t.silu(temb2_.fwd(t, raw));
    auto s0 = rb0_.fwd(t, conv_in_.fwd(t, x), base);
    auto s1 = rb1_.fwd(t, down0_.fwd(t, s0), base);
    auto m = rb_mid_.fwd(t, down1_.fwd(t, s1), base);
    auto b1 = rb_up1_.fwd(t, fuse1_.fwd(t, t.concat_ch(t.upsample2x_2d(m), s1)), base);
    auto b0 = rb_up0_.fwd(t, fuse0_.fwd(t, t.concat_ch(t.upsample2x_2d(b1), s0)), base);
    return conv_out_.fwd(t, b0);
}

template <class T>
TensorT<T> ImageUnetT<T>::predict(const TensorT<T>& x, int step, const TensorT<T>* cond) const {
    Tape<T> t(false);
    auto out = forward(t, t.input(x), step, cond);
    return t.val(out);
}

template class ImageUnetT<float>;
template class ImageUnetT<double>;

}  // namespace leo
