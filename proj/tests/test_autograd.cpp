#include <doctest.h>

#include <cmath>
#include <functional>

#include "leo/nn.hpp"

using namespace leo;

namespace {

// Central finite differences against the tape gradient, elementwise, in
// double precision. `build` must construct the whole graph from the params.
double max_rel_err(ParamStoreT<double>& ps,
                   const std::function<double(TapeD&)>& build) {
    ps.zero_grad();
    {
        TapeD t;
        double v = build(t);
        (void)v;
    }
    // build() is expected to call backward itself; grads now live in ps.
    double worst = 0.0;
    const double h = 1e-5;
    for (auto& p : ps.items) {
        for (long i = 0; i < p.value.numel(); ++i) {
            double keep = p.value[i];
            p.value[i] = keep + h;
            double fplus;
            {
                TapeD t(false);
                fplus = build(t);
            }
            p.value[i] = keep - h;
            double fminus;
            {
                TapeD t(false);
                fminus = build(t);
            }
            p.value[i] = keep;
            double fd = (fplus - fminus) / (2 * h);
            double an = p.grad[i];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("finite differences validate every op backward") {
    Rng rng(7);

    SUBCASE("linear + silu + mse") {
        ParamStoreT<double> ps;
        LinearT<double> fc(ps, "fc", 5, 3, rng);
        TensorD x = TensorD::randn({2, 5}, rng);
        TensorD tgt = TensorD::randn({2, 3}, rng);
        auto build = [&](TapeD& t) {
            auto y = t.silu(fc.fwd(t, t.input(x)));
            auto l = t.mse_to(y, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-6);
    }

    SUBCASE("conv2d stride 2 + relu + l1") {
        ParamStoreT<double> ps;
        Conv2dT<double> conv(ps, "c", 2, 3, 3, 2, 1, rng);
        TensorD x = TensorD::randn({2, 2, 6, 6}, rng);
        TensorD tgt = TensorD::randn({2, 3, 3, 3}, rng);
        auto build = [&](TapeD& t) {
            auto y = t.relu(conv.fwd(t, t.input(x)));
            auto l = t.l1_to(y, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-5);
    }

    SUBCASE("conv1d odd length + layer_norm") {
        ParamStoreT<double> ps;
        Conv1dT<double> conv(ps, "c", 3, 4, 3, 2, 1, rng);
        LayerNormT<double> ln(ps, "ln", 4);
        TensorD x = TensorD::randn({2, 3, 7}, rng);
        TensorD tgt = TensorD::randn({2, 4, 4}, rng);
        auto build = [&](TapeD& t) {
            auto y = ln.fwd(t, conv.fwd(t, t.input(x)));
            auto l = t.mse_to(y, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-5);
        // ceil(7/2) = 4 output positions for stride 2, pad 1, k 3
        TapeD t(false);
        auto y = conv.fwd(t, t.input(x));
        CHECK(t.val(y).dim(2) == 4);
    }

    SUBCASE("warp w.r.t. frame and flow") {
        ParamStoreT<double> ps;
        auto& frame = ps.add("frame", TensorD::randn({1, 2, 5, 5}, rng));
        auto& flow = ps.add("flow", TensorD::randn({1, 2, 5, 5}, rng, 0.7));
        TensorD tgt = TensorD::randn({1, 2, 5, 5}, rng);
        auto build = [&](TapeD& t) {
            auto y = t.warp(t.param(frame), t.param(flow));
            auto l = t.mse_to(y, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-5);
    }

    SUBCASE("blend + sigmoid mask path") {
        ParamStoreT<double> ps;
        auto& mraw = ps.add("m", TensorD::randn({1, 1, 4, 4}, rng));
        auto& a = ps.add("a", TensorD::randn({1, 3, 4, 4}, rng));
        auto& b = ps.add("b", TensorD::randn({1, 3, 4, 4}, rng));
        TensorD tgt = TensorD::randn({1, 3, 4, 4}, rng);
        auto build = [&](TapeD& t) {
            auto y = t.blend(t.sigmoid(t.param(mraw)), t.param(a), t.param(b));
            auto l = t.mse_to(y, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-6);
    }

    SUBCASE("structural ops: concat, slice, broadcast, upsample, chvec") {
        ParamStoreT<double> ps;
        auto& a = ps.add("a", TensorD::randn({2, 2, 3, 3}, rng));
        auto& b = ps.add("b", TensorD::randn({2, 3, 3, 3}, rng));
        auto& v = ps.add("v", TensorD::randn({2, 4}, rng));
        auto& cv = ps.add("cv", TensorD::randn({2, 5}, rng));
        TensorD tgt = TensorD::randn({2, 5, 6, 6}, rng);
        auto build = [&](TapeD& t) {
            auto cat = t.concat_ch(t.param(a), t.param(b));       // [2,5,3,3]
            auto bc = t.broadcast_hw(t.param(v), 3, 3);           // [2,4,3,3]
            auto sl = t.slice_ch(bc, 1, 4);                       // [2,3,3,3]
            auto sum = t.add(t.slice_ch(cat, 0, 3), sl);          // [2,3,3,3]
            auto whole = t.concat_ch(sum, t.slice_ch(cat, 3, 5)); // [2,5,3,3]
            auto wv = t.add_chvec(whole, t.param(cv));
            auto up = t.upsample2x_2d(wv);                        // [2,5,6,6]
            auto l = t.mse_to(up, tgt);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-5);
    }

    SUBCASE("upsample1d crop + affine + grad_l1") {
        ParamStoreT<double> ps;
        auto& a = ps.add("a", TensorD::randn({1, 2, 3}, rng));
        // Coarse grid keeps |difference| far from the L1 kink, where central
        // differences are meaningless.
        TensorD imv({1, 1, 4, 4});
        TensorD tgt2({1, 1, 4, 4});
        for (long i = 0; i < 16; ++i) {
            imv[i] = 0.25 * rng.randint(-4, 5);
            tgt2[i] = 0.25 * rng.randint(-4, 5) + 0.0625;
        }
        auto& im = ps.add("im", imv);
        TensorD tgt1 = TensorD::randn({1, 2, 5}, rng);
        auto build = [&](TapeD& t) {
            auto up = t.upsample1d(t.param(a), 5);
            auto l1 = t.mse_to(up, tgt1);
            auto l2 = t.grad_l1_to(t.affine(t.param(im), 1.5, 0.25), tgt2);
            auto l = t.add(l1, l2);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-5);
    }

    SUBCASE("masked mse ignores masked-out entries") {
        ParamStoreT<double> ps;
        auto& a = ps.add("a", TensorD::randn({2, 3}, rng));
        TensorD tgt = TensorD::randn({2, 3}, rng);
        TensorD mask = TensorD::zeros({2, 3});
        mask.at(0, 1) = 1;
        mask.at(1, 2) = 1;
        auto build = [&](TapeD& t) {
            auto l = t.mse_masked(t.param(a), tgt, mask);
            if (t.grad_enabled()) t.backward(l);
            return t.val(l)[0];
        };
        CHECK(max_rel_err(ps, build) < 1e-6);
        // gradient is zero where the mask is zero
        CHECK(ps.items[0].grad.at(0, 0) == 0.0);
        CHECK(ps.items[0].grad.at(0, 1) != 0.0);
    }
}

TEST_CASE("adam reduces a quadratic") {
    Rng rng(3);
    ParamStoreT<float> ps;
    auto& p = ps.add("p", Tensor::randn({8}, rng));
    Tensor target = Tensor::randn({8}, rng);
    AdamT<float> opt;
    float first = -1, last = -1;
    for (int it = 0; it < 200; ++it) {
        ps.zero_grad();
        TapeF t;
        auto l = t.mse_to(t.param(p), target);
        t.backward(l);
        if (it == 0) first = t.val(l)[0];
        last = t.val(l)[0];
        opt.step(ps, 0.05f);
    }
    CHECK(last < first * 0.01f);
}

TEST_CASE("rng determinism and gaussian moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng g(11);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = g.gaussian();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
