#include <doctest.h>

#include <cmath>

#include "leo/denoisers.hpp"
#include "leo/diffusion.hpp"

using namespace leo;

TEST_CASE("schedule tables match their defining products") {
    auto s = make_schedule(1000, 1e-4, 0.02);
    CHECK(s.steps == 1000);
    CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-12));
    // independent brute-force product
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        prod *= 1.0 - s.beta(t);
        CHECK(s.alpha(t) == 1.0 - s.beta(t));
    }
    CHECK(s.alpha_bar(1000) == prod);
    // monotone strictly decreasing, all entries in (0,1)
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) < 1.0);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
    }
}

TEST_CASE("single-step schedule and invalid ranges") {
    auto s = make_schedule(1, 0.3, 0.3);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), ParamError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), ParamError);
    CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02), ParamError);
    CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), ParamError);
}

TEST_CASE("q_sample endpoints and Monte-Carlo moments") {
    auto s = make_schedule(1000);
    Rng rng(21);
    Tensor x0 = Tensor::randn({4}, rng);
    Tensor zero = Tensor::zeros({4});

    Tensor pure = q_sample(x0, 500, zero, s);
    for (int i = 0; i < 4; ++i)
        CHECK(pure[i] == doctest::Approx(std::sqrt(s.alpha_bar(500)) * x0[i]).epsilon(1e-6));

    Tensor noise = Tensor::randn({4}, rng);
    Tensor only_noise = q_sample(zero, 250, noise, s);
    for (int i = 0; i < 4; ++i)
        CHECK(only_noise[i] ==
              doctest::Approx(std::sqrt(1.0 - s.alpha_bar(250)) * noise[i]).epsilon(1e-6));

    CHECK_THROWS_AS(q_sample(x0, 0, zero, s), ParamError);
    CHECK_THROWS_AS(q_sample(x0, 1001, zero, s), ParamError);
    CHECK_THROWS_AS(q_sample(x0, 10, Tensor::zeros({3}), s), ParamError);

    // 1e5 draws: mean and std within 1% of the closed form
    const int n = 100000, t = 400;
    Tensor x({1});
    x[0] = 3.0f;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        Tensor e({1});
        e[0] = static_cast<float>(rng.gaussian());
        float v = q_sample(x, t, e, s)[0];
        sum += v;
        sum2 += static_cast<double>(v) * v;
    }
    double mean = sum / n;
    double sd = std::sqrt(sum2 / n - mean * mean);
    double want_mean = std::sqrt(s.alpha_bar(t)) * 3.0;
    double want_sd = std::sqrt(1.0 - s.alpha_bar(t));
    CHECK(std::abs(mean - want_mean) / want_mean < 0.01);
    CHECK(std::abs(sd - want_sd) / want_sd < 0.01);
}

namespace {

struct ZeroNet : EpsModel {
    Tensor eps(const Tensor& x, int) const override { return Tensor::zeros(x.shape); }
};

}  // namespace

TEST_CASE("p_step formula and determinism at t=1") {
    auto s = make_schedule(100);
    Rng rng(5);
    Tensor x = Tensor::randn({6}, rng);
    ZeroNet zero;

    // net == 0  =>  mean = x / sqrt(1-beta_t)
    Rng r1(1);
    Tensor out = p_step(zero, x, 1, s, r1);
    for (int i = 0; i < 6; ++i)
        CHECK(out[i] == doctest::Approx(x[i] / std::sqrt(1.0 - s.beta(1))).epsilon(1e-6));

    // t = 1 adds no noise: two different rngs agree
    Rng r2(2), r3(3);
    Tensor a = p_step(zero, x, 1, s, r2);
    Tensor b = p_step(zero, x, 1, s, r3);
    CHECK(a.data == b.data);

    // t > 1 does add noise
    Rng r4(4), r5(5);
    Tensor c = p_step(zero, x, 50, s, r4);
    Tensor d = p_step(zero, x, 50, s, r5);
    CHECK(c.data != d.data);
}

TEST_CASE("training loss: oracle gives zero, zero-net near one, never negative") {
    auto s = make_schedule(1000);
    Rng rng(9);
    Tensor x0 = Tensor::randn({20}, rng);
    Tensor eps = Tensor::randn({20}, rng);

    // oracle: recovers eps exactly from (x_t, t)
    EpsFnT<float> oracle = [&](TapeF& t, TapeF::Var xt, int step) {
        float a = static_cast<float>(std::sqrt(s.alpha_bar(step)));
        float b = static_cast<float>(std::sqrt(1.0 - s.alpha_bar(step)));
        Tensor scaled = x0;
        for (long i = 0; i < scaled.numel(); ++i) scaled[i] *= a;
        return t.affine(t.sub(xt, t.input(scaled)), 1.0f / b, 0.0f);
    };
    CHECK(training_loss<float>(oracle, x0, 700, eps, s) < 1e-9);

    // zero net: E loss = E||eps||^2 / numel = 1, within MC error over draws
    EpsFnT<float> zero_net = [](TapeF& t, TapeF::Var xt, int) {
        return t.affine(xt, 0.0f, 0.0f);
    };
    double acc = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        Tensor e = Tensor::randn({20}, rng);
        int t = rng.randint(1, 1001);
        double l = training_loss<float>(zero_net, x0, t, e, s);
        CHECK(l >= 0.0);
        acc += l;
    }
    CHECK(std::abs(acc / reps - 1.0) < 0.05);
}

TEST_CASE("diffusion loss gradient matches finite differences at 1e-4 on a 4-param net") {
    auto s = make_schedule(50, 1e-3, 0.1);
    Rng rng(31);
    ParamStoreT<double> ps;
    auto& w = ps.add("w", TensorD::randn({1, 2}, rng));
    auto& b = ps.add("b", TensorD::randn({1, 2}, rng));
    TensorD x0 = TensorD::randn({1, 2}, rng);
    TensorD eps = TensorD::randn({1, 2}, rng);
    int t_step = 17;

    // eps_hat = w .* x_t + b
    EpsFnT<double> net = [&](TapeD& tp, TapeD::Var xt, int) {
        return tp.add(tp.mul(xt, tp.param(w)), tp.param(b));
    };

    ps.zero_grad();
    {
        TapeD tp;
        auto l = training_loss_on<double>(tp, net, x0, t_step, eps, s);
        tp.backward(l);
    }
    const double h = 1e-6;
    for (auto& p : ps.items)
        for (long i = 0; i < p.value.numel(); ++i) {
            double keep = p.value[i];
            p.value[i] = keep + h;
            double fp = training_loss<double>(net, x0, t_step, eps, s);
            p.value[i] = keep - h;
            double fm = training_loss<double>(net, x0, t_step, eps, s);
            p.value[i] = keep;
            double fd = (fp - fm) / (2 * h);
            double an = p.grad[i];
            CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10}) < 1e-4);
        }
}

TEST_CASE("ddim chain is deterministic given the seed") {
    auto s = make_schedule(100);
    ZeroNet zero;
    Rng r1(7), r2(7);
    Tensor a = p_sample_loop(zero, {3}, s, r1, 10);
    Tensor b = p_sample_loop(zero, {3}, s, r2, 10);
    CHECK(a.data == b.data);
    CHECK(a.dim(0) == 3);
}

TEST_SUITE("slow") {
    TEST_CASE("full chain on a net trained on N(mu, 0.01 I) in R^20 lands within 0.1 of mu") {
        auto sched = make_schedule(1000);
        const int D = 20;
        Rng rng(77);
        Tensor mu({D});
        for (int i = 0; i < D; ++i) mu[i] = static_cast<float>(rng.gaussian());

        DenoiseMlp::Config cfg;
        cfg.dim = D;
        cfg.hidden = 96;
        DenoiseMlp net(cfg, 123);
        AdamT<float> opt;
        const int batch = 64, iters = 8000;
        for (int itn = 0; itn < iters; ++itn) {
            Tensor x0({batch, D}), eps({batch, D});
            for (int n = 0; n < batch; ++n)
                for (int i = 0; i < D; ++i) {
                    x0.at(n, i) = mu[i] + 0.1f * static_cast<float>(rng.gaussian());
                    eps.at(n, i) = static_cast<float>(rng.gaussian());
                }
            int t = rng.randint(1, sched.steps + 1);
            net.params().zero_grad();
            TapeF tp;
            auto xt = tp.input(q_sample(x0, t, eps, sched));
            auto loss = tp.mse_to(net.forward(tp, xt, t), eps);
            tp.backward(loss);
            float lr = 1e-3f * (0.5f + 0.5f * std::cos(M_PI * itn / iters)) + 2e-5f;
            opt.step(net.params(), lr);
        }

        struct MlpEps : EpsModel {
            const DenoiseMlp& n;
            explicit MlpEps(const DenoiseMlp& n) : n(n) {}
            Tensor eps(const Tensor& x, int t) const override { return n.predict(x, t); }
        } eps_model(net);

        const int n_samples = 64;
        Rng srng(5);
        Tensor acc = Tensor::zeros({D});
        for (int k = 0; k < n_samples; ++k) {
            Tensor x = p_sample_loop(eps_model, {1, D}, sched, srng);
            for (int i = 0; i < D; ++i) acc[i] += x[i];
        }
        for (int i = 0; i < D; ++i) CHECK(std::abs(acc[i] / n_samples - mu[i]) < 0.1);
    }
}
