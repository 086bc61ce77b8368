#include <doctest.h>

#include <cmath>

#include "leo/metrics.hpp"

using namespace leo;

namespace {

Frame uniform_frame(float v, int H = 32, int W = 32) {
    return Frame::full({1, H, W}, v);
}

Frame random_frame(uint64_t seed, int H = 32, int W = 32) {
    Rng rng(seed);
    Frame f({1, H, W});
    for (long i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform());
    return f;
}

FeatureVector vec_feature(const std::vector<double>& v) {
    FeatureVector f;
    f.values = v;
    f.extractor_id = "test";
    return f;
}

}  // namespace

TEST_CASE("frame features: degenerate, determinism, shift sensitivity") {
    Frame black = uniform_frame(0.0f);
    auto f0 = frame_features(black);
    CHECK(f0.degenerate);
    for (double v : f0.values) CHECK(v == 0.0);

    Frame a = random_frame(4);
    auto f1 = frame_features(a);
    auto f2 = frame_features(a);
    CHECK(f1.values == f2.values);
    CHECK(f1.values.size() == 64);
    // unit norm for non-degenerate frames
    double n = 0;
    for (double v : f1.values) n += v * v;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));

    // 1-px shifted frame: nonzero distance
    Frame b({1, 32, 32});
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) b.at(0, y, x) = a.at(0, y, std::min(x + 1, 31));
    auto fb = frame_features(b);
    double d2 = 0;
    for (int i = 0; i < 64; ++i) {
        double d = f1.values[i] - fb.values[i];
        d2 += d * d;
    }
    CHECK(d2 > 0.0);

    // hand-pooled oracle: recompute the grid directly and normalize
    std::vector<double> raw(64, 0.0);
    for (int gy = 0; gy < 8; ++gy)
        for (int gx = 0; gx < 8; ++gx) {
            double s = 0;
            for (int y = gy * 4; y < gy * 4 + 4; ++y)
                for (int x = gx * 4; x < gx * 4 + 4; ++x) s += a.at(0, y, x);
            raw[gy * 8 + gx] = s / 16.0;
        }
    double norm = 0;
    for (double v : raw) norm += v * v;
    norm = std::sqrt(norm);
    for (int i = 0; i < 64; ++i)
        CHECK(f1.values[i] == doctest::Approx(raw[i] / norm).epsilon(1e-9));
}

TEST_CASE("acd: identical frames give zero; orthonormal pair gives sqrt(2)") {
    Video same;
    same.frames = {random_frame(7), random_frame(7), random_frame(7)};
    CHECK(acd(same) == 0.0);

    Video tiny;
    tiny.frames = {random_frame(1), random_frame(2)};
    CHECK(acd(tiny) > 0.0);

    Video one;
    one.frames = {random_frame(1)};
    CHECK_THROWS_AS(acd(one), ParamError);

    // orthonormal features: the pairwise distance collapses to sqrt(2)
    auto e1 = vec_feature({1, 0}), e2 = vec_feature({0, 1});
    double d2 = 0;
    for (int i = 0; i < 2; ++i) {
        double d = e1.values[i] - e2.values[i];
        d2 += d * d;
    }
    CHECK(std::sqrt(d2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("acd equals the brute-force pairwise oracle for random videos") {
    for (int len : {2, 5, 16, 32}) {
        Video v;
        for (int i = 0; i < len; ++i) v.frames.push_back(random_frame(100 + i));
        std::vector<FeatureVector> fs;
        for (auto& fr : v.frames) fs.push_back(frame_features(fr));
        double total = 0;
        int pairs = 0;
        for (int i = 0; i < len; ++i)
            for (int j = i + 1; j < len; ++j) {
                double d2 = 0;
                for (int k = 0; k < 64; ++k) {
                    double d = fs[i].values[k] - fs[j].values[k];
                    d2 += d * d;
                }
                total += std::sqrt(d2);
                ++pairs;
            }
        CHECK(acd(v) == total / pairs);
    }
}

TEST_CASE("frechet: identity, symmetry, 1-D Gaussian closed form") {
    Rng rng(17);
    std::vector<FeatureVector> a;
    for (int i = 0; i < 200; ++i)
        a.push_back(vec_feature({rng.gaussian(), rng.gaussian(), rng.gaussian()}));
    CHECK(frechet_distance(a, a) <= 1e-6);

    std::vector<FeatureVector> b;
    for (int i = 0; i < 220; ++i)
        b.push_back(vec_feature(
            {rng.gaussian() + 1.0, rng.gaussian() * 0.5, rng.gaussian()}));
    double ab = frechet_distance(a, b);
    double ba = frechet_distance(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(ab > 0.0);

    // N(0,1) vs N(1,1) in 1-D: distance -> 1.0
    std::vector<FeatureVector> g0, g1;
    for (int i = 0; i < 10000; ++i) {
        g0.push_back(vec_feature({rng.gaussian()}));
        g1.push_back(vec_feature({rng.gaussian() + 1.0}));
    }
    CHECK(frechet_distance(g0, g1) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("kernel distance: near zero on same distribution, positive across, symmetric") {
    Rng rng(23);
    std::vector<FeatureVector> a, b, c;
    for (int i = 0; i < 150; ++i) {
        a.push_back(vec_feature({rng.gaussian(), rng.gaussian()}));
        b.push_back(vec_feature({rng.gaussian(), rng.gaussian()}));
        c.push_back(vec_feature({rng.gaussian() + 2.0, rng.gaussian()}));
    }
    auto same = kernel_distance(a, b);
    auto diff = kernel_distance(a, c);
    CHECK(std::abs(same.raw) < 0.05);
    CHECK(diff.value > same.value);
    CHECK(diff.value > 0.1);
    auto d1 = kernel_distance(a, c);
    auto d2 = kernel_distance(c, a);
    CHECK(d1.value == doctest::Approx(d2.value).epsilon(1e-12));
    auto self = kernel_distance(a, a);
    CHECK(self.value >= 0.0);
    if (self.raw < 0) CHECK(self.clipped);
}

TEST_CASE("psnr closed forms") {
    Frame a = random_frame(31);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());

    // constant difference of 0.1 -> MSE 0.01 -> 20 dB
    CHECK(psnr(uniform_frame(0.0f), uniform_frame(0.1f)) == doctest::Approx(20.0).epsilon(1e-6));

    // brute-force oracle on a random pair
    Frame c = random_frame(32);
    double mse = 0;
    for (long i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(c[i]);
        mse += d * d;
    }
    mse /= a.numel();
    CHECK(psnr(a, c) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(a, uniform_frame(0.5f, 16, 16)), ParamError);
}
