#include <doctest.h>

#include <cmath>

#include "leo/animator.hpp"
#include "leo/sprites.hpp"

using namespace leo;

namespace {

Frame random_frame(int C, int H, int W, uint64_t seed) {
    Rng rng(seed);
    Frame f({C, H, W});
    for (long i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform());
    return f;
}

FlowField const_flow(int H, int W, float dx, float dy) {
    FlowField fl;
    fl.displacement = Tensor::zeros({2, H, W});
    fl.mask = Tensor::full({H, W}, 1.0f);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            fl.displacement.at(0, y, x) = dx;
            fl.displacement.at(1, y, x) = dy;
        }
    return fl;
}

}  // namespace

TEST_CASE("zero flow is the bit-exact identity") {
    Frame f = random_frame(3, 20, 24, 11);
    Frame out = warp_frame(f, const_flow(20, 24, 0, 0));
    CHECK(out.data == f.data);
}

TEST_CASE("constant integer flow matches the index-shift oracle exactly") {
    const int H = 20, W = 24;
    Frame f = random_frame(1, H, W, 3);
    Frame out = warp_frame(f, const_flow(H, W, 3, 0));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int sx = std::min(x + 3, W - 1);  // border clamp
            CHECK(out.at(0, y, x) == f.at(0, y, sx));
        }

    Frame out2 = warp_frame(f, const_flow(H, W, -2, 5));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int sx = std::max(x - 2, 0);
            int sy = std::min(y + 5, H - 1);
            CHECK(out2.at(0, y, x) == f.at(0, sy, sx));
        }
}

TEST_CASE("flow pointing fully out of bounds clamps to the border") {
    const int H = 16, W = 16;
    Frame f = random_frame(1, H, W, 9);
    Frame out = warp_frame(f, const_flow(H, W, 1000, 0));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) CHECK(out.at(0, y, x) == f.at(0, y, W - 1));
}

TEST_CASE("warp rejects mismatched shapes") {
    Frame f = random_frame(1, 16, 16, 1);
    FlowField fl = const_flow(8, 8, 0, 0);
    CHECK_THROWS_AS(warp_frame(f, fl), ParamError);
}

TEST_CASE("half-pixel flow averages neighbours") {
    const int H = 16, W = 16;
    Frame f = random_frame(1, H, W, 5);
    Frame out = warp_frame(f, const_flow(H, W, 0.5f, 0));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x)
            CHECK(out.at(0, y, x) ==
                  doctest::Approx(0.5 * (f.at(0, y, x) + f.at(0, y, x + 1))).epsilon(1e-6));
}

TEST_CASE("inpaint blending contracts") {
    AnimatorConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.motion_dim = 4;
    AnimatorModel m;
    m.cfg = cfg;
    m.net = std::make_unique<AnimatorNet>(cfg, 42);

    Frame warped = random_frame(1, 16, 16, 7);
    Frame source = random_frame(1, 16, 16, 8);

    SUBCASE("mask of ones returns warped bit-exactly") {
        Tensor ones = Tensor::full({16, 16}, 1.0f);
        Frame out = m.inpaint(warped, ones, source);
        CHECK(out.data == warped.data);
    }
    SUBCASE("mask of zeros returns the refiner output alone") {
        Tensor zeros = Tensor::zeros({16, 16});
        Frame out = m.inpaint(warped, zeros, source);
        // with mask==0 the blend must equal the refiner output exactly
        TapeF t(false);
        auto r = m.net->refine_fwd(t, t.input(warped.reshaped({1, 1, 16, 16})),
                                   t.input(Tensor::zeros({1, 1, 16, 16})),
                                   t.input(source.reshaped({1, 1, 16, 16})));
        CHECK(out.data == t.val(r).data);
    }
}

TEST_CASE("decode_flow output contracts on an untrained model") {
    AnimatorConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.motion_dim = 4;
    AnimatorModel m;
    m.cfg = cfg;
    m.net = std::make_unique<AnimatorNet>(cfg, 43);

    Frame src = random_frame(1, 16, 16, 2);
    Rng rng(3);
    Tensor code = Tensor::randn({4}, rng);
    FlowField fl = m.decode_flow(src, code);
    CHECK(fl.displacement.shape == std::vector<int>{2, 16, 16});
    CHECK(fl.mask.shape == std::vector<int>{16, 16});
    for (long i = 0; i < fl.mask.numel(); ++i) {
        CHECK(fl.mask[i] >= 0.0f);
        CHECK(fl.mask[i] <= 1.0f);
    }
    Tensor bad = Tensor::full({4}, std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_AS(m.decode_flow(src, bad), ParamError);
}

TEST_CASE("encode determinism and encode_video consistency") {
    AnimatorConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.motion_dim = 6;
    AnimatorModel m;
    m.cfg = cfg;
    m.net = std::make_unique<AnimatorNet>(cfg, 44);

    Frame a = random_frame(1, 16, 16, 21);
    Tensor c1 = m.encode(a);
    Tensor c2 = m.encode(a);
    CHECK(c1.data == c2.data);
    CHECK(c1.numel() == 6);

    Video v;
    v.frames = {a, a, random_frame(1, 16, 16, 22)};
    Tensor codes = m.encode_video(v);
    CHECK(codes.shape == std::vector<int>{3, 6});
    for (int j = 0; j < 6; ++j) {
        CHECK(codes.at(0, j) == c1[j]);
        CHECK(codes.at(0, j) == codes.at(1, j));
    }

    Frame wrong = random_frame(1, 32, 32, 23);
    CHECK_THROWS_AS(m.encode(wrong), ParamError);
}

TEST_CASE("animate length contract and identical-code stability") {
    AnimatorConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.motion_dim = 4;
    AnimatorModel m;
    m.cfg = cfg;
    m.net = std::make_unique<AnimatorNet>(cfg, 45);
    Frame x1 = random_frame(1, 16, 16, 31);
    Rng rng(6);
    Tensor codes = Tensor::randn({5, 4}, rng);
    Video v = m.animate(x1, codes);
    CHECK(v.length() == 5);
    // same code twice gives identical frames (pure function)
    Tensor two({2, 4});
    for (int j = 0; j < 4; ++j) two.at(0, j) = two.at(1, j) = codes.at(0, j);
    Video w = m.animate(x1, two);
    CHECK(w.frames[0].data == w.frames[1].data);
}
