#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "leo/sprites.hpp"

using namespace leo;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("leo_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Intensity-weighted center of mass of (frame - background), channel 0.
void centroid(const Frame& f, float bg, double* cx, double* cy) {
    double m = 0, sx = 0, sy = 0;
    for (int y = 0; y < f.dim(1); ++y)
        for (int x = 0; x < f.dim(2); ++x) {
            double w = std::abs(f.at(0, y, x) - bg);
            m += w;
            sx += w * x;
            sy += w * y;
        }
    *cx = sx / m;
    *cy = sy / m;
}

}  // namespace

TEST_CASE("zero amplitude gives identical frames") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 1;
    cfg.length = 2;
    cfg.motion.amplitude = 0.0;
    auto ds = make_sprite_dataset(cfg);
    REQUIRE(ds.size() == 1);
    REQUIRE(ds[0].length() == 2);
    CHECK(ds[0].frames[0].data == ds[0].frames[1].data);
}

TEST_CASE("same seed gives bit-identical datasets, on disk too") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 3;
    cfg.length = 4;
    cfg.motion.seed = 99;
    auto a = make_sprite_dataset(cfg);
    auto b = make_sprite_dataset(cfg);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(a[i].frames[j].data == b[i].frames[j].data);

    auto d1 = temp_dir("ds1"), d2 = temp_dir("ds2");
    write_sprite_dataset(cfg, d1);
    write_sprite_dataset(cfg, d2);
    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), d1);
        std::ifstream f1(entry.path(), std::ios::binary), f2(d2 / rel, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(s1 == s2);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("rendered centroid follows the generating trajectory within 0.5 px") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 6;
    cfg.length = 24;
    cfg.motion.amplitude = 12.0;
    cfg.motion.seed = 5;
    for (int i = 0; i < cfg.n_videos; ++i) {
        Rng ap_rng(Rng::mix(cfg.motion.seed, 2 * static_cast<uint64_t>(i)));
        Rng mo_rng(Rng::mix(cfg.motion.seed, 2 * static_cast<uint64_t>(i) + 1));
        auto ap = sample_appearance(ap_rng, 64, 64, 1);
        auto mo = sample_motion(cfg.motion, mo_rng);
        auto v = render_sprite_video(ap, mo, cfg.length, 64, 64, 1, 25.0);
        double cx0, cy0;
        centroid(v.frames[0], ap.background[0], &cx0, &cy0);
        for (int t = 0; t < cfg.length; ++t) {
            double cx, cy, dx, dy;
            centroid(v.frames[t], ap.background[0], &cx, &cy);
            trajectory_offset(mo, t, cfg.length, &dx, &dy);
            CHECK(std::abs((cx - cx0) - dx) < 0.5);
            CHECK(std::abs((cy - cy0) - dy) < 0.5);
        }
    }
}

TEST_CASE("sprite stays inside the frame for every kind") {
    for (auto kind : {TrajectoryKind::kSinusoidSum, TrajectoryKind::kSpline,
                      TrajectoryKind::kArticulatedSwing}) {
        SpriteDatasetConfig cfg;
        cfg.n_videos = 4;
        cfg.length = 16;
        cfg.motion.trajectory_kind = kind;
        cfg.motion.amplitude = 15.0;
        cfg.motion.seed = 17;
        auto ds = make_sprite_dataset(cfg);
        for (const auto& v : ds)
            for (const auto& f : v.frames) {
                // border pixels must stay at the (constant) background value
                float bg = f.at(0, 0, 0);
                for (int x = 0; x < 64; ++x) {
                    CHECK(f.at(0, 0, x) == bg);
                    CHECK(f.at(0, 63, x) == bg);
                }
                for (int y = 0; y < 64; ++y) {
                    CHECK(f.at(0, y, 0) == bg);
                    CHECK(f.at(0, y, 63) == bg);
                }
            }
    }
}

TEST_CASE("motion params shuffle across appearances") {
    SpriteMotionParams mp;
    mp.amplitude = 10;
    Rng r1(1), r2(2), r3(3), r4(4);
    auto ap1 = sample_appearance(r1, 64, 64, 3);
    auto ap2 = sample_appearance(r2, 64, 64, 3);
    auto mo1 = sample_motion(mp, r3);
    auto mo2 = sample_motion(mp, r4);
    // cross-pairing renders fine and moves identically
    auto v12 = render_sprite_video(ap1, mo2, 8, 64, 64, 3, 25);
    auto v22 = render_sprite_video(ap2, mo2, 8, 64, 64, 3, 25);
    double ax0, ay0, bx0, by0, ax, ay, bx, by;
    centroid(v12.frames[0], ap1.background[0], &ax0, &ay0);
    centroid(v22.frames[0], ap2.background[0], &bx0, &by0);
    centroid(v12.frames[7], ap1.background[0], &ax, &ay);
    centroid(v22.frames[7], ap2.background[0], &bx, &by);
    CHECK(std::abs((ax - ax0) - (bx - bx0)) < 0.6);
    CHECK(std::abs((ay - ay0) - (by - by0)) < 0.6);
}

TEST_CASE("invalid dataset configs are rejected") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 0;
    CHECK_THROWS_AS(make_sprite_dataset(cfg), ParamError);
    cfg.n_videos = 1;
    cfg.length = 1;
    CHECK_THROWS_AS(make_sprite_dataset(cfg), ParamError);
    cfg.length = 4;
    cfg.motion.amplitude = 16.0;  // >= 64/4
    CHECK_THROWS_AS(make_sprite_dataset(cfg), ParamError);
}

TEST_CASE("save/load video round trip within 8-bit quantization") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 1;
    cfg.length = 2;
    cfg.channels = 3;
    cfg.motion.seed = 7;
    auto v = make_sprite_dataset(cfg)[0];
    auto dir = temp_dir("roundtrip");
    save_video(v, dir / "v");
    auto w = load_video(dir / "v");
    REQUIRE(w.length() == 2);
    float worst = 0;
    for (int i = 0; i < 2; ++i)
        for (long k = 0; k < v.frames[i].numel(); ++k)
            worst = std::max(worst, std::abs(v.frames[i][k] - w.frames[i][k]));
    CHECK(worst <= 1.0f / 255.0f);
    fs::remove_all(dir);
}

TEST_CASE("video of length L writes L zero-padded frame files") {
    SpriteDatasetConfig cfg;
    cfg.n_videos = 1;
    cfg.length = 64;
    auto v = make_sprite_dataset(cfg)[0];
    auto dir = temp_dir("naming");
    save_video(v, dir / "v");
    for (int i = 0; i < 64; ++i) CHECK(fs::exists(dir / "v" / frame_file_name(i)));
    CHECK(frame_file_name(7) == "frame_00007.png");
    CHECK(fs::exists(dir / "v" / "meta.json"));
    fs::remove_all(dir);
}

TEST_CASE("loading a missing or broken directory fails with the offending index") {
    auto dir = temp_dir("badload");
    CHECK_THROWS_AS(load_video(dir / "nothing"), IoError);

    SpriteDatasetConfig cfg;
    cfg.n_videos = 1;
    cfg.length = 3;
    auto v = make_sprite_dataset(cfg)[0];
    save_video(v, dir / "v");
    fs::remove(dir / "v" / frame_file_name(1));
    try {
        load_video(dir / "v");
        CHECK(false);
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    fs::remove_all(dir);
}
