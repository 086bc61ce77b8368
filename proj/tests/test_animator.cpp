#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "leo/animator.hpp"
#include "leo/sprites.hpp"

using namespace leo;
namespace fs = std::filesystem;

namespace {

AnimatorConfig tiny_cfg() {
    AnimatorConfig cfg;
    cfg.motion_dim = 6;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.enc_base = 6;
    cfg.feat_base = 6;
    cfg.inpaint_base = 6;
    return cfg;
}

std::vector<double> logged_losses(const fs::path& file) {
    std::vector<double> out;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(nlohmann::json::parse(line).at("loss").get<double>());
    }
    return out;
}

}  // namespace

TEST_CASE("training rejects an empty or mismatched dataset") {
    AnimatorTrainConfig tc;
    tc.steps = 1;
    CHECK_THROWS_AS(train_animator({}, tiny_cfg(), tc), ParamError);

    SpriteDatasetConfig d;
    d.n_videos = 1;
    d.length = 2;
    d.height = 32;
    d.width = 32;
    d.motion.amplitude = 5.0;
    auto ds = make_sprite_dataset(d);
    CHECK_THROWS_AS(train_animator(ds, tiny_cfg(), tc), ParamError);
}

TEST_CASE("checkpoint round trip preserves behaviour") {
    auto cfg = tiny_cfg();
    AnimatorModel m;
    m.cfg = cfg;
    m.net = std::make_unique<AnimatorNet>(cfg, 77);
    fs::path dir = fs::temp_directory_path() / "leo_test_anim_ckpt";
    fs::remove_all(dir);
    save_animator(m, dir);
    auto loaded = load_animator(dir);
    CHECK(loaded.cfg.motion_dim == cfg.motion_dim);
    Rng rng(3);
    Frame f({1, 16, 16});
    for (long i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform());
    CHECK(m.encode(f).data == loaded.encode(f).data);
    CHECK(m.synth(f, m.encode(f)).data == loaded.synth(f, loaded.encode(f)).data);
    fs::remove_all(dir);

    CHECK_THROWS_AS(load_animator(fs::temp_directory_path() / "leo_no_such_ckpt"), IoError);
}

TEST_SUITE("slow") {
    TEST_CASE("a single static video is fit to near-zero loss, and loss decreases") {
        // one video of identical frames: warp identity + blend reproduce it
        SpriteDatasetConfig d;
        d.n_videos = 1;
        d.length = 4;
        d.height = 16;
        d.width = 16;
        d.motion.amplitude = 0.0;
        d.motion.seed = 5;
        auto ds = make_sprite_dataset(d);

        AnimatorTrainConfig tc;
        tc.steps = 500;
        tc.batch = 4;
        tc.lr = 1e-3f;
        tc.seed = 2;
        tc.log_every = 25;
        tc.log_file = fs::temp_directory_path() / "leo_anim_fit.jsonl";
        auto model = train_animator(ds, tiny_cfg(), tc);

        auto losses = logged_losses(tc.log_file);
        REQUIRE(losses.size() > 3);
        CHECK(losses.back() < losses.front());  // strictly lower after training
        CHECK(losses.back() < 0.02);            // trivial fit
        fs::remove(tc.log_file);

        // the trained model reproduces the static frame well
        Frame out = model.synth(ds[0].frames[0], model.encode(ds[0].frames[1]));
        double mse = 0;
        for (long i = 0; i < out.numel(); ++i) {
            double e = out[i] - ds[0].frames[1][i];
            mse += e * e;
        }
        mse /= out.numel();
        CHECK(mse < 1e-3);
    }

    TEST_CASE("trained animator: codes differ across sprite positions; motion transfers") {
        SpriteDatasetConfig d;
        d.n_videos = 12;
        d.length = 12;
        d.height = 32;
        d.width = 32;
        d.motion.amplitude = 6.0;
        d.motion.seed = 9;
        auto ds = make_sprite_dataset(d);

        AnimatorConfig cfg;
        cfg.motion_dim = 8;
        cfg.height = 32;
        cfg.width = 32;
        cfg.channels = 1;
        cfg.enc_base = 8;
        cfg.feat_base = 8;
        cfg.inpaint_base = 8;
        AnimatorTrainConfig tc;
        tc.steps = 900;
        tc.batch = 6;
        tc.lr = 4e-4f;
        tc.seed = 4;
        auto model = train_animator(ds, cfg, tc);

        // frames differing only by sprite position encode differently
        const Video& v = ds[0];
        Tensor c0 = model.encode(v.frames[0]);
        Tensor c5 = model.encode(v.frames[6]);
        double l2 = 0;
        for (int j = 0; j < 8; ++j) {
            double dd = c0[j] - c5[j];
            l2 += dd * dd;
        }
        CHECK(l2 > 0.0);

        // animate with the video's own codes: self-reconstruction beats a
        // static baseline that repeats the first frame
        Tensor codes = model.encode_video(v);
        Video recon = model.animate(v.frames[0], codes);
        double err_recon = 0, err_static = 0;
        for (int i = 0; i < v.length(); ++i)
            for (long k = 0; k < v.frames[i].numel(); ++k) {
                double a = recon.frames[i][k] - v.frames[i][k];
                double b = v.frames[0][k] - v.frames[i][k];
                err_recon += a * a;
                err_static += b * b;
            }
        MESSAGE("recon sq err ", err_recon, " static baseline ", err_static);
        CHECK(err_recon < err_static);
    }
}
