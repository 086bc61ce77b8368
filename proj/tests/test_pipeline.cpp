#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "leo/pipeline.hpp"
#include "leo/sprites.hpp"

using namespace leo;
namespace fs = std::filesystem;

namespace {

// Tiny untrained stack: structure and determinism contracts hold regardless
// of training.
struct TinyStack {
    AnimatorModel animator;
    LmdmModel clmdm;
    LmdmModel transition;
    SimpleDmModel simple_dm;
    CddpmModel cddpm;

    TinyStack(int N = 4, int L = 8, int T = 12, uint64_t seed = 1) {
        AnimatorConfig acfg;
        acfg.motion_dim = N;
        acfg.height = 16;
        acfg.width = 16;
        acfg.channels = 1;
        acfg.enc_base = 4;
        acfg.feat_base = 4;
        acfg.inpaint_base = 4;
        animator.cfg = acfg;
        animator.net = std::make_unique<AnimatorNet>(acfg, Rng::mix(seed, 1));

        auto lm = [&](LmdmVariant v, uint64_t s) {
            LmdmModel m;
            m.variant = v;
            m.seq_len = L;
            m.code_dim = N;
            m.stats.mean = Tensor::zeros({N});
            m.stats.std = Tensor::full({N}, 1.0f);
            m.sched = make_schedule(T);
            TemporalUnet::Config nc;
            nc.channels = N;
            nc.base = 8;
            m.net = std::make_unique<TemporalUnet>(nc, s);
            return m;
        };
        clmdm = lm(LmdmVariant::kConditional, Rng::mix(seed, 2));
        transition = lm(LmdmVariant::kTransition, Rng::mix(seed, 3));

        simple_dm.code_dim = N;
        simple_dm.stats.mean = Tensor::zeros({N});
        simple_dm.stats.std = Tensor::full({N}, 1.0f);
        simple_dm.sched = make_schedule(T);
        DenoiseMlp::Config mc;
        mc.dim = N;
        mc.hidden = 16;
        simple_dm.net = std::make_unique<DenoiseMlp>(mc, Rng::mix(seed, 4));

        cddpm.channels = 1;
        cddpm.height = 16;
        cddpm.width = 16;
        cddpm.code_dim = N;
        cddpm.sched = make_schedule(T);
        ImageUnet::Config ic;
        ic.channels = 1;
        ic.height = 16;
        ic.width = 16;
        ic.cond_dim = N;
        ic.base = 4;
        cddpm.net = std::make_unique<ImageUnet>(ic, Rng::mix(seed, 5));
    }

    ModelSet set() const {
        ModelSet m;
        m.animator = &animator;
        m.clmdm = &clmdm;
        m.transition = &transition;
        m.simple_dm = &simple_dm;
        m.cddpm = &cddpm;
        return m;
    }
};

Frame test_frame(uint64_t seed) {
    Rng rng(seed);
    Frame f({1, 16, 16});
    for (long i = 0; i < f.numel(); ++i) f[i] = static_cast<float>(rng.uniform());
    return f;
}

}  // namespace

TEST_CASE("unconditional generation: shape, determinism, first-frame identity") {
    TinyStack s;
    auto m = s.set();
    auto r1 = generate_unconditional(m, 8, 42);
    CHECK(r1.video.length() == 8);
    CHECK(r1.codes.dim(0) == 8);
    auto r2 = generate_unconditional(m, 8, 42);
    for (int i = 0; i < 8; ++i) CHECK(r1.video.frames[i].data == r2.video.frames[i].data);

    // frame 0 equals animating the sampled anchor alone
    Tensor a1({1, s.clmdm.code_dim});
    for (int j = 0; j < s.clmdm.code_dim; ++j) a1.at(0, j) = r1.codes.at(0, j);
    Video single = s.animator.animate(r1.x1, a1);
    CHECK(single.frames[0].data == r1.video.frames[0].data);

    // codes row 0 equals the sampled alpha1 exactly
    for (int j = 0; j < s.clmdm.code_dim; ++j)
        CHECK(r1.codes.at(0, j) == r1.chunk_anchors[0][j]);

    auto r3 = generate_unconditional(m, 8, 43);
    bool same = true;
    for (int i = 0; i < 8 && same; ++i) same = r3.video.frames[i].data == r1.video.frames[i].data;
    CHECK(!same);

    CHECK_THROWS_AS(generate_unconditional(m, 0, 1), ParamError);
}

TEST_CASE("conditional generation from an image file") {
    TinyStack s;
    auto m = s.set();
    fs::path dir = fs::temp_directory_path() / "leo_test_pipe";
    fs::create_directories(dir);
    Frame x1 = test_frame(7);
    save_frame_png(x1, dir / "start.png");

    auto r1 = generate_conditional(m, dir / "start.png", 6, 11);
    auto r2 = generate_conditional(m, dir / "start.png", 6, 12);
    CHECK(r1.video.length() == 6);
    // same first frame (the image), different motion codes; the untrained
    // animator's zero-initialized flow head cannot tell codes apart yet, so
    // motion diversity is asserted on the codes
    CHECK(r1.video.frames[0].data == r2.video.frames[0].data);
    for (int j = 0; j < 4; ++j) CHECK(r1.codes.at(0, j) == r2.codes.at(0, j));
    bool same_rest = true;
    for (int i = 1; i < 6 && same_rest; ++i)
        for (int j = 0; j < 4; ++j) same_rest = same_rest && r1.codes.at(i, j) == r2.codes.at(i, j);
    CHECK(!same_rest);

    CHECK_THROWS_AS(generate_conditional(m, dir / "start.png", 0, 1), ParamError);
    CHECK_THROWS_AS(generate_conditional(m, dir / "missing.png", 4, 1), IoError);
    fs::remove_all(dir);
}

TEST_CASE("rollout length formula and bit-exact junctions") {
    TinyStack s;
    auto m = s.set();
    Frame x1 = test_frame(3);
    MotionCode alpha1 = s.animator.encode(x1);

    for (int n_chunks : {1, 3}) {
        auto r = rollout(m, x1, alpha1, n_chunks, 8, 99);
        CHECK(r.codes.dim(0) == 1 + n_chunks * 7);
        CHECK(r.video.length() == r.codes.dim(0));
        CHECK(static_cast<int>(r.chunk_anchors.size()) == n_chunks);
        // every chunk anchor is the code at its junction row, bit-exact
        for (int k = 0; k < n_chunks; ++k) {
            int row = k * 7;
            for (int j = 0; j < 4; ++j) CHECK(r.codes.at(row, j) == r.chunk_anchors[k][j]);
        }
    }

    // n_chunks = 1 equals the single-chunk generate path
    auto r1 = rollout(m, x1, alpha1, 1, 8, 123);
    auto direct = sample_clmdm_batch(s.clmdm, {alpha1}, 8, Rng::mix(123, 100));
    CHECK(r1.codes.data == direct[0].data);

    CHECK_THROWS_AS(rollout(m, x1, alpha1, 0, 8, 1), ParamError);
    CHECK_THROWS_AS(rollout(m, x1, alpha1, 1, 5, 1), ParamError);
}

TEST_CASE("detect_loop oracle cases") {
    RolloutState st;
    st.last_code = Tensor::zeros({3});

    auto push = [&](std::initializer_list<float> v) {
        Tensor t({3});
        int i = 0;
        for (float x : v) t[i++] = x;
        st.chunk_mean_history.push_back(t);
        st.chunk_index++;
    };

    // insufficient history -> false
    push({1, 0, 0});
    CHECK(!detect_loop(st, 2, 0.98));
    push({1, 0, 0});
    CHECK(!detect_loop(st, 2, 0.98));
    // three identical means -> two perfect pairs -> true
    push({1, 0, 0});
    CHECK(detect_loop(st, 2, 0.98));

    // orthogonal means -> false
    RolloutState st2;
    st2.chunk_mean_history = {};
    st2.last_code = Tensor::zeros({3});
    auto push2 = [&](std::initializer_list<float> v) {
        Tensor t({3});
        int i = 0;
        for (float x : v) t[i++] = x;
        st2.chunk_mean_history.push_back(t);
    };
    push2({1, 0, 0});
    push2({0, 1, 0});
    push2({0, 0, 1});
    CHECK(!detect_loop(st2, 2, 0.98));

    // sinusoidal chunk means: hand-computed cosine table
    // m_k = (cos w k, sin w k, 0): consecutive cosine = cos(w)
    RolloutState st3;
    st3.last_code = Tensor::zeros({3});
    double w = 0.1;  // cos(0.1) = 0.995 > 0.98
    for (int k = 0; k < 4; ++k) {
        Tensor t({3});
        t[0] = static_cast<float>(std::cos(w * k));
        t[1] = static_cast<float>(std::sin(w * k));
        t[2] = 0;
        st3.chunk_mean_history.push_back(t);
    }
    CHECK(detect_loop(st3, 2, 0.98));   // cos(0.1) = 0.9950
    CHECK(detect_loop(st3, 3, 0.98));
    CHECK(!detect_loop(st3, 2, 0.996));  // threshold above cos(0.1)

    CHECK_THROWS_AS(detect_loop(st3, 1, 0.9), ParamError);
}

TEST_CASE("rollout with transitions: no-op path equals plain rollout") {
    TinyStack s;
    auto m = s.set();
    Frame x1 = test_frame(5);
    MotionCode alpha1 = s.animator.encode(x1);
    TransitionPolicy policy;
    policy.threshold = 0.999999;  // untrained chunk means never this aligned
    policy.window = 2;
    policy.length = 4;
    auto plain = rollout(m, x1, alpha1, 3, 8, 77);
    auto with = rollout_with_transitions(m, x1, alpha1, 3, 8, 77, policy);
    CHECK(with.transitions_inserted == 0);
    CHECK(with.codes.data == plain.codes.data);
}

TEST_CASE("fault injection: degenerate clmdm forces a clamped transition segment") {
    TinyStack s;
    // collapse residual scale: sampled chunks stay glued to the anchor, so
    // consecutive chunk means are parallel and the loop detector must fire
    s.clmdm.stats.std = Tensor::full({4}, 1e-6f);
    auto m = s.set();
    Frame x1 = test_frame(6);
    MotionCode alpha1 = s.animator.encode(x1);
    TransitionPolicy policy;
    policy.window = 2;
    policy.threshold = 0.98;
    policy.length = 4;
    auto r = rollout_with_transitions(m, x1, alpha1, 6, 8, 31, policy);
    CHECK(r.transitions_inserted >= 1);
    // inserted segment endpoints match their neighbours bit-exactly: since
    // transition rows replace nothing, it suffices that the code sequence is
    // continuous (no jumps at the insertion, verified via the recorded
    // anchors: each anchor appears verbatim in the code rows)
    bool anchor_found = true;
    for (const auto& anchor : r.chunk_anchors) {
        bool found = false;
        for (int i = 0; i < r.codes.dim(0) && !found; ++i) {
            bool eq = true;
            for (int j = 0; j < 4; ++j) eq = eq && r.codes.at(i, j) == anchor[j];
            found = eq;
        }
        anchor_found = anchor_found && found;
    }
    CHECK(anchor_found);
}

TEST_CASE("edit_appearance preserves residuals bit-exactly") {
    TinyStack s;
    auto m = s.set();
    Frame x1 = test_frame(8);
    MotionCode anchor = s.animator.encode(x1);
    Rng rng(4);
    TensorD residuals = TensorD::randn({5, 4}, rng);
    MotionSequence codes = merge_sequence(anchor, residuals);

    // identity swap: same frame, bit-identical video
    auto same = edit_appearance(m, codes, x1);
    Video original = s.animator.animate(x1, codes);
    REQUIRE(same.video.length() == original.length());
    for (int i = 0; i < original.length(); ++i)
        CHECK(same.video.frames[i].data == original.frames[i].data);

    // appearance swap keeps the residual sequence bit-exactly
    Frame other = test_frame(9);
    auto swapped = edit_appearance(m, codes, other);
    CHECK(swapped.residuals.residuals.data == split_sequence(codes).residuals.data);
    CHECK(swapped.video.length() == codes.dim(0));
    // re-anchored codes: row 0 is the new anchor
    MotionCode new_anchor = s.animator.encode(other);
    for (int j = 0; j < 4; ++j) CHECK(swapped.codes.at(0, j) == new_anchor[j]);
}

TEST_CASE("model set validation names the mismatched field") {
    TinyStack s;
    auto m = s.set();
    validate_model_set(m, true, true);  // consistent by construction

    TinyStack bad(6);  // different code dim
    ModelSet broken = s.set();
    broken.clmdm = &bad.clmdm;
    try {
        validate_model_set(broken, false, false);
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("clmdm.code_dim") != std::string::npos);
    }

    ModelSet missing = s.set();
    missing.cddpm = nullptr;
    CHECK_THROWS_AS(validate_model_set(missing, true, false), ConfigError);
}
