#include "leo/animator.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "leo/checkpoint.hpp"

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

template <class T>
AnimatorNetT<T>::AnimatorNetT(AnimatorConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg.height % 8 || cfg.width % 8)
        throw ParamError("animator: H and W must be divisible by 8");
    Rng rng(init_seed);
    int C = cfg.channels, e = cfg.enc_base, f = cfg.feat_base, N = cfg.motion_dim;
    e1_ = Conv2dT<T>(ps_, "enc.c1", C, e, 3, 1, 1, rng);
    e2_ = Conv2dT<T>(ps_, "enc.c2", e, 2 * e, 3, 2, 1, rng);
    e3_ = Conv2dT<T>(ps_, "enc.c3", 2 * e, 4 * e, 3, 2, 1, rng);
    e4_ = Conv2dT<T>(ps_, "enc.c4", 4 * e, 4 * e, 3, 2, 1, rng);
    e_out_ = LinearT<T>(ps_, "enc.out", 4 * e * (cfg.height / 8) * (cfg.width / 8), N, rng);
    f1_ = Conv2dT<T>(ps_, "feat.c1", C, f, 3, 1, 1, rng);
    f2_ = Conv2dT<T>(ps_, "feat.c2", f, 2 * f, 3, 2, 1, rng);
    f3_ = Conv2dT<T>(ps_, "feat.c3", 2 * f, 2 * f, 3, 2, 1, rng);
    int gin = 2 * f + 2 * N;
    g1_ = Conv2dT<T>(ps_, "gen.c1", gin, 3 * f, 3, 1, 1, rng);
    g2_ = Conv2dT<T>(ps_, "gen.c2", 3 * f, 3 * f, 3, 1, 1, rng);
    g3_ = Conv2dT<T>(ps_, "gen.c3", 3 * f, 2 * f, 3, 1, 1, rng);
    g4_ = Conv2dT<T>(ps_, "gen.c4", 2 * f, f, 3, 1, 1, rng);
    g_out_ = Conv2dT<T>(ps_, "gen.out", f, 3, 3, 1, 1, rng, /*zero_init=*/true);
    int rin = 2 * C + 1, r = cfg.inpaint_base;
    r1_ = Conv2dT<T>(ps_, "inp.c1", rin, r, 3, 1, 1, rng);
    r2_ = Conv2dT<T>(ps_, "inp.c2", r, r, 3, 1, 1, rng);
    r3_ = Conv2dT<T>(ps_, "inp.c3", r, C, 3, 1, 1, rng);
}

template <class T>
typename Tape<T>::Var AnimatorNetT<T>::encode_fwd(Tape<T>& t, Var x) const {
    auto h = t.silu(e1_.fwd(t, x));
    h = t.silu(e2_.fwd(t, h));
    h = t.silu(e3_.fwd(t, h));
    h = t.silu(e4_.fwd(t, h));
    return e_out_.fwd(t, t.flatten(h));
}

template <class T>
typename Tape<T>::Var AnimatorNetT<T>::features_fwd(Tape<T>& t, Var x) const {
    auto h = t.silu(f1_.fwd(t, x));
    h = t.silu(f2_.fwd(t, h));
    return t.silu(f3_.fwd(t, h));
}

template <class T>
typename Tape<T>::Var AnimatorNetT<T>::flow_raw_fwd(Tape<T>& t, Var feats, Var src_code,
                                                    Var drv_code) const {
    int hq = cfg_.height / 4, wq = cfg_.width / 4;
    auto codes = t.concat_ch(t.broadcast_hw(src_code, hq, wq), t.broadcast_hw(drv_code, hq, wq));
    auto h = t.silu(g1_.fwd(t, t.concat_ch(feats, codes)));
    h = t.silu(g2_.fwd(t, h));
    h = t.silu(g3_.fwd(t, t.upsample2x_2d(h)));
    h = t.silu(g4_.fwd(t, h));
    // flow is smooth; predict at half resolution and upsample
    return t.upsample2x_2d(g_out_.fwd(t, h));
}

template <class T>
typename Tape<T>::Var AnimatorNetT<T>::refine_fwd(Tape<T>& t, Var warped, Var mask,
                                                  Var source) const {
    auto in = t.concat_ch(t.concat_ch(warped, mask), source);
    auto h = t.silu(r1_.fwd(t, in));
    h = t.silu(r2_.fwd(t, h));
    return t.sigmoid(r3_.fwd(t, h));
}

template <class T>
typename AnimatorNetT<T>::Synth AnimatorNetT<T>::synth_fwd(Tape<T>& t, Var source,
                                                           Var drv_code) const {
    auto src_code = encode_fwd(t, source);
    auto feats = features_fwd(t, source);
    auto raw = flow_raw_fwd(t, feats, src_code, drv_code);
    Synth s;
    s.flow = t.slice_ch(raw, 0, 2);
    s.mask = t.sigmoid(t.slice_ch(raw, 2, 3));
    s.warped = t.warp(source, s.flow);
    auto refined = refine_fwd(t, s.warped, s.mask, source);
    s.out = t.blend(s.mask, s.warped, refined);
    return s;
}

template class AnimatorNetT<float>;
template class AnimatorNetT<double>;

// --- frame-level ops ---

void AnimatorModel::check_frame_dims(const Frame& f, const char* what) const {
    if (f.ndim() != 3 || f.dim(0) != cfg.channels || f.dim(1) != cfg.height ||
        f.dim(2) != cfg.width)
        throw ParamError(std::string(what) + ": frame shape " + shape_str(f.shape) +
                         " does not match trained " +
                         shape_str({cfg.channels, cfg.height, cfg.width}));
}

Tensor AnimatorModel::encode(const Frame& frame) const {
    check_frame_dims(frame, "encode");
    Tensor b = encode_batch(frame.reshaped({1, cfg.channels, cfg.height, cfg.width}));
    return b.reshaped({cfg.motion_dim});
}

Tensor AnimatorModel::encode_batch(const Tensor& frames) const {
    TapeF t(false);
    auto out = net->encode_fwd(t, t.input(frames));
    return t.val(out);
}

Tensor AnimatorModel::encode_video(const Video& video) const {
    if (video.length() < 1) throw ParamError("encode_video: empty video");
    // Per-frame batch-1 forwards: encode_video(v)[i] must equal
    // encode(v.frames[i]) bit-exactly, and GEMM accumulation order depends on
    // the batch size.
    Tensor codes({video.length(), cfg.motion_dim});
    for (int i = 0; i < video.length(); ++i) {
        check_frame_dims(video.frames[i], "encode_video");
        Tensor c = encode(video.frames[i]);
        std::copy(c.data.begin(), c.data.end(), codes.ptr() + static_cast<long>(i) * cfg.motion_dim);
    }
    return codes;
}

FlowField AnimatorModel::decode_flow(const Frame& source, const Tensor& code) const {
    check_frame_dims(source, "decode_flow");
    if (code.numel() != cfg.motion_dim) throw ParamError("decode_flow: code dim mismatch");
    if (!code.all_finite()) throw ParamError("decode_flow: non-finite code");
    TapeF t(false);
    auto src = t.input(source.reshaped({1, cfg.channels, cfg.height, cfg.width}));
    auto drv = t.input(code.reshaped({1, cfg.motion_dim}));
    auto feats = net->features_fwd(t, src);
    auto src_code = net->encode_fwd(t, src);
    auto raw = net->flow_raw_fwd(t, feats, src_code, drv);
    auto flow = t.slice_ch(raw, 0, 2);
    auto mask = t.sigmoid(t.slice_ch(raw, 2, 3));
    FlowField f;
    f.displacement = t.val(flow).reshaped({2, cfg.height, cfg.width});
    f.mask = t.val(mask).reshaped({cfg.height, cfg.width});
    return f;
}

Frame AnimatorModel::inpaint(const Frame& warped, const Tensor& mask, const Frame& source) const {
    check_frame_dims(warped, "inpaint");
    check_frame_dims(source, "inpaint");
    if (mask.numel() != static_cast<long>(cfg.height) * cfg.width)
        throw ParamError("inpaint: mask shape mismatch");
    TapeF t(false);
    auto w = t.input(warped.reshaped({1, cfg.channels, cfg.height, cfg.width}));
    auto m = t.input(mask.reshaped({1, 1, cfg.height, cfg.width}));
    auto s = t.input(source.reshaped({1, cfg.channels, cfg.height, cfg.width}));
    auto refined = net->refine_fwd(t, w, m, s);
    auto out = t.blend(m, w, refined);
    return t.val(out).reshaped({cfg.channels, cfg.height, cfg.width});
}

Frame AnimatorModel::synth(const Frame& source, const Tensor& code) const {
    check_frame_dims(source, "synth");
    if (code.numel() != cfg.motion_dim) throw ParamError("synth: code dim mismatch");
    TapeF t(false);
    auto src = t.input(source.reshaped({1, cfg.channels, cfg.height, cfg.width}));
    auto drv = t.input(code.reshaped({1, cfg.motion_dim}));
    auto s = net->synth_fwd(t, src, drv);
    return t.val(s.out).reshaped({cfg.channels, cfg.height, cfg.width});
}

Video AnimatorModel::animate(const Frame& x1, const Tensor& codes, double fps) const {
    check_frame_dims(x1, "animate");
    if (codes.ndim() != 2 || codes.dim(1) != cfg.motion_dim)
        throw ParamError("animate: codes must be [L,N] with N = " +
                         std::to_string(cfg.motion_dim));
    if (codes.dim(0) < 1) throw ParamError("animate: need at least one code");
    Video v;
    v.fps = fps;
    for (int i = 0; i < codes.dim(0); ++i) {
        Tensor code({cfg.motion_dim});
        for (int j = 0; j < cfg.motion_dim; ++j) code[j] = codes.at(i, j);
        v.frames.push_back(synth(x1, code));
    }
    return v;
}

Frame warp_frame(const Frame& frame, const FlowField& flow) {
    if (frame.ndim() != 3) throw ParamError("warp: frame must be [C,H,W]");
    int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    if (flow.displacement.ndim() != 3 || flow.displacement.dim(0) != 2 ||
        flow.displacement.dim(1) != H || flow.displacement.dim(2) != W)
        throw ParamError("warp: flow shape mismatch");
    TapeF t(false);
    auto out = t.warp(t.input(frame.reshaped({1, C, H, W})),
                      t.input(flow.displacement.reshaped({1, 2, H, W})));
    return t.val(out).reshaped({C, H, W});
}

// --- training ---

namespace {

struct PairSource {
    virtual ~PairSource() = default;
    virtual int videos() const = 0;
    virtual int length(int v) const = 0;
    virtual Frame frame(int v, int i) const = 0;
};

struct MemSource : PairSource {
    const std::vector<Video>& ds;
    explicit MemSource(const std::vector<Video>& ds) : ds(ds) {}
    int videos() const override { return static_cast<int>(ds.size()); }
    int length(int v) const override { return ds[v].length(); }
    Frame frame(int v, int i) const override { return ds[v].frames[i]; }
};

struct DirSource : PairSource {
    std::vector<fs::path> dirs;
    std::vector<int> lengths;
    explicit DirSource(const std::vector<fs::path>& d) : dirs(d) {
        for (const auto& dir : dirs) {
            std::ifstream in(dir / "meta.json");
            if (!in) throw IoError("no meta.json in " + dir.string());
            json meta;
            in >> meta;
            lengths.push_back(meta.at("length").get<int>());
        }
    }
    int videos() const override { return static_cast<int>(dirs.size()); }
    int length(int v) const override { return lengths[v]; }
    Frame frame(int v, int i) const override {
        return load_frame_png(dirs[v] / frame_file_name(i));
    }
};

AnimatorModel train_impl(const PairSource& src, const AnimatorConfig& cfg,
                         const AnimatorTrainConfig& train) {
    if (src.videos() < 1) throw ParamError("train_animator: empty dataset");
    AnimatorModel model;
    model.cfg = cfg;
    model.net = std::make_unique<AnimatorNet>(cfg, Rng::mix(train.seed, 0xA11A));
    Rng rng(Rng::mix(train.seed, 0x7121));
    AdamT<float> opt;
    std::ofstream log;
    if (!train.log_file.empty()) {
        if (train.log_file.has_parent_path()) fs::create_directories(train.log_file.parent_path());
        log.open(train.log_file);
    }
    auto t0 = std::chrono::steady_clock::now();
    int B = train.batch;
    Tensor sources({B, cfg.channels, cfg.height, cfg.width});
    Tensor drivings({B, cfg.channels, cfg.height, cfg.width});
    for (int step = 0; step < train.steps; ++step) {
        for (int n = 0; n < B; ++n) {
            int v = rng.randint(0, src.videos());
            int L = src.length(v);
            int si = rng.randint(0, L);
            int di = rng.randint(0, L);
            Frame f_s = src.frame(v, si);
            Frame f_d = src.frame(v, di);
            std::copy(f_s.data.begin(), f_s.data.end(),
                      sources.ptr() + static_cast<long>(n) * f_s.numel());
            std::copy(f_d.data.begin(), f_d.data.end(),
                      drivings.ptr() + static_cast<long>(n) * f_d.numel());
        }
        model.net->params().zero_grad();
        TapeF t;
        auto drv_code = model.net->encode_fwd(t, t.input(drivings));
        auto s = model.net->synth_fwd(t, t.input(sources), drv_code);
        auto loss = t.add(t.l1_to(s.out, drivings), t.grad_l1_to(s.out, drivings));
        float lv = t.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_animator: non-finite loss at step " +
                               std::to_string(step));
        t.backward(loss);
        float lr = train.lr * (0.5f + 0.5f * std::cos(M_PI * step / train.steps)) +
                   0.02f * train.lr;
        opt.step(model.net->params(), lr);
        if (log.is_open() && (step % train.log_every == 0 || step + 1 == train.steps)) {
            double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log << json({{"step", step}, {"loss", lv}, {"lr", lr}, {"wallclock", wall}}).dump()
                << "\n";
            log.flush();
        }
    }
    return model;
}

}  // namespace

AnimatorModel train_animator(const std::vector<Video>& dataset, const AnimatorConfig& cfg,
                             const AnimatorTrainConfig& train) {
    for (const auto& v : dataset)
        if (v.length() < 1 || v.channels() != cfg.channels || v.height() != cfg.height ||
            v.width() != cfg.width)
            throw ParamError("train_animator: dataset resolution mismatch");
    MemSource src(dataset);
    return train_impl(src, cfg, train);
}

AnimatorModel train_animator_dirs(const std::vector<fs::path>& video_dirs,
                                  const AnimatorConfig& cfg, const AnimatorTrainConfig& train) {
    DirSource src(video_dirs);
    return train_impl(src, cfg, train);
}

void save_animator(const AnimatorModel& model, const fs::path& dir, const json& user_extra) {
    json extra = user_extra;
    extra.update(json{{"kind", "animator"},
                  {"motion_dim", model.cfg.motion_dim},
                  {"height", model.cfg.height},
                  {"width", model.cfg.width},
                  {"channels", model.cfg.channels},
                  {"enc_base", model.cfg.enc_base},
                  {"feat_base", model.cfg.feat_base},
                  {"inpaint_base", model.cfg.inpaint_base}});
    save_params(dir, model.net->params(), extra);
}

AnimatorModel load_animator(const fs::path& dir) {
    json m = load_manifest(dir);
    if (m.value("kind", "") != "animator")
        throw IoError("checkpoint in " + dir.string() + " is not an animator");
    AnimatorConfig cfg;
    cfg.motion_dim = m.at("motion_dim").get<int>();
    cfg.height = m.at("height").get<int>();
    cfg.width = m.at("width").get<int>();
    cfg.channels = m.at("channels").get<int>();
    cfg.enc_base = m.at("enc_base").get<int>();
    cfg.feat_base = m.at("feat_base").get<int>();
    cfg.inpaint_base = m.at("inpaint_base").get<int>();
    AnimatorModel model;
    model.cfg = cfg;
    model.net = std::make_unique<AnimatorNet>(cfg, 0);
    load_params(dir, model.net->params());
    return model;
}

}  // namespace leo
