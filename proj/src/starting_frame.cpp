#include "leo/starting_frame.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "leo/checkpoint.hpp"

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

CodeStats stats_from_codes(const std::vector<MotionCode>& codes) {
    if (codes.empty()) throw ParamError("train_simple_dm: empty code corpus");
    int N = codes[0].dim(0);
    std::vector<MotionSequence> as_seq;
    // reuse the running-moment implementation over [n,N] rows
    MotionSequence all({static_cast<int>(codes.size()), N});
    for (size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].ndim() != 1 || codes[i].dim(0) != N)
            throw ParamError("train_simple_dm: inconsistent code dims");
        for (int j = 0; j < N; ++j) all.at(static_cast<int>(i), j) = codes[i][j];
    }
    as_seq.push_back(std::move(all));
    return compute_code_stats(as_seq);
}

float cosine_lr(float lr, int step, int total) {
    return lr * (0.5f + 0.5f * std::cos(M_PI * step / total)) + 0.02f * lr;
}

struct JsonLog {
    std::ofstream out;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    explicit JsonLog(const fs::path& file) {
        if (!file.empty()) {
            if (file.has_parent_path()) fs::create_directories(file.parent_path());
            out.open(file);
        }
    }
    void log(int step, double loss, double lr, int every, int total) {
        if (!out.is_open() || (step % every && step + 1 != total)) return;
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out << json({{"step", step}, {"loss", loss}, {"lr", lr}, {"wallclock", wall}}).dump()
            << "\n";
        out.flush();
    }
};

}  // namespace

SimpleDmModel train_simple_dm(const std::vector<MotionCode>& codes,
                              const SimpleDmTrainConfig& cfg) {
    SimpleDmModel model;
    model.stats = stats_from_codes(codes);
    model.code_dim = codes[0].dim(0);
    model.sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    DenoiseMlp::Config nc;
    nc.dim = model.code_dim;
    nc.hidden = cfg.hidden;
    model.net = std::make_unique<DenoiseMlp>(nc, Rng::mix(cfg.seed, 0x51D));
    Rng rng(Rng::mix(cfg.seed, 0x51E));
    AdamT<float> opt;
    JsonLog logger(cfg.log_file);
    int N = model.code_dim;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> ts(cfg.batch);
        Tensor x({cfg.batch, N}), target({cfg.batch, N});
        for (int b = 0; b < cfg.batch; ++b) {
            ts[b] = rng.randint(1, model.sched.steps + 1);
            const auto& c = codes[rng.randint(0, static_cast<int>(codes.size()))];
            Tensor x0({1, N}), eps({1, N});
            for (int j = 0; j < N; ++j) {
                x0.at(0, j) = (c[j] - model.stats.mean[j]) / model.stats.std[j];
                eps.at(0, j) = static_cast<float>(rng.gaussian());
            }
            Tensor xt = q_sample(x0, ts[b], eps, model.sched);
            for (int j = 0; j < N; ++j) {
                x.at(b, j) = xt.at(0, j);
                target.at(b, j) = eps.at(0, j);
            }
        }
        model.net->params().zero_grad();
        TapeF tp;
        auto pred = model.net->forward(tp, tp.input(x), ts);
        auto loss = tp.mse_to(pred, target);
        float lv = tp.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_simple_dm: non-finite loss at step " +
                               std::to_string(step));
        tp.backward(loss);
        float lr = cosine_lr(cfg.lr, step, cfg.steps);
        opt.step(model.net->params(), lr);
        logger.log(step, lv, lr, cfg.log_every, cfg.steps);
    }
    return model;
}

MotionCode sample_alpha1(const SimpleDmModel& model, Rng& rng, int ddim_stride) {
    struct MlpEps : EpsModel {
        const SimpleDmModel& m;
        explicit MlpEps(const SimpleDmModel& m) : m(m) {}
        Tensor eps(const Tensor& x, int t) const override { return m.net->predict(x, t); }
    } eps_model(model);
    Tensor x = p_sample_loop(eps_model, {1, model.code_dim}, model.sched, rng, ddim_stride);
    MotionCode out({model.code_dim});
    for (int j = 0; j < model.code_dim; ++j)
        out[j] = x.at(0, j) * model.stats.std[j] + model.stats.mean[j];
    if (!out.all_finite()) throw NumericError("sample_alpha1: non-finite code");
    return out;
}

void save_simple_dm(const SimpleDmModel& model, const fs::path& dir, const json& user_extra) {
    json extra = user_extra;
    extra.update(json{{"kind", "simple_dm"},
                  {"code_dim", model.code_dim},
                  {"hidden", model.net->config().hidden},
                  {"timesteps", model.sched.steps},
                  {"beta_start", model.sched.betas.front()},
                  {"beta_end", model.sched.betas.back()},
                  {"norm_mean", model.stats.mean.data},
                  {"norm_std", model.stats.std.data}});
    save_params(dir, model.net->params(), extra);
}

SimpleDmModel load_simple_dm(const fs::path& dir) {
    json m = load_manifest(dir);
    if (m.value("kind", "") != "simple_dm")
        throw IoError("checkpoint in " + dir.string() + " is not a simple DM");
    SimpleDmModel model;
    model.code_dim = m.at("code_dim").get<int>();
    model.sched = make_schedule(m.at("timesteps").get<int>(), m.at("beta_start").get<double>(),
                                m.at("beta_end").get<double>());
    auto mean = m.at("norm_mean").get<std::vector<float>>();
    auto sd = m.at("norm_std").get<std::vector<float>>();
    model.stats.mean = Tensor({static_cast<int>(mean.size())});
    model.stats.std = Tensor({static_cast<int>(sd.size())});
    model.stats.mean.data = mean;
    model.stats.std.data = sd;
    DenoiseMlp::Config nc;
    nc.dim = model.code_dim;
    nc.hidden = m.at("hidden").get<int>();
    model.net = std::make_unique<DenoiseMlp>(nc, 0);
    load_params(dir, model.net->params());
    return model;
}

CddpmModel train_cddpm(const std::vector<std::pair<Frame, MotionCode>>& pairs,
                       const CddpmTrainConfig& cfg) {
    if (pairs.empty()) throw ParamError("train_cddpm: empty pair set");
    const Frame& f0 = pairs[0].first;
    CddpmModel model;
    model.channels = f0.dim(0);
    model.height = f0.dim(1);
    model.width = f0.dim(2);
    model.code_dim = pairs[0].second.dim(0);
    model.sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    ImageUnet::Config nc;
    nc.channels = model.channels;
    nc.height = model.height;
    nc.width = model.width;
    nc.cond_dim = model.code_dim;
    nc.base = cfg.base_channels;
    model.net = std::make_unique<ImageUnet>(nc, Rng::mix(cfg.seed, 0xCDD));
    for (const auto& [f, c] : pairs)
        if (!f.same_shape(f0) || c.numel() != model.code_dim)
            throw ParamError("train_cddpm: inconsistent pair shapes");

    Rng rng(Rng::mix(cfg.seed, 0xCDE));
    AdamT<float> opt;
    JsonLog logger(cfg.log_file);
    long numel = f0.numel();
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> ts(cfg.batch);
        Tensor x({cfg.batch, model.channels, model.height, model.width});
        Tensor target(x.shape);
        Tensor cond({cfg.batch, model.code_dim});
        for (int b = 0; b < cfg.batch; ++b) {
            ts[b] = rng.randint(1, model.sched.steps + 1);
            const auto& [frame, code] = pairs[rng.randint(0, static_cast<int>(pairs.size()))];
            Tensor x0(frame.shape), eps(frame.shape);
            for (long i = 0; i < numel; ++i) {
                x0[i] = frame[i] * 2.0f - 1.0f;  // [0,1] -> [-1,1]
                eps[i] = static_cast<float>(rng.gaussian());
            }
            Tensor xt = q_sample(x0, ts[b], eps, model.sched);
            std::copy(xt.data.begin(), xt.data.end(), x.ptr() + static_cast<long>(b) * numel);
            std::copy(eps.data.begin(), eps.data.end(),
                      target.ptr() + static_cast<long>(b) * numel);
            for (int j = 0; j < model.code_dim; ++j) cond.at(b, j) = code[j];
        }
        model.net->params().zero_grad();
        TapeF tp;
        auto pred = model.net->forward(tp, tp.input(x), ts, &cond);
        auto loss = tp.mse_to(pred, target);
        float lv = tp.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_cddpm: non-finite loss at step " + std::to_string(step));
        tp.backward(loss);
        float lr = cosine_lr(cfg.lr, step, cfg.steps);
        opt.step(model.net->params(), lr);
        logger.log(step, lv, lr, cfg.log_every, cfg.steps);
    }
    return model;
}

Frame sample_frame(const CddpmModel& model, const MotionCode& alpha1, Rng& rng,
                   int ddim_stride) {
    if (alpha1.ndim() != 1 || alpha1.dim(0) != model.code_dim)
        throw ParamError("sample_frame: code dim mismatch");
    if (!alpha1.all_finite()) throw ParamError("sample_frame: non-finite code");
    Tensor cond({1, model.code_dim});
    for (int j = 0; j < model.code_dim; ++j) cond.at(0, j) = alpha1[j];
    struct CondEps : EpsModel {
        const CddpmModel& m;
        const Tensor& cond;
        CondEps(const CddpmModel& m, const Tensor& cond) : m(m), cond(cond) {}
        Tensor eps(const Tensor& x, int t) const override { return m.net->predict(x, t, &cond); }
    } eps_model(model, cond);
    Tensor x = p_sample_loop(eps_model, {1, model.channels, model.height, model.width},
                             model.sched, rng, ddim_stride);
    Frame out({model.channels, model.height, model.width});
    for (long i = 0; i < out.numel(); ++i)
        out[i] = std::min(std::max((x[i] + 1.0f) / 2.0f, 0.0f), 1.0f);
    return out;
}

void save_cddpm(const CddpmModel& model, const fs::path& dir, const json& user_extra) {
    json extra = user_extra;
    extra.update(json{{"kind", "cddpm"},
                  {"channels", model.channels},
                  {"height", model.height},
                  {"width", model.width},
                  {"code_dim", model.code_dim},
                  {"base_channels", model.net->config().base},
                  {"timesteps", model.sched.steps},
                  {"beta_start", model.sched.betas.front()},
                  {"beta_end", model.sched.betas.back()}});
    save_params(dir, model.net->params(), extra);
}

CddpmModel load_cddpm(const fs::path& dir) {
    json m = load_manifest(dir);
    if (m.value("kind", "") != "cddpm")
        throw IoError("checkpoint in " + dir.string() + " is not a cDDPM");
    CddpmModel model;
    model.channels = m.at("channels").get<int>();
    model.height = m.at("height").get<int>();
    model.width = m.at("width").get<int>();
    model.code_dim = m.at("code_dim").get<int>();
    model.sched = make_schedule(m.at("timesteps").get<int>(), m.at("beta_start").get<double>(),
                                m.at("beta_end").get<double>());
    ImageUnet::Config nc;
    nc.channels = model.channels;
    nc.height = model.height;
    nc.width = model.width;
    nc.cond_dim = model.code_dim;
    nc.base = m.at("base_channels").get<int>();
    model.net = std::make_unique<ImageUnet>(nc, 0);
    load_params(dir, model.net->params());
    return model;
}

std::pair<Frame, MotionCode> from_image(const AnimatorModel& animator, const fs::path& image) {
    if (!fs::exists(image)) throw IoError("from_image: no such file " + image.string());
    Frame x1 = load_frame_png(image);
    animator.check_frame_dims(x1, "from_image");
    MotionCode alpha1 = animator.encode(x1);
    return {std::move(x1), std::move(alpha1)};
}

}  // namespace leo
