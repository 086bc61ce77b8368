#include "leo/lmdm.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "leo/checkpoint.hpp"

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor ResidualSequence::residuals_f32() const {
    Tensor out(residuals.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = static_cast<float>(residuals[i]);
    return out;
}

ResidualSequence split_sequence(const MotionSequence& a) {
    if (a.ndim() != 2 || a.dim(0) < 2) throw ParamError("split_sequence: need [L>=2,N]");
    int L = a.dim(0), N = a.dim(1);
    ResidualSequence r;
    r.anchor = Tensor({N});
    for (int j = 0; j < N; ++j) r.anchor[j] = a.at(0, j);
    r.residuals = TensorD({L - 1, N});
    for (int i = 1; i < L; ++i)
        for (int j = 0; j < N; ++j)
            r.residuals.at(i - 1, j) =
                static_cast<double>(a.at(i, j)) - static_cast<double>(a.at(0, j));
    return r;
}

MotionSequence merge_sequence(const MotionCode& anchor, const TensorD& residuals) {
    if (anchor.ndim() != 1) throw ParamError("merge: anchor must be [N]");
    if (residuals.ndim() != 2 || residuals.dim(1) != anchor.dim(0))
        throw ParamError("merge: residuals must be [L-1,N] with matching N");
    int N = anchor.dim(0), Lm1 = residuals.dim(0);
    MotionSequence a({Lm1 + 1, N});
    for (int j = 0; j < N; ++j) a.at(0, j) = anchor[j];  // exact copy, no arithmetic
    for (int i = 0; i < Lm1; ++i)
        for (int j = 0; j < N; ++j)
            a.at(i + 1, j) = static_cast<float>(static_cast<double>(anchor[j]) +
                                                residuals.at(i, j));
    return a;
}

Tensor lmc_condition(const Tensor& m_t, const MotionCode& anchor) {
    if (anchor.ndim() != 1) throw ParamError("lmc_condition: anchor must be [N]");
    if (m_t.ndim() != 2 || m_t.dim(1) != anchor.dim(0))
        throw ParamError("lmc_condition: residuals must be [L-1,N] with matching N");
    int N = anchor.dim(0), Lm1 = m_t.dim(0);
    Tensor out({Lm1 + 1, N});
    for (int j = 0; j < N; ++j) out.at(0, j) = anchor[j];
    for (int i = 0; i < Lm1; ++i)
        for (int j = 0; j < N; ++j) out.at(i + 1, j) = m_t.at(i, j) + anchor[j];
    return out;
}

CodeStats compute_code_stats(const std::vector<MotionSequence>& seqs) {
    if (seqs.empty()) throw ParamError("compute_code_stats: empty dataset");
    int N = seqs[0].dim(1);
    CodeStats s;
    s.mean = Tensor::zeros({N});
    s.std = Tensor::zeros({N});
    double count = 0;
    std::vector<double> mean(N, 0), m2(N, 0);
    for (const auto& a : seqs) {
        if (a.ndim() != 2 || a.dim(1) != N) throw ParamError("code stats: inconsistent dims");
        for (int i = 0; i < a.dim(0); ++i) {
            count += 1;
            for (int j = 0; j < N; ++j) {
                double x = a.at(i, j);
                double d = x - mean[j];
                mean[j] += d / count;
                m2[j] += d * (x - mean[j]);
            }
        }
    }
    for (int j = 0; j < N; ++j) {
        s.mean[j] = static_cast<float>(mean[j]);
        s.std[j] = static_cast<float>(std::max(std::sqrt(m2[j] / std::max(1.0, count - 1)), 1e-6));
    }
    return s;
}

const char* lmdm_variant_name(LmdmVariant v) {
    switch (v) {
        case LmdmVariant::kConditional: return "clmdm";
        case LmdmVariant::kUnconditional: return "uncond";
        case LmdmVariant::kTransition: return "transition";
    }
    return "?";
}

Tensor lmdm_loss_mask(LmdmVariant variant, int batch, int code_dim, int seq_len) {
    Tensor mask = Tensor::full({batch, code_dim, seq_len}, 1.0f);
    for (int b = 0; b < batch; ++b)
        for (int j = 0; j < code_dim; ++j) {
            if (variant == LmdmVariant::kConditional) mask.at(b, j, 0) = 0.0f;
            if (variant == LmdmVariant::kTransition) {
                mask.at(b, j, 0) = 0.0f;
                mask.at(b, j, seq_len - 1) = 0.0f;
            }
        }
    return mask;
}

namespace {

LmdmVariant variant_from_name(const std::string& s) {
    if (s == "clmdm") return LmdmVariant::kConditional;
    if (s == "uncond") return LmdmVariant::kUnconditional;
    if (s == "transition") return LmdmVariant::kTransition;
    throw IoError("unknown lmdm variant: " + s);
}

Tensor normalize_rows(const Tensor& a, const CodeStats& st) {
    Tensor out(a.shape);
    int N = a.dim(a.ndim() - 1);
    for (long i = 0; i < a.numel() / N; ++i)
        for (int j = 0; j < N; ++j)
            out[i * N + j] = (a[i * N + j] - st.mean[j]) / st.std[j];
    return out;
}

// [L,N] <-> [1,N,L] transposes between sequence-major storage and the
// channel-major layout the 1D U-Net consumes.
Tensor seq_to_net(const Tensor& a) {
    int L = a.dim(0), N = a.dim(1);
    Tensor out({1, N, L});
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < N; ++j) out[static_cast<long>(j) * L + i] = a.at(i, j);
    return out;
}

Tensor net_to_seq(const Tensor& x) {
    int N = x.dim(1), L = x.dim(2);
    Tensor out({L, N});
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < L; ++i) out.at(i, j) = x[static_cast<long>(j) * L + i];
    return out;
}

void validate_dataset(const std::vector<MotionSequence>& data, int min_len) {
    if (data.empty()) throw ParamError("lmdm training: empty code dataset");
    int L = data[0].dim(0), N = data[0].dim(1);
    if (L < min_len) throw ParamError("lmdm training: sequences shorter than required");
    for (const auto& a : data)
        if (a.ndim() != 2 || a.dim(0) != L || a.dim(1) != N)
            throw ParamError("lmdm training: inconsistent sequence shapes");
}

struct TrainLogger {
    std::ofstream out;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    explicit TrainLogger(const fs::path& file) {
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

LmdmModel init_model(LmdmVariant variant, int seq_len, int code_dim, const CodeStats& stats,
                     const LmdmTrainConfig& cfg) {
    LmdmModel m;
    m.variant = variant;
    m.seq_len = seq_len;
    m.code_dim = code_dim;
    m.stats = stats;
    m.sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    TemporalUnet::Config nc;
    nc.channels = code_dim;
    nc.base = cfg.base_channels;
    m.net = std::make_unique<TemporalUnet>(nc, Rng::mix(cfg.seed, 0x1DDC));
    return m;
}

float cosine_lr(float lr, int step, int total) {
    return lr * (0.5f + 0.5f * std::cos(M_PI * step / total)) + 0.02f * lr;
}

}  // namespace

LmdmModel train_clmdm(const std::vector<MotionSequence>& data, const LmdmTrainConfig& cfg) {
    validate_dataset(data, 2);
    int L = data[0].dim(0), N = data[0].dim(1);
    LmdmModel model = init_model(LmdmVariant::kConditional, L, N, compute_code_stats(data), cfg);
    Rng rng(Rng::mix(cfg.seed, 0xC1));
    AdamT<float> opt;
    TrainLogger logger(cfg.log_file);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> ts(cfg.batch);
        Tensor batch({cfg.batch, N, L});
        Tensor target = Tensor::zeros({cfg.batch, N, L});
        // anchor position excluded from the loss
        Tensor mask = lmdm_loss_mask(LmdmVariant::kConditional, cfg.batch, N, L);
        for (int b = 0; b < cfg.batch; ++b) {
            ts[b] = rng.randint(1, model.sched.steps + 1);
            const auto& a = data[rng.randint(0, static_cast<int>(data.size()))];
            Tensor an = normalize_rows(a, model.stats);
            ResidualSequence r = split_sequence(an);
            Tensor eps = Tensor::randn({L - 1, N}, rng);
            Tensor m_t = q_sample(r.residuals_f32(), ts[b], eps, model.sched);
            Tensor in = lmc_condition(m_t, r.anchor);  // [L,N]
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < N; ++j) {
                    batch.at(b, j, i) = in.at(i, j);
                    if (i > 0) target.at(b, j, i) = eps.at(i - 1, j);
                }
        }
        model.net->params().zero_grad();
        TapeF tp;
        auto pred = model.net->forward(tp, tp.input(batch), ts);
        auto loss = tp.mse_masked(pred, target, mask);
        float lv = tp.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_clmdm: non-finite loss at step " + std::to_string(step));
        tp.backward(loss);
        float lr = cosine_lr(cfg.lr, step, cfg.steps);
        opt.step(model.net->params(), lr);
        logger.log(step, lv, lr, cfg.log_every, cfg.steps);
    }
    return model;
}

namespace {

// One ancestral step applied to a [L-1,N] residual state given the batch
// noise prediction; z is drawn per sample from its own stream.
void residual_p_step(Tensor& m, const Tensor& eps_hat, int t, const DiffusionSchedule& sched,
                     Rng& rng) {
    m = p_step_from_eps(m, eps_hat, t, sched, rng);
}

}  // namespace

std::vector<MotionSequence> sample_clmdm_batch(const LmdmModel& model,
                                               const std::vector<MotionCode>& anchors,
                                               int seq_len, uint64_t seed, int ddim_stride) {
    if (model.variant != LmdmVariant::kConditional)
        throw ParamError("sample_clmdm: model is not a cLMDM");
    if (seq_len != model.seq_len)
        throw ParamError("sample_clmdm: sequence length " + std::to_string(seq_len) +
                         " does not match trained " + std::to_string(model.seq_len));
    int N = model.code_dim, L = seq_len, B = static_cast<int>(anchors.size());
    for (const auto& a : anchors) {
        if (a.ndim() != 1 || a.dim(0) != N) throw ParamError("sample_clmdm: anchor dim mismatch");
        if (!a.all_finite()) throw ParamError("sample_clmdm: non-finite anchor");
    }
    std::vector<Rng> streams;
    streams.reserve(B);
    for (int b = 0; b < B; ++b) streams.emplace_back(Rng::mix(seed, b));

    std::vector<Tensor> anchors_norm;
    std::vector<Tensor> states;  // [L-1,N] residual states
    for (int b = 0; b < B; ++b) {
        anchors_norm.push_back(normalize_rows(anchors[b], model.stats));
        states.push_back(Tensor::randn({L - 1, N}, streams[b]));
    }

    auto net_batch = [&](int t) {
        Tensor in({B, N, L});
        for (int b = 0; b < B; ++b) {
            Tensor cond = lmc_condition(states[b], anchors_norm[b]);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < N; ++j) in.at(b, j, i) = cond.at(i, j);
        }
        Tensor pred = model.net->predict(in, t);  // [B,N,L]
        std::vector<Tensor> eps(B, Tensor({L - 1, N}));
        for (int b = 0; b < B; ++b)
            for (int i = 1; i < L; ++i)
                for (int j = 0; j < N; ++j) eps[b].at(i - 1, j) = pred.at(b, j, i);
        return eps;
    };

    if (ddim_stride <= 0) {
        for (int t = model.sched.steps; t >= 1; --t) {
            auto eps = net_batch(t);
            for (int b = 0; b < B; ++b) residual_p_step(states[b], eps[b], t, model.sched,
                                                        streams[b]);
        }
    } else {
        std::vector<int> ts;
        for (int t = model.sched.steps; t >= 1; t -= ddim_stride) ts.push_back(t);
        for (size_t k = 0; k < ts.size(); ++k) {
            auto eps = net_batch(ts[k]);
            int t_prev = (k + 1 < ts.size()) ? ts[k + 1] : 0;
            for (int b = 0; b < B; ++b)
                states[b] = ddim_step(states[b], eps[b], ts[k], t_prev, model.sched);
        }
    }

    std::vector<MotionSequence> out;
    out.reserve(B);
    for (int b = 0; b < B; ++b) {
        MotionSequence seq({L, N});
        for (int j = 0; j < N; ++j) seq.at(0, j) = anchors[b][j];  // intact anchor
        for (int i = 1; i < L; ++i)
            for (int j = 0; j < N; ++j)
                // de-normalized residual added in raw space; the mean offset
                // cancels in the difference
                seq.at(i, j) = static_cast<float>(
                    static_cast<double>(anchors[b][j]) +
                    static_cast<double>(model.stats.std[j]) * states[b].at(i - 1, j));
        if (!seq.all_finite()) throw NumericError("sample_clmdm: non-finite sample");
        out.push_back(std::move(seq));
    }
    return out;
}

MotionSequence sample_clmdm(const LmdmModel& model, const MotionCode& anchor, int seq_len,
                            Rng& rng, int ddim_stride) {
    // Single-sample path reuses the batch implementation with a stream seeded
    // from the caller's rng.
    uint64_t seed = rng.next_u64();
    auto v = sample_clmdm_batch(model, {anchor}, seq_len, seed ^ 0x5A17, ddim_stride);
    return v[0];
}

LmdmModel train_lmdm_unconditional(const std::vector<MotionSequence>& data,
                                   const LmdmTrainConfig& cfg) {
    validate_dataset(data, 2);
    int L = data[0].dim(0), N = data[0].dim(1);
    LmdmModel model = init_model(LmdmVariant::kUnconditional, L, N, compute_code_stats(data), cfg);
    Rng rng(Rng::mix(cfg.seed, 0xC2));
    AdamT<float> opt;
    TrainLogger logger(cfg.log_file);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> ts(cfg.batch);
        Tensor batch({cfg.batch, N, L});
        Tensor target({cfg.batch, N, L});
        for (int b = 0; b < cfg.batch; ++b) {
            ts[b] = rng.randint(1, model.sched.steps + 1);
            const auto& a = data[rng.randint(0, static_cast<int>(data.size()))];
            Tensor an = normalize_rows(a, model.stats);
            Tensor eps = Tensor::randn({L, N}, rng);
            Tensor a_t = q_sample(an, ts[b], eps, model.sched);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < N; ++j) {
                    batch.at(b, j, i) = a_t.at(i, j);
                    target.at(b, j, i) = eps.at(i, j);
                }
        }
        model.net->params().zero_grad();
        TapeF tp;
        auto pred = model.net->forward(tp, tp.input(batch), ts);
        auto loss = tp.mse_to(pred, target);
        float lv = tp.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_lmdm_unconditional: non-finite loss at step " +
                               std::to_string(step));
        tp.backward(loss);
        float lr = cosine_lr(cfg.lr, step, cfg.steps);
        opt.step(model.net->params(), lr);
        logger.log(step, lv, lr, cfg.log_every, cfg.steps);
    }
    return model;
}

std::vector<MotionSequence> sample_lmdm_unconditional_batch(const LmdmModel& model, int n,
                                                            int seq_len, uint64_t seed,
                                                            int ddim_stride) {
    if (model.variant != LmdmVariant::kUnconditional)
        throw ParamError("sample_lmdm_unconditional: wrong variant");
    if (seq_len != model.seq_len)
        throw ParamError("sample_lmdm_unconditional: sequence length mismatch");
    int N = model.code_dim, L = seq_len;
    std::vector<Rng> streams;
    std::vector<Tensor> states;
    for (int b = 0; b < n; ++b) {
        streams.emplace_back(Rng::mix(seed, b));
        states.push_back(Tensor::randn({L, N}, streams[b]));
    }
    auto net_batch = [&](int t) {
        Tensor in({n, N, L});
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < N; ++j) in.at(b, j, i) = states[b].at(i, j);
        Tensor pred = model.net->predict(in, t);
        std::vector<Tensor> eps(n, Tensor({L, N}));
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < N; ++j) eps[b].at(i, j) = pred.at(b, j, i);
        return eps;
    };
    if (ddim_stride <= 0) {
        for (int t = model.sched.steps; t >= 1; --t) {
            auto eps = net_batch(t);
            for (int b = 0; b < n; ++b)
                states[b] = p_step_from_eps(states[b], eps[b], t, model.sched, streams[b]);
        }
    } else {
        std::vector<int> ts;
        for (int t = model.sched.steps; t >= 1; t -= ddim_stride) ts.push_back(t);
        for (size_t k = 0; k < ts.size(); ++k) {
            auto eps = net_batch(ts[k]);
            int t_prev = (k + 1 < ts.size()) ? ts[k + 1] : 0;
            for (int b = 0; b < n; ++b)
                states[b] = ddim_step(states[b], eps[b], ts[k], t_prev, model.sched);
        }
    }
    std::vector<MotionSequence> out;
    for (int b = 0; b < n; ++b) {
        MotionSequence seq({L, N});
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < N; ++j)
                seq.at(i, j) = states[b].at(i, j) * model.stats.std[j] + model.stats.mean[j];
        if (!seq.all_finite())
            throw NumericError("sample_lmdm_unconditional: non-finite sample");
        out.push_back(std::move(seq));
    }
    return out;
}

MotionSequence sample_lmdm_unconditional(const LmdmModel& model, int seq_len, Rng& rng,
                                         int ddim_stride) {
    uint64_t seed = rng.next_u64();
    return sample_lmdm_unconditional_batch(model, 1, seq_len, seed ^ 0x5A17, ddim_stride)[0];
}

LmdmModel train_transition_dm(const std::vector<MotionSequence>& data, int window,
                              const LmdmTrainConfig& cfg) {
    if (window < 3) throw ParamError("train_transition_dm: window must be >= 3");
    validate_dataset(data, window);
    int N = data[0].dim(1), L = data[0].dim(0);
    LmdmModel model = init_model(LmdmVariant::kTransition, window, N, compute_code_stats(data), cfg);
    Rng rng(Rng::mix(cfg.seed, 0xC3));
    AdamT<float> opt;
    TrainLogger logger(cfg.log_file);
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> ts(cfg.batch);
        Tensor batch({cfg.batch, N, window});
        Tensor target = Tensor::zeros({cfg.batch, N, window});
        Tensor mask = lmdm_loss_mask(LmdmVariant::kTransition, cfg.batch, N, window);
        for (int b = 0; b < cfg.batch; ++b) {
            ts[b] = rng.randint(1, model.sched.steps + 1);
            const auto& a = data[rng.randint(0, static_cast<int>(data.size()))];
            int start = rng.randint(0, L - window + 1);
            Tensor w({window, N});
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < N; ++j) w.at(i, j) = a.at(start + i, j);
            Tensor wn = normalize_rows(w, model.stats);
            Tensor eps = Tensor::randn({window, N}, rng);
            Tensor w_t = q_sample(wn, ts[b], eps, model.sched);
            // clamp the endpoint rows to their clean values
            for (int j = 0; j < N; ++j) {
                w_t.at(0, j) = wn.at(0, j);
                w_t.at(window - 1, j) = wn.at(window - 1, j);
            }
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < N; ++j) {
                    batch.at(b, j, i) = w_t.at(i, j);
                    if (i > 0 && i < window - 1) target.at(b, j, i) = eps.at(i, j);
                }
        }
        model.net->params().zero_grad();
        TapeF tp;
        auto pred = model.net->forward(tp, tp.input(batch), ts);
        auto loss = tp.mse_masked(pred, target, mask);
        float lv = tp.val(loss)[0];
        if (!std::isfinite(lv))
            throw NumericError("train_transition_dm: non-finite loss at step " +
                               std::to_string(step));
        tp.backward(loss);
        float lr = cosine_lr(cfg.lr, step, cfg.steps);
        opt.step(model.net->params(), lr);
        logger.log(step, lv, lr, cfg.log_every, cfg.steps);
    }
    return model;
}

MotionSequence sample_transition(const LmdmModel& model, const MotionCode& start,
                                 const MotionCode& target, int length, Rng& rng,
                                 int ddim_stride) {
    if (model.variant != LmdmVariant::kTransition)
        throw ParamError("sample_transition: model is not a transition DM");
    if (length < 3) throw ParamError("sample_transition: length must be >= 3");
    int N = model.code_dim;
    if (start.ndim() != 1 || start.dim(0) != N || target.ndim() != 1 || target.dim(0) != N)
        throw ParamError("sample_transition: endpoint code dim mismatch");
    Tensor sn = normalize_rows(start, model.stats);
    Tensor tn = normalize_rows(target, model.stats);

    Tensor state = Tensor::randn({length, N}, rng);
    auto clamp_ends = [&](Tensor& x) {
        for (int j = 0; j < N; ++j) {
            x.at(0, j) = sn[j];
            x.at(length - 1, j) = tn[j];
        }
    };
    clamp_ends(state);
    auto predict = [&](const Tensor& x, int t) {
        Tensor in({1, N, length});
        for (int i = 0; i < length; ++i)
            for (int j = 0; j < N; ++j) in.at(0, j, i) = x.at(i, j);
        Tensor pred = model.net->predict(in, t);
        Tensor eps({length, N});
        for (int i = 0; i < length; ++i)
            for (int j = 0; j < N; ++j) eps.at(i, j) = pred.at(0, j, i);
        return eps;
    };
    if (ddim_stride <= 0) {
        for (int t = model.sched.steps; t >= 1; --t) {
            state = p_step_from_eps(state, predict(state, t), t, model.sched, rng);
            clamp_ends(state);
        }
    } else {
        std::vector<int> ts;
        for (int t = model.sched.steps; t >= 1; t -= ddim_stride) ts.push_back(t);
        for (size_t k = 0; k < ts.size(); ++k) {
            int t_prev = (k + 1 < ts.size()) ? ts[k + 1] : 0;
            state = ddim_step(state, predict(state, ts[k]), ts[k], t_prev, model.sched);
            clamp_ends(state);
        }
    }

    MotionSequence out({length, N});
    for (int j = 0; j < N; ++j) {
        out.at(0, j) = start[j];             // bit-exact endpoints
        out.at(length - 1, j) = target[j];
    }
    for (int i = 1; i + 1 < length; ++i)
        for (int j = 0; j < N; ++j)
            out.at(i, j) = state.at(i, j) * model.stats.std[j] + model.stats.mean[j];
    if (!out.all_finite()) throw NumericError("sample_transition: non-finite sample");
    return out;
}

void save_lmdm(const LmdmModel& model, const fs::path& dir, const json& user_extra) {
    json extra = user_extra;
    extra.update(json{{"kind", "lmdm"},
                  {"variant", lmdm_variant_name(model.variant)},
                  {"seq_len", model.seq_len},
                  {"code_dim", model.code_dim},
                  {"base_channels", model.net->config().base},
                  {"timesteps", model.sched.steps},
                  {"beta_start", model.sched.betas.front()},
                  {"beta_end", model.sched.betas.back()},
                  {"norm_mean", model.stats.mean.data},
                  {"norm_std", model.stats.std.data}});
    save_params(dir, model.net->params(), extra);
}

LmdmModel load_lmdm(const fs::path& dir) {
    json m = load_manifest(dir);
    if (m.value("kind", "") != "lmdm")
        throw IoError("checkpoint in " + dir.string() + " is not an lmdm");
    LmdmModel model;
    model.variant = variant_from_name(m.at("variant").get<std::string>());
    model.seq_len = m.at("seq_len").get<int>();
    model.code_dim = m.at("code_dim").get<int>();
    model.sched = make_schedule(m.at("timesteps").get<int>(), m.at("beta_start").get<double>(),
                                m.at("beta_end").get<double>());
    auto mean = m.at("norm_mean").get<std::vector<float>>();
    auto sd = m.at("norm_std").get<std::vector<float>>();
    model.stats.mean = Tensor({static_cast<int>(mean.size())});
    model.stats.std = Tensor({static_cast<int>(sd.size())});
    model.stats.mean.data = mean;
    model.stats.std.data = sd;
    TemporalUnet::Config nc;
    nc.channels = model.code_dim;
    nc.base = m.at("base_channels").get<int>();
    model.net = std::make_unique<TemporalUnet>(nc, 0);
    load_params(dir, model.net->params());
    return model;
}

void save_code_dataset(const std::vector<MotionSequence>& seqs, const fs::path& dir,
                       const json& extra) {
    if (seqs.empty()) throw ParamError("save_code_dataset: empty");
    fs::create_directories(dir);
    int L = seqs[0].dim(0), N = seqs[0].dim(1);
    json manifest = extra;
    manifest["n_sequences"] = seqs.size();
    manifest["seq_len"] = L;
    manifest["code_dim"] = N;
    for (size_t k = 0; k < seqs.size(); ++k) {
        if (seqs[k].dim(0) != L || seqs[k].dim(1) != N)
            throw ParamError("save_code_dataset: inconsistent shapes");
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%05zu.bin", k);
        std::ofstream out(dir / name, std::ios::binary);
        out.write(reinterpret_cast<const char*>(seqs[k].ptr()),
                  static_cast<std::streamsize>(seqs[k].numel() * sizeof(float)));
        if (!out) throw IoError("failed to write " + (dir / name).string());
    }
    std::ofstream out(dir / "codes.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed to write codes.json in " + dir.string());
}

std::vector<MotionSequence> load_code_dataset(const fs::path& dir) {
    fs::path mf = dir / "codes.json";
    if (!fs::exists(mf)) throw IoError("no codes.json in " + dir.string());
    json manifest;
    {
        std::ifstream in(mf);
        in >> manifest;
    }
    size_t n = manifest.at("n_sequences").get<size_t>();
    int L = manifest.at("seq_len").get<int>();
    int N = manifest.at("code_dim").get<int>();
    std::vector<MotionSequence> seqs;
    seqs.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%05zu.bin", k);
        std::ifstream in(dir / name, std::ios::binary);
        if (!in) throw IoError("missing sequence blob " + (dir / name).string());
        MotionSequence a({L, N});
        in.read(reinterpret_cast<char*>(a.ptr()),
                static_cast<std::streamsize>(a.numel() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(a.numel() * sizeof(float)))
            throw IoError("truncated sequence blob " + (dir / name).string());
        seqs.push_back(std::move(a));
    }
    return seqs;
}

}  // namespace leo
