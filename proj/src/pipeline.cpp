#include "leo/pipeline.hpp"

#include <cmath>

namespace leo {

namespace {

void require(bool ok, const std::string& field, const std::string& detail) {
    if (!ok) throw ConfigError("model set mismatch at '" + field + "': " + detail);
}

}  // namespace

void validate_model_set(const ModelSet& m, bool need_cddpm, bool need_transition) {
    require(m.animator != nullptr, "animator", "checkpoint not loaded");
    require(m.clmdm != nullptr, "clmdm", "checkpoint not loaded");
    int n = m.animator->cfg.motion_dim;
    require(m.clmdm->code_dim == n, "clmdm.code_dim",
            std::to_string(m.clmdm->code_dim) + " vs animator motion_dim " + std::to_string(n));
    if (m.simple_dm)
        require(m.simple_dm->code_dim == n, "simple_dm.code_dim",
                std::to_string(m.simple_dm->code_dim) + " vs animator motion_dim " +
                    std::to_string(n));
    if (need_cddpm) {
        require(m.cddpm != nullptr, "cddpm", "checkpoint not loaded");
        require(m.simple_dm != nullptr, "simple_dm", "checkpoint not loaded");
        require(m.cddpm->code_dim == n, "cddpm.code_dim",
                std::to_string(m.cddpm->code_dim) + " vs animator motion_dim " +
                    std::to_string(n));
        require(m.cddpm->height == m.animator->cfg.height &&
                    m.cddpm->width == m.animator->cfg.width,
                "cddpm.resolution",
                std::to_string(m.cddpm->height) + "x" + std::to_string(m.cddpm->width) +
                    " vs animator " + std::to_string(m.animator->cfg.height) + "x" +
                    std::to_string(m.animator->cfg.width));
        require(m.cddpm->channels == m.animator->cfg.channels, "cddpm.channels",
                std::to_string(m.cddpm->channels) + " vs animator " +
                    std::to_string(m.animator->cfg.channels));
    }
    if (need_transition) {
        require(m.transition != nullptr, "transition", "checkpoint not loaded");
        require(m.transition->code_dim == n, "transition.code_dim",
                std::to_string(m.transition->code_dim) + " vs animator motion_dim " +
                    std::to_string(n));
        require(m.simple_dm != nullptr, "simple_dm", "checkpoint not loaded");
    }
}

PipelineResult generate_unconditional(const ModelSet& models, int n_frames, uint64_t seed) {
    validate_model_set(models, /*need_cddpm=*/true, /*need_transition=*/false);
    if (n_frames < 1) throw ParamError("generate: n_frames must be >= 1");
    Rng alpha_rng(Rng::mix(seed, 1));
    Rng frame_rng(Rng::mix(seed, 2));
    MotionCode alpha1 = sample_alpha1(*models.simple_dm, alpha_rng, models.ddim_stride);
    Frame x1 = sample_frame(*models.cddpm, alpha1, frame_rng, models.ddim_stride);
    PipelineResult r;
    if (n_frames == 1) {
        r.codes = MotionSequence({1, models.clmdm->code_dim});
        for (int j = 0; j < models.clmdm->code_dim; ++j) r.codes.at(0, j) = alpha1[j];
    } else {
        auto seqs =
            sample_clmdm_batch(*models.clmdm, {alpha1}, models.clmdm->seq_len,
                               Rng::mix(seed, 3), models.ddim_stride);
        // trim to the requested frame count
        r.codes = MotionSequence({n_frames, models.clmdm->code_dim});
        if (n_frames > models.clmdm->seq_len)
            throw ParamError("generate: n_frames exceeds the model sequence length; use rollout");
        for (int i = 0; i < n_frames; ++i)
            for (int j = 0; j < models.clmdm->code_dim; ++j) r.codes.at(i, j) = seqs[0].at(i, j);
    }
    r.video = models.animator->animate(x1, r.codes);
    r.x1 = std::move(x1);
    r.chunk_anchors.push_back(alpha1);
    return r;
}

PipelineResult generate_conditional(const ModelSet& models,
                                    const std::filesystem::path& image, int n_frames,
                                    uint64_t seed) {
    validate_model_set(models, /*need_cddpm=*/false, /*need_transition=*/false);
    if (n_frames < 1) throw ParamError("generate: n_frames must be >= 1");
    auto [x1, alpha1] = from_image(*models.animator, image);
    PipelineResult r;
    if (n_frames == 1) {
        r.codes = MotionSequence({1, models.clmdm->code_dim});
        for (int j = 0; j < models.clmdm->code_dim; ++j) r.codes.at(0, j) = alpha1[j];
    } else {
        if (n_frames > models.clmdm->seq_len)
            throw ParamError("generate: n_frames exceeds the model sequence length; use rollout");
        auto seqs =
            sample_clmdm_batch(*models.clmdm, {alpha1}, models.clmdm->seq_len,
                               Rng::mix(seed, 3), models.ddim_stride);
        r.codes = MotionSequence({n_frames, models.clmdm->code_dim});
        for (int i = 0; i < n_frames; ++i)
            for (int j = 0; j < models.clmdm->code_dim; ++j) r.codes.at(i, j) = seqs[0].at(i, j);
    }
    r.video = models.animator->animate(x1, r.codes);
    r.x1 = std::move(x1);
    r.chunk_anchors.push_back(alpha1);
    return r;
}

namespace {

Tensor row_of(const MotionSequence& seq, int i) {
    Tensor out({seq.dim(1)});
    for (int j = 0; j < seq.dim(1); ++j) out[j] = seq.at(i, j);
    return out;
}

Tensor mean_code(const MotionSequence& seq) {
    Tensor out = Tensor::zeros({seq.dim(1)});
    for (int i = 0; i < seq.dim(0); ++i)
        for (int j = 0; j < seq.dim(1); ++j) out[j] += seq.at(i, j);
    for (int j = 0; j < seq.dim(1); ++j) out[j] /= static_cast<float>(seq.dim(0));
    return out;
}

// Core of both rollout flavours. `policy` == nullptr disables transitions.
PipelineResult rollout_impl(const ModelSet& models, const Frame& x1, const MotionCode& alpha1,
                            int n_chunks, int chunk_len, uint64_t seed,
                            const TransitionPolicy* policy) {
    validate_model_set(models, /*need_cddpm=*/false, /*need_transition=*/policy != nullptr);
    if (n_chunks < 1) throw ParamError("rollout: n_chunks must be >= 1");
    if (chunk_len != models.clmdm->seq_len)
        throw ParamError("rollout: chunk_len must equal the trained sequence length " +
                         std::to_string(models.clmdm->seq_len));
    models.animator->check_frame_dims(x1, "rollout");
    int n = models.clmdm->code_dim;
    if (alpha1.ndim() != 1 || alpha1.dim(0) != n) throw ParamError("rollout: alpha1 dim mismatch");

    PipelineResult r;
    RolloutState state;
    state.last_code = alpha1;
    state.rng_state = seed;
    std::vector<Tensor> rows;  // accumulated code rows
    rows.push_back(alpha1);
    int transition_counter = 0;
    for (int k = 0; k < n_chunks; ++k) {
        Tensor anchor = state.last_code;
        r.chunk_anchors.push_back(anchor);
        std::vector<MotionSequence> chunk;
        try {
            chunk = sample_clmdm_batch(*models.clmdm, {anchor}, chunk_len,
                                       Rng::mix(seed, 100 + static_cast<uint64_t>(k)),
                                       models.ddim_stride);
        } catch (const NumericError& e) {
            throw NumericError("rollout: chunk " + std::to_string(k) + ": " + e.what());
        }
        const MotionSequence& seq = chunk[0];
        // row 0 duplicates the anchor already present; drop it
        for (int i = 1; i < chunk_len; ++i) rows.push_back(row_of(seq, i));
        state.last_code = row_of(seq, chunk_len - 1);
        state.chunk_index += 1;
        state.chunk_mean_history.push_back(mean_code(seq));

        if (policy && k + 1 < n_chunks && detect_loop(state, policy->window, policy->threshold)) {
            Rng target_rng(Rng::mix(seed, 5000 + static_cast<uint64_t>(transition_counter)));
            MotionCode target = sample_alpha1(*models.simple_dm, target_rng, models.ddim_stride);
            Rng trans_rng(Rng::mix(seed, 6000 + static_cast<uint64_t>(transition_counter)));
            MotionSequence bridge =
                sample_transition(*models.transition, state.last_code, target, policy->length,
                                  trans_rng, models.ddim_stride);
            for (int i = 1; i < bridge.dim(0); ++i) rows.push_back(row_of(bridge, i));
            state.last_code = row_of(bridge, bridge.dim(0) - 1);  // == target bit-exactly
            state.chunk_mean_history.clear();  // new motion pattern, fresh history
            ++transition_counter;
        }
    }
    r.transitions_inserted = transition_counter;
    r.codes = MotionSequence({static_cast<int>(rows.size()), n});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < n; ++j) r.codes.at(static_cast<int>(i), j) = rows[i][j];
    if (!r.codes.all_finite()) throw NumericError("rollout: non-finite code sequence");
    r.video = models.animator->animate(x1, r.codes);
    r.x1 = x1;
    return r;
}

}  // namespace

PipelineResult rollout(const ModelSet& models, const Frame& x1, const MotionCode& alpha1,
                       int n_chunks, int chunk_len, uint64_t seed) {
    return rollout_impl(models, x1, alpha1, n_chunks, chunk_len, seed, nullptr);
}

bool detect_loop(const RolloutState& state, int window, double threshold) {
    if (window < 2) throw ParamError("detect_loop: window must be >= 2");
    int h = static_cast<int>(state.chunk_mean_history.size());
    if (h < window + 1) return false;  // insufficient history
    for (int k = h - window; k < h; ++k) {
        const Tensor& a = state.chunk_mean_history[k - 1];
        const Tensor& b = state.chunk_mean_history[k];
        double dot = 0, na = 0, nb = 0;
        for (long j = 0; j < a.numel(); ++j) {
            dot += static_cast<double>(a[j]) * b[j];
            na += static_cast<double>(a[j]) * a[j];
            nb += static_cast<double>(b[j]) * b[j];
        }
        double denom = std::sqrt(na) * std::sqrt(nb);
        double cos_sim = denom > 0 ? dot / denom : 0.0;
        if (!(cos_sim > threshold)) return false;
    }
    return true;
}

PipelineResult rollout_with_transitions(const ModelSet& models, const Frame& x1,
                                        const MotionCode& alpha1, int n_chunks, int chunk_len,
                                        uint64_t seed, const TransitionPolicy& policy) {
    return rollout_impl(models, x1, alpha1, n_chunks, chunk_len, seed, &policy);
}

EditResult edit_appearance(const ModelSet& models, const MotionSequence& codes,
                           const Frame& new_x1) {
    if (!models.animator) throw ConfigError("model set mismatch at 'animator': checkpoint not loaded");
    models.animator->check_frame_dims(new_x1, "edit_appearance");
    if (codes.ndim() != 2 || codes.dim(1) != models.animator->cfg.motion_dim)
        throw ParamError("edit_appearance: codes must be [L,N]");
    EditResult r;
    r.residuals = split_sequence(codes);
    MotionCode new_anchor = models.animator->encode(new_x1);
    r.codes = merge_sequence(new_anchor, r.residuals.residuals);
    r.video = models.animator->animate(new_x1, r.codes);
    return r;
}

}  // namespace leo
