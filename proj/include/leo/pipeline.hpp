#pragma once

#include "leo/starting_frame.hpp"

namespace leo {

/// Read-only bundle of trained models. Optional members may stay null when a
/// pipeline does not need them.
struct ModelSet {
    const AnimatorModel* animator = nullptr;
    const LmdmModel* clmdm = nullptr;
    const LmdmModel* uncond = nullptr;
    const LmdmModel* transition = nullptr;
    const SimpleDmModel* simple_dm = nullptr;
    const CddpmModel* cddpm = nullptr;
    int ddim_stride = 0;  // 0 = full ancestral sampling everywhere
};

/// Cross-checkpoint dimension validation; throws ConfigError naming the
/// mismatched field.
void validate_model_set(const ModelSet& models, bool need_cddpm, bool need_transition);

struct RolloutState {
    Tensor last_code;                        // [N]
    int chunk_index = 0;
    std::vector<Tensor> chunk_mean_history;  // one mean code per chunk
    uint64_t rng_state = 0;
};

struct PipelineResult {
    Video video;
    MotionSequence codes;               // the exact code sequence animated
    Frame x1;                           // starting frame used
    std::vector<Tensor> chunk_anchors;  // rollouts: per-chunk anchors
    int transitions_inserted = 0;
};

/// α₁ from the simple DM, x₁ from the cDDPM, residual sequence from the
/// cLMDM, frames from the animator. Pure function of (models, seed).
PipelineResult generate_unconditional(const ModelSet& models, int n_frames, uint64_t seed);

/// Starting frame taken from an existing image; α₁ = E(x₁).
PipelineResult generate_conditional(const ModelSet& models,
                                    const std::filesystem::path& image, int n_frames,
                                    uint64_t seed);

/// Autoregressive chunked generation: each chunk's last code anchors the
/// next, chunks are concatenated dropping the duplicated anchor row, so the
/// total length is 1 + n_chunks*(chunk_len-1). All frames come from the same
/// x₁.
PipelineResult rollout(const ModelSet& models, const Frame& x1, const MotionCode& alpha1,
                       int n_chunks, int chunk_len, uint64_t seed);

/// True iff the last `window` consecutive chunk-mean pairs all exceed the
/// cosine-similarity threshold; false while history is insufficient.
bool detect_loop(const RolloutState& state, int window, double threshold);

struct TransitionPolicy {
    int window = 2;
    double threshold = 0.98;
    int length = 16;  // rows in an inserted transition segment
};

/// As rollout, but when detect_loop fires a fresh target code is drawn from
/// the simple DM and a transition segment bridges to it. With no detection
/// the output is identical to plain rollout for the same seed.
PipelineResult rollout_with_transitions(const ModelSet& models, const Frame& x1,
                                        const MotionCode& alpha1, int n_chunks, int chunk_len,
                                        uint64_t seed, const TransitionPolicy& policy);

struct EditResult {
    Video video;
    MotionSequence codes;        // residuals re-merged onto the new anchor
    ResidualSequence residuals;  // carried through unchanged from the input
};

/// Content-preserving appearance swap: keep the motion residuals, re-anchor
/// them on encode(new_x1), re-animate.
EditResult edit_appearance(const ModelSet& models, const MotionSequence& codes,
                           const Frame& new_x1);

}  // namespace leo
