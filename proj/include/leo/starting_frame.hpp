#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "leo/animator.hpp"
#include "leo/denoisers.hpp"
#include "leo/lmdm.hpp"

namespace leo {

/// Frame-wise diffusion model over single motion codes, fitting p(α_i).
struct SimpleDmModel {
    int code_dim = 20;
    CodeStats stats;
    DiffusionSchedule sched;
    std::unique_ptr<DenoiseMlp> net;
};

struct SimpleDmTrainConfig {
    int steps = 4000;
    int batch = 64;
    float lr = 5e-4f;
    uint64_t seed = 1;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int hidden = 128;
    int log_every = 200;
    std::filesystem::path log_file;
};

/// Trains on codes pooled frame-wise from the corpus.
SimpleDmModel train_simple_dm(const std::vector<MotionCode>& codes,
                              const SimpleDmTrainConfig& cfg);

MotionCode sample_alpha1(const SimpleDmModel& model, Rng& rng, int ddim_stride = 0);

void save_simple_dm(const SimpleDmModel& model, const std::filesystem::path& dir,
                    const nlohmann::json& extra = nlohmann::json::object());
SimpleDmModel load_simple_dm(const std::filesystem::path& dir);

/// Conditional image DDPM synthesizing the starting frame x₁ from α₁. The
/// code conditions the denoiser through a linear embedding added to every
/// block's step embedding.
struct CddpmModel {
    int channels = 1, height = 64, width = 64;
    int code_dim = 20;
    DiffusionSchedule sched;
    std::unique_ptr<ImageUnet> net;
};

struct CddpmTrainConfig {
    int steps = 3000;
    int batch = 8;
    float lr = 2e-4f;
    uint64_t seed = 1;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int base_channels = 16;
    int log_every = 200;
    std::filesystem::path log_file;
};

/// Pairs are (frame, encode(frame)); frames live in [0,1] and are trained in
/// the centered [-1,1] range.
CddpmModel train_cddpm(const std::vector<std::pair<Frame, MotionCode>>& pairs,
                       const CddpmTrainConfig& cfg);

/// Sampled frame conditioned on alpha1, clipped to [0,1]. Deterministic given
/// (rng state, alpha1).
Frame sample_frame(const CddpmModel& model, const MotionCode& alpha1, Rng& rng,
                   int ddim_stride = 0);

void save_cddpm(const CddpmModel& model, const std::filesystem::path& dir,
                const nlohmann::json& extra = nlohmann::json::object());
CddpmModel load_cddpm(const std::filesystem::path& dir);

/// Option 1: an existing image supplies x₁ and α₁ = E(x₁).
std::pair<Frame, MotionCode> from_image(const AnimatorModel& animator,
                                        const std::filesystem::path& image);

}  // namespace leo
