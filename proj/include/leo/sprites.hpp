#pragma once

#include <filesystem>
#include <vector>

#include "leo/image.hpp"

namespace leo {

enum class TrajectoryKind { kSinusoidSum, kSpline, kArticulatedSwing };

const char* trajectory_name(TrajectoryKind k);
TrajectoryKind trajectory_from_name(const std::string& name);

struct SpriteMotionParams {
    TrajectoryKind trajectory_kind = TrajectoryKind::kSinusoidSum;
    double amplitude = 10.0;  // pixels, |offset| stays <= amplitude
    int n_harmonics = 2;      // 1..4
    uint64_t seed = 0;
};

struct SpriteDatasetConfig {
    int n_videos = 2000;
    int length = 64;
    int height = 64;
    int width = 64;
    int channels = 1;
    double fps = 25.0;
    SpriteMotionParams motion;  // per-video seeds derived from motion.seed
};

/// Per-video appearance draw: one textured sprite on a solid background.
struct SpriteAppearance {
    bool ellipse = false;
    double half_w = 8, half_h = 8;
    double stripe_freq = 0.3, stripe_angle = 0.0, stripe_phase = 0.0;
    float color_a[3] = {1, 1, 1};
    float color_b[3] = {0.5f, 0.5f, 0.5f};
    float background[3] = {0.1f, 0.1f, 0.1f};
};

/// Per-video motion draw, evaluated as a smooth offset curve with offset(0)=0.
struct SpriteMotion {
    TrajectoryKind kind = TrajectoryKind::kSinusoidSum;
    int n_harmonics = 1;
    double amp_x[4] = {0}, amp_y[4] = {0};
    double freq_x[4] = {0}, freq_y[4] = {0};
    double phase_x[4] = {0}, phase_y[4] = {0};
    std::vector<double> ctrl_x, ctrl_y;  // spline control offsets
    double joint_amp = 0, joint_freq = 0, joint_phase = 0;
};

SpriteAppearance sample_appearance(Rng& rng, int height, int width, int channels);
SpriteMotion sample_motion(const SpriteMotionParams& params, Rng& rng);

/// Offset of the sprite center at frame i (i in [0,L)), in pixels.
void trajectory_offset(const SpriteMotion& m, int i, int length, double* dx, double* dy);

Video render_sprite_video(const SpriteAppearance& ap, const SpriteMotion& mo, int length,
                          int height, int width, int channels, double fps);

void validate_sprite_config(const SpriteDatasetConfig& cfg);

/// In-memory dataset (small n); per-video appearance and motion streams are
/// independent so motion params can be reshuffled across appearances.
std::vector<Video> make_sprite_dataset(const SpriteDatasetConfig& cfg);

/// Streams videos to dir/video_%05d plus a dataset.json manifest.
void write_sprite_dataset(const SpriteDatasetConfig& cfg, const std::filesystem::path& dir);

/// Video directories listed in a dataset.json manifest.
std::vector<std::filesystem::path> dataset_video_dirs(const std::filesystem::path& dir);

}  // namespace leo
