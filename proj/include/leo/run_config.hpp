#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "leo/sprites.hpp"

namespace leo {

/// One JSON config drives every CLI verb; stages share a run directory keyed
/// by the config hash, so re-running a command with the same config is
/// idempotent.
struct RunConfig {
    int schema_version = 1;
    uint64_t seed = 1;
    std::filesystem::path workdir = "runs";
    std::filesystem::path dataset_dir;  // empty: dataset lives inside the run dir

    struct Data {
        int n_videos = 2000;
        int length = 64;
        int height = 64;
        int width = 64;
        int channels = 1;
        std::string trajectory = "sinusoid-sum";
        double amplitude = 10.0;
        int n_harmonics = 2;
        double fps = 25.0;
    } data;

    struct Animator {
        int motion_dim = 20;
        int enc_base = 16;
        int feat_base = 16;
        int inpaint_base = 12;
        int steps = 6000;
        int batch = 8;
        float lr = 2e-4f;
    } animator;

    struct Diffusion {
        int timesteps = 1000;
        double beta_start = 1e-4;
        double beta_end = 0.02;
        int ddim_stride = 0;  // 0 = ancestral sampling (default)
    } diffusion;

    struct Lmdm {
        int seq_len = 64;
        int base_channels = 48;
        int steps = 3000;
        int batch = 16;
        float lr = 1e-4f;
    } lmdm;

    struct SimpleDm {
        int hidden = 128;
        int steps = 4000;
        int batch = 64;
        float lr = 5e-4f;
    } simple_dm;

    struct Cddpm {
        int base_channels = 16;
        int steps = 3000;
        int batch = 8;
        float lr = 2e-4f;
    } cddpm;

    struct Transition {
        int window = 16;  // training slice length
        int steps = 1500;
        int batch = 16;
        float lr = 3e-4f;
    } transition;

    struct Sample {
        int n_frames = 16;
        int count = 1;
        std::filesystem::path image;  // conditional mode input
    } sample;

    struct Rollout {
        int n_chunks = 8;
        int chunk_len = 64;
        bool with_transitions = false;
        int loop_window = 2;
        double loop_threshold = 0.98;
        int t_trans = 16;
    } rollout;

    struct Edit {
        std::filesystem::path source_run;  // outputs dir of a prior sample
        std::filesystem::path new_image;
    } edit;

    struct Eval {
        std::filesystem::path target;  // directory of generated video dirs
        int clip_len = 16;
        int n_clips = 32;
    } eval;

    nlohmann::json raw;  // canonical parsed form, used for hashing
};

/// Parses and validates; throws ConfigError listing every offending field.
/// The LEO_SEED environment variable overrides the config seed.
RunConfig load_run_config(const std::filesystem::path& file);

RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json default_config_json();

/// Stage artifact locations under workdir/<config-hash>/.
struct StagePaths {
    std::filesystem::path run_dir;
    std::filesystem::path dataset;
    std::filesystem::path animator_ckpt;
    std::filesystem::path codes;
    std::filesystem::path clmdm_ckpt;
    std::filesystem::path uncond_ckpt;
    std::filesystem::path transition_ckpt;
    std::filesystem::path simple_dm_ckpt;
    std::filesystem::path cddpm_ckpt;
    std::filesystem::path outputs;
    std::filesystem::path logs;
    std::filesystem::path metrics_file;
};

StagePaths stage_paths(const RunConfig& cfg);

std::string run_config_hash(const RunConfig& cfg);

}  // namespace leo
