#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "leo/denoisers.hpp"
#include "leo/diffusion.hpp"

namespace leo {

/// MotionCode = [N] tensor; MotionSequence = [L,N] tensor (row i = α_i).
using MotionCode = Tensor;
using MotionSequence = Tensor;

struct ResidualSequence {
    Tensor anchor;      // [N], bit-identical copy of the source row 0
    TensorD residuals;  // [L-1,N], m_i = α_i - α_1 for i = 2..L

    /// Residuals narrowed to float (training-space convenience).
    Tensor residuals_f32() const;
};

/// α_i = α_1 + m_i. Residuals are held in double — the difference of two
/// float codes is exact there — so merge(split(a)) reproduces a bit-exactly.
ResidualSequence split_sequence(const MotionSequence& a);
MotionSequence merge_sequence(const MotionCode& anchor, const TensorD& residuals);

/// [anchor ; m_t + anchor]: the anchor is broadcast-added to every residual
/// row and then prepended as timestep 0. Row 0 is a bit-exact anchor copy.
Tensor lmc_condition(const Tensor& m_t, const MotionCode& anchor);

struct CodeStats {
    Tensor mean;  // [N]
    Tensor std;   // [N], floored at 1e-6
};

CodeStats compute_code_stats(const std::vector<MotionSequence>& seqs);

enum class LmdmVariant { kConditional, kUnconditional, kTransition };

/// Loss mask in net layout [B,N,L]: zero at conditioned positions (anchor row
/// for the cLMDM, both endpoint rows for the transition DM, nothing for the
/// unconditional model), one elsewhere.
Tensor lmdm_loss_mask(LmdmVariant variant, int batch, int code_dim, int seq_len);

const char* lmdm_variant_name(LmdmVariant v);

/// A trained latent motion diffusion model (any variant). Sequences are
/// z-normalized per code dimension with stats frozen in the checkpoint;
/// samples are de-normalized on output.
struct LmdmModel {
    LmdmVariant variant = LmdmVariant::kConditional;
    int seq_len = 64;   // training L (window length for the transition DM)
    int code_dim = 20;
    CodeStats stats;
    DiffusionSchedule sched;
    std::unique_ptr<TemporalUnet> net;
};

struct LmdmTrainConfig {
    int steps = 3000;
    int batch = 16;
    float lr = 1e-4f;
    uint64_t seed = 1;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int base_channels = 48;
    int log_every = 200;
    std::filesystem::path log_file;
};

/// cLMDM (Linear Motion Condition): noise only the residual rows, condition
/// on the intact anchor, and exclude the anchor position from the loss.
LmdmModel train_clmdm(const std::vector<MotionSequence>& data, const LmdmTrainConfig& cfg);

/// Reverse process in residual space; the returned sequence's row 0 equals
/// the anchor bit-exactly for every seed.
MotionSequence sample_clmdm(const LmdmModel& model, const MotionCode& anchor, int seq_len,
                            Rng& rng, int ddim_stride = 0);

/// Batched variant with one independent noise stream per anchor (matches
/// sample_clmdm run per anchor with rng = Rng(Rng::mix(seed, index))).
std::vector<MotionSequence> sample_clmdm_batch(const LmdmModel& model,
                                               const std::vector<MotionCode>& anchors,
                                               int seq_len, uint64_t seed, int ddim_stride = 0);

/// Ablation baseline: plain DDPM over whole sequences, no anchor protection.
LmdmModel train_lmdm_unconditional(const std::vector<MotionSequence>& data,
                                   const LmdmTrainConfig& cfg);
MotionSequence sample_lmdm_unconditional(const LmdmModel& model, int seq_len, Rng& rng,
                                         int ddim_stride = 0);
std::vector<MotionSequence> sample_lmdm_unconditional_batch(const LmdmModel& model, int n,
                                                            int seq_len, uint64_t seed,
                                                            int ddim_stride = 0);

/// Transition model: trained on length-`window` slices with both endpoint
/// rows clamped as conditions; only interior rows are diffused.
LmdmModel train_transition_dm(const std::vector<MotionSequence>& data, int window,
                              const LmdmTrainConfig& cfg);

/// Bridges start -> target in `length` rows; both endpoints are returned
/// bit-exactly and only interior rows are sampled.
MotionSequence sample_transition(const LmdmModel& model, const MotionCode& start,
                                 const MotionCode& target, int length, Rng& rng,
                                 int ddim_stride = 0);

void save_lmdm(const LmdmModel& model, const std::filesystem::path& dir,
               const nlohmann::json& extra = nlohmann::json::object());
LmdmModel load_lmdm(const std::filesystem::path& dir);

/// Code-dataset directory: codes.json manifest + one raw float32 [L,N] blob
/// per sequence.
void save_code_dataset(const std::vector<MotionSequence>& seqs,
                       const std::filesystem::path& dir, const nlohmann::json& extra);
std::vector<MotionSequence> load_code_dataset(const std::filesystem::path& dir);

}  // namespace leo
