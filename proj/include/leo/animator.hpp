#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "leo/image.hpp"
#include "leo/nn.hpp"

namespace leo {

/// Dense backward-warp field in pixels plus an occlusion/inpaint weight.
struct FlowField {
    Tensor displacement;  // [2,H,W], channel 0 = dx, 1 = dy
    Tensor mask;          // [H,W] in [0,1]
};

struct AnimatorConfig {
    int motion_dim = 20;
    int height = 64;
    int width = 64;
    int channels = 1;
    int enc_base = 16;      // encoder width
    int feat_base = 16;     // source-feature / flow-decoder width
    int inpaint_base = 12;  // refiner width
};

/// Mini flow-based animator: a convolutional encoder E mapping frames to
/// motion codes, a generator G mapping (source features, source code, driving
/// code) to a flow field plus mask, and a small refiner for the warp-and-
/// inpaint synthesis. All paths are differentiable.
template <class T>
class AnimatorNetT {
public:
    AnimatorNetT(AnimatorConfig cfg, uint64_t init_seed);
    AnimatorNetT(const AnimatorNetT&) = delete;
    AnimatorNetT& operator=(const AnimatorNetT&) = delete;

    using Var = typename Tape<T>::Var;

    Var encode_fwd(Tape<T>& t, Var x) const;    // [B,C,H,W] -> [B,N]
    Var features_fwd(Tape<T>& t, Var x) const;  // [B,C,H,W] -> [B,2f,H/4,W/4]
    /// -> [B,3,H,W]: raw dx, raw dy, mask logit.
    Var flow_raw_fwd(Tape<T>& t, Var feats, Var src_code, Var drv_code) const;
    /// Refiner output (absolute frame, sigmoid range).
    Var refine_fwd(Tape<T>& t, Var warped, Var mask, Var source) const;

    struct Synth {
        Var flow;    // [B,2,H,W]
        Var mask;    // [B,1,H,W]
        Var warped;  // [B,C,H,W]
        Var out;     // [B,C,H,W]
    };
    Synth synth_fwd(Tape<T>& t, Var source, Var drv_code) const;

    const AnimatorConfig& config() const { return cfg_; }
    ParamStoreT<T>& params() { return ps_; }
    const ParamStoreT<T>& params() const { return ps_; }

private:
    AnimatorConfig cfg_;
    ParamStoreT<T> ps_;
    Conv2dT<T> e1_, e2_, e3_, e4_;  // encoder trunk
    LinearT<T> e_out_;
    Conv2dT<T> f1_, f2_, f3_;                      // source features
    Conv2dT<T> g1_, g2_, g3_, g4_, g_out_;         // flow decoder
    Conv2dT<T> r1_, r2_, r3_;                      // inpaint refiner
};

using AnimatorNet = AnimatorNetT<float>;

/// Trained animator with the frame-level operation surface.
struct AnimatorModel {
    AnimatorConfig cfg;
    std::unique_ptr<AnimatorNet> net;

    Tensor encode(const Frame& frame) const;              // [N]
    Tensor encode_batch(const Tensor& frames) const;      // [B,C,H,W] -> [B,N]
    Tensor encode_video(const Video& video) const;        // [L,N]
    FlowField decode_flow(const Frame& source, const Tensor& code) const;
    Frame inpaint(const Frame& warped, const Tensor& mask, const Frame& source) const;
    Frame synth(const Frame& source, const Tensor& code) const;
    Video animate(const Frame& x1, const Tensor& codes, double fps = 25.0) const;

    void check_frame_dims(const Frame& f, const char* what) const;
};

/// Backward bilinear warp with border clamping; zero flow is the exact
/// identity.
Frame warp_frame(const Frame& frame, const FlowField& flow);

struct AnimatorTrainConfig {
    int steps = 6000;
    int batch = 8;
    float lr = 2e-4f;
    uint64_t seed = 1;
    int log_every = 200;
    std::filesystem::path log_file;  // optional JSONL {step, loss, lr, wallclock}
};

/// Self-supervised reconstruction training on (source, driving) pairs drawn
/// within each video. Throws NumericError if the loss goes non-finite.
AnimatorModel train_animator(const std::vector<Video>& dataset, const AnimatorConfig& cfg,
                             const AnimatorTrainConfig& train);

/// Streaming variant over frame-directory videos (loads two frames per draw).
AnimatorModel train_animator_dirs(const std::vector<std::filesystem::path>& video_dirs,
                                  const AnimatorConfig& cfg, const AnimatorTrainConfig& train);

void save_animator(const AnimatorModel& model, const std::filesystem::path& dir,
                   const nlohmann::json& extra = nlohmann::json::object());
AnimatorModel load_animator(const std::filesystem::path& dir);

}  // namespace leo
