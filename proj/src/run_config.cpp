#include "leo/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "leo/checkpoint.hpp"

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config_json() {
    return json{
        {"schema_version", 1},
        {"seed", 1},
        {"workdir", "runs"},
        {"dataset_dir", ""},
        {"data",
         {{"n_videos", 2000},
          {"length", 64},
          {"height", 64},
          {"width", 64},
          {"channels", 1},
          {"trajectory", "sinusoid-sum"},
          {"amplitude", 10.0},
          {"n_harmonics", 2},
          {"fps", 25.0}}},
        {"animator",
         {{"motion_dim", 20},
          {"enc_base", 16},
          {"feat_base", 16},
          {"inpaint_base", 12},
          {"steps", 6000},
          {"batch", 8},
          {"lr", 2e-4}}},
        {"diffusion",
         {{"timesteps", 1000}, {"beta_start", 1e-4}, {"beta_end", 0.02}, {"ddim_stride", 0}}},
        {"lmdm",
         {{"seq_len", 64}, {"base_channels", 48}, {"steps", 3000}, {"batch", 16}, {"lr", 1e-4}}},
        {"simple_dm", {{"hidden", 128}, {"steps", 4000}, {"batch", 64}, {"lr", 5e-4}}},
        {"cddpm", {{"base_channels", 16}, {"steps", 3000}, {"batch", 8}, {"lr", 2e-4}}},
        {"transition", {{"window", 16}, {"steps", 1500}, {"batch", 16}, {"lr", 3e-4}}},
        {"sample", {{"n_frames", 16}, {"count", 1}, {"image", ""}}},
        {"rollout",
         {{"n_chunks", 8},
          {"chunk_len", 64},
          {"with_transitions", false},
          {"loop_window", 2},
          {"loop_threshold", 0.98},
          {"t_trans", 16}}},
        {"edit", {{"source_run", ""}, {"new_image", ""}}},
        {"eval", {{"target", ""}, {"clip_len", 16}, {"n_clips", 32}}}};
}

namespace {

// Overlay user values onto the defaults so partial configs stay valid, then
// validate everything at once.
json merged_with_defaults(const json& user) {
    json base = default_config_json();
    base.merge_patch(user);
    return base;
}

struct FieldErrors {
    std::vector<std::string> bad;
    void require(bool ok, const std::string& field) {
        if (!ok) bad.push_back(field);
    }
    void raise_if_any() {
        if (bad.empty()) return;
        std::string msg = "invalid config fields:";
        for (const auto& f : bad) msg += " " + f;
        throw ConfigError(msg);
    }
};

}  // namespace

RunConfig run_config_from_json(const json& user) {
    json j = merged_with_defaults(user);
    RunConfig c;
    try {
        c.schema_version = j.at("schema_version").get<int>();
        c.seed = j.at("seed").get<uint64_t>();
        c.workdir = j.at("workdir").get<std::string>();
        c.dataset_dir = j.at("dataset_dir").get<std::string>();
        const auto& d = j.at("data");
        c.data.n_videos = d.at("n_videos").get<int>();
        c.data.length = d.at("length").get<int>();
        c.data.height = d.at("height").get<int>();
        c.data.width = d.at("width").get<int>();
        c.data.channels = d.at("channels").get<int>();
        c.data.trajectory = d.at("trajectory").get<std::string>();
        c.data.amplitude = d.at("amplitude").get<double>();
        c.data.n_harmonics = d.at("n_harmonics").get<int>();
        c.data.fps = d.at("fps").get<double>();
        const auto& a = j.at("animator");
        c.animator.motion_dim = a.at("motion_dim").get<int>();
        c.animator.enc_base = a.at("enc_base").get<int>();
        c.animator.feat_base = a.at("feat_base").get<int>();
        c.animator.inpaint_base = a.at("inpaint_base").get<int>();
        c.animator.steps = a.at("steps").get<int>();
        c.animator.batch = a.at("batch").get<int>();
        c.animator.lr = a.at("lr").get<float>();
        const auto& df = j.at("diffusion");
        c.diffusion.timesteps = df.at("timesteps").get<int>();
        c.diffusion.beta_start = df.at("beta_start").get<double>();
        c.diffusion.beta_end = df.at("beta_end").get<double>();
        c.diffusion.ddim_stride = df.at("ddim_stride").get<int>();
        const auto& l = j.at("lmdm");
        c.lmdm.seq_len = l.at("seq_len").get<int>();
        c.lmdm.base_channels = l.at("base_channels").get<int>();
        c.lmdm.steps = l.at("steps").get<int>();
        c.lmdm.batch = l.at("batch").get<int>();
        c.lmdm.lr = l.at("lr").get<float>();
        const auto& s = j.at("simple_dm");
        c.simple_dm.hidden = s.at("hidden").get<int>();
        c.simple_dm.steps = s.at("steps").get<int>();
        c.simple_dm.batch = s.at("batch").get<int>();
        c.simple_dm.lr = s.at("lr").get<float>();
        const auto& cd = j.at("cddpm");
        c.cddpm.base_channels = cd.at("base_channels").get<int>();
        c.cddpm.steps = cd.at("steps").get<int>();
        c.cddpm.batch = cd.at("batch").get<int>();
        c.cddpm.lr = cd.at("lr").get<float>();
        const auto& tr = j.at("transition");
        c.transition.window = tr.at("window").get<int>();
        c.transition.steps = tr.at("steps").get<int>();
        c.transition.batch = tr.at("batch").get<int>();
        c.transition.lr = tr.at("lr").get<float>();
        const auto& sm = j.at("sample");
        c.sample.n_frames = sm.at("n_frames").get<int>();
        c.sample.count = sm.at("count").get<int>();
        c.sample.image = sm.at("image").get<std::string>();
        const auto& r = j.at("rollout");
        c.rollout.n_chunks = r.at("n_chunks").get<int>();
        c.rollout.chunk_len = r.at("chunk_len").get<int>();
        c.rollout.with_transitions = r.at("with_transitions").get<bool>();
        c.rollout.loop_window = r.at("loop_window").get<int>();
        c.rollout.loop_threshold = r.at("loop_threshold").get<double>();
        c.rollout.t_trans = r.at("t_trans").get<int>();
        const auto& e = j.at("edit");
        c.edit.source_run = e.at("source_run").get<std::string>();
        c.edit.new_image = e.at("new_image").get<std::string>();
        const auto& ev = j.at("eval");
        c.eval.target = ev.at("target").get<std::string>();
        c.eval.clip_len = ev.at("clip_len").get<int>();
        c.eval.n_clips = ev.at("n_clips").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    if (const char* env = std::getenv("LEO_SEED")) {
        try {
            c.seed = std::stoull(env);
            j["seed"] = c.seed;
        } catch (...) {
            throw ConfigError("LEO_SEED is not an integer");
        }
    }

    FieldErrors err;
    err.require(c.schema_version == 1, "schema_version");
    err.require(!c.workdir.empty(), "workdir");
    err.require(c.data.n_videos >= 1, "data.n_videos");
    err.require(c.data.length >= 2, "data.length");
    err.require(c.data.height >= 16 && c.data.height % 8 == 0, "data.height");
    err.require(c.data.width >= 16 && c.data.width % 8 == 0, "data.width");
    err.require(c.data.channels == 1 || c.data.channels == 3, "data.channels");
    err.require(c.data.amplitude >= 0 &&
                    c.data.amplitude < std::min(c.data.height, c.data.width) / 4.0,
                "data.amplitude");
    err.require(c.data.n_harmonics >= 1 && c.data.n_harmonics <= 4, "data.n_harmonics");
    bool traj_ok = true;
    try {
        trajectory_from_name(c.data.trajectory);
    } catch (const ParamError&) {
        traj_ok = false;
    }
    err.require(traj_ok, "data.trajectory");
    err.require(c.animator.motion_dim >= 1, "animator.motion_dim");
    err.require(c.animator.steps >= 1, "animator.steps");
    err.require(c.animator.batch >= 1, "animator.batch");
    err.require(c.animator.lr > 0, "animator.lr");
    err.require(c.diffusion.timesteps >= 1, "diffusion.timesteps");
    err.require(c.diffusion.beta_start > 0 && c.diffusion.beta_start <= c.diffusion.beta_end &&
                    c.diffusion.beta_end < 1,
                "diffusion.beta_start/beta_end");
    err.require(c.diffusion.ddim_stride >= 0, "diffusion.ddim_stride");
    err.require(c.lmdm.seq_len >= 2, "lmdm.seq_len");
    err.require(c.lmdm.steps >= 1, "lmdm.steps");
    err.require(c.lmdm.batch >= 1, "lmdm.batch");
    err.require(c.lmdm.lr > 0, "lmdm.lr");
    err.require(c.simple_dm.steps >= 1, "simple_dm.steps");
    err.require(c.cddpm.steps >= 1, "cddpm.steps");
    err.require(c.transition.window >= 3, "transition.window");
    err.require(c.sample.n_frames >= 1, "sample.n_frames");
    err.require(c.sample.count >= 1, "sample.count");
    err.require(c.rollout.n_chunks >= 1, "rollout.n_chunks");
    err.require(c.rollout.chunk_len >= 2, "rollout.chunk_len");
    err.require(c.rollout.loop_window >= 2, "rollout.loop_window");
    err.require(c.rollout.t_trans >= 3, "rollout.t_trans");
    err.require(c.eval.clip_len >= 2, "eval.clip_len");
    err.require(c.eval.n_clips >= 1, "eval.n_clips");
    err.raise_if_any();

    c.raw = j;
    return c;
}

RunConfig load_run_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return run_config_from_json(j);
}

std::string run_config_hash(const RunConfig& cfg) { return config_hash(cfg.raw); }

StagePaths stage_paths(const RunConfig& cfg) {
    StagePaths p;
    p.run_dir = cfg.workdir / run_config_hash(cfg);
    p.dataset = cfg.dataset_dir.empty() ? p.run_dir / "dataset" : cfg.dataset_dir;
    p.animator_ckpt = p.run_dir / "checkpoints" / "animator";
    p.codes = p.run_dir / "codes";
    p.clmdm_ckpt = p.run_dir / "checkpoints" / "lmdm_clmdm";
    p.uncond_ckpt = p.run_dir / "checkpoints" / "lmdm_uncond";
    p.transition_ckpt = p.run_dir / "checkpoints" / "lmdm_transition";
    p.simple_dm_ckpt = p.run_dir / "checkpoints" / "simple_dm";
    p.cddpm_ckpt = p.run_dir / "checkpoints" / "cddpm";
    p.outputs = p.run_dir / "outputs";
    p.logs = p.run_dir / "logs";
    p.metrics_file = p.run_dir / "metrics.json";
    return p;
}

}  // namespace leo
