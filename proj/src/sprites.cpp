#include "leo/sprites.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

const char* trajectory_name(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::kSinusoidSum: return "sinusoid-sum";
        case TrajectoryKind::kSpline: return "spline";
        case TrajectoryKind::kArticulatedSwing: return "articulated-swing";
    }
    return "?";
}

TrajectoryKind trajectory_from_name(const std::string& name) {
    if (name == "sinusoid-sum") return TrajectoryKind::kSinusoidSum;
    if (name == "spline") return TrajectoryKind::kSpline;
    if (name == "articulated-swing") return TrajectoryKind::kArticulatedSwing;
    throw ParamError("unknown trajectory kind: " + name);
}

SpriteAppearance sample_appearance(Rng& rng, int height, int width, int channels) {
    SpriteAppearance ap;
    double hi = std::min(10.0, std::min(height, width) / 4.0 - 2.0);
    double lo = std::min(5.0, hi);
    ap.half_w = rng.uniform(lo, hi);
    ap.half_h = rng.uniform(lo, hi);
    ap.ellipse = rng.uniform() < 0.5;
    ap.stripe_freq = rng.uniform(0.15, 0.45);
    ap.stripe_angle = rng.uniform(0.0, M_PI);
    ap.stripe_phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int c = 0; c < 3; ++c) {
        ap.color_a[c] = static_cast<float>(rng.uniform(0.6, 1.0));
        ap.color_b[c] = static_cast<float>(rng.uniform(0.25, 0.55));
        ap.background[c] = static_cast<float>(rng.uniform(0.02, 0.15));
    }
    if (channels == 1) {
        // collapse to a single intensity triple
        ap.color_a[1] = ap.color_a[2] = ap.color_a[0];
        ap.color_b[1] = ap.color_b[2] = ap.color_b[0];
        ap.background[1] = ap.background[2] = ap.background[0];
    }
    return ap;
}

SpriteMotion sample_motion(const SpriteMotionParams& params, Rng& rng) {
    SpriteMotion m;
    m.kind = params.trajectory_kind;
    m.n_harmonics = params.n_harmonics;
    if (m.kind == TrajectoryKind::kSpline) {
        int K = rng.randint(4, 7);
        double half = params.amplitude / 2.0;
        for (int k = 0; k < K; ++k) {
            m.ctrl_x.push_back(rng.uniform(-half, half));
            m.ctrl_y.push_back(rng.uniform(-half, half));
        }
        return m;
    }
    int nh = (m.kind == TrajectoryKind::kArticulatedSwing) ? 1 : params.n_harmonics;
    m.n_harmonics = nh;
    // offset = sum_h A_h (sin(2pi f_h t + p_h) - sin(p_h)); bounding the sum of
    // |A_h| by amplitude/2 keeps |offset| <= amplitude. The articulated sprite
    // covers a wider footprint, so its translation budget shrinks.
    double budget = params.amplitude / 2.0;
    if (m.kind == TrajectoryKind::kArticulatedSwing) budget *= 0.55;
    double raw_x[4], raw_y[4], sx = 0, sy = 0;
    for (int h = 0; h < nh; ++h) {
        raw_x[h] = rng.uniform(0.3, 1.0);
        raw_y[h] = rng.uniform(0.3, 1.0);
        sx += raw_x[h];
        sy += raw_y[h];
    }
    double base = rng.uniform(0.6, 1.3);
    double fill = rng.uniform(0.7, 1.0);
    for (int h = 0; h < nh; ++h) {
        m.amp_x[h] = budget * fill * raw_x[h] / sx;
        m.amp_y[h] = budget * fill * raw_y[h] / sy;
        m.freq_x[h] = base * (h + 1);
        m.freq_y[h] = base * (h + 1) * rng.uniform(0.8, 1.2);
        m.phase_x[h] = rng.uniform(0.0, 2.0 * M_PI);
        m.phase_y[h] = rng.uniform(0.0, 2.0 * M_PI);
    }
    if (m.kind == TrajectoryKind::kArticulatedSwing) {
        m.joint_amp = rng.uniform(0.3, 0.7);  // radians
        m.joint_freq = rng.uniform(0.8, 1.5);
        m.joint_phase = rng.uniform(0.0, 2.0 * M_PI);
    }
    return m;
}

namespace {

// Catmull-Rom over control points with clamped ends, shifted so value(0)=0.
double spline_eval(const std::vector<double>& c, double t) {
    int K = static_cast<int>(c.size());
    double s = t * (K - 1);
    int i = std::min(static_cast<int>(std::floor(s)), K - 2);
    double u = s - i;
    auto at = [&](int j) { return c[static_cast<size_t>(std::clamp(j, 0, K - 1))]; };
    double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    double m1 = (p2 - p0) / 2.0, m2 = (p3 - p1) / 2.0;
    double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * p1 + (u3 - 2 * u2 + u) * m1 + (-2 * u3 + 3 * u2) * p2 +
           (u3 - u2) * m2;
}

}  // namespace

void trajectory_offset(const SpriteMotion& m, int i, int length, double* dx, double* dy) {
    double t = length > 1 ? static_cast<double>(i) / (length - 1) : 0.0;
    if (m.kind == TrajectoryKind::kSpline) {
        *dx = spline_eval(m.ctrl_x, t) - spline_eval(m.ctrl_x, 0.0);
        *dy = spline_eval(m.ctrl_y, t) - spline_eval(m.ctrl_y, 0.0);
        return;
    }
    double ox = 0, oy = 0;
    for (int h = 0; h < m.n_harmonics; ++h) {
        ox += m.amp_x[h] *
              (std::sin(2 * M_PI * m.freq_x[h] * t + m.phase_x[h]) - std::sin(m.phase_x[h]));
        oy += m.amp_y[h] *
              (std::sin(2 * M_PI * m.freq_y[h] * t + m.phase_y[h]) - std::sin(m.phase_y[h]));
    }
    *dx = ox;
    *dy = oy;
}

namespace {

float texture_at(const SpriteAppearance& ap, double u, double v, int c) {
    double s = u * std::cos(ap.stripe_angle) + v * std::sin(ap.stripe_angle);
    double w = 0.5 + 0.5 * std::sin(2 * M_PI * ap.stripe_freq * s + ap.stripe_phase);
    return static_cast<float>(w * ap.color_a[c] + (1 - w) * ap.color_b[c]);
}

// Exact coverage for an axis-aligned box, [-half,half] around (cx,cy).
double box_coverage(double px, double py, double cx, double cy, double hw, double hh) {
    double ox = std::min(px + 0.5, cx + hw) - std::max(px - 0.5, cx - hw);
    double oy = std::min(py + 0.5, cy + hh) - std::max(py - 0.5, cy - hh);
    if (ox <= 0 || oy <= 0) return 0.0;
    return ox * oy;
}

// Supersampled coverage for an ellipse.
double ellipse_coverage(double px, double py, double cx, double cy, double hw, double hh) {
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
            double x = px - 0.375 + sx * 0.25;
            double y = py - 0.375 + sy * 0.25;
            double u = (x - cx) / hw, v = (y - cy) / hh;
            if (u * u + v * v <= 1.0) ++inside;
        }
    return inside / 16.0;
}

// Supersampled coverage for a rotated box (articulated limb).
double rot_box_coverage(double px, double py, double cx, double cy, double hw, double hh,
                        double ang) {
    double ca = std::cos(ang), sa = std::sin(ang);
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
            double x = px - 0.375 + sx * 0.25 - cx;
            double y = py - 0.375 + sy * 0.25 - cy;
            double u = x * ca + y * sa, v = -x * sa + y * ca;
            if (std::abs(u) <= hw && std::abs(v) <= hh) ++inside;
        }
    return inside / 16.0;
}

}  // namespace

Video render_sprite_video(const SpriteAppearance& ap, const SpriteMotion& mo, int length,
                          int height, int width, int channels, double fps) {
    if (length < 1) throw ParamError("render_sprite_video: length must be >= 1");
    Video v;
    v.fps = fps;
    double cx0 = width / 2.0, cy0 = height / 2.0;
    for (int i = 0; i < length; ++i) {
        double dx, dy;
        trajectory_offset(mo, i, length, &dx, &dy);
        double cx = cx0 + dx, cy = cy0 + dy;
        Frame f({channels, height, width});
        bool articulated = mo.kind == TrajectoryKind::kArticulatedSwing;
        double t = length > 1 ? static_cast<double>(i) / (length - 1) : 0.0;
        double joint =
            articulated
                ? mo.joint_amp * (std::sin(2 * M_PI * mo.joint_freq * t + mo.joint_phase) -
                                  std::sin(mo.joint_phase))
                : 0.0;
        // Articulated sprite: a torso box plus a limb box swinging around a
        // pivot at the torso's right edge.
        double torso_hw = articulated ? ap.half_w * 0.6 : ap.half_w;
        double limb_hw = ap.half_w * 0.45, limb_hh = ap.half_h * 0.35;
        double pivot_x = cx + torso_hw, pivot_y = cy;
        double base_ang = -0.5 + joint;
        double limb_cx = pivot_x + limb_hw * std::cos(base_ang);
        double limb_cy = pivot_y + limb_hw * std::sin(base_ang);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double cov;
                if (articulated) {
                    double c1 = box_coverage(x, y, cx, cy, torso_hw, ap.half_h);
                    double c2 =
                        rot_box_coverage(x, y, limb_cx, limb_cy, limb_hw, limb_hh, base_ang);
                    cov = std::min(1.0, c1 + c2);
                } else if (ap.ellipse) {
                    cov = ellipse_coverage(x, y, cx, cy, ap.half_w, ap.half_h);
                } else {
                    cov = box_coverage(x, y, cx, cy, ap.half_w, ap.half_h);
                }
                for (int c = 0; c < channels; ++c) {
                    float tex = texture_at(ap, x - cx, y - cy, c);
                    f.at(c, y, x) =
                        static_cast<float>(ap.background[c] + cov * (tex - ap.background[c]));
                }
            }
        v.frames.push_back(std::move(f));
    }
    return v;
}

void validate_sprite_config(const SpriteDatasetConfig& cfg) {
    if (cfg.n_videos < 1) throw ParamError("n_videos must be >= 1");
    if (cfg.length < 2) throw ParamError("length must be >= 2");
    if (cfg.height < 16 || cfg.width < 16) throw ParamError("frames must be at least 16x16");
    if (cfg.channels != 1 && cfg.channels != 3) throw ParamError("channels must be 1 or 3");
    if (cfg.motion.amplitude < 0 ||
        cfg.motion.amplitude >= std::min(cfg.height, cfg.width) / 4.0)
        throw ParamError("amplitude must be in [0, min(H,W)/4)");
    if (cfg.motion.n_harmonics < 1 || cfg.motion.n_harmonics > 4)
        throw ParamError("n_harmonics must be in [1,4]");
}

namespace {

Video render_indexed(const SpriteDatasetConfig& cfg, int index) {
    Rng ap_rng(Rng::mix(cfg.motion.seed, 2 * static_cast<uint64_t>(index)));
    Rng mo_rng(Rng::mix(cfg.motion.seed, 2 * static_cast<uint64_t>(index) + 1));
    SpriteAppearance ap = sample_appearance(ap_rng, cfg.height, cfg.width, cfg.channels);
    SpriteMotion mo = sample_motion(cfg.motion, mo_rng);
    return render_sprite_video(ap, mo, cfg.length, cfg.height, cfg.width, cfg.channels, cfg.fps);
}

}  // namespace

std::vector<Video> make_sprite_dataset(const SpriteDatasetConfig& cfg) {
    validate_sprite_config(cfg);
    std::vector<Video> out;
    out.reserve(cfg.n_videos);
    for (int i = 0; i < cfg.n_videos; ++i) out.push_back(render_indexed(cfg, i));
    return out;
}

void write_sprite_dataset(const SpriteDatasetConfig& cfg, const fs::path& dir) {
    validate_sprite_config(cfg);
    fs::create_directories(dir);
    json manifest;
    manifest["n_videos"] = cfg.n_videos;
    manifest["length"] = cfg.length;
    manifest["height"] = cfg.height;
    manifest["width"] = cfg.width;
    manifest["channels"] = cfg.channels;
    manifest["fps"] = cfg.fps;
    manifest["seed"] = cfg.motion.seed;
    json vids = json::array();
    for (int i = 0; i < cfg.n_videos; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "video_%05d", i);
        Video v = render_indexed(cfg, i);
        save_video(v, dir / name);
        vids.push_back({{"dir", name},
                        {"trajectory_kind", trajectory_name(cfg.motion.trajectory_kind)},
                        {"amplitude", cfg.motion.amplitude},
                        {"n_harmonics", cfg.motion.n_harmonics},
                        {"seed", Rng::mix(cfg.motion.seed, 2 * static_cast<uint64_t>(i) + 1)}});
    }
    manifest["videos"] = vids;
    std::ofstream out(dir / "dataset.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed to write dataset.json in " + dir.string());
}

std::vector<fs::path> dataset_video_dirs(const fs::path& dir) {
    fs::path mf = dir / "dataset.json";
    if (!fs::exists(mf)) throw IoError("no dataset.json in " + dir.string());
    json manifest;
    std::ifstream in(mf);
    in >> manifest;
    std::vector<fs::path> dirs;
    for (const auto& v : manifest.at("videos")) dirs.push_back(dir / v.at("dir").get<std::string>());
    return dirs;
}

}  // namespace leo
