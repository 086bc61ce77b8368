#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "leo/metrics.hpp"
#include "leo/pipeline.hpp"
#include "leo/sprites.hpp"

namespace py = pybind11;
using namespace leo;

namespace {

Tensor tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    Tensor t;
    t.shape.assign(a.ndim(), 0);
    for (int i = 0; i < a.ndim(); ++i) t.shape[i] = static_cast<int>(a.shape(i));
    t.data.assign(a.data(), a.data() + a.size());
    return t;
}

TensorD tensord_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    TensorD t;
    t.shape.assign(a.ndim(), 0);
    for (int i = 0; i < a.ndim(); ++i) t.shape[i] = static_cast<int>(a.shape(i));
    t.data.assign(a.data(), a.data() + a.size());
    return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    std::vector<ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<float> a(shape);
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

py::array_t<double> array_from_tensord(const TensorD& t) {
    std::vector<ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> a(shape);
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

Video video_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                       double fps) {
    if (a.ndim() != 4) throw ParamError("video array must be [L,C,H,W]");
    Video v;
    v.fps = fps;
    long per = a.shape(1) * a.shape(2) * a.shape(3);
    for (ssize_t i = 0; i < a.shape(0); ++i) {
        Frame f({static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                 static_cast<int>(a.shape(3))});
        std::copy(a.data() + i * per, a.data() + (i + 1) * per, f.data.begin());
        v.frames.push_back(std::move(f));
    }
    return v;
}

py::array_t<float> array_from_video(const Video& v) {
    py::array_t<float> a({static_cast<ssize_t>(v.length()), static_cast<ssize_t>(v.channels()),
                          static_cast<ssize_t>(v.height()), static_cast<ssize_t>(v.width())});
    long per = v.frames[0].numel();
    for (int i = 0; i < v.length(); ++i)
        std::copy(v.frames[i].data.begin(), v.frames[i].data.end(), a.mutable_data() + i * per);
    return a;
}

std::vector<Video> videos_from_list(const py::list& vids, double fps) {
    std::vector<Video> out;
    for (auto item : vids)
        out.push_back(video_from_array(
            item.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(), fps));
    return out;
}

std::vector<FeatureVector> features_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ParamError("feature set must be [n, d]");
    std::vector<FeatureVector> out(a.shape(0));
    for (ssize_t i = 0; i < a.shape(0); ++i) {
        out[i].values.assign(a.data() + i * a.shape(1), a.data() + (i + 1) * a.shape(1));
        out[i].extractor_id = "external";
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(leo_core, m) {
    m.doc() = "Flow-based image animator + latent motion diffusion models over sprite videos";

    // ---- synthetic data / video io ----
    m.def(
        "make_sprite_dataset",
        [](int n_videos, int length, int height, int width, int channels,
           const std::string& trajectory, double amplitude, int n_harmonics, uint64_t seed) {
            SpriteDatasetConfig cfg;
            cfg.n_videos = n_videos;
            cfg.length = length;
            cfg.height = height;
            cfg.width = width;
            cfg.channels = channels;
            cfg.motion.trajectory_kind = trajectory_from_name(trajectory);
            cfg.motion.amplitude = amplitude;
            cfg.motion.n_harmonics = n_harmonics;
            cfg.motion.seed = seed;
            auto ds = make_sprite_dataset(cfg);
            py::list out;
            for (const auto& v : ds) out.append(array_from_video(v));
            return out;
        },
        py::arg("n_videos"), py::arg("length"), py::arg("height") = 64, py::arg("width") = 64,
        py::arg("channels") = 1, py::arg("trajectory") = "sinusoid-sum",
        py::arg("amplitude") = 10.0, py::arg("n_harmonics") = 2, py::arg("seed") = 0);
    m.def(
        "save_video",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& v,
           const std::filesystem::path& dir,
           double fps) { save_video(video_from_array(v, fps), dir); },
        py::arg("video"), py::arg("dir"), py::arg("fps") = 25.0);
    m.def("load_video", [](const std::filesystem::path& dir) {
        return array_from_video(load_video(dir));
    });

    // ---- diffusion core ----
    py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
        .def_readonly("steps", &DiffusionSchedule::steps)
        .def_readonly("betas", &DiffusionSchedule::betas)
        .def_readonly("alpha_bars", &DiffusionSchedule::alpha_bars);
    m.def("make_schedule", &make_schedule, py::arg("steps"), py::arg("beta_start") = 1e-4,
          py::arg("beta_end") = 0.02, py::arg("kind") = ScheduleKind::kLinear);
    py::enum_<ScheduleKind>(m, "ScheduleKind").value("linear", ScheduleKind::kLinear);
    m.def(
        "q_sample",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x0, int t,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& eps,
           const DiffusionSchedule& s) {
            return array_from_tensor(q_sample(tensor_from_array(x0), t, tensor_from_array(eps), s));
        },
        py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("sched"));

    // ---- linear motion reparameterization ----
    m.def("split_sequence", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
        auto r = split_sequence(tensor_from_array(a));
        return py::make_tuple(array_from_tensor(r.anchor), array_from_tensord(r.residuals));
    });
    m.def("merge_sequence",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& anchor,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& residuals) {
              return array_from_tensor(
                  merge_sequence(tensor_from_array(anchor), tensord_from_array(residuals)));
          });
    m.def("lmc_condition",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& m_t,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& anchor) {
              return array_from_tensor(
                  lmc_condition(tensor_from_array(m_t), tensor_from_array(anchor)));
          });

    // ---- animator ----
    py::class_<AnimatorModel, std::shared_ptr<AnimatorModel>>(m, "Animator")
        .def_static(
            "train",
            [](const py::list& videos, int motion_dim, int steps, int batch, float lr,
               uint64_t seed, int enc_base, int feat_base, int inpaint_base, double fps) {
                auto ds = videos_from_list(videos, fps);
                if (ds.empty()) throw ParamError("train: empty dataset");
                AnimatorConfig cfg;
                cfg.motion_dim = motion_dim;
                cfg.channels = ds[0].channels();
                cfg.height = ds[0].height();
                cfg.width = ds[0].width();
                cfg.enc_base = enc_base;
                cfg.feat_base = feat_base;
                cfg.inpaint_base = inpaint_base;
                AnimatorTrainConfig tc;
                tc.steps = steps;
                tc.batch = batch;
                tc.lr = lr;
                tc.seed = seed;
                return std::make_shared<AnimatorModel>(train_animator(ds, cfg, tc));
            },
            py::arg("videos"), py::arg("motion_dim") = 20, py::arg("steps") = 1000,
            py::arg("batch") = 8, py::arg("lr") = 2e-4f, py::arg("seed") = 1,
            py::arg("enc_base") = 16, py::arg("feat_base") = 16, py::arg("inpaint_base") = 12,
            py::arg("fps") = 25.0)
        .def_static("load",
                    [](const std::filesystem::path& dir) {
                        return std::make_shared<AnimatorModel>(load_animator(dir));
                    })
        .def("save", [](const AnimatorModel& m,
                        const std::filesystem::path& dir) { save_animator(m, dir); })
        .def_property_readonly("motion_dim",
                               [](const AnimatorModel& m) { return m.cfg.motion_dim; })
        .def("encode",
             [](const AnimatorModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& f) {
                 return array_from_tensor(m.encode(tensor_from_array(f)));
             })
        .def("encode_video",
             [](const AnimatorModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& v) {
                 return array_from_tensor(m.encode_video(video_from_array(v, 25.0)));
             })
        .def("decode_flow",
             [](const AnimatorModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& src,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& code) {
                 FlowField f = m.decode_flow(tensor_from_array(src), tensor_from_array(code));
                 return py::make_tuple(array_from_tensor(f.displacement),
                                       array_from_tensor(f.mask));
             })
        .def("inpaint",
             [](const AnimatorModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& warped,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& mask,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& src) {
                 return array_from_tensor(m.inpaint(tensor_from_array(warped),
                                                    tensor_from_array(mask),
                                                    tensor_from_array(src)));
             })
        .def("animate",
             [](const AnimatorModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& x1,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& codes) {
                 return array_from_video(m.animate(tensor_from_array(x1),
                                                   tensor_from_array(codes)));
             });

    m.def("warp",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& frame,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& disp) {
              FlowField f;
              f.displacement = tensor_from_array(disp);
              f.mask = Tensor::full({f.displacement.dim(1), f.displacement.dim(2)}, 1.0f);
              return array_from_tensor(warp_frame(tensor_from_array(frame), f));
          },
          py::arg("frame"), py::arg("displacement"));

    // ---- latent motion diffusion models ----
    py::class_<LmdmModel, std::shared_ptr<LmdmModel>>(m, "Lmdm")
        .def_static(
            "train_clmdm",
            [](const py::list& seqs, int steps, int batch, float lr, uint64_t seed,
               int timesteps, int base_channels) {
                std::vector<MotionSequence> data;
                for (auto s : seqs)
                    data.push_back(tensor_from_array(
                        s.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>()));
                LmdmTrainConfig cfg;
                cfg.steps = steps;
                cfg.batch = batch;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.timesteps = timesteps;
                cfg.base_channels = base_channels;
                return std::make_shared<LmdmModel>(train_clmdm(data, cfg));
            },
            py::arg("sequences"), py::arg("steps") = 3000, py::arg("batch") = 16,
            py::arg("lr") = 1e-4f, py::arg("seed") = 1, py::arg("timesteps") = 1000,
            py::arg("base_channels") = 48)
        .def_static(
            "train_unconditional",
            [](const py::list& seqs, int steps, int batch, float lr, uint64_t seed,
               int timesteps, int base_channels) {
                std::vector<MotionSequence> data;
                for (auto s : seqs)
                    data.push_back(tensor_from_array(
                        s.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>()));
                LmdmTrainConfig cfg;
                cfg.steps = steps;
                cfg.batch = batch;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.timesteps = timesteps;
                cfg.base_channels = base_channels;
                return std::make_shared<LmdmModel>(train_lmdm_unconditional(data, cfg));
            },
            py::arg("sequences"), py::arg("steps") = 3000, py::arg("batch") = 16,
            py::arg("lr") = 1e-4f, py::arg("seed") = 1, py::arg("timesteps") = 1000,
            py::arg("base_channels") = 48)
        .def_static(
            "train_transition",
            [](const py::list& seqs, int window, int steps, int batch, float lr, uint64_t seed,
               int timesteps, int base_channels) {
                std::vector<MotionSequence> data;
                for (auto s : seqs)
                    data.push_back(tensor_from_array(
                        s.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>()));
                LmdmTrainConfig cfg;
                cfg.steps = steps;
                cfg.batch = batch;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.timesteps = timesteps;
                cfg.base_channels = base_channels;
                return std::make_shared<LmdmModel>(train_transition_dm(data, window, cfg));
            },
            py::arg("sequences"), py::arg("window") = 16, py::arg("steps") = 1500,
            py::arg("batch") = 16, py::arg("lr") = 3e-4f, py::arg("seed") = 1,
            py::arg("timesteps") = 1000, py::arg("base_channels") = 48)
        .def_static("load",
                    [](const std::filesystem::path& dir) {
                        return std::make_shared<LmdmModel>(load_lmdm(dir));
                    })
        .def("save", [](const LmdmModel& m, const std::filesystem::path& dir) { save_lmdm(m, dir); })
        .def_property_readonly("seq_len", [](const LmdmModel& m) { return m.seq_len; })
        .def_property_readonly("code_dim", [](const LmdmModel& m) { return m.code_dim; })
        .def("sample",
             [](const LmdmModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& anchor,
                int seq_len, uint64_t seed, int ddim_stride) {
                 Rng rng(seed);
                 return array_from_tensor(
                     sample_clmdm(m, tensor_from_array(anchor), seq_len, rng, ddim_stride));
             },
             py::arg("anchor"), py::arg("seq_len"), py::arg("seed") = 0,
             py::arg("ddim_stride") = 0)
        .def("sample_unconditional",
             [](const LmdmModel& m, int seq_len, uint64_t seed, int ddim_stride) {
                 Rng rng(seed);
                 return array_from_tensor(sample_lmdm_unconditional(m, seq_len, rng, ddim_stride));
             },
             py::arg("seq_len"), py::arg("seed") = 0, py::arg("ddim_stride") = 0)
        .def("sample_transition",
             [](const LmdmModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& start,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& target,
                int length, uint64_t seed, int ddim_stride) {
                 Rng rng(seed);
                 return array_from_tensor(sample_transition(m, tensor_from_array(start),
                                                            tensor_from_array(target), length,
                                                            rng, ddim_stride));
             },
             py::arg("start"), py::arg("target"), py::arg("length"), py::arg("seed") = 0,
             py::arg("ddim_stride") = 0);

    // ---- starting frame models ----
    py::class_<SimpleDmModel, std::shared_ptr<SimpleDmModel>>(m, "SimpleDm")
        .def_static(
            "train",
            [](const py::array_t<float, py::array::c_style | py::array::forcecast>& codes,
               int steps, int batch, float lr, uint64_t seed, int timesteps, int hidden) {
                if (codes.ndim() != 2) throw ParamError("codes must be [n,N]");
                std::vector<MotionCode> pool;
                for (ssize_t i = 0; i < codes.shape(0); ++i) {
                    Tensor c({static_cast<int>(codes.shape(1))});
                    std::copy(codes.data() + i * codes.shape(1),
                              codes.data() + (i + 1) * codes.shape(1), c.data.begin());
                    pool.push_back(std::move(c));
                }
                SimpleDmTrainConfig cfg;
                cfg.steps = steps;
                cfg.batch = batch;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.timesteps = timesteps;
                cfg.hidden = hidden;
                return std::make_shared<SimpleDmModel>(train_simple_dm(pool, cfg));
            },
            py::arg("codes"), py::arg("steps") = 4000, py::arg("batch") = 64,
            py::arg("lr") = 5e-4f, py::arg("seed") = 1, py::arg("timesteps") = 1000,
            py::arg("hidden") = 128)
        .def_static("load",
                    [](const std::filesystem::path& dir) {
                        return std::make_shared<SimpleDmModel>(load_simple_dm(dir));
                    })
        .def("save",
             [](const SimpleDmModel& m, const std::filesystem::path& dir) { save_simple_dm(m, dir); })
        .def("sample",
             [](const SimpleDmModel& m, uint64_t seed, int ddim_stride) {
                 Rng rng(seed);
                 return array_from_tensor(sample_alpha1(m, rng, ddim_stride));
             },
             py::arg("seed") = 0, py::arg("ddim_stride") = 0);

    py::class_<CddpmModel, std::shared_ptr<CddpmModel>>(m, "Cddpm")
        .def_static(
            "train",
            [](const py::list& frames, const py::list& codes, int steps, int batch, float lr,
               uint64_t seed, int timesteps, int base_channels) {
                if (py::len(frames) != py::len(codes))
                    throw ParamError("frames/codes length mismatch");
                std::vector<std::pair<Frame, MotionCode>> pairs;
                for (size_t i = 0; i < py::len(frames); ++i)
                    pairs.push_back(
                        {tensor_from_array(frames[i].cast<py::array_t<
                             float, py::array::c_style | py::array::forcecast>>()),
                         tensor_from_array(codes[i].cast<py::array_t<
                             float, py::array::c_style | py::array::forcecast>>())});
                CddpmTrainConfig cfg;
                cfg.steps = steps;
                cfg.batch = batch;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.timesteps = timesteps;
                cfg.base_channels = base_channels;
                return std::make_shared<CddpmModel>(train_cddpm(pairs, cfg));
            },
            py::arg("frames"), py::arg("codes"), py::arg("steps") = 3000, py::arg("batch") = 8,
            py::arg("lr") = 2e-4f, py::arg("seed") = 1, py::arg("timesteps") = 1000,
            py::arg("base_channels") = 16)
        .def_static("load",
                    [](const std::filesystem::path& dir) {
                        return std::make_shared<CddpmModel>(load_cddpm(dir));
                    })
        .def("save", [](const CddpmModel& m, const std::filesystem::path& dir) { save_cddpm(m, dir); })
        .def("sample",
             [](const CddpmModel& m,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& alpha1,
                uint64_t seed, int ddim_stride) {
                 Rng rng(seed);
                 return array_from_tensor(sample_frame(m, tensor_from_array(alpha1), rng,
                                                       ddim_stride));
             },
             py::arg("alpha1"), py::arg("seed") = 0, py::arg("ddim_stride") = 0);

    m.def("from_image",
          [](std::shared_ptr<AnimatorModel> animator, const std::filesystem::path& image) {
              auto [x1, code] = from_image(*animator, image);
              return py::make_tuple(array_from_tensor(x1), array_from_tensor(code));
          });

    // ---- pipeline ----
    m.def(
        "generate_unconditional",
        [](std::shared_ptr<AnimatorModel> animator, std::shared_ptr<LmdmModel> clmdm,
           std::shared_ptr<SimpleDmModel> simple_dm, std::shared_ptr<CddpmModel> cddpm,
           int n_frames, uint64_t seed, int ddim_stride) {
            ModelSet s;
            s.animator = animator.get();
            s.clmdm = clmdm.get();
            s.simple_dm = simple_dm.get();
            s.cddpm = cddpm.get();
            s.ddim_stride = ddim_stride;
            auto r = generate_unconditional(s, n_frames, seed);
            return py::make_tuple(array_from_video(r.video), array_from_tensor(r.codes));
        },
        py::arg("animator"), py::arg("clmdm"), py::arg("simple_dm"), py::arg("cddpm"),
        py::arg("n_frames") = 16, py::arg("seed") = 0, py::arg("ddim_stride") = 0);
    m.def(
        "generate_conditional",
        [](std::shared_ptr<AnimatorModel> animator, std::shared_ptr<LmdmModel> clmdm,
           const std::filesystem::path& image, int n_frames, uint64_t seed, int ddim_stride) {
            ModelSet s;
            s.animator = animator.get();
            s.clmdm = clmdm.get();
            s.ddim_stride = ddim_stride;
            auto r = generate_conditional(s, image, n_frames, seed);
            return py::make_tuple(array_from_video(r.video), array_from_tensor(r.codes));
        },
        py::arg("animator"), py::arg("clmdm"), py::arg("image"), py::arg("n_frames") = 16,
        py::arg("seed") = 0, py::arg("ddim_stride") = 0);
    m.def(
        "rollout",
        [](std::shared_ptr<AnimatorModel> animator, std::shared_ptr<LmdmModel> clmdm,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& x1,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& alpha1,
           int n_chunks, int chunk_len, uint64_t seed, int ddim_stride) {
            ModelSet s;
            s.animator = animator.get();
            s.clmdm = clmdm.get();
            s.ddim_stride = ddim_stride;
            auto r = rollout(s, tensor_from_array(x1), tensor_from_array(alpha1), n_chunks,
                             chunk_len, seed);
            return py::make_tuple(array_from_video(r.video), array_from_tensor(r.codes));
        },
        py::arg("animator"), py::arg("clmdm"), py::arg("x1"), py::arg("alpha1"),
        py::arg("n_chunks"), py::arg("chunk_len"), py::arg("seed") = 0,
        py::arg("ddim_stride") = 0);
    m.def(
        "edit_appearance",
        [](std::shared_ptr<AnimatorModel> animator,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& codes,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& new_x1) {
            ModelSet s;
            s.animator = animator.get();
            auto r = edit_appearance(s, tensor_from_array(codes), tensor_from_array(new_x1));
            return py::make_tuple(array_from_video(r.video), array_from_tensor(r.codes));
        },
        py::arg("animator"), py::arg("codes"), py::arg("new_x1"));

    // ---- metrics ----
    m.def("frame_features",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& f) {
              auto v = frame_features(tensor_from_array(f));
              py::array_t<double> a(static_cast<ssize_t>(v.values.size()));
              std::copy(v.values.begin(), v.values.end(), a.mutable_data());
              return py::make_tuple(a, v.degenerate);
          });
    m.def("acd", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& v) {
        return acd(video_from_array(v, 25.0));
    });
    m.def("frechet_distance",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return frechet_distance(features_from_array(a), features_from_array(b));
          });
    m.def("kernel_distance",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return kernel_distance(features_from_array(a), features_from_array(b)).value;
          });
    m.def("psnr", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return psnr(tensor_from_array(a), tensor_from_array(b));
    });

    py::register_exception<ParamError>(m, "ParamError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ConfigError>(m, "ConfigErrorLeo", PyExc_ValueError);
}
