#include "leo/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace leo {

namespace fs = std::filesystem;
using nlohmann::json;

void check_frame(const Frame& f, const std::string& what) {
    if (f.ndim() != 3) throw ParamError(what + ": frame must be [C,H,W]");
    int c = f.dim(0);
    if (c != 1 && c != 3) throw ParamError(what + ": channels must be 1 or 3");
    if (f.dim(1) < 16 || f.dim(2) < 16) throw ParamError(what + ": frame smaller than 16x16");
}

std::string frame_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.png", index);
    return buf;
}

void save_frame_png(const Frame& f, const fs::path& file) {
    check_frame(f, "save_frame_png");
    int C = f.dim(0), H = f.dim(1), W = f.dim(2);
    cv::Mat img(H, W, C == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            auto q = [&](int c) {
                float v = std::min(std::max(f.at(c, y, x), 0.0f), 1.0f);
                return static_cast<uint8_t>(std::lround(v * 255.0f));
            };
            if (C == 1) {
                img.at<uint8_t>(y, x) = q(0);
            } else {
                // OpenCV stores BGR
                img.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));
            }
        }
    if (!cv::imwrite(file.string(), img))
        throw IoError("failed to write " + file.string());
}

Frame load_frame_png(const fs::path& file) {
    cv::Mat img = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) throw IoError("failed to read " + file.string());
    if (img.depth() != CV_8U) throw IoError("unsupported bit depth in " + file.string());
    int C = img.channels() == 1 ? 1 : 3;
    Frame f({C, img.rows, img.cols});
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            if (C == 1) {
                f.at(0, y, x) = img.at<uint8_t>(y, x) / 255.0f;
            } else {
                auto px = img.at<cv::Vec3b>(y, x);
                f.at(0, y, x) = px[2] / 255.0f;
                f.at(1, y, x) = px[1] / 255.0f;
                f.at(2, y, x) = px[0] / 255.0f;
            }
        }
    return f;
}

void save_video(const Video& v, const fs::path& dir) {
    if (v.frames.size() < 1) throw ParamError("save_video: empty video");
    int C = v.channels(), H = v.height(), W = v.width();
    for (const auto& f : v.frames) {
        check_frame(f, "save_video");
        if (f.dim(0) != C || f.dim(1) != H || f.dim(2) != W)
            throw ParamError("save_video: inconsistent frame shapes");
    }
    fs::create_directories(dir);
    for (size_t i = 0; i < v.frames.size(); ++i)
        save_frame_png(v.frames[i], dir / frame_file_name(static_cast<int>(i)));
    json meta = {{"fps", v.fps},
                 {"length", v.length()},
                 {"height", H},
                 {"width", W},
                 {"channels", C}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
    if (!out) throw IoError("failed to write meta.json in " + dir.string());
}

Video load_video(const fs::path& dir) {
    fs::path meta_file = dir / "meta.json";
    if (!fs::exists(meta_file)) throw IoError("no meta.json in " + dir.string());
    json meta;
    {
        std::ifstream in(meta_file);
        try {
            in >> meta;
        } catch (const json::exception& e) {
            throw IoError("corrupt meta.json in " + dir.string() + ": " + e.what());
        }
    }
    Video v;
    v.fps = meta.at("fps").get<double>();
    int L = meta.at("length").get<int>();
    int H = meta.at("height").get<int>();
    int W = meta.at("width").get<int>();
    int C = meta.at("channels").get<int>();
    if (L < 1) throw IoError("meta.json declares empty video in " + dir.string());
    v.frames.reserve(L);
    for (int i = 0; i < L; ++i) {
        fs::path file = dir / frame_file_name(i);
        if (!fs::exists(file))
            throw IoError("missing frame " + std::to_string(i) + " in " + dir.string());
        Frame f = load_frame_png(file);
        if (f.dim(0) != C || f.dim(1) != H || f.dim(2) != W)
            throw IoError("frame " + std::to_string(i) + " has wrong shape in " + dir.string());
        v.frames.push_back(std::move(f));
    }
    return v;
}

}  // namespace leo
