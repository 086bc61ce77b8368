#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "leo/tensor.hpp"

namespace leo {

/// A frame is a [C,H,W] float tensor with values in [0,1], C = 1 or 3.
using Frame = Tensor;

struct Video {
    std::vector<Frame> frames;
    double fps = 25.0;

    int length() const { return static_cast<int>(frames.size()); }
    int channels() const { return frames.empty() ? 0 : frames[0].dim(0); }
    int height() const { return frames.empty() ? 0 : frames[0].dim(1); }
    int width() const { return frames.empty() ? 0 : frames[0].dim(2); }
};

void check_frame(const Frame& f, const std::string& what);

/// 8-bit PNG round trip; quantization error is at most 1/255 per channel.
void save_frame_png(const Frame& f, const std::filesystem::path& file);
Frame load_frame_png(const std::filesystem::path& file);

/// Frame-directory format: frame_%05d.png plus meta.json {fps,length,height,width,channels}.
void save_video(const Video& v, const std::filesystem::path& dir);
Video load_video(const std::filesystem::path& dir);

std::string frame_file_name(int index);

}  // namespace leo
