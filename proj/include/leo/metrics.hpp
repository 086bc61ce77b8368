#pragma once

#include <string>
#include <vector>

#include "leo/image.hpp"

namespace leo {

struct FeatureVector {
    std::vector<double> values;
    std::string extractor_id;
    bool degenerate = false;  // zero-energy frame, normalization skipped
};

/// Toy per-frame feature: 8x8 average-pooled intensity grid, flattened and
/// L2-normalized (D = 64). Stands in for the paper-scale pretrained
/// extractors, which are out of scope here.
FeatureVector frame_features(const Frame& frame);

/// Mean pairwise L2 distance between per-frame features over all unordered
/// frame pairs. Needs at least 2 frames.
double acd(const Video& video);

/// Fréchet distance between Gaussian fits of two feature sets:
/// ||mu_A-mu_B||^2 + tr(S_A + S_B - 2 (S_A S_B)^{1/2}).
/// Covariances get +1e-6 I shrinkage; the matrix square root is validated by
/// squaring (relative Frobenius error <= 1e-6) on every call.
double frechet_distance(const std::vector<FeatureVector>& a,
                        const std::vector<FeatureVector>& b);

struct KernelResult {
    double value = 0;      // clipped at 0
    double raw = 0;        // unbiased estimate, may be slightly negative
    bool clipped = false;  // raw was negative within tolerance
};

/// Unbiased MMD^2 with the polynomial kernel (x.y/D + 1)^3.
KernelResult kernel_distance(const std::vector<FeatureVector>& a,
                             const std::vector<FeatureVector>& b);

/// 10*log10(1/MSE) on [0,1] frames; +inf for identical frames.
double psnr(const Frame& a, const Frame& b);

/// Per-frame features of the first `clip_len` frames of each video, pooled
/// into one set (FVD-16 protocol shape).
std::vector<FeatureVector> clip_features(const std::vector<Video>& videos, int clip_len = 16);

}  // namespace leo
