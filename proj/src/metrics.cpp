#include "leo/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace leo {

namespace {
constexpr int kPool = 8;
constexpr const char* kExtractorId = "avgpool8x8-l2";
}  // namespace

FeatureVector frame_features(const Frame& frame) {
    check_frame(frame, "frame_features");
    int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    FeatureVector f;
    f.extractor_id = kExtractorId;
    f.values.assign(kPool * kPool, 0.0);
    // average intensity over channels, then average-pool into an 8x8 grid
    for (int gy = 0; gy < kPool; ++gy) {
        int y0 = gy * H / kPool, y1 = (gy + 1) * H / kPool;
        for (int gx = 0; gx < kPool; ++gx) {
            int x0 = gx * W / kPool, x1 = (gx + 1) * W / kPool;
            double s = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    double px = 0;
                    for (int c = 0; c < C; ++c) px += frame.at(c, y, x);
                    s += px / C;
                }
            f.values[gy * kPool + gx] = s / ((y1 - y0) * (x1 - x0));
        }
    }
    double norm = 0;
    for (double v : f.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        f.degenerate = true;  // zero-energy frame stays the zero vector
        return f;
    }
    for (double& v : f.values) v /= norm;
    return f;
}

double acd(const Video& video) {
    if (video.length() < 2) throw ParamError("acd: need at least 2 frames");
    std::vector<FeatureVector> fs;
    fs.reserve(video.frames.size());
    for (const auto& fr : video.frames) fs.push_back(frame_features(fr));
    double total = 0;
    long pairs = 0;
    for (size_t i = 0; i < fs.size(); ++i)
        for (size_t j = i + 1; j < fs.size(); ++j) {
            double d2 = 0;
            for (size_t k = 0; k < fs[i].values.size(); ++k) {
                double d = fs[i].values[k] - fs[j].values[k];
                d2 += d * d;
            }
            total += std::sqrt(d2);
            ++pairs;
        }
    return total / pairs;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void fit_gaussian(const std::vector<FeatureVector>& set, Vec* mu, Mat* sigma) {
    if (set.empty()) throw ParamError("metrics: empty feature set");
    long n = static_cast<long>(set.size());
    long d = static_cast<long>(set[0].values.size());
    Mat X(n, d);
    for (long i = 0; i < n; ++i) {
        if (static_cast<long>(set[i].values.size()) != d)
            throw ParamError("metrics: inconsistent feature dims");
        for (long j = 0; j < d; ++j) X(i, j) = set[i].values[j];
    }
    *mu = X.colwise().mean();
    Mat centered = X.rowwise() - mu->transpose();
    *sigma = centered.transpose() * centered / std::max<long>(1, n - 1);
    // shrinkage keeps desk-scale covariances full rank
    *sigma += 1e-6 * Mat::Identity(d, d);
}

Mat sym_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const std::vector<FeatureVector>& a,
                        const std::vector<FeatureVector>& b) {
    Vec mu_a, mu_b;
    Mat s_a, s_b;
    fit_gaussian(a, &mu_a, &s_a);
    fit_gaussian(b, &mu_b, &s_b);
    if (mu_a.size() != mu_b.size()) throw ParamError("frechet: feature dims differ");

    // sqrtm(S_A S_B) = R Q R^{-1} with R = sqrtm(S_A), Q = sqrtm(R S_B R):
    // similarity to a symmetric PSD problem keeps the eigensolver applicable.
    Mat r = sym_sqrt(s_a);
    Mat q = sym_sqrt(r * s_b * r);
    Mat r_inv = r.ldlt().solve(Mat::Identity(r.rows(), r.cols()));
    Mat s = r * q * r_inv;

    Mat prod = s_a * s_b;
    double err = (s * s - prod).norm() / std::max(prod.norm(), 1e-300);
    if (err > 1e-6)
        throw NumericError("frechet: matrix sqrt validation failed, rel err " +
                           std::to_string(err));

    double mean_term = (mu_a - mu_b).squaredNorm();
    double tr = (s_a + s_b - 2.0 * s).trace();
    return mean_term + tr;
}

KernelResult kernel_distance(const std::vector<FeatureVector>& a,
                             const std::vector<FeatureVector>& b) {
    if (a.size() < 2 || b.size() < 2) throw ParamError("kernel_distance: need >= 2 per set");
    long d = static_cast<long>(a[0].values.size());
    auto kernel = [d](const FeatureVector& x, const FeatureVector& y) {
        double dot = 0;
        for (long i = 0; i < d; ++i) dot += x.values[i] * y.values[i];
        double base = dot / d + 1.0;
        return base * base * base;
    };
    double kaa = 0, kbb = 0, kab = 0;
    long na = static_cast<long>(a.size()), nb = static_cast<long>(b.size());
    for (long i = 0; i < na; ++i)
        for (long j = 0; j < na; ++j)
            if (i != j) kaa += kernel(a[i], a[j]);
    for (long i = 0; i < nb; ++i)
        for (long j = 0; j < nb; ++j)
            if (i != j) kbb += kernel(b[i], b[j]);
    for (long i = 0; i < na; ++i)
        for (long j = 0; j < nb; ++j) kab += kernel(a[i], b[j]);
    KernelResult r;
    r.raw = kaa / (static_cast<double>(na) * (na - 1)) +
            kbb / (static_cast<double>(nb) * (nb - 1)) -
            2.0 * kab / (static_cast<double>(na) * nb);
    r.value = r.raw;
    if (r.raw < 0) {
        r.clipped = true;
        r.value = 0.0;
    }
    return r;
}

double psnr(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw ParamError("psnr: shape mismatch");
    double mse = 0;
    for (long i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        mse += d * d;
    }
    mse /= a.numel();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<FeatureVector> clip_features(const std::vector<Video>& videos, int clip_len) {
    std::vector<FeatureVector> out;
    for (const auto& v : videos) {
        int n = std::min<int>(clip_len, v.length());
        for (int i = 0; i < n; ++i) out.push_back(frame_features(v.frames[i]));
    }
    return out;
}

}  // namespace leo
