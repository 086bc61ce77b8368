#include "leo/tensor.hpp"

#include <cmath>
#include <sstream>

namespace leo {

int Rng::randint(int lo, int hi) {
    if (hi <= lo) throw ParamError("randint: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo);
    // Rejection sampling keeps the distribution exact.
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
        r = gen_();
    } while (r >= limit);
    return lo + static_cast<int>(r % span);
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

uint64_t Rng::mix(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

template <class T>
bool TensorT<T>::all_finite() const {
    for (T v : data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template struct TensorT<float>;
template struct TensorT<double>;

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

}  // namespace leo
