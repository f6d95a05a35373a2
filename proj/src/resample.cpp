#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"

namespace apnea::ingest {

namespace {

constexpr int kHalfWidth = 64;
constexpr double kKaiserBeta = 8.6;

// modified Bessel function of the first kind, order 0 (power series)
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = (x / 2.0) * (x / 2.0);
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

double kaiser(double t) {  // t in [-1, 1]
    const double arg = 1.0 - t * t;
    if (arg < 0.0) return 0.0;
    return bessel_i0(kKaiserBeta * std::sqrt(arg)) / bessel_i0(kKaiserBeta);
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

Signal resample(const Signal& signal, double target_hz) {
    if (target_hz <= 0.0) throw ConfigError("resample: target rate must be positive");
    if (signal.sample_rate_hz <= 0.0) throw ConfigError("resample: source rate must be positive");
    if (signal.sample_rate_hz == target_hz) return signal;

    const double ratio = signal.sample_rate_hz / target_hz;  // input samples per output sample
    const double cutoff = std::min(1.0, 1.0 / ratio);        // relative to input Nyquist
    const auto n_in = static_cast<std::ptrdiff_t>(signal.samples.size());
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_in) * target_hz / signal.sample_rate_hz));

    Signal out;
    out.sample_rate_hz = target_hz;
    out.samples.resize(n_out);

    // Taps are normalized per output sample so a constant signal stays
    // constant, including near the edges where the kernel is truncated.
    for (std::size_t i = 0; i < n_out; ++i) {
        const double center = static_cast<double>(i) * ratio;
        const auto k_lo = static_cast<std::ptrdiff_t>(std::ceil(center)) - kHalfWidth;
        const auto k_hi = static_cast<std::ptrdiff_t>(std::floor(center)) + kHalfWidth;
        double acc = 0.0, norm = 0.0;
        for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, k_lo);
             k <= std::min(n_in - 1, k_hi); ++k) {
            const double u = center - static_cast<double>(k);
            const double w = cutoff * sinc(cutoff * u) * kaiser(u / kHalfWidth);
            acc += w * static_cast<double>(signal.samples[k]);
            norm += w;
        }
        out.samples[i] = norm != 0.0 ? static_cast<float>(acc / norm) : 0.0f;
    }
    return out;
}

}  // namespace apnea::ingest
