#include "apnea/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "apnea/errors.hpp"
#include "apnea/fft.hpp"

namespace apnea::dsp {

void SpectrogramConfig::validate() const {
    if (sample_rate_hz <= 0) throw ConfigError("dsp: sample_rate_hz must be positive");
    if (n_fft == 0 || win_length == 0 || hop_length == 0 || n_mels == 0 || target_frames == 0)
        throw ConfigError("dsp: n_fft, win_length, hop_length, n_mels, target_frames must be positive");
    if (win_length > n_fft) throw ConfigError("dsp: win_length must not exceed n_fft");
    if (f_min_hz < 0 || f_max_hz <= f_min_hz) throw ConfigError("dsp: need 0 <= f_min_hz < f_max_hz");
    if (f_max_hz > sample_rate_hz / 2.0 + 1e-9)
        throw ConfigError("dsp: f_max_hz must not exceed the Nyquist frequency");
    if (eps <= 0) throw ConfigError("dsp: eps must be positive");
}

std::vector<double> hann_window(std::size_t length) {
    if (length == 0) throw ConfigError("hann_window: length must be >= 1");
    if (length == 1) return {1.0};
    std::vector<double> w(length);
    for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                    static_cast<double>(length - 1));
    return w;
}

double hz_to_mel(double f_hz) { return 2595.0 * std::log10(1.0 + f_hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const SpectrogramConfig& config) {
    config.validate();
    const std::size_t n_bins = config.n_bins();
    const double mel_lo = hz_to_mel(config.f_min_hz);
    const double mel_hi = hz_to_mel(config.f_max_hz);

    // edge frequencies: n_mels + 2 mel-uniform points
    std::vector<double> edges_hz(config.n_mels + 2);
    for (std::size_t i = 0; i < edges_hz.size(); ++i)
        edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                             static_cast<double>(config.n_mels + 1));

    std::vector<double> bank(config.n_mels * n_bins, 0.0);
    const double bin_hz = config.sample_rate_hz / static_cast<double>(config.n_fft);
    for (std::size_t m = 0; m < config.n_mels; ++m) {
        const double lo = edges_hz[m], center = edges_hz[m + 1], hi = edges_hz[m + 2];
        bool any = false;
        for (std::size_t b = 0; b < n_bins; ++b) {
            const double f = static_cast<double>(b) * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi)
                w = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            if (w > 0.0) {
                bank[m * n_bins + b] = w;
                any = true;
            }
        }
        if (!any)
            throw ConfigError("mel_filterbank: empty mel filter " + std::to_string(m) +
                              "; raise n_fft or lower n_mels");
    }
    return bank;
}

namespace {

// reflect padding without repeating the edge sample
double sample_reflected(std::span<const float> x, std::ptrdiff_t i) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return static_cast<double>(x[i]);
}

}  // namespace

PowerSpectrogram stft_power(std::span<const float> signal, const SpectrogramConfig& config) {
    config.validate();
    if (signal.empty()) throw ConfigError("stft_power: empty signal");
    if (signal.size() < config.n_fft / 2 + 1)
        throw ConfigError("stft_power: signal shorter than the reflect padding width");

    const std::size_t n_bins = config.n_bins();
    const std::size_t n_frames = config.n_frames_for(signal.size());
    const auto pad = static_cast<std::ptrdiff_t>(config.n_fft / 2);

    // window centered within the n_fft frame
    const auto win = hann_window(config.win_length);
    std::vector<double> padded_win(config.n_fft, 0.0);
    const std::size_t win_off = (config.n_fft - config.win_length) / 2;
    std::copy(win.begin(), win.end(), padded_win.begin() + static_cast<std::ptrdiff_t>(win_off));

    PowerSpectrogram out;
    out.n_bins = n_bins;
    out.n_frames = n_frames;
    out.values.assign(n_bins * n_frames, 0.0);

    const std::int64_t frames = static_cast<std::int64_t>(n_frames);
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < frames; ++t) {
        std::vector<std::complex<double>> frame(config.n_fft);
        const std::ptrdiff_t start = t * static_cast<std::ptrdiff_t>(config.hop_length) - pad;
        for (std::size_t j = 0; j < config.n_fft; ++j)
            frame[j] = padded_win[j] * sample_reflected(signal, start + static_cast<std::ptrdiff_t>(j));
        fft(frame);
        for (std::size_t b = 0; b < n_bins; ++b) out.values[b * n_frames + t] = std::norm(frame[b]);
    }
    return out;
}

std::vector<double> log_mel_raw(std::span<const float> chunk, const SpectrogramConfig& config,
                                std::size_t& n_frames_out) {
    const auto power = stft_power(chunk, config);
    const auto bank = mel_filterbank(config);
    const std::size_t n_bins = config.n_bins();
    n_frames_out = power.n_frames;

    std::vector<double> mel(config.n_mels * power.n_frames, 0.0);
    for (std::size_t m = 0; m < config.n_mels; ++m) {
        for (std::size_t b = 0; b < n_bins; ++b) {
            const double w = bank[m * n_bins + b];
            if (w == 0.0) continue;
            const double* row = power.values.data() + b * power.n_frames;
            double* out_row = mel.data() + m * power.n_frames;
            for (std::size_t t = 0; t < power.n_frames; ++t) out_row[t] += w * row[t];
        }
    }
    for (double& v : mel) v = std::log(v + config.eps);
    return mel;
}

Spectrogram to_mel_spectrogram(std::span<const float> chunk, const SpectrogramConfig& config,
                               std::string record_id, std::uint32_t chunk_index) {
    std::size_t n_frames = 0;
    const auto mel = log_mel_raw(chunk, config, n_frames);

    Spectrogram spec;
    spec.n_mels = config.n_mels;
    spec.n_frames = config.target_frames;
    spec.record_id = std::move(record_id);
    spec.chunk_index = chunk_index;
    spec.values.assign(config.n_mels * config.target_frames, 0.0f);

    // crop trailing frames / pad with the log floor, then min-max normalize
    const double floor_value = std::log(config.eps);
    std::vector<double> cropped(config.n_mels * config.target_frames, floor_value);
    const std::size_t copy_frames = std::min(n_frames, config.target_frames);
    for (std::size_t m = 0; m < config.n_mels; ++m)
        for (std::size_t t = 0; t < copy_frames; ++t)
            cropped[m * config.target_frames + t] = mel[m * n_frames + t];

    const auto [lo_it, hi_it] = std::minmax_element(cropped.begin(), cropped.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < cropped.size(); ++i)
            spec.values[i] = static_cast<float>((cropped[i] - lo) * inv);
    }
    // constant input: all zeros (already filled)
    return spec;
}

}  // namespace apnea::dsp
