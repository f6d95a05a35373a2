#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace apnea::dsp {

struct SpectrogramConfig {
    double sample_rate_hz = 125.0;
    std::size_t n_fft = 512;
    std::size_t win_length = 256;
    std::size_t hop_length = 29;
    std::size_t n_mels = 128;
    double f_min_hz = 0.0;
    double f_max_hz = 62.5;
    std::size_t target_frames = 128;
    double eps = 1e-10;

    void validate() const;  // throws ConfigError
    std::size_t n_bins() const { return n_fft / 2 + 1; }
    std::size_t n_frames_for(std::size_t n_samples) const { return 1 + n_samples / hop_length; }
};

// Periodic-symmetric Hann: w[n] = 0.5 - 0.5 cos(2 pi n / (len - 1)).
// Length 1 degenerates to [1] so a single-sample window is a no-op.
std::vector<double> hann_window(std::size_t length);

double hz_to_mel(double f_hz);
double mel_to_hz(double mel);

// Triangular filters with mel-uniform centers, rows n_mels x (n_fft/2+1),
// row-major. Throws if any filter ends up with no nonzero weight.
std::vector<double> mel_filterbank(const SpectrogramConfig& config);

// |DFT|^2 up to the Nyquist bin; reflect center-padding, frame t centered at
// t * hop. Row-major [bin][frame].
struct PowerSpectrogram {
    std::size_t n_bins = 0;
    std::size_t n_frames = 0;
    std::vector<double> values;

    double at(std::size_t bin, std::size_t frame) const { return values[bin * n_frames + frame]; }
};

PowerSpectrogram stft_power(std::span<const float> signal, const SpectrogramConfig& config);

// Normalized log-mel image, row-major [mel][frame], values in [0, 1].
// A constant (zero-dynamic-range) input maps to all zeros.
struct Spectrogram {
    std::size_t n_mels = 0;
    std::size_t n_frames = 0;
    std::vector<float> values;
    std::string record_id;
    std::uint32_t chunk_index = 0;

    float at(std::size_t mel, std::size_t frame) const { return values[mel * n_frames + frame]; }
};

Spectrogram to_mel_spectrogram(std::span<const float> chunk, const SpectrogramConfig& config,
                               std::string record_id = {}, std::uint32_t chunk_index = 0);

// Log-mel matrix before frame cropping and min-max normalization, row-major
// [mel][frame]; exposed for tests that check pre-normalization properties.
std::vector<double> log_mel_raw(std::span<const float> chunk, const SpectrogramConfig& config,
                                std::size_t& n_frames_out);

}  // namespace apnea::dsp
