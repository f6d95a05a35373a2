#pragma once

#include <complex>
#include <vector>

namespace apnea::dsp {

// In-place iterative radix-2 FFT; falls back to a direct DFT for sizes that
// are not powers of two.
void fft(std::vector<std::complex<double>>& data);

// Direct O(n^2) DFT, kept as the independent reference for tests.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& data);

}  // namespace apnea::dsp
