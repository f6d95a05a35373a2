#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "apnea/cache.hpp"
#include "apnea/dsp.hpp"
#include "apnea/errors.hpp"
#include "apnea/fft.hpp"
#include "apnea/rng.hpp"

using namespace apnea;

namespace {

std::vector<float> breathing_chunk(std::uint64_t seed, double scale = 1.0) {
    RngStream rng(seed);
    std::vector<float> x(3750);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / 125.0;
        const double envelope = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * 0.25 * t);
        x[i] = static_cast<float>(scale * envelope * 0.3 * rng.normal());
    }
    return x;
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("hann: degenerate length 1 is a no-op window") {
    CHECK(dsp::hann_window(1) == std::vector<double>{1.0});
}

TEST_CASE("hann: length 4 closed form") {
    const auto w = dsp::hann_window(4);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[1] == doctest::Approx(0.75));
    CHECK(w[2] == doctest::Approx(0.75));
    CHECK(w[3] == doctest::Approx(0.0));
}

TEST_CASE("hann: symmetry") {
    const auto w = dsp::hann_window(33);
    for (std::size_t n = 0; n < w.size(); ++n)
        CHECK(w[n] == doctest::Approx(w[w.size() - 1 - n]).epsilon(1e-12));
}

TEST_CASE("mel: formula anchor points") {
    CHECK(dsp::hz_to_mel(0.0) == 0.0);
    CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
    CHECK(dsp::hz_to_mel(62.5) == doctest::Approx(96.38).epsilon(1e-3));
    CHECK(dsp::mel_to_hz(dsp::hz_to_mel(41.7)) == doctest::Approx(41.7).epsilon(1e-10));
}

TEST_CASE("fft: matches the direct DFT") {
    RngStream rng(11);
    std::vector<std::complex<double>> x(64);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    const auto want = dsp::naive_dft(x);
    auto got = x;
    dsp::fft(got);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(got[i].real() == doctest::Approx(want[i].real()).epsilon(1e-9));
        CHECK(got[i].imag() == doctest::Approx(want[i].imag()).epsilon(1e-9));
    }
}

TEST_CASE("filterbank: default config has no empty filter") {
    dsp::SpectrogramConfig cfg;
    const auto bank = dsp::mel_filterbank(cfg);
    const std::size_t n_bins = cfg.n_bins();
    REQUIRE(bank.size() == cfg.n_mels * n_bins);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        double row_sum = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) row_sum += bank[m * n_bins + b];
        CHECK(row_sum > 0.0);
    }
}

TEST_CASE("filterbank: single filter peaks mid-band") {
    dsp::SpectrogramConfig cfg;
    cfg.n_mels = 1;
    const auto bank = dsp::mel_filterbank(cfg);
    double row_sum = 0.0;
    for (const auto v : bank) row_sum += v;
    CHECK(row_sum > 0.0);
}

TEST_CASE("filterbank: centers strictly increasing in Hz") {
    // mel_to_hz of uniformly spaced mels must be strictly increasing
    const double top = dsp::hz_to_mel(62.5);
    double prev = -1.0;
    for (int i = 0; i <= 129; ++i) {
        const double hz = dsp::mel_to_hz(top * i / 129.0);
        CHECK(hz > prev);
        prev = hz;
    }
}

TEST_CASE("filterbank: insufficient resolution fails loudly") {
    dsp::SpectrogramConfig cfg;
    cfg.n_fft = 64;
    cfg.win_length = 64;
    CHECK_THROWS_WITH_AS(dsp::mel_filterbank(cfg), doctest::Contains("empty mel filter"),
                         ConfigError);
}

TEST_CASE("stft: all-zero chunk gives an all-zero power matrix") {
    dsp::SpectrogramConfig cfg;
    const std::vector<float> zeros(3750, 0.0f);
    const auto power = dsp::stft_power(zeros, cfg);
    CHECK(power.n_bins == 257);
    CHECK(power.n_frames == 130);
    for (const auto v : power.values) CHECK(v == 0.0);
}

TEST_CASE("stft: frame count follows 1 + floor(n/hop)") {
    dsp::SpectrogramConfig cfg;
    const std::vector<float> x(3750, 0.1f);
    const auto power = dsp::stft_power(x, cfg);
    CHECK(power.n_frames == 1 + 3750 / cfg.hop_length);
    CHECK(power.n_frames == 130);
}

TEST_CASE("stft: constant signal concentrates energy in bin 0") {
    // the strict adjacent-bin confinement holds for a full-length window;
    // zero-padding the window would spread its interpolated main lobe
    dsp::SpectrogramConfig cfg;
    cfg.win_length = cfg.n_fft;
    const std::vector<float> x(3750, 0.8f);
    const auto power = dsp::stft_power(x, cfg);
    for (std::size_t t = 10; t < power.n_frames - 10; ++t) {
        const double dc = power.at(0, t);
        REQUIRE(dc > 0.0);
        for (std::size_t b = 2; b < power.n_bins; ++b) CHECK(power.at(b, t) < 1e-6 * dc);
    }

    // with the zero-padded default, bin 0 still dominates every other bin
    const auto padded = dsp::stft_power(x, dsp::SpectrogramConfig{});
    for (std::size_t t = 10; t < padded.n_frames - 10; ++t)
        for (std::size_t b = 1; b < padded.n_bins; ++b)
            CHECK(padded.at(b, t) < padded.at(0, t));
}

TEST_CASE("spectrogram: shape and range contract") {
    dsp::SpectrogramConfig cfg;
    const auto chunk = breathing_chunk(3);
    const auto spec = dsp::to_mel_spectrogram(chunk, cfg, "rec01", 2);
    CHECK(spec.n_mels == 128);
    CHECK(spec.n_frames == 128);
    CHECK(spec.values.size() == 128 * 128);
    CHECK(spec.record_id == "rec01");
    CHECK(spec.chunk_index == 2);
    float lo = 1e9f, hi = -1e9f;
    for (const auto v : spec.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);
}

TEST_CASE("spectrogram: all-zero chunk maps to all zeros") {
    dsp::SpectrogramConfig cfg;
    const std::vector<float> zeros(3750, 0.0f);
    const auto spec = dsp::to_mel_spectrogram(zeros, cfg);
    for (const auto v : spec.values) CHECK(v == 0.0f);
}

TEST_CASE("spectrogram: scale invariance after normalization") {
    dsp::SpectrogramConfig cfg;
    const auto base = dsp::to_mel_spectrogram(breathing_chunk(5), cfg);
    for (const double alpha : {2.0, 10.0}) {
        const auto scaled = dsp::to_mel_spectrogram(breathing_chunk(5, alpha), cfg);
        float worst = 0.0f;
        for (std::size_t i = 0; i < base.values.size(); ++i)
            worst = std::max(worst, std::abs(base.values[i] - scaled.values[i]));
        CHECK(worst < 1e-4f);
    }
}

TEST_CASE("spectrogram: zeroing a time region never raises its pre-normalization values") {
    dsp::SpectrogramConfig cfg;
    auto chunk = breathing_chunk(9);
    std::size_t frames_a = 0, frames_b = 0;
    const auto before = dsp::log_mel_raw(chunk, cfg, frames_a);

    // zero out samples [1500, 2500)
    auto silenced = chunk;
    for (std::size_t i = 1500; i < 2500; ++i) silenced[i] = 0.0f;
    const auto after = dsp::log_mel_raw(silenced, cfg, frames_b);
    REQUIRE(frames_a == frames_b);

    // frames whose full n_fft support sits inside the zeroed region
    for (std::size_t t = 0; t < frames_a; ++t) {
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(t * cfg.hop_length) - static_cast<std::ptrdiff_t>(cfg.n_fft / 2);
        if (start < 1500 || start + static_cast<std::ptrdiff_t>(cfg.n_fft) > 2500) continue;
        for (std::size_t m = 0; m < cfg.n_mels; ++m)
            CHECK(after[m * frames_a + t] <= before[m * frames_a + t] + 1e-12);
    }
}

TEST_CASE("cache: round-trip is bit-exact") {
    dsp::SpectrogramCache cache;
    cache.n_mels = 4;
    cache.n_frames = 3;
    RngStream rng(17);
    for (int i = 0; i < 5; ++i) {
        dsp::CacheEntry e;
        e.record_id = "rec0" + std::to_string(i);
        e.chunk_index = static_cast<std::uint32_t>(i * 7);
        e.label = i % 2;
        for (int j = 0; j < 12; ++j) e.values.push_back(static_cast<float>(rng.normal()));
        cache.entries.push_back(std::move(e));
    }
    const auto path = std::filesystem::temp_directory_path() / "apnea_cache_test.apne";
    dsp::write_cache(path, cache);
    const auto back = dsp::read_cache(path);
    CHECK(back.n_mels == cache.n_mels);
    CHECK(back.n_frames == cache.n_frames);
    REQUIRE(back.entries.size() == cache.entries.size());
    for (std::size_t i = 0; i < cache.entries.size(); ++i) {
        CHECK(back.entries[i].record_id == cache.entries[i].record_id);
        CHECK(back.entries[i].chunk_index == cache.entries[i].chunk_index);
        CHECK(back.entries[i].label == cache.entries[i].label);
        CHECK(back.entries[i].values == cache.entries[i].values);
    }
}

TEST_CASE("cache: corrupted magic is rejected") {
    const auto path = std::filesystem::temp_directory_path() / "apnea_cache_bad.apne";
    std::ofstream(path, std::ios::binary) << "NOPE1234567890";
    CHECK_THROWS_WITH_AS(dsp::read_cache(path), doctest::Contains("magic"), DataError);
}

TEST_CASE("config: invariant violations are rejected") {
    dsp::SpectrogramConfig cfg;
    cfg.win_length = 1024;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.f_max_hz = 80.0;  // above Nyquist for 125 Hz
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.hop_length = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
