#include "apnea/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "apnea/errors.hpp"
#include "apnea/rng.hpp"

namespace apnea::synth {

namespace {

// Hann-windowed sinc FIR lowpass, zero-phase via symmetric kernel.
std::vector<double> fir_lowpass(const std::vector<double>& x, double sample_rate_hz,
                                double cutoff_hz, int half_taps = 64) {
    const double fc = cutoff_hz / (sample_rate_hz / 2.0);  // relative to Nyquist
    std::vector<double> kernel(2 * half_taps + 1);
    double norm = 0.0;
    for (int i = -half_taps; i <= half_taps; ++i) {
        const double t = static_cast<double>(i);
        double v;
        if (i == 0) {
            v = fc;
        } else {
            const double px = std::numbers::pi * t;
            v = std::sin(fc * px) / px;
        }
        const double u = t / static_cast<double>(half_taps);
        const double hann = 0.5 + 0.5 * std::cos(std::numbers::pi * u);
        kernel[i + half_taps] = v * hann;
        norm += kernel[i + half_taps];
    }
    for (double& k : kernel) k /= norm;

    std::vector<double> y(x.size(), 0.0);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -half_taps; j <= half_taps; ++j) {
            const std::ptrdiff_t k = i + j;
            if (k < 0 || k >= n) continue;
            acc += kernel[j + half_taps] * x[k];
        }
        y[i] = acc;
    }
    return y;
}

struct Interval {
    double onset;
    double duration;
};

std::vector<Interval> place_events(const SynthConfig& cfg, RngStream& rng) {
    const double minutes = cfg.duration_s / 60.0;
    const auto n_events =
        static_cast<std::size_t>(std::llround(cfg.apnea_event_rate_per_min * minutes));
    if (n_events == 0) return {};

    constexpr double kMargin = 2.0;  // seconds between events and from the edges
    if (static_cast<double>(n_events) * (cfg.apnea_max_s + kMargin) > cfg.duration_s)
        throw ConfigError("synth: infeasible event packing (rate x duration exceeds record length)");

    std::vector<Interval> placed;
    for (std::size_t i = 0; i < n_events; ++i) {
        const double dur = rng.uniform(cfg.apnea_min_s, cfg.apnea_max_s);
        bool ok = false;
        for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
            const double onset = rng.uniform(kMargin, cfg.duration_s - dur - kMargin);
            ok = true;
            for (const auto& p : placed) {
                if (onset < p.onset + p.duration + kMargin && p.onset < onset + dur + kMargin) {
                    ok = false;
                    break;
                }
            }
            if (ok) placed.push_back({onset, dur});
        }
        if (!ok) throw ConfigError("synth: infeasible event packing (could not place event)");
    }
    std::sort(placed.begin(), placed.end(),
              [](const Interval& a, const Interval& b) { return a.onset < b.onset; });
    return placed;
}

}  // namespace

void SynthConfig::validate() const {
    if (duration_s <= 0) throw ConfigError("synth: duration_s must be positive");
    if (sample_rate_hz <= 0) throw ConfigError("synth: sample_rate_hz must be positive");
    if (breath_rate_hz <= 0) throw ConfigError("synth: breath_rate_hz must be positive");
    if (apnea_event_rate_per_min < 0) throw ConfigError("synth: apnea rate must be non-negative");
    if (!(apnea_min_s > 0 && apnea_max_s >= apnea_min_s))
        throw ConfigError("synth: need 0 < apnea_min_s <= apnea_max_s");
    if (!(apnea_suppression >= 0 && apnea_suppression < 1))
        throw ConfigError("synth: apnea_suppression must be in [0, 1)");
}

GeneratedRecord generate_record(const std::string& record_id, const SynthConfig& config) {
    config.validate();
    RngStream rng(config.seed);
    const auto n = static_cast<std::size_t>(std::llround(config.duration_s * config.sample_rate_hz));

    const auto events = place_events(config, rng);

    // band-limited carrier
    std::vector<double> noise(n);
    for (double& v : noise) v = rng.normal();
    auto carrier = fir_lowpass(noise, config.sample_rate_hz, 40.0);
    double rms = 0.0;
    for (const double v : carrier) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(n));
    const double carrier_gain = rms > 0 ? 0.25 / rms : 0.0;

    const double noise_amp = 0.25 * std::pow(10.0, -config.noise_snr_db / 20.0);

    GeneratedRecord rec;
    rec.signal.sample_rate_hz = config.sample_rate_hz;
    rec.signal.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / config.sample_rate_hz;
        double envelope =
            0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * config.breath_rate_hz * t);
        for (const auto& ev : events)
            if (t >= ev.onset && t < ev.onset + ev.duration) {
                envelope *= config.apnea_suppression;
                break;
            }
        const double sensor_noise = noise_amp * rng.normal();
        rec.signal.samples[i] =
            static_cast<float>(carrier_gain * carrier[i] * envelope + sensor_noise);
    }

    rec.events.reserve(events.size());
    for (const auto& ev : events)
        rec.events.push_back({record_id, ev.onset, ev.duration, "H"});
    return rec;
}

GeneratedDataset generate_dataset(std::size_t n_records, const SynthConfig& config_template,
                                  std::uint64_t seed) {
    if (n_records < 2) throw ConfigError("synth: need at least 2 records (one per split role)");
    GeneratedDataset out;
    const std::size_t n_test = (n_records + 4) / 5;  // ceil(n/5)
    for (std::size_t i = 0; i < n_records; ++i) {
        std::ostringstream name;
        name << "rec" << std::setw(2) << std::setfill('0') << (i + 1);
        const std::string id = name.str();
        SynthConfig cfg = config_template;
        cfg.seed = derive_seed(seed, id);
        out.records.emplace_back(id, generate_record(id, cfg));
        if (i < n_records - n_test)
            out.split.train_record_ids.push_back(id);
        else
            out.split.test_record_ids.push_back(id);
    }
    return out;
}

}  // namespace apnea::synth
