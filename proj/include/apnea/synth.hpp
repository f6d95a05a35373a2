#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "apnea/ingest.hpp"

namespace apnea::synth {

// Breathing-like records with embedded apnea events: a band-limited noise
// carrier (0-40 Hz) amplitude-modulated at the breathing rate, with the
// envelope multiplied by `apnea_suppression` inside event intervals. Sensor
// noise is added on top and is not suppressed.
struct SynthConfig {
    double duration_s = 600.0;
    double sample_rate_hz = 125.0;
    double breath_rate_hz = 0.25;  // 15 breaths/min
    double apnea_event_rate_per_min = 1.0;
    double apnea_min_s = 10.0;
    double apnea_max_s = 30.0;
    double apnea_suppression = 0.05;
    double noise_snr_db = 25.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct GeneratedRecord {
    ingest::Signal signal;
    std::vector<ingest::AnnotationEvent> events;
};

GeneratedRecord generate_record(const std::string& record_id, const SynthConfig& config);

struct GeneratedDataset {
    std::vector<std::pair<std::string, GeneratedRecord>> records;
    ingest::DatasetSplit split;
};

// Per-record seeds derived from (seed, record id); the last ceil(n/5) records
// become the test split.
GeneratedDataset generate_dataset(std::size_t n_records, const SynthConfig& config_template,
                                  std::uint64_t seed);

}  // namespace apnea::synth
