#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "apnea/dsp.hpp"
#include "apnea/model.hpp"
#include "apnea/synth.hpp"
#include "apnea/train.hpp"

namespace apnea::cli {

// Flat key-value configuration with section prefixes (`dsp.n_fft = 512`).
// Every field has a default; command-line flags override file values; the
// merged result is persisted next to each run's outputs.
struct RunConfig {
    // data
    double sample_rate_hz = 125.0;
    double chunk_seconds = 30.0;
    std::vector<std::string> apnea_labels{"LA", "H", "HA"};

    // dsp
    dsp::SpectrogramConfig spectrogram;

    // model
    model::ResNetConfig model;

    // train
    train::TrainConfig training;

    // synth
    std::size_t synth_records = 18;
    synth::SynthConfig synth;

    // eval
    std::string eval_objective = "recall_floor";
    double eval_floor = 0.9;
    bool eval_has_threshold = false;
    double eval_threshold = 0.635;

    // ablate
    std::vector<std::string> ablate_runs{"full", "no_class_weighting", "no_oversampling",
                                         "no_regularization"};
    double ablate_threshold = 0.5;

    // run
    std::uint64_t seed = 0;
    int threads = 0;  // 0 keeps the OpenMP default

    // paths
    std::string data_dir;
    std::string out_dir = "out";
    std::string weights_path;

    std::set<std::string> apnea_label_set() const {
        return {apnea_labels.begin(), apnea_labels.end()};
    }

    // throws ConfigError on unknown keys or malformed values
    void set(const std::string& key, const std::string& value);
    void load_file(const std::filesystem::path& path);
    std::string to_string() const;
    void save(const std::filesystem::path& path) const;
};

}  // namespace apnea::cli
