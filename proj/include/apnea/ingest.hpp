#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace apnea::ingest {

struct Signal {
    std::vector<float> samples;
    double sample_rate_hz = 0.0;

    double duration_s() const {
        return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

struct AnnotationEvent {
    std::string record_id;
    double onset_s = 0.0;
    double duration_s = 0.0;
    std::string label;
};

struct Chunk {
    std::size_t index = 0;
    double start_s = 0.0;
    std::vector<float> samples;
};

struct LabeledChunk {
    std::string record_id;
    std::size_t index = 0;
    double start_s = 0.0;
    std::vector<float> samples;
    std::uint8_t label = 0;  // 1 = apnea
};

struct DatasetSplit {
    std::vector<std::string> train_record_ids;
    std::vector<std::string> test_record_ids;
};

struct Dataset {
    std::vector<LabeledChunk> train;
    std::vector<LabeledChunk> test;
};

inline const std::set<std::string> kDefaultApneaLabels = {"LA", "H", "HA"};

// RIFF/WAVE, mono, PCM 16-bit LE or IEEE float 32. PCM samples are scaled by
// 1/32768. Anything else is rejected, including multi-channel files.
Signal load_wav(const std::filesystem::path& path);

// PCM 16-bit mono writer; samples are clamped to [-1, 1] and scaled by 32768.
void save_wav_pcm16(const std::filesystem::path& path, const Signal& signal);

// Windowed-sinc resampling (Kaiser window, beta 8.6, 64-tap half-width),
// low-passed at the lower of the two Nyquist frequencies. A matching target
// rate returns the input unchanged.
Signal resample(const Signal& signal, double target_hz);

// CSV with header `record_id,onset_s,duration_s,label`. Errors carry the
// offending line number.
std::vector<AnnotationEvent> parse_annotations(const std::filesystem::path& path);

// CSV with header `record_id,role`, role in {train, test}.
DatasetSplit parse_split(const std::filesystem::path& path);

// Consecutive non-overlapping windows of exactly chunk_seconds; a trailing
// partial window is dropped. A signal shorter than one chunk yields no
// chunks.
std::vector<Chunk> chunk_record(const Signal& signal, double chunk_seconds);

// A chunk is apnea iff any event whose label is in apnea_labels overlaps the
// half-open span [start_s, end_s) with nonzero duration.
bool label_chunk(double start_s, double end_s, std::span<const AnnotationEvent> events,
                 const std::set<std::string>& apnea_labels);

// Records must already be at the canonical rate. Chunk order follows the
// split file's record order.
Dataset build_dataset(const std::map<std::string, Signal>& records,
                      const std::vector<AnnotationEvent>& annotations, const DatasetSplit& split,
                      double chunk_seconds, const std::set<std::string>& apnea_labels);

}  // namespace apnea::ingest
