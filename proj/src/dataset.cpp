#include <algorithm>
#include <cmath>
#include <string>

#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"

namespace apnea::ingest {

std::vector<Chunk> chunk_record(const Signal& signal, double chunk_seconds) {
    if (chunk_seconds <= 0.0) throw ConfigError("chunk_record: chunk_seconds must be positive");
    if (signal.sample_rate_hz <= 0.0) throw ConfigError("chunk_record: invalid sample rate");
    const double exact = chunk_seconds * signal.sample_rate_hz;
    const auto chunk_len = static_cast<std::size_t>(std::llround(exact));
    if (chunk_len == 0 || std::abs(exact - static_cast<double>(chunk_len)) > 1e-9)
        throw ConfigError("chunk_record: chunk_seconds * sample_rate must be a positive integer");

    std::vector<Chunk> chunks;
    const std::size_t n_chunks = signal.samples.size() / chunk_len;
    chunks.reserve(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) {
        Chunk c;
        c.index = i;
        c.start_s = static_cast<double>(i) * chunk_seconds;
        c.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(i * chunk_len),
                         signal.samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * chunk_len));
        chunks.push_back(std::move(c));
    }
    return chunks;
}

bool label_chunk(double start_s, double end_s, std::span<const AnnotationEvent> events,
                 const std::set<std::string>& apnea_labels) {
    if (!(end_s > start_s)) throw ConfigError("label_chunk: span must have positive length");
    for (const auto& ev : events) {
        if (!apnea_labels.contains(ev.label)) continue;
        const double ev_end = ev.onset_s + ev.duration_s;
        if (ev.onset_s < end_s && ev_end > start_s) return true;  // half-open overlap
    }
    return false;
}

Dataset build_dataset(const std::map<std::string, Signal>& records,
                      const std::vector<AnnotationEvent>& annotations, const DatasetSplit& split,
                      double chunk_seconds, const std::set<std::string>& apnea_labels) {
    for (const auto& id : split.train_record_ids)
        if (std::find(split.test_record_ids.begin(), split.test_record_ids.end(), id) !=
            split.test_record_ids.end())
            throw DataError("build_dataset: record '" + id + "' appears in both train and test");

    auto collect = [&](const std::vector<std::string>& ids, std::vector<LabeledChunk>& out) {
        for (const auto& id : ids) {
            const auto it = records.find(id);
            if (it == records.end())
                throw DataError("build_dataset: split references unknown record '" + id + "'");
            std::vector<AnnotationEvent> record_events;
            for (const auto& ev : annotations)
                if (ev.record_id == id) record_events.push_back(ev);
            for (auto& chunk : chunk_record(it->second, chunk_seconds)) {
                LabeledChunk lc;
                lc.record_id = id;
                lc.index = chunk.index;
                lc.start_s = chunk.start_s;
                lc.samples = std::move(chunk.samples);
                lc.label = label_chunk(chunk.start_s, chunk.start_s + chunk_seconds, record_events,
                                       apnea_labels)
                               ? 1
                               : 0;
                out.push_back(std::move(lc));
            }
        }
    };

    Dataset dataset;
    collect(split.train_record_ids, dataset.train);
    collect(split.test_record_ids, dataset.test);
    return dataset;
}

}  // namespace apnea::ingest
