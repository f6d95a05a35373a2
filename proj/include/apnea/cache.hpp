#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace apnea::dsp {

// Spectrogram cache, one entry per labeled chunk.
// Layout (little-endian): magic "APNE", u32 version=1, u32 n_mels,
// u32 n_frames, u32 count, then per entry: u32 id length, id bytes, u32 chunk
// index, u8 label, n_mels*n_frames float32 values (row-major, mel-major).
struct CacheEntry {
    std::string record_id;
    std::uint32_t chunk_index = 0;
    std::uint8_t label = 0;
    std::vector<float> values;
};

struct SpectrogramCache {
    std::uint32_t n_mels = 0;
    std::uint32_t n_frames = 0;
    std::vector<CacheEntry> entries;

    std::size_t count_label(std::uint8_t label) const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.label == label) ++n;
        return n;
    }
};

void write_cache(const std::filesystem::path& path, const SpectrogramCache& cache);
SpectrogramCache read_cache(const std::filesystem::path& path);

}  // namespace apnea::dsp
