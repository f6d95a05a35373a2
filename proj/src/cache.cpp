#include "apnea/cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "apnea/errors.hpp"

namespace apnea::dsp {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'N', 'E'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "cache I/O assumes a little-endian host");

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError("cache: truncated " + what);
    return v;
}

}  // namespace

void write_cache(const std::filesystem::path& path, const SpectrogramCache& cache) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create cache file: " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, cache.n_mels);
    write_u32(out, cache.n_frames);
    write_u32(out, static_cast<std::uint32_t>(cache.entries.size()));
    const std::size_t expected = static_cast<std::size_t>(cache.n_mels) * cache.n_frames;
    for (const auto& e : cache.entries) {
        if (e.values.size() != expected)
            throw ArtifactError("cache: entry '" + e.record_id + "' has wrong value count");
        write_u32(out, static_cast<std::uint32_t>(e.record_id.size()));
        out.write(e.record_id.data(), static_cast<std::streamsize>(e.record_id.size()));
        write_u32(out, e.chunk_index);
        out.put(static_cast<char>(e.label));
        out.write(reinterpret_cast<const char*>(e.values.data()),
                  static_cast<std::streamsize>(e.values.size() * sizeof(float)));
    }
    if (!out) throw DataError("cache: write failed: " + path.string());
}

SpectrogramCache read_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open cache file: " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("cache: bad magic in " + path.string());
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw DataError("cache: unsupported version " + std::to_string(version));

    SpectrogramCache cache;
    cache.n_mels = read_u32(in, "n_mels");
    cache.n_frames = read_u32(in, "n_frames");
    const std::uint32_t count = read_u32(in, "count");
    const std::size_t values_per_entry = static_cast<std::size_t>(cache.n_mels) * cache.n_frames;

    cache.entries.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto& e = cache.entries[i];
        const std::uint32_t id_len = read_u32(in, "record id length");
        e.record_id.resize(id_len);
        if (!in.read(e.record_id.data(), id_len)) throw DataError("cache: truncated record id");
        e.chunk_index = read_u32(in, "chunk index");
        char label = 0;
        if (!in.get(label)) throw DataError("cache: truncated label");
        e.label = static_cast<std::uint8_t>(label);
        e.values.resize(values_per_entry);
        if (!in.read(reinterpret_cast<char*>(e.values.data()),
                     static_cast<std::streamsize>(values_per_entry * sizeof(float))))
            throw DataError("cache: truncated values for entry " + std::to_string(i));
    }
    return cache;
}

}  // namespace apnea::dsp
