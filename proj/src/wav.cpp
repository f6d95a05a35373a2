#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"

namespace apnea::ingest {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u16(std::ofstream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Signal load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open WAV file: " + path.string());

    unsigned char riff[12];
    if (!in.read(reinterpret_cast<char*>(riff), 12))
        throw DataError(path.string() + ": truncated RIFF header");
    if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0)
        throw DataError(path.string() + ": not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::vector<unsigned char> data;
    bool have_data = false;

    unsigned char header[8];
    while (in.read(reinterpret_cast<char*>(header), 8)) {
        const std::uint32_t size = read_u32(header + 4);
        if (std::memcmp(header, "fmt ", 4) == 0) {
            if (size < 16) throw DataError(path.string() + ": fmt chunk too small");
            std::vector<unsigned char> fmt(size);
            if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
                throw DataError(path.string() + ": truncated fmt chunk");
            format = read_u16(fmt.data());
            channels = read_u16(fmt.data() + 2);
            sample_rate = read_u32(fmt.data() + 4);
            bits = read_u16(fmt.data() + 14);
            have_fmt = true;
        } else if (std::memcmp(header, "data", 4) == 0) {
            data.resize(size);
            if (!in.read(reinterpret_cast<char*>(data.data()), size))
                throw DataError(path.string() + ": truncated data chunk");
            have_data = true;
        } else {
            in.seekg(size, std::ios::cur);
        }
        if (size % 2 != 0) in.seekg(1, std::ios::cur);  // chunk padding
    }

    if (!have_fmt || !have_data) throw DataError(path.string() + ": missing fmt or data chunk");
    if (channels != 1)
        throw DataError(path.string() + ": unsupported channel count " + std::to_string(channels) +
                        " (mono required)");
    if (sample_rate == 0) throw DataError(path.string() + ": zero sample rate");

    Signal signal;
    signal.sample_rate_hz = static_cast<double>(sample_rate);
    if (format == kFormatPcm && bits == 16) {
        const std::size_t n = data.size() / 2;
        signal.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = static_cast<std::int16_t>(read_u16(data.data() + 2 * i));
            signal.samples[i] = static_cast<float>(v) / 32768.0f;
        }
    } else if (format == kFormatIeeeFloat && bits == 32) {
        const std::size_t n = data.size() / 4;
        signal.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            signal.samples[i] = std::bit_cast<float>(read_u32(data.data() + 4 * i));
    } else {
        throw DataError(path.string() + ": unsupported encoding (format tag " +
                        std::to_string(format) + ", " + std::to_string(bits) +
                        " bits; PCM16 or float32 required)");
    }
    return signal;
}

void save_wav_pcm16(const std::filesystem::path& path, const Signal& signal) {
    if (signal.sample_rate_hz <= 0) throw ConfigError("save_wav_pcm16: sample rate must be positive");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create WAV file: " + path.string());

    const auto rate = static_cast<std::uint32_t>(std::llround(signal.sample_rate_hz));
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);

    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, kFormatPcm);
    write_u16(out, 1);  // mono
    write_u32(out, rate);
    write_u32(out, rate * 2);  // byte rate
    write_u16(out, 2);         // block align
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (const float s : signal.samples) {
        const float clamped = std::clamp(s, -1.0f, 1.0f);
        const auto q = static_cast<std::int32_t>(std::lround(clamped * 32768.0f));
        write_u16(out, static_cast<std::uint16_t>(
                           static_cast<std::int16_t>(std::clamp(q, -32768, 32767))));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace apnea::ingest
