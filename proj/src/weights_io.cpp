#include "apnea/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "apnea/errors.hpp"

namespace apnea::cli {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "weight I/O assumes a little-endian host");

struct Entry {
    std::string name;
    std::uint8_t kind = 0;
    std::vector<std::uint32_t> dims;
    std::uint64_t offset = 0;
    std::size_t numel() const {
        std::size_t n = 1;
        for (const auto d : dims) n *= d;
        return n;
    }
};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw ArtifactError(std::string("weight file: truncated ") + what);
    return v;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const model::ResNetModel& net) {
    std::vector<Entry> entries;
    std::vector<const std::vector<float>*> arrays;
    std::uint64_t offset = 0;

    auto push = [&](const std::string& name, std::uint8_t kind,
                    const std::vector<std::size_t>& shape, const std::vector<float>& values) {
        Entry e;
        e.name = name;
        e.kind = kind;
        for (const auto d : shape) e.dims.push_back(static_cast<std::uint32_t>(d));
        e.offset = offset;
        offset += values.size() * sizeof(float);
        entries.push_back(std::move(e));
        arrays.push_back(&values);
    };

    for (const auto& [name, p] : net.named_parameters()) push(name, 0, p->shape, p->values);
    for (const auto& [name, b] : net.named_buffers()) push(name, 1, {b->size()}, *b);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create weight file: " + path.string());
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<std::uint8_t>(out, e.kind);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
        for (const auto d : e.dims) write_pod<std::uint32_t>(out, d);
        write_pod<std::uint64_t>(out, e.offset);
    }
    write_pod<std::uint64_t>(out, offset);
    for (const auto* arr : arrays)
        out.write(reinterpret_cast<const char*>(arr->data()),
                  static_cast<std::streamsize>(arr->size() * sizeof(float)));
    if (!out) throw DataError("weight file: write failed: " + path.string());
}

void load_weights(const std::filesystem::path& path, model::ResNetModel& net) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight file: " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ArtifactError("weight file: bad magic in " + path.string());
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw ArtifactError("weight file: unsupported version " + std::to_string(version));

    const auto count = read_pod<std::uint32_t>(in, "entry count");
    std::vector<Entry> entries(count);
    for (auto& e : entries) {
        const auto name_len = read_pod<std::uint32_t>(in, "name length");
        e.name.resize(name_len);
        if (!in.read(e.name.data(), name_len)) throw ArtifactError("weight file: truncated name");
        e.kind = read_pod<std::uint8_t>(in, "kind");
        const auto ndim = read_pod<std::uint32_t>(in, "rank");
        e.dims.resize(ndim);
        for (auto& d : e.dims) d = read_pod<std::uint32_t>(in, "dim");
        e.offset = read_pod<std::uint64_t>(in, "offset");
    }
    const auto payload_size = read_pod<std::uint64_t>(in, "payload size");
    std::vector<float> payload(payload_size / sizeof(float));
    if (!in.read(reinterpret_cast<char*>(payload.data()),
                 static_cast<std::streamsize>(payload_size)))
        throw ArtifactError("weight file: truncated payload");

    auto find = [&](const std::string& name) -> const Entry* {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    };

    auto fill = [&](const std::string& name, std::uint8_t kind,
                    const std::vector<std::size_t>& shape, std::vector<float>& dst) {
        const Entry* e = find(name);
        if (!e)
            throw ArtifactError("weight file: missing entry '" + name + "' (manifest has " +
                                std::to_string(entries.size()) + " entries)");
        if (e->kind != kind) throw ArtifactError("weight file: entry '" + name + "' has wrong kind");
        if (e->dims.size() != shape.size())
            throw ArtifactError("weight file: entry '" + name + "' rank mismatch");
        for (std::size_t i = 0; i < shape.size(); ++i)
            if (e->dims[i] != shape[i])
                throw ArtifactError("weight file: entry '" + name + "' dim " + std::to_string(i) +
                                    " is " + std::to_string(e->dims[i]) + ", model expects " +
                                    std::to_string(shape[i]));
        const std::size_t start = e->offset / sizeof(float);
        if (start + e->numel() > payload.size())
            throw ArtifactError("weight file: entry '" + name + "' exceeds payload");
        dst.assign(payload.begin() + static_cast<std::ptrdiff_t>(start),
                   payload.begin() + static_cast<std::ptrdiff_t>(start + e->numel()));
    };

    std::size_t expected = 0;
    for (const auto& [name, p] : net.named_parameters()) {
        fill(name, 0, p->shape, p->values);
        ++expected;
    }
    for (auto& [name, b] : net.named_buffers()) {
        fill(name, 1, {b->size()}, *b);
        ++expected;
    }
    if (expected != entries.size())
        throw ArtifactError("weight file: manifest has " + std::to_string(entries.size()) +
                            " entries, model expects " + std::to_string(expected));
}

}  // namespace apnea::cli
