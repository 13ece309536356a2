#include "ragadapt/store_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace ragadapt {

namespace {

constexpr unsigned char kMagic[4] = {0x52, 0x41, 0x45, 0x42};  // "RAEB"
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagLabels = 0x0001;

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw TruncatedFileError(std::string("RAEB: truncated while reading ") + what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
    return value;
}

void put_f32(std::ostream& os, float f) { put_le(os, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

namespace raeb {

void write_payload(std::ostream& os, std::uint32_t dim, std::span<const double> row_major,
                   const std::optional<std::vector<ClassId>>& labels) {
    if (dim == 0 || row_major.size() % dim != 0)
        throw DimensionMismatchError("RAEB write: data size not a multiple of dim");
    const std::uint64_t n = row_major.size() / dim;
    if (labels && labels->size() != n)
        throw DimensionMismatchError("RAEB write: label count != vector count");

    os.write(reinterpret_cast<const char*>(kMagic), 4);
    put_le<std::uint16_t>(os, kVersion);
    put_le<std::uint16_t>(os, labels ? kFlagLabels : 0);
    put_le<std::uint32_t>(os, dim);
    put_le<std::uint64_t>(os, n);
    for (double x : row_major) put_f32(os, static_cast<float>(x));
    if (labels)
        for (ClassId id : *labels) put_le<std::uint32_t>(os, id);
    if (!os) throw IoError("RAEB write: stream failure");
}

Payload read_payload(std::istream& is, bool require_eof) {
    unsigned char magic[4];
    is.read(reinterpret_cast<char*>(magic), 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw BadMagicError("RAEB: bad magic bytes");
    const auto version = get_le<std::uint16_t>(is, "version");
    if (version != kVersion)
        throw UnsupportedVersionError("RAEB: unsupported version " + std::to_string(version));
    const auto flags = get_le<std::uint16_t>(is, "flags");
    if ((flags & ~kFlagLabels) != 0)
        throw UnsupportedVersionError("RAEB: unknown flag bits set");
    const auto dim = get_le<std::uint32_t>(is, "dim");
    const auto n = get_le<std::uint64_t>(is, "count");
    if (dim == 0) throw TruncatedFileError("RAEB: zero dimension");

    Payload p;
    p.dim = dim;
    p.count = n;
    p.data.resize(static_cast<std::size_t>(n) * dim);
    for (double& x : p.data) {
        const auto bits = get_le<std::uint32_t>(is, "float payload");
        x = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (flags & kFlagLabels) {
        std::vector<ClassId> labels(static_cast<std::size_t>(n));
        for (ClassId& id : labels) id = get_le<std::uint32_t>(is, "labels");
        p.labels = std::move(labels);
    }
    if (require_eof) {
        is.peek();
        if (!is.eof()) throw TrailingBytesError("RAEB: trailing bytes after payload");
    }
    return p;
}

}  // namespace raeb

void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    raeb::write_payload(os, static_cast<std::uint32_t>(store.dim()), store.raw(),
                        store.has_labels()
                            ? std::optional<std::vector<ClassId>>(store.labels())
                            : std::nullopt);
    os.close();
    if (!os) throw IoError("write failed: " + path.string());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    raeb::Payload p = raeb::read_payload(is, /*require_eof=*/true);
    return EmbeddingStore::from_raw(p.dim, std::move(p.data), std::move(p.labels), 1e-6);
}

}  // namespace ragadapt
