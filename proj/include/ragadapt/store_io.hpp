#pragma once

#include <filesystem>
#include <iosfwd>

#include "ragadapt/embedding.hpp"

// RAEB container: a flat little-endian dump of float32 rows.
//
//   offset  size  field
//   0       4     magic "RAEB" (0x52 0x41 0x45 0x42)
//   4       2     u16 version, currently 1
//   6       2     u16 flags; bit0 = labels present, all other bits must be 0
//   8       4     u32 d (embedding dimension)
//   12      8     u64 n (vector count)
//   20      4nd   n*d float32, row-major
//   [then]  4n    n u32 1-based labels, only when flag bit0 set
//
// No padding anywhere and no trailing bytes. Arithmetic in this library is
// double; the file stores float32, so a read-back store is the float32
// quantization of what was written (write-read-write is byte identical).
namespace ragadapt {

namespace raeb {

struct Payload {
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::vector<double> data;  // row-major, widened from float32
    std::optional<std::vector<ClassId>> labels;
};

void write_payload(std::ostream& os, std::uint32_t dim, std::span<const double> row_major,
                   const std::optional<std::vector<ClassId>>& labels);
// Structural validation only (magic/version/flags/size); norms are the
// caller's concern. `require_eof` rejects trailing bytes.
Payload read_payload(std::istream& is, bool require_eof);

}  // namespace raeb

void write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore read_store(const std::filesystem::path& path);  // norm-checked at 1e-6

}  // namespace ragadapt
