#pragma once

// RSEB binary container, shared by embedding tables, alignment models and
// filter models. Layout (all integers little-endian):
//
//   0   8 bytes   magic "RSEB0001" ("RSEB" + 4-digit version)
//   8   u32       section tag (1 = embeddings, 2 = model)
//   12  u32       dim
//   16  u64       count
//   24  f32[count * dim]  row-major values
//       per id: u16 byte length + UTF-8 bytes
//       u32       CRC-32 (IEEE) of every preceding byte

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relsim {

enum class SectionTag : std::uint32_t {
    Embeddings = 1,
    Model = 2,
};

/// Id-addressed float32 matrix: the in-memory image of one RSEB file.
class EmbeddingTable {
public:
    EmbeddingTable(SectionTag tag, std::uint32_t dim);

    SectionTag tag() const noexcept { return tag_; }
    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }

    /// Throws DuplicateId, DimMismatch, or InvalidArgument for a bad id or
    /// non-finite value.
    void append(std::string id, std::span<const float> row);

    const std::string& id(std::size_t i) const { return ids_.at(i); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const float> row(std::size_t i) const;
    std::span<const float> values() const noexcept { return values_; }

    bool contains(std::string_view id) const;
    /// Row position of id; throws UnknownId.
    std::size_t position(std::string_view id) const;

    bool operator==(const EmbeddingTable& other) const;

private:
    SectionTag tag_;
    std::uint32_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::unordered_map<std::string, std::size_t> positions_;
};

std::string encode_rseb(const EmbeddingTable& table);

/// Throws BadMagic, UnsupportedVersion, Corrupt or DuplicateId.
EmbeddingTable decode_rseb(std::string_view bytes);

void save_rseb(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_rseb(const std::string& path);

std::uint32_t crc32(std::string_view bytes) noexcept;

}  // namespace relsim
