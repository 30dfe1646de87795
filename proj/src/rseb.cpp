#include "relsim/rseb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "relsim/error.hpp"
#include "relsim/utf8.hpp"

namespace relsim {

namespace {

constexpr std::string_view kMagicPrefix = "RSEB";
constexpr std::string_view kVersion = "0001";
constexpr std::size_t kHeaderSize = 24;

void check_id(const std::string& id) {
    if (id.empty()) fail(ErrorCode::InvalidArgument, "ids must be nonempty");
    if (id.size() > 0xFFFF) fail(ErrorCode::InvalidArgument, "id longer than 65535 bytes");
    if (!utf8::is_valid(id)) fail(ErrorCode::InvalidArgument, "id is not valid UTF-8");
}

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        out.push_back(static_cast<char>((value >> (8 * k)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get_le() {
        need(sizeof(T));
        T value = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) {
            value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail(ErrorCode::Corrupt, "unexpected end of RSEB data");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

EmbeddingTable::EmbeddingTable(SectionTag tag, std::uint32_t dim) : tag_(tag), dim_(dim) {
    if (dim == 0) fail(ErrorCode::InvalidArgument, "table dim must be >= 1");
}

void EmbeddingTable::append(std::string id, std::span<const float> row) {
    check_id(id);
    if (row.size() != dim_) {
        fail(ErrorCode::DimMismatch, "row for '" + id + "' has dim " + std::to_string(row.size()) +
                                         ", table dim is " + std::to_string(dim_));
    }
    for (float v : row) {
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite value in row '" + id + "'");
    }
    if (positions_.contains(id)) fail(ErrorCode::DuplicateId, "duplicate id '" + id + "'");
    positions_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    values_.insert(values_.end(), row.begin(), row.end());
}

std::span<const float> EmbeddingTable::row(std::size_t i) const {
    if (i >= ids_.size()) fail(ErrorCode::InvalidArgument, "row index out of range");
    return std::span<const float>(values_).subspan(i * dim_, dim_);
}

bool EmbeddingTable::contains(std::string_view id) const {
    return positions_.contains(std::string(id));
}

std::size_t EmbeddingTable::position(std::string_view id) const {
    const auto it = positions_.find(std::string(id));
    if (it == positions_.end()) fail(ErrorCode::UnknownId, "unknown id '" + std::string(id) + "'");
    return it->second;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    if (tag_ != other.tag_ || dim_ != other.dim_ || ids_ != other.ids_) return false;
    return values_.size() == other.values_.size() &&
           std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

std::uint32_t crc32(std::string_view bytes) noexcept {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large buffers.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string encode_rseb(const EmbeddingTable& table) {
    std::string out;
    out.reserve(kHeaderSize + table.values().size() * 4 + table.size() * 16 + 4);
    out += kMagicPrefix;
    out += kVersion;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.tag()));
    put_le<std::uint32_t>(out, table.dim());
    put_le<std::uint64_t>(out, table.size());
    for (float v : table.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    for (const auto& id : table.ids()) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out += id;
    }
    put_le<std::uint32_t>(out, crc32(out));
    return out;
}

EmbeddingTable decode_rseb(std::string_view bytes) {
    if (bytes.size() < 8) {
        // A cut-short header is truncation; anything else is foreign data.
        const auto head = bytes.substr(0, std::min<std::size_t>(bytes.size(), 4));
        const bool prefix = kMagicPrefix.substr(0, head.size()) == head &&
                            std::all_of(bytes.begin() + static_cast<std::ptrdiff_t>(head.size()), bytes.end(),
                                        [](char c) { return c >= '0' && c <= '9'; });
        fail(prefix ? ErrorCode::Corrupt : ErrorCode::BadMagic, prefix ? "RSEB file truncated" : "not an RSEB file");
    }
    if (bytes.substr(0, 4) != kMagicPrefix) fail(ErrorCode::BadMagic, "not an RSEB file");
    const auto version = bytes.substr(4, 4);
    if (version != kVersion) {
        const bool numeric = std::all_of(version.begin(), version.end(),
                                         [](char c) { return c >= '0' && c <= '9'; });
        if (!numeric) fail(ErrorCode::BadMagic, "not an RSEB file");
        fail(ErrorCode::UnsupportedVersion, "unsupported RSEB version " + std::string(version));
    }
    if (bytes.size() < kHeaderSize + 4) fail(ErrorCode::Corrupt, "RSEB file truncated");

    const auto body = bytes.substr(0, bytes.size() - 4);
    Reader trailer(bytes.substr(bytes.size() - 4));
    const auto stored_crc = trailer.get_le<std::uint32_t>();

    Reader in(body);
    in.take(8);
    const auto tag = in.get_le<std::uint32_t>();
    const auto dim = in.get_le<std::uint32_t>();
    const auto count = in.get_le<std::uint64_t>();
    if (tag != 1 && tag != 2) fail(ErrorCode::Corrupt, "unknown section tag " + std::to_string(tag));
    if (dim == 0) fail(ErrorCode::Corrupt, "dim is zero");
    // Each row needs dim*4 bytes plus at least a 3-byte id entry.
    if (count > in.remaining() / (static_cast<std::uint64_t>(dim) * 4 + 3)) {
        fail(ErrorCode::Corrupt, "row count exceeds file size");
    }
    if (crc32(body) != stored_crc) fail(ErrorCode::Corrupt, "CRC mismatch");

    const auto raw = in.take(static_cast<std::size_t>(count) * dim * 4);
    std::vector<float> values(static_cast<std::size_t>(count) * dim);
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::uint32_t word = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            word |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * k + b])) << (8 * b);
        }
        values[k] = std::bit_cast<float>(word);
        if (!std::isfinite(values[k])) fail(ErrorCode::Corrupt, "non-finite value in RSEB data");
    }

    EmbeddingTable table(static_cast<SectionTag>(tag), dim);
    for (std::size_t i = 0; i < count; ++i) {
        const auto len = in.get_le<std::uint16_t>();
        std::string id(in.take(len));
        if (id.empty() || !utf8::is_valid(id)) fail(ErrorCode::Corrupt, "invalid id in RSEB data");
        table.append(std::move(id), std::span<const float>(values).subspan(i * dim, dim));
    }
    if (in.remaining() != 0) fail(ErrorCode::Corrupt, "trailing bytes after id table");
    return table;
}

void save_rseb(const EmbeddingTable& table, const std::string& path) {
    const auto bytes = encode_rseb(table);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

EmbeddingTable load_rseb(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorCode::Io, "read failed for " + path);
    return decode_rseb(bytes);
}

}  // namespace relsim
