#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relsim/embedding.hpp"
#include "relsim/rseb.hpp"

namespace relsim {

struct ScoredId {
    std::string id;
    double score;
    bool operator==(const ScoredId&) const = default;
};

/// Scores non-increasing; equal scores ordered by ascending id.
struct RetrievalResult {
    std::vector<ScoredId> ranked;
};

/// Exact cosine search over an immutable set of unit-length rows.
class VectorIndex {
public:
    /// Throws Empty, DuplicateId or DimMismatch.
    static VectorIndex build(const std::vector<std::pair<std::string, NormalizedEmbedding>>& entries);

    /// Normalizes every row of a raw table (ZeroVector on a null row).
    static VectorIndex from_raw(const EmbeddingTable& raw);

    /// Loads an index file; rows must already be unit length (Corrupt otherwise).
    static VectorIndex load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t dim() const noexcept { return table_.dim(); }
    std::size_t size() const noexcept { return table_.size(); }
    const std::string& id(std::size_t i) const { return table_.id(i); }
    const std::vector<std::string>& ids() const noexcept { return table_.ids(); }
    bool contains(const std::string& id) const { return table_.contains(id); }
    NormalizedEmbedding embedding(std::size_t i) const;
    NormalizedEmbedding embedding(const std::string& id) const;
    const EmbeddingTable& table() const noexcept { return table_; }

    RetrievalResult top_k(const NormalizedEmbedding& query, std::size_t k,
                          const std::set<std::string>& exclude = {}) const;

    /// Queries with the stored row of `id`, optionally excluding it.
    RetrievalResult top_k_for_id(const std::string& id, std::size_t k, bool exclude_self) const;

private:
    explicit VectorIndex(EmbeddingTable table) : table_(std::move(table)) {}

    EmbeddingTable table_;
};

}  // namespace relsim
