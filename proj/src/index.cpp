#include "relsim/index.hpp"

#include <algorithm>
#include <cmath>

#include "relsim/error.hpp"

namespace relsim {

VectorIndex VectorIndex::build(const std::vector<std::pair<std::string, NormalizedEmbedding>>& entries) {
    if (entries.empty()) fail(ErrorCode::Empty, "cannot build an empty index");
    EmbeddingTable table(SectionTag::Embeddings, static_cast<std::uint32_t>(entries.front().second.dim()));
    for (const auto& [id, e] : entries) table.append(id, e.values());
    return VectorIndex(std::move(table));
}

VectorIndex VectorIndex::from_raw(const EmbeddingTable& raw) {
    if (raw.size() == 0) fail(ErrorCode::Empty, "cannot build an empty index");
    EmbeddingTable table(SectionTag::Embeddings, raw.dim());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        try {
            table.append(raw.id(i), normalize(raw.row(i)).values());
        } catch (const Error& e) {
            fail(e.code(), "row '" + raw.id(i) + "': " + e.what());
        }
    }
    return VectorIndex(std::move(table));
}

VectorIndex VectorIndex::load(const std::string& path) {
    auto table = load_rseb(path);
    if (table.tag() != SectionTag::Embeddings) {
        fail(ErrorCode::Corrupt, path + " does not hold an embeddings section");
    }
    if (table.size() == 0) fail(ErrorCode::Empty, path + " holds no rows");
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (std::abs(l2_norm(table.row(i)) - 1.0) > kUnitNormTolerance) {
            fail(ErrorCode::Corrupt, "row '" + table.id(i) + "' is not unit length");
        }
    }
    return VectorIndex(std::move(table));
}

void VectorIndex::save(const std::string& path) const { save_rseb(table_, path); }

NormalizedEmbedding VectorIndex::embedding(std::size_t i) const {
    const auto row = table_.row(i);
    return NormalizedEmbedding::from_unit(std::vector<float>(row.begin(), row.end()));
}

NormalizedEmbedding VectorIndex::embedding(const std::string& id) const {
    return embedding(table_.position(id));
}

RetrievalResult VectorIndex::top_k(const NormalizedEmbedding& query, std::size_t k,
                                   const std::set<std::string>& exclude) const {
    if (query.dim() != dim()) {
        fail(ErrorCode::DimMismatch, "query dim " + std::to_string(query.dim()) +
                                         " != index dim " + std::to_string(dim()));
    }
    if (k == 0) fail(ErrorCode::InvalidArgument, "k must be >= 1");

    struct Candidate {
        double score;
        std::size_t row;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (!exclude.empty() && exclude.contains(table_.id(i))) continue;
        candidates.push_back({dot(query.values(), table_.row(i)), i});
    }
    const auto better = [this](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return table_.id(a.row) < table_.id(b.row);
    };
    const std::size_t n = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n),
                      candidates.end(), better);

    RetrievalResult result;
    result.ranked.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.ranked.push_back({table_.id(candidates[i].row), candidates[i].score});
    }
    return result;
}

RetrievalResult VectorIndex::top_k_for_id(const std::string& id, std::size_t k, bool exclude_self) const {
    const auto query = embedding(id);
    std::set<std::string> exclude;
    if (exclude_self) exclude.insert(id);
    return top_k(query, k, exclude);
}

}  // namespace relsim
