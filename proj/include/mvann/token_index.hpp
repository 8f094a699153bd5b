#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvann/types.hpp"

namespace mvann {

/// A token's position in the dataset: owning multi-vector and slot within it.
struct TokenRef {
    uint32_t owner = 0;
    uint32_t slot = 0;
    auto operator<=>(const TokenRef&) const = default;
};

struct TokenHnswParams {
    uint32_t M = 32;
    uint32_t efC = 40;
    uint64_t seed = 0;

    void validate() const {
        if (M < 2) throw std::invalid_argument("TokenHnswParams: M must be >= 2");
        if (efC < M) throw std::invalid_argument("TokenHnswParams: efC must be >= M");
    }
};

/// Single-vector HNSW over the union of all token vectors, inner-product
/// similarity. Built once (deterministic given seed and ascending TokenRef
/// insertion order), immutable and concurrently readable afterward.
class TokenIndex {
public:
    struct Node {
        int32_t level = -1;
        std::vector<std::vector<uint32_t>> links; // links[layer]
    };

    void build(const Dataset& data, TokenHnswParams params, unsigned threads = 1);

    /// Up to k tokens sorted by distance descending; tokens owned by
    /// exclude_owner are filtered out post-search (the beam oversamples).
    std::vector<std::pair<TokenRef, double>>
    knn(std::span<const float> q, uint32_t k, uint32_t ef,
        std::optional<uint32_t> exclude_owner = std::nullopt) const;

    size_t token_count() const { return nodes_.size(); }
    TokenRef ref(uint32_t tid) const;
    uint32_t flat_id(TokenRef r) const { return token_offset_[r.owner] + r.slot; }
    std::span<const float> vec(uint32_t tid) const;

    const Dataset* data_ = nullptr;
    TokenHnswParams params_;
    std::vector<Node> nodes_;           // flat token id order
    std::vector<uint32_t> token_offset_; // owner id -> first flat token id
    std::vector<uint32_t> owner_;        // flat token id -> owner id
    std::vector<float> flat_values_;     // all token vectors, contiguous
    int64_t entry_ = -1;
    int32_t top_ = -1;
    uint32_t max_c_ = 0; // largest token count of any object, for oversampling

    void attach(const Dataset& data); // rebuild offsets after deserialization

private:
    std::vector<std::pair<uint32_t, double>>
    search_layer(std::span<const float> q, int32_t layer,
                 const std::vector<uint32_t>& eps, uint32_t ef,
                 std::vector<uint32_t>& visit_stamp, uint32_t stamp) const;
    std::vector<uint32_t> select_neighbors(uint32_t base,
                                           std::vector<std::pair<uint32_t, double>> cand,
                                           uint32_t m) const;
    void insert(uint32_t tid, int32_t level, std::vector<uint32_t>& visit_stamp,
                uint32_t& stamp);
};

} // namespace mvann
