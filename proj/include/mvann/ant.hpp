#pragma once

#include <cstdint>
#include <vector>

#include "mvann/token_index.hpp"
#include "mvann/types.hpp"

namespace mvann {

struct AntEntry {
    uint32_t target = 0;    // multi-vector id, never the token's owner
    double base_score = 0;  // sum of top-gamma distances over the retrieved set
};

/// Per token, an ordered list of up to M globally relevant multi-vectors
/// (base_score descending, ties by target id ascending).
class AntTable {
public:
    uint32_t M = 0;
    uint32_t gamma = 0;
    uint32_t M_prime = 0;
    std::vector<std::vector<AntEntry>> lists; // flat token id order
    std::vector<uint32_t> token_offset_;      // owner id -> first flat token id

    bool empty() const { return lists.empty(); }

    const std::vector<AntEntry>& lookup(TokenRef ref) const {
        if (ref.owner >= token_offset_.size())
            throw std::invalid_argument("ant_lookup: unknown token ref");
        size_t flat = size_t(token_offset_[ref.owner]) + ref.slot;
        size_t end = ref.owner + 1 < token_offset_.size()
                         ? token_offset_[ref.owner + 1]
                         : lists.size();
        if (flat >= end) throw std::invalid_argument("ant_lookup: unknown token ref");
        return lists[flat];
    }

    size_t total_entries() const {
        size_t t = 0;
        for (const auto& l : lists) t += l.size();
        return t;
    }
};

/// Builds the table: per token v of owner V, retrieve the M' = 5M nearest
/// tokens excluding V, group by owner, score each owner by the sum of its
/// min(gamma, group size) largest distances, keep the top-M owners.
AntTable build_ant(const Dataset& dataset, const TokenIndex& token_index,
                   uint32_t M, uint32_t gamma, unsigned threads = 1);

} // namespace mvann
