#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvann/types.hpp"

namespace mvann {

/// Per query: ordered list of k (multi-vector id, exact score) pairs.
struct GroundTruth {
    uint32_t k = 0;
    std::vector<std::vector<std::pair<uint64_t, double>>> rows;
};

/// Exact USim against every object; top-k by score descending, ties by id
/// ascending. k > n returns n results.
std::vector<std::pair<uint64_t, double>>
linear_scan_topk(const Dataset& dataset, const MultiVector& Q, uint32_t k,
                 const SimilarityConfig& sim, unsigned threads = 1);

/// |result intersect truth| / k, set semantics.
double recall(const std::vector<uint64_t>& result_ids,
              const std::vector<uint64_t>& truth_ids, uint32_t k);

void write_mvgt(const std::string& path, const GroundTruth& gt);
GroundTruth read_mvgt(const std::string& path);

} // namespace mvann
