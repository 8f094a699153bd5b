#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvann {

enum class DistanceKind : uint8_t {
    InnerProduct = 0,
    NegEuclidean = 1,
};

/// Metric parameters threaded through every scoring call.
struct SimilarityConfig {
    uint32_t gamma = 1;
    DistanceKind distance = DistanceKind::InnerProduct;
    bool use_weights = true;
    bool approx = false;       // route scoring through the clustered kernel
    bool exact_rerank = false; // re-score final candidates exactly

    void validate() const {
        if (gamma < 1) throw std::invalid_argument("SimilarityConfig: gamma must be >= 1");
    }
};

/// An identified sequence of fixed-dimension token vectors with per-token
/// weights. Token values are stored flat, row-major, f32.
struct MultiVector {
    uint32_t id = 0;
    uint32_t dim = 0;
    std::vector<float> values;  // size() == token_count * dim
    std::vector<float> weights; // size() == token_count, each in [0,1]

    size_t token_count() const { return dim ? values.size() / dim : 0; }

    std::span<const float> token(size_t i) const {
        return {values.data() + i * dim, dim};
    }

    float weight(size_t i) const { return weights.empty() ? 1.0f : weights[i]; }
};

struct Dataset {
    uint32_t dim = 0;
    bool normalized = false;
    std::vector<MultiVector> objects; // ids dense, 0..n-1

    size_t size() const { return objects.size(); }
    size_t total_tokens() const {
        size_t t = 0;
        for (const auto& o : objects) t += o.token_count();
        return t;
    }
    void validate() const;
};

/// Per query-token gamma-NN assignment recorded while computing USim.
/// Each inner list holds (token index in V, distance), sorted by distance
/// descending, length min(gamma, |V|).
struct ScoredMatch {
    std::vector<std::vector<std::pair<uint32_t, double>>> per_query;
};

} // namespace mvann
