#pragma once

#include <cstdint>
#include <vector>

#include "mvann/similarity.hpp"
#include "mvann/types.hpp"

namespace mvann {

/// k-means partition of a query's tokens, k = max(1, round(sqrt(|Q|))).
/// Centroids are unit-normalized so centroid-token inner products stay on
/// the same scale as token-token distances.
struct QueryClustering {
    uint32_t k = 0;
    uint32_t dim = 0;
    std::vector<float> centroids;    // k * dim, row-major
    std::vector<uint32_t> assignment; // per query token, cluster id

    std::span<const float> centroid(size_t i) const {
        return {centroids.data() + i * dim, dim};
    }
};

/// Lloyd with k-means++ seeding, 10 iterations, Euclidean objective;
/// centroids renormalized to unit norm after each update. Empty clusters
/// are re-seeded with the token farthest from its centroid. Deterministic
/// given seed.
QueryClustering cluster_query(const MultiVector& Q, uint64_t seed);

/// Clustering-based filter-and-refine approximation of USim.
/// beta = max(gamma, ceil(sqrt(|D|))). Per centroid the beta tokens of D
/// with the largest centroid distance are retained; each query token then
/// searches its own cluster's candidate set for its gamma'NN.
/// `dist_evals`, when non-null, is incremented by the number of
/// token-distance evaluations performed (filter + refine).
double usim_approx(const MultiVector& Q, const MultiVector& D,
                   const SimilarityConfig& cfg, const QueryClustering& clustering,
                   ScoredMatch* matches = nullptr, uint64_t* dist_evals = nullptr);

/// Routes through usim_approx when cfg.approx and a clustering is given,
/// usim_exact otherwise.
double usim(const MultiVector& Q, const MultiVector& D, const SimilarityConfig& cfg,
            const QueryClustering* clustering = nullptr, ScoredMatch* matches = nullptr);

} // namespace mvann
