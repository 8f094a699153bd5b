#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mvann/types.hpp"

namespace mvann {

/// Token-level distance. Inner product by default, negated Euclidean
/// otherwise; larger means more similar under both.
double dis(std::span<const float> u, std::span<const float> v,
           const SimilarityConfig& cfg);

/// The min(gamma, |V|) tokens of V with largest dis(q, .), sorted by
/// distance descending, ties broken by smaller token index.
std::vector<std::pair<uint32_t, double>>
gamma_nn_exact(std::span<const float> q, const MultiVector& V, uint32_t gamma,
               const SimilarityConfig& cfg);

/// Exact unified multi-vector similarity:
///   sum_q w_q * (1/gamma') * sum_{v in gammaNN(q,V)} dis(q,v)
/// with gamma' = min(gamma, |V|). Accumulation in double precision,
/// summation in ascending query-token-index order. When `matches` is
/// non-null it records each query token's gammaNN assignment.
double usim_exact(const MultiVector& Q, const MultiVector& V,
                  const SimilarityConfig& cfg, ScoredMatch* matches = nullptr);

enum class MetricPreset {
    MaxSim,          // gamma = 1, weights forced 1
    WeightedChamfer, // gamma = 1, weights honored
    AggregateGnn,    // gamma > 1, weights forced 1
};

SimilarityConfig metric_preset(MetricPreset name, uint32_t gamma = 1);

} // namespace mvann
