#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mvann/ant.hpp"
#include "mvann/mv_index.hpp"
#include "mvann/types.hpp"

namespace mvann {

struct SearchParams {
    uint32_t k = 10;
    uint32_t efS = 64;
    bool augmented = true;
    SimilarityConfig sim;

    void validate() const {
        if (k < 1) throw std::invalid_argument("SearchParams: k must be >= 1");
        if (efS < k) throw std::invalid_argument("SearchParams: efS must be >= k");
        sim.validate();
    }
};

/// A token's share of USim(Q, V), read off the stored match assignment:
/// sum over query tokens q with v in gammaNN(q, V) of w_q * dis(q, v).
double contrib(uint32_t v_slot, const MultiVector& Q, const ScoredMatch& matches,
               const SimilarityConfig& cfg);

/// All per-token contributions of a node with `token_count` tokens.
std::vector<double> contribs(size_t token_count, const MultiVector& Q,
                             const ScoredMatch& matches, const SimilarityConfig& cfg);

/// Softmax with max-subtraction; output sums to 1.
std::vector<double> weight_softmax(const std::vector<double>& contribs);

/// Lazy selection of up to M distinct expansion targets from the merged
/// ANT lists of `node`'s tokens, ranked by priority
/// (token weight * precomputed base_score, max over tokens per target).
/// Targets for which skip() is true are passed over without consuming a slot.
std::vector<uint32_t>
expand_candidates(uint32_t node, const Dataset& data, const MultiVector& Q,
                  const ScoredMatch& matches, const SimilarityConfig& cfg,
                  const AntTable& ant, uint32_t M,
                  const std::function<bool(uint32_t)>& skip = {});

/// Beam search over one layer with dynamic candidate expansion. With a
/// null or empty ANT this reduces exactly to the plain layer search.
std::vector<std::pair<uint32_t, double>>
augmented_search_layer(const MvIndex& index, const AntTable* ant,
                       const MultiVector& Q, int32_t layer,
                       const std::vector<uint32_t>& eps, uint32_t efS,
                       const SimilarityConfig& sim,
                       const QueryClustering* qc = nullptr);

/// Top-level search: greedy descent through upper layers, one base-layer
/// pass with efS (augmented when params.augmented and an ANT is given),
/// exact re-rank when params.sim.exact_rerank.
std::vector<std::pair<uint32_t, double>>
knn_search(const MvIndex& index, const AntTable* ant, const MultiVector& Q,
           const SearchParams& params);

} // namespace mvann
