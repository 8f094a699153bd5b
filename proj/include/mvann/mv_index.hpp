#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvann/approx_usim.hpp"
#include "mvann/types.hpp"

namespace mvann {

struct IndexParams {
    uint32_t M = 16;
    uint32_t efC = 100;
    double mL = 0.0; // <= 0 means the default 1/ln(M)
    uint64_t seed = 0;
    SimilarityConfig sim;

    double effective_mL() const;
    void validate() const {
        if (M < 2) throw std::invalid_argument("IndexParams: M must be >= 2");
        if (efC < M) throw std::invalid_argument("IndexParams: efC must be >= M");
        sim.validate();
    }
};

/// Symmetric edge weight between two multi-vectors:
///   f(u,v) = 1/2 * (USim(u,v)/|u| + USim(v,u)/|v|)
/// with token weights forced to 1. Each directional term is routed through
/// the clustered kernel when the corresponding clustering is supplied and
/// sim.approx is set.
double edge_weight(const MultiVector& u, const MultiVector& v,
                   const SimilarityConfig& sim,
                   const QueryClustering* cu = nullptr,
                   const QueryClustering* cv = nullptr);

/// Layer sampled from an exponentially decaying distribution:
/// floor(-ln(uniform(0,1)) * mL), uniform drawn from the open interval.
int32_t assign_layer(std::mt19937_64& rng, double mL);

/// The hierarchical graph over multi-vectors. Built by repeated insertion;
/// immutable and safe for unlimited concurrent readers afterward.
class MvIndex {
public:
    struct Node {
        int32_t level = -1;
        // links[layer] = (neighbor id, cached edge weight), symmetric
        std::vector<std::vector<std::pair<uint32_t, float>>> links;
    };

    IndexParams params;
    const Dataset* data = nullptr;
    std::vector<Node> nodes;
    int64_t entry = -1;
    int32_t top = -1;

    size_t size() const { return nodes.size(); }
    bool empty() const { return entry < 0; }

    /// Inserts every object of `data` in id order. Construction USim is
    /// routed through the clustered kernel for objects with >= 16 tokens
    /// when params.sim.approx allows it.
    void build(const Dataset& data, IndexParams params, unsigned threads = 1);

    /// Standard greedy beam search over one layer, scoring nodes by
    /// USim(Q, .). Returns up to ef nodes sorted by score descending.
    std::vector<std::pair<uint32_t, double>>
    search_layer_plain(const MultiVector& Q, int32_t layer,
                       const std::vector<uint32_t>& eps, uint32_t ef,
                       const SimilarityConfig& sim,
                       const QueryClustering* qc = nullptr) const;

    /// Structural audit: adjacency symmetry with identical cached weights,
    /// degree bounds, layer occupancy, entry-point placement. Returns
    /// human-readable violations; empty means the index is sound.
    std::vector<std::string> audit() const;
};

/// Construction-time clustering cache: one lazy clustering per dataset
/// object with at least `min_tokens` tokens.
class ClusteringCache {
public:
    ClusteringCache(const Dataset& data, uint64_t seed, uint32_t min_tokens = 16);
    const QueryClustering* get(uint32_t id) const {
        return built_[id] ? &cache_[id] : nullptr;
    }

private:
    std::vector<QueryClustering> cache_;
    std::vector<char> built_;
};

inline constexpr uint32_t kApproxTokenThreshold = 16;

} // namespace mvann
