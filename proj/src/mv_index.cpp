#include "mvann/mv_index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <mutex>
#include <queue>
#include <shared_mutex>
#include <thread>

#include "mvann/util.hpp"

namespace mvann {

double IndexParams::effective_mL() const {
    return mL > 0.0 ? mL : 1.0 / std::log(double(M));
}

double edge_weight(const MultiVector& u, const MultiVector& v,
                   const SimilarityConfig& sim,
                   const QueryClustering* cu, const QueryClustering* cv) {
    if (u.token_count() == 0 || v.token_count() == 0)
        throw std::invalid_argument("edge_weight: empty multi-vector");
    SimilarityConfig cfg = sim;
    cfg.use_weights = false; // token weights default to 1 for edge weights
    double fwd = usim(u, v, cfg, cu) / double(u.token_count());
    double bwd = usim(v, u, cfg, cv) / double(v.token_count());
    return 0.5 * (fwd + bwd);
}

int32_t assign_layer(std::mt19937_64& rng, double mL) {
    return int32_t(std::floor(-std::log(uniform01(rng)) * mL));
}

ClusteringCache::ClusteringCache(const Dataset& data, uint64_t seed, uint32_t min_tokens) {
    cache_.resize(data.size());
    built_.assign(data.size(), 0);
    for (size_t i = 0; i < data.size(); ++i) {
        if (data.objects[i].token_count() >= min_tokens) {
            // per-object seed, decorrelated from the build rng
            uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (uint64_t(i) + 1));
            cache_[i] = cluster_query(data.objects[i], s);
            built_[i] = 1;
        }
    }
}

namespace {

struct BeamEntry {
    double score;
    uint32_t id;
};

// Generic greedy beam search over one layer. Neighbors(u) -> vector of ids,
// Score(u) -> double. Returns up to ef nodes, score desc, ties by id asc.
template <class Neighbors, class Score>
std::vector<std::pair<uint32_t, double>>
beam_search(const std::vector<uint32_t>& eps, uint32_t ef, Neighbors&& neighbors,
            Score&& score, std::vector<uint32_t>& visit_stamp, uint32_t stamp) {
    std::priority_queue<std::pair<double, uint32_t>> todo;           // best first
    std::priority_queue<std::pair<double, int64_t>> result;          // worst first
    for (uint32_t e : eps) {
        if (visit_stamp[e] == stamp) continue;
        visit_stamp[e] = stamp;
        double s = score(e);
        todo.emplace(s, e);
        result.emplace(-s, int64_t(e));
    }
    while (result.size() > ef) result.pop();
    while (!todo.empty()) {
        auto [s, u] = todo.top();
        todo.pop();
        if (result.size() >= ef && s < -result.top().first) break;
        for (uint32_t v : neighbors(u)) {
            if (visit_stamp[v] == stamp) continue;
            visit_stamp[v] = stamp;
            double sv = score(v);
            if (result.size() < ef || sv > -result.top().first) {
                todo.emplace(sv, v);
                result.emplace(-sv, int64_t(v));
                if (result.size() > ef) result.pop();
            }
        }
    }
    std::vector<std::pair<uint32_t, double>> out;
    out.reserve(result.size());
    while (!result.empty()) {
        auto [ns, nid] = result.top();
        result.pop();
        out.emplace_back(uint32_t(nid), -ns);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

struct Builder {
    MvIndex& index;
    const Dataset& data;
    const ClusteringCache* clusters;
    std::vector<std::mutex> node_mu;
    std::shared_mutex global_mu;

    Builder(MvIndex& idx, const Dataset& d, const ClusteringCache* cl)
        : index(idx), data(d), clusters(cl), node_mu(d.size()) {}

    const QueryClustering* cl(uint32_t id) const {
        return (clusters && index.params.sim.approx) ? clusters->get(id) : nullptr;
    }

    double score_pair(uint32_t a, uint32_t b) const {
        return edge_weight(data.objects[a], data.objects[b], index.params.sim,
                           cl(a), cl(b));
    }

    std::vector<std::pair<uint32_t, float>> copy_links(uint32_t u, int32_t layer) {
        std::lock_guard lk(node_mu[u]);
        return index.nodes[u].links[layer];
    }

    void insert(uint32_t id, std::vector<uint32_t>& visit_stamp, uint32_t& stamp) {
        const int32_t level = index.nodes[id].level;
        {
            std::lock_guard lk(node_mu[id]);
            index.nodes[id].links.assign(size_t(level) + 1, {});
        }
        int64_t ep;
        int32_t top;
        {
            std::shared_lock lk(global_mu);
            ep = index.entry;
            top = index.top;
        }
        if (ep < 0) {
            std::unique_lock lk(global_mu);
            if (index.entry < 0) {
                index.entry = id;
                index.top = level;
                return;
            }
            ep = index.entry;
            top = index.top;
        }

        auto score = [&](uint32_t u) { return score_pair(id, u); };

        std::vector<uint32_t> eps{uint32_t(ep)};
        for (int32_t lc = top; lc > level; --lc) {
            auto layer_neighbors = [&](uint32_t u) {
                std::vector<uint32_t> out;
                for (auto& [v, w] : copy_links(u, lc)) out.push_back(v);
                return out;
            };
            auto r = beam_search(eps, 1, layer_neighbors, score, visit_stamp, ++stamp);
            eps = {r.front().first};
        }
        for (int32_t lc = std::min(level, top); lc >= 0; --lc) {
            auto layer_neighbors = [&](uint32_t u) {
                std::vector<uint32_t> out;
                for (auto& [v, w] : copy_links(u, lc)) out.push_back(v);
                return out;
            };
            auto cand =
                beam_search(eps, index.params.efC, layer_neighbors, score, visit_stamp, ++stamp);
            // Under concurrent insertion another thread may already have
            // linked to this node, making it reachable by its own beam;
            // never self-connect.
            size_t connected = 0;
            for (size_t s = 0; s < cand.size() && connected < index.params.M; ++s) {
                if (cand[s].first == id) continue;
                connect(id, cand[s].first, lc, float(cand[s].second));
                trim(cand[s].first, lc);
                ++connected;
            }
            // Concurrent inserters may have linked to this node while the
            // loop above ran; re-enforce the degree bound on it as well.
            trim(id, lc);
            eps.clear();
            for (auto& [cid, cs] : cand) eps.push_back(cid);
        }
        {
            std::unique_lock lk(global_mu);
            if (level > index.top) {
                index.top = level;
                index.entry = id;
            }
        }
    }

    void connect(uint32_t a, uint32_t b, int32_t layer, float w) {
        if (a == b) return;
        std::scoped_lock lk(node_mu[std::min(a, b)], node_mu[std::max(a, b)]);
        index.nodes[a].links[layer].emplace_back(b, w);
        index.nodes[b].links[layer].emplace_back(a, w);
    }

    void remove_edge(uint32_t a, uint32_t b, int32_t layer) {
        if (a == b) return;
        std::scoped_lock lk(node_mu[std::min(a, b)], node_mu[std::max(a, b)]);
        auto erase = [&](uint32_t u, uint32_t v) {
            auto& ls = index.nodes[u].links[layer];
            for (auto it = ls.begin(); it != ls.end(); ++it) {
                if (it->first == v) { ls.erase(it); break; }
            }
        };
        erase(a, b);
        erase(b, a);
    }

    // Trim u's neighbor list at `layer` to the M highest-weight edges; the
    // dropped edges are removed from both endpoints.
    void trim(uint32_t u, int32_t layer) {
        std::vector<uint32_t> drops;
        {
            std::lock_guard lk(node_mu[u]);
            auto& ls = index.nodes[u].links[layer];
            if (ls.size() <= index.params.M) return;
            auto sorted = ls;
            std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (size_t i = index.params.M; i < sorted.size(); ++i)
                drops.push_back(sorted[i].first);
        }
        for (uint32_t v : drops) remove_edge(u, v, layer);
    }
};

} // namespace

void MvIndex::build(const Dataset& dataset, IndexParams p, unsigned threads) {
    p.validate();
    dataset.validate();
    if (dataset.size() == 0) throw std::invalid_argument("MvIndex::build: empty dataset");
    params = p;
    data = &dataset;
    const size_t n = dataset.size();
    nodes.assign(n, {});
    entry = -1;
    top = -1;

    // Layer assignment is drawn sequentially in id order from one seeded
    // rng, so the level structure is independent of thread count.
    std::mt19937_64 rng(p.seed);
    const double mL = p.effective_mL();
    for (size_t i = 0; i < n; ++i) nodes[i].level = assign_layer(rng, mL);

    std::unique_ptr<ClusteringCache> cache;
    if (p.sim.approx)
        cache = std::make_unique<ClusteringCache>(dataset, p.seed, kApproxTokenThreshold);

    Builder builder(*this, dataset, cache.get());
    // bootstrap the first node before any parallel work
    {
        std::vector<uint32_t> visit(n, 0);
        uint32_t stamp = 0;
        builder.insert(0, visit, stamp);
    }
    if (threads <= 1) {
        std::vector<uint32_t> visit(n, 0);
        uint32_t stamp = 0;
        for (uint32_t id = 1; id < n; ++id) builder.insert(id, visit, stamp);
    } else {
        std::atomic<uint32_t> next{1};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                std::vector<uint32_t> visit(n, 0);
                uint32_t stamp = 0;
                for (uint32_t id = next.fetch_add(1); id < n; id = next.fetch_add(1))
                    builder.insert(id, visit, stamp);
            });
        }
        for (auto& th : pool) th.join();
    }
}

std::vector<std::pair<uint32_t, double>>
MvIndex::search_layer_plain(const MultiVector& Q, int32_t layer,
                            const std::vector<uint32_t>& eps, uint32_t ef,
                            const SimilarityConfig& sim,
                            const QueryClustering* qc) const {
    std::vector<uint32_t> visit(nodes.size(), 0);
    auto layer_neighbors = [&](uint32_t u) {
        std::vector<uint32_t> out;
        for (auto& [v, w] : nodes[u].links[layer]) out.push_back(v);
        return out;
    };
    auto score = [&](uint32_t u) { return usim(Q, data->objects[u], sim, qc); };
    return beam_search(eps, ef, layer_neighbors, score, visit, 1);
}

std::vector<std::string> MvIndex::audit() const {
    std::vector<std::string> issues;
    auto complain = [&](std::string msg) { issues.push_back(std::move(msg)); };
    if (entry < 0) {
        if (!nodes.empty()) complain("non-empty index without entry point");
        return issues;
    }
    if (nodes[entry].level != top)
        complain("entry point node " + std::to_string(entry) + " not at top layer");
    int32_t max_level = -1;
    for (size_t u = 0; u < nodes.size(); ++u) {
        const auto& nd = nodes[u];
        max_level = std::max(max_level, nd.level);
        if (int64_t(nd.links.size()) != int64_t(nd.level) + 1) {
            complain("node " + std::to_string(u) + " layer occupancy mismatch");
            continue;
        }
        for (int32_t l = 0; l <= nd.level; ++l) {
            if (nd.links[l].size() > params.M)
                complain("node " + std::to_string(u) + " degree > M at layer " +
                         std::to_string(l));
            for (auto& [v, w] : nd.links[l]) {
                if (v == u) {
                    complain("node " + std::to_string(u) + " self-loop at layer " +
                             std::to_string(l));
                    continue;
                }
                if (v >= nodes.size() || nodes[v].level < l) {
                    complain("node " + std::to_string(u) + " edge to invalid node " +
                             std::to_string(v));
                    continue;
                }
                bool found = false;
                for (auto& [bu, bw] : nodes[v].links[l]) {
                    if (bu == u) {
                        found = true;
                        if (bw != w)
                            complain("edge (" + std::to_string(u) + "," +
                                     std::to_string(v) + ") cached weight mismatch");
                        break;
                    }
                }
                if (!found)
                    complain("edge (" + std::to_string(u) + "," + std::to_string(v) +
                             ") not symmetric at layer " + std::to_string(l));
            }
        }
    }
    if (max_level != top) complain("top layer does not match maximum node level");
    return issues;
}

} // namespace mvann
