#include "mvann/search.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace mvann {

double contrib(uint32_t v_slot, const MultiVector& Q, const ScoredMatch& matches,
               const SimilarityConfig& cfg) {
    double acc = 0.0;
    for (size_t qi = 0; qi < matches.per_query.size(); ++qi) {
        const double wq = cfg.use_weights ? double(Q.weight(qi)) : 1.0;
        for (const auto& [idx, d] : matches.per_query[qi])
            if (idx == v_slot) acc += wq * d;
    }
    return acc;
}

std::vector<double> contribs(size_t token_count, const MultiVector& Q,
                             const ScoredMatch& matches, const SimilarityConfig& cfg) {
    std::vector<double> out(token_count, 0.0);
    for (size_t qi = 0; qi < matches.per_query.size(); ++qi) {
        const double wq = cfg.use_weights ? double(Q.weight(qi)) : 1.0;
        for (const auto& [idx, d] : matches.per_query[qi])
            if (idx < token_count) out[idx] += wq * d;
    }
    return out;
}

std::vector<double> weight_softmax(const std::vector<double>& contribs) {
    if (contribs.empty()) throw std::invalid_argument("weight_softmax: no tokens");
    double mx = *std::max_element(contribs.begin(), contribs.end());
    std::vector<double> out(contribs.size());
    double sum = 0.0;
    for (size_t i = 0; i < contribs.size(); ++i) {
        out[i] = std::exp(contribs[i] - mx);
        sum += out[i];
    }
    for (double& w : out) w /= sum;
    return out;
}

namespace {

struct CursorEntry {
    double score;
    uint32_t target;
    uint32_t slot;
    uint32_t pos;
};

struct CursorLess {
    bool operator()(const CursorEntry& a, const CursorEntry& b) const {
        if (a.score != b.score) return a.score < b.score;
        return a.target > b.target; // ties: smaller target id first
    }
};

} // namespace

std::vector<uint32_t>
expand_candidates(uint32_t node, const Dataset& data, const MultiVector& Q,
                  const ScoredMatch& matches, const SimilarityConfig& cfg,
                  const AntTable& ant, uint32_t M,
                  const std::function<bool(uint32_t)>& skip) {
    const size_t c = data.objects[node].token_count();
    auto weights = weight_softmax(contribs(c, Q, matches, cfg));

    std::priority_queue<CursorEntry, std::vector<CursorEntry>, CursorLess> heap;
    std::vector<const std::vector<AntEntry>*> lists(c);
    for (uint32_t slot = 0; slot < c; ++slot) {
        lists[slot] = &ant.lookup({node, slot});
        if (!lists[slot]->empty()) {
            const AntEntry& head = (*lists[slot])[0];
            heap.push({weights[slot] * head.base_score, head.target, slot, 0});
        }
    }

    std::vector<uint32_t> picked;
    std::unordered_map<uint32_t, char> seen;
    while (!heap.empty() && picked.size() < M) {
        CursorEntry e = heap.top();
        heap.pop();
        // advance this token's cursor regardless of acceptance
        uint32_t next = e.pos + 1;
        if (next < lists[e.slot]->size()) {
            const AntEntry& ne = (*lists[e.slot])[next];
            heap.push({weights[e.slot] * ne.base_score, ne.target, e.slot, next});
        }
        if (seen.count(e.target)) continue;
        seen.emplace(e.target, 1);
        if (skip && skip(e.target)) continue;
        picked.push_back(e.target);
    }
    return picked;
}

std::vector<std::pair<uint32_t, double>>
augmented_search_layer(const MvIndex& index, const AntTable* ant,
                       const MultiVector& Q, int32_t layer,
                       const std::vector<uint32_t>& eps, uint32_t efS,
                       const SimilarityConfig& sim, const QueryClustering* qc) {
    const bool augment = ant != nullptr && !ant->empty();
    std::vector<char> visited(index.nodes.size(), 0);
    std::unordered_map<uint32_t, ScoredMatch> match_of; // nodes admitted to Queue

    auto score_node = [&](uint32_t u, ScoredMatch* m) {
        return usim(Q, index.data->objects[u], sim, qc, m);
    };

    // Cand: worst at top; Queue: best at top (ties by smaller id)
    std::priority_queue<std::pair<double, int64_t>> cand;
    std::priority_queue<std::pair<double, int64_t>> queue;

    for (uint32_t e : eps) {
        if (visited[e]) continue;
        visited[e] = 1;
        ScoredMatch m;
        double s = score_node(e, augment ? &m : nullptr);
        cand.emplace(-s, int64_t(e));
        queue.emplace(s, -int64_t(e));
        if (augment) match_of.emplace(e, std::move(m));
    }
    while (cand.size() > efS) cand.pop();

    while (!queue.empty()) {
        auto [sq, nid] = queue.top();
        const uint32_t vq = uint32_t(-nid);
        queue.pop();
        const double worst = -cand.top().first;
        if (worst > sq) break;

        std::vector<uint32_t> exn;
        for (auto& [v, w] : index.nodes[vq].links[layer]) exn.push_back(v);
        if (augment) {
            auto skip = [&](uint32_t t) {
                return visited[t] != 0 || index.nodes[t].level < layer;
            };
            auto extra = expand_candidates(vq, *index.data, Q, match_of.at(vq), sim,
                                           *ant, index.params.M, skip);
            exn.insert(exn.end(), extra.begin(), extra.end());
        }

        for (uint32_t v : exn) {
            if (visited[v]) continue;
            visited[v] = 1;
            ScoredMatch m;
            double s = score_node(v, augment ? &m : nullptr);
            const double cur_worst = -cand.top().first;
            if (cand.size() < efS || s > cur_worst) {
                cand.emplace(-s, int64_t(v));
                if (cand.size() > efS) cand.pop();
                queue.emplace(s, -int64_t(v));
                if (augment) match_of.emplace(v, std::move(m));
            }
        }
    }

    std::vector<std::pair<uint32_t, double>> out;
    out.reserve(cand.size());
    while (!cand.empty()) {
        auto [ns, id] = cand.top();
        cand.pop();
        out.emplace_back(uint32_t(id), -ns);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::vector<std::pair<uint32_t, double>>
knn_search(const MvIndex& index, const AntTable* ant, const MultiVector& Q,
           const SearchParams& params) {
    params.validate();
    if (index.empty()) throw std::runtime_error("knn_search: empty index");

    QueryClustering qc_storage;
    const QueryClustering* qc = nullptr;
    if (params.sim.approx) {
        qc_storage = cluster_query(Q, index.params.seed);
        qc = &qc_storage;
    }

    std::vector<uint32_t> eps{uint32_t(index.entry)};
    for (int32_t lc = index.top; lc > 0; --lc) {
        auto r = index.search_layer_plain(Q, lc, eps, 1, params.sim, qc);
        eps = {r.front().first};
    }
    auto base = augmented_search_layer(index, params.augmented ? ant : nullptr, Q, 0,
                                       eps, params.efS, params.sim, qc);

    if (params.sim.exact_rerank) {
        SimilarityConfig exact = params.sim;
        exact.approx = false;
        for (auto& [id, s] : base) s = usim_exact(Q, index.data->objects[id], exact);
        std::sort(base.begin(), base.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
    }
    if (base.size() > params.k) base.resize(params.k);
    return base;
}

} // namespace mvann
