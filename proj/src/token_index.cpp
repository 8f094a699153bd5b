#include "mvann/token_index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "mvann/util.hpp"

namespace mvann {

namespace {
double ip(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * b[i];
    return acc;
}
} // namespace

void TokenIndex::attach(const Dataset& data) {
    data_ = &data;
    token_offset_.clear();
    token_offset_.reserve(data.size());
    owner_.clear();
    owner_.reserve(data.total_tokens());
    uint32_t off = 0;
    max_c_ = 0;
    // Token vectors are copied into one contiguous block; chasing each
    // object's own allocation from the search inner loop is cache-hostile.
    flat_values_.clear();
    flat_values_.reserve(size_t(data.total_tokens()) * data.dim);
    for (uint32_t i = 0; i < data.size(); ++i) {
        const auto& o = data.objects[i];
        token_offset_.push_back(off);
        off += uint32_t(o.token_count());
        owner_.insert(owner_.end(), o.token_count(), i);
        flat_values_.insert(flat_values_.end(), o.values.begin(), o.values.end());
        max_c_ = std::max(max_c_, uint32_t(o.token_count()));
    }
}

TokenRef TokenIndex::ref(uint32_t tid) const {
    uint32_t owner = owner_[tid];
    return {owner, tid - token_offset_[owner]};
}

std::span<const float> TokenIndex::vec(uint32_t tid) const {
    return {flat_values_.data() + size_t(tid) * data_->dim, data_->dim};
}

std::vector<std::pair<uint32_t, double>>
TokenIndex::search_layer(std::span<const float> q, int32_t layer,
                         const std::vector<uint32_t>& eps, uint32_t ef,
                         std::vector<uint32_t>& visit_stamp, uint32_t stamp) const {
    auto better = [](const std::pair<uint32_t, double>& a,
                     const std::pair<uint32_t, double>& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    // candidates to expand: best first; result set: worst first
    std::priority_queue<std::pair<double, uint32_t>> todo; // max by sim
    std::priority_queue<std::pair<double, int64_t>> result; // max = worst via negated sim
    for (uint32_t e : eps) {
        if (visit_stamp[e] == stamp) continue;
        visit_stamp[e] = stamp;
        double s = ip(q, vec(e));
        todo.emplace(s, e);
        result.emplace(-s, int64_t(e));
    }
    while (result.size() > ef) result.pop();
    while (!todo.empty()) {
        auto [s, u] = todo.top();
        todo.pop();
        if (result.size() >= ef && s < -result.top().first) break;
        for (uint32_t v : nodes_[u].links[layer]) {
            if (visit_stamp[v] == stamp) continue;
            visit_stamp[v] = stamp;
            double sv = ip(q, vec(v));
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
    std::sort(out.begin(), out.end(), better);
    return out;
}

std::vector<uint32_t>
TokenIndex::select_neighbors(uint32_t base, std::vector<std::pair<uint32_t, double>> cand,
                             uint32_t m) const {
    // HNSW diversification heuristic, keep-pruned-connections off
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<uint32_t> selected;
    for (const auto& [e, se] : cand) {
        if (selected.size() >= m) break;
        if (e == base) continue;
        bool keep = true;
        auto ev = vec(e);
        for (uint32_t s : selected) {
            if (ip(ev, vec(s)) > se) { keep = false; break; }
        }
        if (keep) selected.push_back(e);
    }
    return selected;
}

void TokenIndex::insert(uint32_t tid, int32_t level, std::vector<uint32_t>& visit_stamp,
                        uint32_t& stamp) {
    nodes_[tid].level = level;
    nodes_[tid].links.assign(size_t(level) + 1, {});
    if (entry_ < 0) {
        entry_ = tid;
        top_ = level;
        return;
    }
    auto q = vec(tid);
    std::vector<uint32_t> eps{uint32_t(entry_)};
    for (int32_t lc = top_; lc > level; --lc) {
        auto r = search_layer(q, lc, eps, 1, visit_stamp, ++stamp);
        eps = {r.front().first};
    }
    for (int32_t lc = std::min(level, top_); lc >= 0; --lc) {
        auto cand = search_layer(q, lc, eps, params_.efC, visit_stamp, ++stamp);
        auto sel = select_neighbors(tid, cand, params_.M);
        for (uint32_t nb : sel) {
            nodes_[tid].links[lc].push_back(nb);
            auto& nl = nodes_[nb].links[lc];
            nl.push_back(tid);
            if (nl.size() > params_.M) {
                auto nv = vec(nb);
                std::vector<std::pair<uint32_t, double>> nc;
                nc.reserve(nl.size());
                for (uint32_t x : nl) nc.emplace_back(x, ip(nv, vec(x)));
                nl = select_neighbors(nb, std::move(nc), params_.M);
            }
        }
        eps.clear();
        for (const auto& [id, s] : cand) eps.push_back(id);
    }
    if (level > top_) {
        top_ = level;
        entry_ = tid;
    }
}

void TokenIndex::build(const Dataset& data, TokenHnswParams params, unsigned /*threads*/) {
    params.validate();
    if (data.size() == 0) throw std::invalid_argument("build_token_index: empty dataset");
    params_ = params;
    attach(data);
    const size_t n = data.total_tokens();
    nodes_.assign(n, {});
    entry_ = -1;
    top_ = -1;

    std::mt19937_64 rng(params.seed);
    const double mL = 1.0 / std::log(double(params.M));
    std::vector<uint32_t> visit_stamp(n, 0);
    uint32_t stamp = 0;
    for (uint32_t tid = 0; tid < n; ++tid) {
        int32_t level = int32_t(std::floor(-std::log(uniform01(rng)) * mL));
        insert(tid, level, visit_stamp, stamp);
    }
}

std::vector<std::pair<TokenRef, double>>
TokenIndex::knn(std::span<const float> q, uint32_t k, uint32_t ef,
                std::optional<uint32_t> exclude_owner) const {
    if (k < 1) throw std::invalid_argument("token_knn: k must be >= 1");
    if (ef < k) throw std::invalid_argument("token_knn: ef must be >= k");
    if (entry_ < 0) return {};
    uint32_t efp = ef + (exclude_owner ? max_c_ : 0);
    // Reused per-thread scratch: zeroing an all-token visited array on every
    // call would make each query cost O(total tokens). Stamps stay monotonic
    // across calls (and across index instances), so stale entries never alias.
    struct Scratch {
        std::vector<uint32_t> visit;
        uint32_t stamp = 0;
    };
    thread_local Scratch sc;
    if (sc.visit.size() < nodes_.size()) {
        sc.visit.assign(nodes_.size(), 0);
        sc.stamp = 0;
    }
    std::vector<uint32_t>& visit_stamp = sc.visit;
    uint32_t& stamp = sc.stamp;
    std::vector<uint32_t> eps{uint32_t(entry_)};
    for (int32_t lc = top_; lc > 0; --lc) {
        auto r = search_layer(q, lc, eps, 1, visit_stamp, ++stamp);
        eps = {r.front().first};
    }
    auto res = search_layer(q, 0, eps, efp, visit_stamp, ++stamp);
    std::vector<std::pair<TokenRef, double>> out;
    out.reserve(k);
    for (const auto& [tid, s] : res) {
        TokenRef r = ref(tid);
        if (exclude_owner && r.owner == *exclude_owner) continue;
        out.emplace_back(r, s);
        if (out.size() == k) break;
    }
    return out;
}

} // namespace mvann
