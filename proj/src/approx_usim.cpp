#include "mvann/approx_usim.hpp"

#include <algorithm>
#include <cmath>

#include "mvann/util.hpp"

namespace mvann {

namespace {

double sq_euclid(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

void renormalize(float* c, uint32_t dim) {
    double n2 = 0;
    for (uint32_t i = 0; i < dim; ++i) n2 += double(c[i]) * c[i];
    if (n2 > 0) {
        double inv = 1.0 / std::sqrt(n2);
        for (uint32_t i = 0; i < dim; ++i) c[i] = float(c[i] * inv);
    }
}

} // namespace

QueryClustering cluster_query(const MultiVector& Q, uint64_t seed) {
    const size_t n = Q.token_count();
    if (n == 0) throw std::invalid_argument("cluster_query: empty query");
    const uint32_t dim = Q.dim;
    const uint32_t k = uint32_t(std::max<long>(1, std::lround(std::sqrt(double(n)))));

    QueryClustering out;
    out.k = k;
    out.dim = dim;
    out.centroids.resize(size_t(k) * dim);
    out.assignment.assign(n, 0);

    std::mt19937_64 rng(seed);

    // k-means++ seeding
    std::vector<double> mind(n, std::numeric_limits<double>::max());
    size_t first = size_t(uniform01(rng) * n);
    if (first >= n) first = n - 1;
    std::copy_n(Q.token(first).data(), dim, out.centroids.data());
    for (uint32_t c = 1; c < k; ++c) {
        double total = 0;
        for (size_t i = 0; i < n; ++i) {
            double d = sq_euclid(Q.token(i), {out.centroids.data() + size_t(c - 1) * dim, dim});
            mind[i] = std::min(mind[i], d);
            total += mind[i];
        }
        size_t pick = 0;
        if (total > 0) {
            double r = uniform01(rng) * total, acc = 0;
            for (size_t i = 0; i < n; ++i) {
                acc += mind[i];
                if (acc >= r) { pick = i; break; }
            }
        } else {
            pick = size_t(uniform01(rng) * n) % n;
        }
        std::copy_n(Q.token(pick).data(), dim, out.centroids.data() + size_t(c) * dim);
    }

    // 10 Lloyd iterations, centroids renormalized after each update
    std::vector<double> sums(size_t(k) * dim);
    std::vector<uint32_t> counts(k);
    for (int iter = 0; iter < 10; ++iter) {
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            uint32_t bc = 0;
            for (uint32_t c = 0; c < k; ++c) {
                double d = sq_euclid(Q.token(i), out.centroid(c));
                if (d < best) { best = d; bc = c; }
            }
            out.assignment[i] = bc;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (size_t i = 0; i < n; ++i) {
            uint32_t c = out.assignment[i];
            counts[c]++;
            auto tok = Q.token(i);
            for (uint32_t d = 0; d < dim; ++d) sums[size_t(c) * dim + d] += tok[d];
        }
        for (uint32_t c = 0; c < k; ++c) {
            float* cp = out.centroids.data() + size_t(c) * dim;
            if (counts[c] > 0) {
                for (uint32_t d = 0; d < dim; ++d)
                    cp[d] = float(sums[size_t(c) * dim + d] / counts[c]);
                renormalize(cp, dim);
            } else {
                // re-seed with the token farthest from its own centroid
                double worst = -1;
                size_t far = 0;
                for (size_t i = 0; i < n; ++i) {
                    double d = sq_euclid(Q.token(i), out.centroid(out.assignment[i]));
                    if (d > worst) { worst = d; far = i; }
                }
                std::copy_n(Q.token(far).data(), dim, cp);
            }
        }
    }
    // final assignment against the last centroid update
    for (size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        uint32_t bc = 0;
        for (uint32_t c = 0; c < k; ++c) {
            double d = sq_euclid(Q.token(i), out.centroid(c));
            if (d < best) { best = d; bc = c; }
        }
        out.assignment[i] = bc;
    }
    return out;
}

double usim_approx(const MultiVector& Q, const MultiVector& D,
                   const SimilarityConfig& cfg, const QueryClustering& clustering,
                   ScoredMatch* matches, uint64_t* dist_evals) {
    cfg.validate();
    const size_t cd = D.token_count();
    if (cd == 0) throw std::invalid_argument("usim_approx: empty data multi-vector");
    const size_t cq = Q.token_count();
    if (cq == 0) throw std::invalid_argument("usim_approx: empty query multi-vector");
    if (clustering.assignment.size() != cq)
        throw std::invalid_argument("usim_approx: clustering does not match query");

    const uint32_t beta =
        std::max<uint32_t>(cfg.gamma, uint32_t(std::ceil(std::sqrt(double(cd)))));

    // Filtering: per centroid, retain the beta tokens of D with largest
    // centroid distance. Candidate indices kept ascending so refinement
    // replicates the exact kernel's evaluation order.
    std::vector<std::vector<uint32_t>> cand(clustering.k);
    std::vector<std::pair<uint32_t, double>> scored(cd);
    for (uint32_t c = 0; c < clustering.k; ++c) {
        auto cent = clustering.centroid(c);
        for (size_t j = 0; j < cd; ++j)
            scored[j] = {uint32_t(j), dis(cent, D.token(j), cfg)};
        if (dist_evals) *dist_evals += cd;
        const size_t keep = std::min<size_t>(beta, cd);
        std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                          [](const auto& a, const auto& b) {
                              if (a.second != b.second) return a.second > b.second;
                              return a.first < b.first;
                          });
        auto& cc = cand[c];
        cc.reserve(keep);
        for (size_t j = 0; j < keep; ++j) cc.push_back(scored[j].first);
        std::sort(cc.begin(), cc.end());
    }

    // Refinement: each query token searches its cluster's candidate set.
    if (matches) {
        matches->per_query.clear();
        matches->per_query.reserve(cq);
    }
    double total = 0.0;
    std::vector<std::pair<uint32_t, double>> local;
    for (size_t qi = 0; qi < cq; ++qi) {
        const auto& cc = cand[clustering.assignment[qi]];
        local.clear();
        auto q = Q.token(qi);
        for (uint32_t idx : cc) local.emplace_back(idx, dis(q, D.token(idx), cfg));
        if (dist_evals) *dist_evals += cc.size();
        const size_t keep = std::min<size_t>(cfg.gamma, local.size());
        std::partial_sort(local.begin(), local.begin() + keep, local.end(),
                          [](const auto& a, const auto& b) {
                              if (a.second != b.second) return a.second > b.second;
                              return a.first < b.first;
                          });
        local.resize(keep);
        double sum = 0.0;
        for (const auto& [idx, d] : local) sum += d;
        const double wq = cfg.use_weights ? double(Q.weight(qi)) : 1.0;
        total += wq * sum / keep;
        if (matches) matches->per_query.push_back(local);
    }
    return total;
}

double usim(const MultiVector& Q, const MultiVector& D, const SimilarityConfig& cfg,
            const QueryClustering* clustering, ScoredMatch* matches) {
    if (cfg.approx && clustering)
        return usim_approx(Q, D, cfg, *clustering, matches);
    return usim_exact(Q, D, cfg, matches);
}

} // namespace mvann
