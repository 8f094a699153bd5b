#include "mvann/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace mvann {

void Dataset::validate() const {
    if (dim < 1) throw std::invalid_argument("Dataset: dim must be >= 1");
    for (size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        if (o.id != i) throw std::invalid_argument("Dataset: ids must be dense 0..n-1");
        if (o.dim != dim) throw std::invalid_argument("Dataset: mixed dimensions");
        if (o.token_count() < 1) throw std::invalid_argument("Dataset: empty multi-vector");
        if (!o.weights.empty() && o.weights.size() != o.token_count())
            throw std::invalid_argument("Dataset: weights/token length mismatch");
        for (float w : o.weights)
            if (!(w >= 0.0f && w <= 1.0f))
                throw std::invalid_argument("Dataset: weight outside [0,1]");
        for (float v : o.values)
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite coordinate");
        if (normalized) {
            for (size_t t = 0; t < o.token_count(); ++t) {
                double n2 = 0;
                for (float v : o.token(t)) n2 += double(v) * v;
                if (std::abs(std::sqrt(n2) - 1.0) > 1e-4)
                    throw std::invalid_argument("Dataset: token not unit-norm");
            }
        }
    }
}

double dis(std::span<const float> u, std::span<const float> v,
           const SimilarityConfig& cfg) {
    if (u.size() != v.size())
        throw std::invalid_argument("dis: dimension mismatch");
    double acc = 0.0;
    if (cfg.distance == DistanceKind::InnerProduct) {
        for (size_t i = 0; i < u.size(); ++i) acc += double(u[i]) * v[i];
        return acc;
    }
    for (size_t i = 0; i < u.size(); ++i) {
        double d = double(u[i]) - v[i];
        acc += d * d;
    }
    return -std::sqrt(acc);
}

std::vector<std::pair<uint32_t, double>>
gamma_nn_exact(std::span<const float> q, const MultiVector& V, uint32_t gamma,
               const SimilarityConfig& cfg) {
    if (gamma < 1) throw std::invalid_argument("gamma_nn_exact: gamma must be >= 1");
    const size_t c = V.token_count();
    std::vector<std::pair<uint32_t, double>> all;
    all.reserve(c);
    for (size_t i = 0; i < c; ++i)
        all.emplace_back(uint32_t(i), dis(q, V.token(i), cfg));
    const size_t keep = std::min<size_t>(gamma, c);
    auto cmp = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(all.begin(), all.begin() + keep, all.end(), cmp);
    all.resize(keep);
    return all;
}

double usim_exact(const MultiVector& Q, const MultiVector& V,
                  const SimilarityConfig& cfg, ScoredMatch* matches) {
    cfg.validate();
    if (V.token_count() == 0) throw std::invalid_argument("usim_exact: empty data multi-vector");
    if (Q.token_count() == 0) throw std::invalid_argument("usim_exact: empty query multi-vector");
    const size_t cq = Q.token_count();
    const uint32_t gp = uint32_t(std::min<size_t>(cfg.gamma, V.token_count()));
    if (matches) {
        matches->per_query.clear();
        matches->per_query.reserve(cq);
    }
    double total = 0.0;
    for (size_t qi = 0; qi < cq; ++qi) {
        auto nn = gamma_nn_exact(Q.token(qi), V, cfg.gamma, cfg);
        double sum = 0.0;
        for (const auto& [idx, d] : nn) sum += d;
        const double wq = cfg.use_weights ? double(Q.weight(qi)) : 1.0;
        total += wq * sum / gp;
        if (matches) matches->per_query.push_back(std::move(nn));
    }
    return total;
}

SimilarityConfig metric_preset(MetricPreset name, uint32_t gamma) {
    SimilarityConfig cfg;
    switch (name) {
    case MetricPreset::MaxSim:
        cfg.gamma = 1;
        cfg.use_weights = false;
        break;
    case MetricPreset::WeightedChamfer:
        cfg.gamma = 1;
        cfg.use_weights = true;
        break;
    case MetricPreset::AggregateGnn:
        if (gamma <= 1)
            throw std::invalid_argument("metric_preset: aggregate-gnn requires gamma > 1");
        cfg.gamma = gamma;
        cfg.use_weights = false;
        break;
    }
    return cfg;
}

} // namespace mvann
