#include "mvann/oracle.hpp"

#include <algorithm>
#include <unordered_set>

#include "mvann/binio.hpp"
#include "mvann/similarity.hpp"
#include "mvann/util.hpp"

namespace mvann {

std::vector<std::pair<uint64_t, double>>
linear_scan_topk(const Dataset& dataset, const MultiVector& Q, uint32_t k,
                 const SimilarityConfig& sim, unsigned threads) {
    if (sim.approx)
        throw std::invalid_argument("linear_scan_topk: the oracle is always exact");
    const size_t n = dataset.size();
    std::vector<std::pair<uint64_t, double>> scored(n);
    parallel_for(n, threads, [&](size_t i) {
        scored[i] = {uint64_t(i), usim_exact(Q, dataset.objects[i], sim)};
    });
    const size_t keep = std::min<size_t>(k, n);
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    scored.resize(keep);
    return scored;
}

double recall(const std::vector<uint64_t>& result_ids,
              const std::vector<uint64_t>& truth_ids, uint32_t k) {
    if (k == 0) throw std::invalid_argument("recall: k must be >= 1");
    std::unordered_set<uint64_t> truth(truth_ids.begin(), truth_ids.end());
    size_t hits = 0;
    for (uint64_t id : result_ids)
        if (truth.count(id)) ++hits;
    return double(hits) / double(k);
}

void write_mvgt(const std::string& path, const GroundTruth& gt) {
    BinWriter w(path);
    w.magic("MVGT");
    w.pod<uint16_t>(1);
    w.pod<uint32_t>(gt.k);
    w.pod<uint64_t>(gt.rows.size());
    for (const auto& row : gt.rows) {
        if (row.size() != gt.k)
            throw FormatError("write_mvgt: row length != k");
        for (const auto& [id, score] : row) {
            w.pod<uint64_t>(id);
            w.pod<double>(score);
        }
    }
    w.close();
}

GroundTruth read_mvgt(const std::string& path) {
    BinReader r(path);
    r.expect_magic("MVGT");
    if (r.pod<uint16_t>() != 1) r.fail("unsupported version");
    GroundTruth gt;
    gt.k = r.pod<uint32_t>();
    uint64_t nq = r.pod<uint64_t>();
    gt.rows.resize(nq);
    for (auto& row : gt.rows) {
        row.resize(gt.k);
        for (auto& [id, score] : row) {
            id = r.pod<uint64_t>();
            score = r.pod<double>();
        }
    }
    r.expect_eof();
    return gt;
}

} // namespace mvann
