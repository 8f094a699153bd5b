#include "mvann/ant.hpp"

#include <algorithm>
#include <map>

#include "mvann/util.hpp"

namespace mvann {

AntTable build_ant(const Dataset& dataset, const TokenIndex& token_index,
                   uint32_t M, uint32_t gamma, unsigned threads) {
    if (M < 1) throw std::invalid_argument("build_ant: M must be >= 1");
    if (gamma < 1) throw std::invalid_argument("build_ant: gamma must be >= 1");

    AntTable table;
    table.M = M;
    table.gamma = gamma;
    table.M_prime = 5 * M;
    table.token_offset_.reserve(dataset.size());
    uint32_t off = 0;
    for (const auto& o : dataset.objects) {
        table.token_offset_.push_back(off);
        off += uint32_t(o.token_count());
    }
    table.lists.resize(off);

    const uint32_t ef = std::max(table.M_prime, token_index.params_.efC);
    parallel_for(off, threads, [&](size_t flat) {
        TokenRef ref = token_index.ref(uint32_t(flat));
        auto q = dataset.objects[ref.owner].token(ref.slot);
        auto nn = token_index.knn(q, table.M_prime, ef, ref.owner);

        // group retrieved tokens by owning multi-vector
        std::map<uint32_t, std::vector<double>> groups;
        for (const auto& [r, d] : nn) groups[r.owner].push_back(d);

        std::vector<AntEntry> entries;
        entries.reserve(groups.size());
        for (auto& [owner, dists] : groups) {
            std::sort(dists.begin(), dists.end(), std::greater<>());
            size_t take = std::min<size_t>(gamma, dists.size());
            double sum = 0;
            for (size_t i = 0; i < take; ++i) sum += dists[i];
            entries.push_back({owner, sum});
        }
        std::sort(entries.begin(), entries.end(), [](const AntEntry& a, const AntEntry& b) {
            if (a.base_score != b.base_score) return a.base_score > b.base_score;
            return a.target < b.target;
        });
        if (entries.size() > M) entries.resize(M);
        table.lists[flat] = std::move(entries);
    });
    return table;
}

} // namespace mvann
