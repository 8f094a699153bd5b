#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "mvann/oracle.hpp"
#include "mvann/search.hpp"
#include "test_util.hpp"

using namespace mvann;
using namespace testutil;

namespace {

Dataset topical_dataset(std::mt19937_64& rng, size_t n, uint32_t dim, uint32_t c_min,
                        uint32_t c_max, size_t topics, double sigma) {
    auto centers = random_centers(rng, topics, dim);
    Dataset d;
    d.dim = dim;
    d.normalized = true;
    for (size_t i = 0; i < n; ++i) {
        size_t nt = 1 + rng() % 2;
        std::vector<std::vector<float>> sub;
        for (size_t t = 0; t < nt; ++t) sub.push_back(centers[rng() % centers.size()]);
        uint32_t c = c_min + (c_max > c_min ? rng() % (c_max - c_min + 1) : 0);
        d.objects.push_back(clustered_mv(rng, uint32_t(i), dim, c, sub, sigma));
    }
    return d;
}

// Brute-force analogue of the lazy expansion: merge all ANT lists of the
// node's tokens, per-target priority = max over tokens of weight * base_score,
// sort desc (ties target asc), apply the skip filter, take M.
std::vector<uint32_t>
brute_expand(uint32_t node, const Dataset& data, const MultiVector& Q,
             const ScoredMatch& matches, const SimilarityConfig& cfg,
             const AntTable& ant, uint32_t M,
             const std::function<bool(uint32_t)>& skip = {}) {
    const size_t c = data.objects[node].token_count();
    auto weights = weight_softmax(contribs(c, Q, matches, cfg));
    std::map<uint32_t, double> prio;
    for (uint32_t slot = 0; slot < c; ++slot) {
        for (const auto& e : ant.lookup({node, slot})) {
            double p = weights[slot] * e.base_score;
            auto it = prio.find(e.target);
            if (it == prio.end())
                prio.emplace(e.target, p);
            else
                it->second = std::max(it->second, p);
        }
    }
    std::vector<std::pair<double, uint32_t>> ranked;
    for (const auto& [t, p] : prio) ranked.emplace_back(p, t);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<uint32_t> out;
    for (const auto& [p, t] : ranked) {
        if (out.size() >= M) break;
        if (skip && skip(t)) continue;
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST_CASE("contrib: worked example and partition property") {
    auto e = weighted_example();
    SimilarityConfig cfg;
    ScoredMatch m;
    double total = usim_exact(e.Q, e.V, cfg, &m);
    CHECK(contrib(0, e.Q, m, cfg) == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(contrib(1, e.Q, m, cfg) == doctest::Approx(0.0));
    CHECK(contrib(2, e.Q, m, cfg) == doctest::Approx(1.0).epsilon(1e-6));

    auto all = contribs(e.V.token_count(), e.Q, m, cfg);
    REQUIRE(all.size() == 3);
    double sum = all[0] + all[1] + all[2];
    CHECK(sum == doctest::Approx(total).epsilon(1e-12));

    // a token matched by no query token contributes zero
    std::mt19937_64 rng(139);
    auto Q = random_mv(rng, 0, 8, 2);
    auto V = random_mv(rng, 1, 8, 6);
    ScoredMatch m2;
    usim_exact(Q, V, cfg, &m2);
    std::set<uint32_t> matched;
    for (const auto& row : m2.per_query)
        for (const auto& [idx, d] : row) matched.insert(idx);
    for (uint32_t s = 0; s < 6; ++s)
        if (!matched.count(s)) CHECK(contrib(s, Q, m2, cfg) == 0.0);
}

TEST_CASE("weight_softmax: worked values, uniform, overflow safety") {
    auto w = weight_softmax({0.8, 0.0, 1.0});
    // direct evaluation: (e^0.8, 1, e) / (e^0.8 + 1 + e)
    CHECK(w[0] == doctest::Approx(0.3744294).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(0.1682419).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(0.4573288).epsilon(1e-6));
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-9));

    auto u = weight_softmax({0.4, 0.4, 0.4, 0.4});
    for (double x : u) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));

    CHECK(weight_softmax({3.7})[0] == doctest::Approx(1.0));

    // max-subtraction keeps huge inputs finite
    auto big = weight_softmax({1000.0, 1002.0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] + big[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(big[1] > big[0]);

    CHECK_THROWS_AS(weight_softmax({}), std::invalid_argument);
}

TEST_CASE("expand_candidates: single cursor takes the list head") {
    Dataset d;
    d.dim = 2;
    d.objects.push_back(make_mv(0, 2, {{1, 0}}));
    for (uint32_t i = 1; i <= 4; ++i) d.objects.push_back(make_mv(i, 2, {{0, 1}}));

    AntTable ant;
    ant.M = 3;
    ant.gamma = 1;
    ant.M_prime = 15;
    ant.token_offset_ = {0, 1, 2, 3, 4};
    ant.lists.resize(5);
    ant.lists[0] = {{3, 0.9}, {1, 0.5}, {2, 0.1}};

    SimilarityConfig cfg;
    ScoredMatch m;
    usim_exact(d.objects[0], d.objects[0], cfg, &m); // any valid match layout
    auto got = expand_candidates(0, d, d.objects[0], m, cfg, ant, 2);
    CHECK(got == std::vector<uint32_t>{3, 1});

    // the skip filter passes over entries without consuming a slot
    auto skipped = expand_candidates(0, d, d.objects[0], m, cfg, ant, 2,
                                     [](uint32_t t) { return t == 3; });
    CHECK(skipped == std::vector<uint32_t>{1, 2});
}

TEST_CASE("expand_candidates: equals merged-list oracle on a real build") {
    std::mt19937_64 rng(149);
    auto d = topical_dataset(rng, 400, 16, 3, 6, 8, 0.15);
    TokenIndex ti;
    ti.build(d, {.seed = 6});
    AntTable ant = build_ant(d, ti, 8, 1);

    SimilarityConfig cfg;
    cfg.use_weights = false;
    std::mt19937_64 pick(11);
    for (int t = 0; t < 100; ++t) {
        uint32_t node = uint32_t(pick() % d.size());
        auto Q = clustered_mv(pick, 0, 16, 4, random_centers(pick, 2, 16), 0.3);
        ScoredMatch m;
        usim_exact(Q, d.objects[node], cfg, &m);
        auto lazy = expand_candidates(node, d, Q, m, cfg, ant, 8);
        auto brute = brute_expand(node, d, Q, m, cfg, ant, 8);
        CHECK(std::set<uint32_t>(lazy.begin(), lazy.end()) ==
              std::set<uint32_t>(brute.begin(), brute.end()));
        // uniform-weight special case: selection = global top-M by base_score
        ScoredMatch none; // empty matches -> all contribs 0 -> uniform softmax
        none.per_query.assign(Q.token_count(), {});
        auto uni = expand_candidates(node, d, Q, none, cfg, ant, 8);
        auto uni_brute = brute_expand(node, d, Q, none, cfg, ant, 8);
        CHECK(std::set<uint32_t>(uni.begin(), uni.end()) ==
              std::set<uint32_t>(uni_brute.begin(), uni_brute.end()));
    }
}

TEST_CASE("augmented_search_layer reduces to the plain search without an ANT") {
    std::mt19937_64 rng(151);
    auto centers = random_centers(rng, 4, 8);
    Dataset d;
    d.dim = 8;
    d.normalized = true;
    for (uint32_t i = 0; i < 150; ++i)
        d.objects.push_back(clustered_mv(rng, i, 8, 2 + rng() % 3, centers, 0.3));
    IndexParams p;
    p.M = 8;
    p.efC = 32;
    p.seed = 2;
    MvIndex idx;
    idx.build(d, p);

    SimilarityConfig sim;
    sim.use_weights = false;
    AntTable empty_ant; // no lists at all
    for (int t = 0; t < 20; ++t) {
        auto Q = clustered_mv(rng, 0, 8, 3, centers, 0.3);
        auto plain = idx.search_layer_plain(Q, 0, {uint32_t(idx.entry)}, 16, sim);
        auto aug_null = augmented_search_layer(idx, nullptr, Q, 0,
                                               {uint32_t(idx.entry)}, 16, sim);
        auto aug_empty = augmented_search_layer(idx, &empty_ant, Q, 0,
                                                {uint32_t(idx.entry)}, 16, sim);
        CHECK(plain == aug_null);
        CHECK(plain == aug_empty);
    }
}

TEST_CASE("augmented search crosses a graph disconnection via the ANT") {
    // Six objects: 0-4 form the connected component holding the entry point;
    // 5 is disconnected but is the ANT head of one of node 1's tokens. The
    // query matches object 5 best.
    Dataset d;
    d.dim = 4;
    const float r2 = float(1.0 / std::sqrt(2.0));
    for (uint32_t i = 0; i < 5; ++i) {
        float a = 0.1f * float(i);
        float n = std::sqrt(1.0f - a * a);
        d.objects.push_back(make_mv(i, 4, {{n, a, 0, 0}, {a, n, 0, 0}}));
    }
    d.objects.push_back(make_mv(5, 4, {{0, 0, 1, 0}, {0, 0, r2, r2}}));
    auto Q = make_mv(0, 4, {{0, 0, 1, 0}});

    MvIndex idx;
    idx.params.M = 4;
    idx.params.efC = 8;
    idx.data = &d;
    idx.entry = 0;
    idx.top = 0;
    idx.nodes.resize(6);
    SimilarityConfig sim;
    sim.use_weights = false;
    auto link = [&](uint32_t a, uint32_t b) {
        float w = float(edge_weight(d.objects[a], d.objects[b], sim));
        idx.nodes[a].links[0].emplace_back(b, w);
        idx.nodes[b].links[0].emplace_back(a, w);
    };
    for (auto& nd : idx.nodes) {
        nd.level = 0;
        nd.links.resize(1);
    }
    link(0, 1);
    link(1, 2);
    link(2, 3);
    link(3, 4);
    REQUIRE(idx.audit().empty());

    AntTable ant;
    ant.M = 2;
    ant.gamma = 1;
    ant.M_prime = 10;
    ant.token_offset_ = {0, 2, 4, 6, 8, 10};
    ant.lists.resize(12);
    ant.lists[2] = {{5, 0.8}}; // node 1, token 0 points at the island

    SearchParams sp;
    sp.k = 1;
    sp.efS = 4;
    sp.sim = sim;
    sp.augmented = false;
    auto plain = knn_search(idx, &ant, Q, sp);
    REQUIRE(plain.size() == 1);
    CHECK(plain[0].first != 5);

    sp.augmented = true;
    auto aug = knn_search(idx, &ant, Q, sp);
    REQUIRE(aug.size() == 1);
    CHECK(aug[0].first == 5);
    CHECK(aug[0].second == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("knn_search: exhaustive regime and self queries") {
    auto c = tiny_corpus();
    IndexParams p;
    p.M = 2;
    p.efC = 4;
    p.seed = 1;
    MvIndex idx;
    idx.build(c.data, p);
    TokenIndex ti;
    ti.build(c.data, {.M = 2, .efC = 4, .seed = 1});
    AntTable ant = build_ant(c.data, ti, 2, 1);

    SearchParams sp;
    sp.k = 3;
    sp.efS = 4;
    sp.sim.use_weights = false;
    auto res = knn_search(idx, &ant, c.Q, sp);
    REQUIRE(res.size() == 3); // n <= k returns everything, ranked
    CHECK(res[0].first == 0);
    CHECK(res[1].first == 1);
    CHECK(res[2].first == 2);
    for (const auto& [id, s] : res)
        CHECK(s == doctest::Approx(usim_exact(c.Q, c.data.objects[id], sp.sim)).epsilon(1e-12));

    // query = an indexed object: ranked first with score |Q|
    std::mt19937_64 rng(157);
    auto centers = random_centers(rng, 4, 8);
    Dataset d;
    d.dim = 8;
    d.normalized = true;
    for (uint32_t i = 0; i < 100; ++i)
        d.objects.push_back(clustered_mv(rng, i, 8, 3, centers, 0.3));
    IndexParams p2;
    p2.M = 8;
    p2.efC = 32;
    p2.seed = 3;
    MvIndex idx2;
    idx2.build(d, p2);
    SearchParams sp2;
    sp2.k = 5;
    sp2.efS = 32;
    sp2.sim.use_weights = false;
    for (uint32_t probe : {3u, 42u, 99u}) {
        auto r = knn_search(idx2, nullptr, d.objects[probe], sp2);
        REQUIRE(!r.empty());
        CHECK(r[0].first == probe);
        CHECK(r[0].second == doctest::Approx(3.0).epsilon(1e-5));
    }

    // determinism
    auto Q = clustered_mv(rng, 0, 8, 3, centers, 0.3);
    CHECK(knn_search(idx2, nullptr, Q, sp2) == knn_search(idx2, nullptr, Q, sp2));

    MvIndex empty;
    CHECK_THROWS_AS(knn_search(empty, nullptr, Q, sp2), std::runtime_error);
}

TEST_CASE("augmented recall is at least plain recall") {
    std::mt19937_64 rng(163);
    auto d = topical_dataset(rng, 600, 16, 3, 6, 10, 0.15);
    IndexParams p;
    p.M = 8;
    p.efC = 40;
    p.seed = 5;
    MvIndex idx;
    idx.build(d, p);
    TokenIndex ti;
    ti.build(d, {.seed = 5});
    AntTable ant = build_ant(d, ti, p.M, 1);

    SimilarityConfig sim;
    sim.use_weights = false;
    double plain_sum = 0, aug_sum = 0;
    const uint32_t k = 10;
    for (int q = 0; q < 30; ++q) {
        // queries drawn near a random object's tokens
        const auto& anchor = d.objects[rng() % d.size()];
        std::vector<std::vector<float>> centers;
        for (uint32_t t = 0; t < anchor.token_count(); ++t)
            centers.emplace_back(anchor.token(t).begin(), anchor.token(t).end());
        auto Q = clustered_mv(rng, 0, 16, 4, centers, 0.25);
        auto truth = linear_scan_topk(d, Q, k, sim);
        std::vector<uint64_t> want;
        for (const auto& [id, s] : truth) want.push_back(id);

        SearchParams sp;
        sp.k = k;
        sp.efS = 32;
        sp.sim = sim;
        sp.augmented = false;
        auto pr = knn_search(idx, &ant, Q, sp);
        sp.augmented = true;
        auto ar = knn_search(idx, &ant, Q, sp);
        std::vector<uint64_t> pids, aids;
        for (const auto& [id, s] : pr) pids.push_back(id);
        for (const auto& [id, s] : ar) aids.push_back(id);
        plain_sum += recall(pids, want, k);
        aug_sum += recall(aids, want, k);
    }
    CHECK(aug_sum >= plain_sum);
    CHECK(aug_sum / 30.0 >= 0.8);
}

TEST_CASE("SearchParams validation") {
    SearchParams sp;
    sp.k = 0;
    CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
    sp.k = 10;
    sp.efS = 5;
    CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
}
