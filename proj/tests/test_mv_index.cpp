#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "mvann/mv_index.hpp"
#include "mvann/util.hpp"
#include "test_util.hpp"

using namespace mvann;
using namespace testutil;

namespace {

Dataset clustered_dataset(std::mt19937_64& rng, size_t n, uint32_t dim, uint32_t c_min,
                          uint32_t c_max, size_t topics, double sigma) {
    auto centers = random_centers(rng, topics, dim);
    Dataset d;
    d.dim = dim;
    d.normalized = true;
    for (size_t i = 0; i < n; ++i) {
        size_t nt = 1 + rng() % 3;
        std::vector<std::vector<float>> sub;
        for (size_t t = 0; t < nt; ++t) sub.push_back(centers[rng() % centers.size()]);
        uint32_t c = c_min + (c_max > c_min ? rng() % (c_max - c_min + 1) : 0);
        d.objects.push_back(clustered_mv(rng, uint32_t(i), dim, c, sub, sigma));
    }
    return d;
}

} // namespace

TEST_CASE("edge_weight: self, orthogonal, and pinned pair") {
    SimilarityConfig sim;
    std::mt19937_64 rng(61);
    auto u = random_mv(rng, 0, 8, 4);
    CHECK(edge_weight(u, u, sim) == doctest::Approx(1.0).epsilon(1e-6));

    // mutually orthogonal token sets
    auto a = make_mv(0, 4, {{1, 0, 0, 0}, {0, 1, 0, 0}});
    auto b = make_mv(1, 4, {{0, 0, 1, 0}, {0, 0, 0, 1}});
    CHECK(edge_weight(a, b, sim) == doctest::Approx(0.0));

    // pinned value from the exhaustive 2x2 distance tables of the tiny corpus
    auto c = tiny_corpus();
    double f12 = edge_weight(c.data.objects[0], c.data.objects[1], sim);
    CHECK(f12 == doctest::Approx(0.9629629).epsilon(1e-5));

    MultiVector empty;
    empty.dim = 4;
    CHECK_THROWS_AS(edge_weight(a, empty, sim), std::invalid_argument);
}

TEST_CASE("edge_weight: symmetry, range, duplication invariance") {
    std::mt19937_64 rng(67);
    SimilarityConfig sim;
    for (int t = 0; t < 200; ++t) {
        auto u = random_mv(rng, 0, 16, 2 + rng() % 8);
        auto v = random_mv(rng, 1, 16, 2 + rng() % 8);
        double fw = edge_weight(u, v, sim);
        CHECK(edge_weight(v, u, sim) == doctest::Approx(fw).epsilon(1e-12));
        CHECK(fw >= -1.0 - 1e-6);
        CHECK(fw <= 1.0 + 1e-6);

        // doubling |u| by duplicating every token leaves f unchanged at gamma 1
        MultiVector u2 = u;
        u2.values.insert(u2.values.end(), u.values.begin(), u.values.end());
        CHECK(edge_weight(u2, v, sim) == doctest::Approx(fw).epsilon(1e-9));
    }
}

TEST_CASE("edge_weight ignores token weights") {
    std::mt19937_64 rng(71);
    SimilarityConfig sim; // use_weights true, but edge weights must force 1
    auto u = random_mv(rng, 0, 8, 3);
    auto v = random_mv(rng, 1, 8, 3);
    double base = edge_weight(u, v, sim);
    MultiVector uw = u;
    uw.weights = {0.1f, 0.0f, 0.7f};
    CHECK(edge_weight(uw, v, sim) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("assign_layer algebra and tail fraction") {
    // algebra: assign_layer consumes exactly one uniform draw
    std::mt19937_64 a(5), b(5);
    double mL = 1.0 / std::log(32.0);
    for (int t = 0; t < 1000; ++t) {
        double u = uniform01(b);
        int32_t want = int32_t(std::floor(-std::log(u) * mL));
        CHECK(assign_layer(a, mL) == want);
    }

    // exact algebra on a known draw: u = e^{-2}, mL = 1 -> layer 2
    CHECK(int32_t(std::floor(-std::log(std::exp(-2.0)) * 1.0)) == 2);

    // geometric tail: P(layer >= 1) = e^{-1/mL} = 1/32
    std::mt19937_64 rng(79);
    size_t n = 100000, tail = 0;
    for (size_t i = 0; i < n; ++i)
        if (assign_layer(rng, mL) >= 1) ++tail;
    double frac = double(tail) / double(n);
    CHECK(frac >= (1.0 / 32.0) * 0.9);
    CHECK(frac <= (1.0 / 32.0) * 1.1);
}

TEST_CASE("build: bootstrap and second node") {
    std::mt19937_64 rng(83);
    Dataset d1;
    d1.dim = 8;
    d1.objects.push_back(random_mv(rng, 0, 8, 3));
    IndexParams p;
    p.M = 4;
    p.efC = 8;
    p.seed = 1;
    MvIndex idx;
    idx.build(d1, p);
    CHECK(idx.entry == 0);
    CHECK(idx.top == idx.nodes[0].level);
    for (const auto& layer : idx.nodes[0].links) CHECK(layer.empty());
    CHECK(idx.audit().empty());

    Dataset d2 = d1;
    d2.objects.push_back(random_mv(rng, 1, 8, 3));
    MvIndex idx2;
    idx2.build(d2, p);
    // exactly one undirected edge per shared layer, weight = edge_weight
    int32_t shared = std::min(idx2.nodes[0].level, idx2.nodes[1].level);
    float want = float(edge_weight(d2.objects[0], d2.objects[1], p.sim));
    for (int32_t l = 0; l <= shared; ++l) {
        REQUIRE(idx2.nodes[0].links[l].size() == 1);
        REQUIRE(idx2.nodes[1].links[l].size() == 1);
        CHECK(idx2.nodes[0].links[l][0].first == 1);
        CHECK(idx2.nodes[1].links[l][0].first == 0);
        CHECK(idx2.nodes[0].links[l][0].second == want);
    }
    for (int32_t l = shared + 1; l <= idx2.nodes[0].level; ++l)
        CHECK(idx2.nodes[0].links[l].empty());
    for (int32_t l = shared + 1; l <= idx2.nodes[1].level; ++l)
        CHECK(idx2.nodes[1].links[l].empty());
    CHECK(idx2.audit().empty());
}

TEST_CASE("build: neighbor quality against exhaustive edge-weight ranking") {
    std::mt19937_64 rng(89);
    auto d = clustered_dataset(rng, 200, 16, 3, 6, 8, 0.15);
    IndexParams p;
    p.M = 8;
    p.efC = 32;
    p.seed = 4;
    MvIndex idx;
    idx.build(d, p);
    CHECK(idx.audit().empty());

    std::mt19937_64 pick(2);
    for (int t = 0; t < 20; ++t) {
        uint32_t u = uint32_t(pick() % d.size());
        // exhaustive top-2M by edge weight
        std::vector<std::pair<double, uint32_t>> all;
        for (uint32_t v = 0; v < d.size(); ++v) {
            if (v == u) continue;
            all.emplace_back(edge_weight(d.objects[u], d.objects[v], p.sim), v);
        }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::set<uint32_t> topset;
        for (size_t i = 0; i < std::min<size_t>(2 * p.M, all.size()); ++i)
            topset.insert(all[i].second);

        const auto& links = idx.nodes[u].links[0];
        REQUIRE(!links.empty());
        size_t good = 0;
        for (const auto& [v, w] : links)
            if (topset.count(v)) ++good;
        CHECK(double(good) / double(links.size()) >= 0.5);
    }
}

TEST_CASE("build: parallel build passes the audit") {
    std::mt19937_64 rng(97);
    auto d = clustered_dataset(rng, 300, 8, 2, 5, 6, 0.2);
    IndexParams p;
    p.M = 6;
    p.efC = 24;
    p.seed = 9;
    MvIndex idx;
    idx.build(d, p, 4);
    CHECK(idx.audit().empty());
    // level structure is thread-count independent
    MvIndex serial;
    serial.build(d, p, 1);
    for (size_t i = 0; i < d.size(); ++i) CHECK(idx.nodes[i].level == serial.nodes[i].level);
}

TEST_CASE("search_layer_plain: fixed point, exhaustive small layer, determinism") {
    std::mt19937_64 rng(101);
    // every object mixes the same topic pool, keeping the base layer connected
    auto centers = random_centers(rng, 4, 8);
    Dataset d;
    d.dim = 8;
    d.normalized = true;
    for (uint32_t i = 0; i < 60; ++i)
        d.objects.push_back(clustered_mv(rng, i, 8, 2 + rng() % 3, centers, 0.4));
    IndexParams p;
    p.M = 8;
    p.efC = 32;
    p.seed = 3;
    MvIndex idx;
    idx.build(d, p);
    auto Q = clustered_mv(rng, 0, 8, 3, random_centers(rng, 1, 8), 0.2);

    // exhaustive ranking of the whole base layer (ef >= n, connected graph)
    SimilarityConfig sim;
    sim.use_weights = false;
    std::vector<std::pair<uint32_t, double>> brute;
    for (uint32_t v = 0; v < d.size(); ++v)
        brute.emplace_back(v, usim_exact(Q, d.objects[v], sim));
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    auto full = idx.search_layer_plain(Q, 0, {uint32_t(idx.entry)}, uint32_t(d.size()), sim);
    REQUIRE(full.size() == d.size());
    for (size_t i = 0; i < full.size(); ++i) {
        CHECK(full[i].first == brute[i].first);
        CHECK(full[i].second == doctest::Approx(brute[i].second).epsilon(1e-12));
    }

    // ef=1 from the global maximum returns it
    auto top1 = idx.search_layer_plain(Q, 0, {brute[0].first}, 1, sim);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].first == brute[0].first);

    auto again = idx.search_layer_plain(Q, 0, {uint32_t(idx.entry)}, 16, sim);
    auto again2 = idx.search_layer_plain(Q, 0, {uint32_t(idx.entry)}, 16, sim);
    CHECK(again == again2);
}

TEST_CASE("query-consistency trend of the edge weight") {
    std::mt19937_64 rng(103);
    auto d = clustered_dataset(rng, 120, 16, 3, 6, 8, 0.15);
    SimilarityConfig sim;
    sim.use_weights = false;
    std::vector<double> f, closeness;
    for (int t = 0; t < 500; ++t) {
        uint32_t u = uint32_t(rng() % d.size());
        uint32_t v = uint32_t(rng() % d.size());
        if (u == v) { --t; continue; }
        auto Q = clustered_mv(rng, 0, 16, 4,
                              {std::vector<float>(d.objects[u].token(0).begin(),
                                                  d.objects[u].token(0).end())},
                              0.3);
        f.push_back(edge_weight(d.objects[u], d.objects[v], sim));
        double du = usim_exact(Q, d.objects[u], sim);
        double dv = usim_exact(Q, d.objects[v], sim);
        closeness.push_back(-std::abs(du - dv) / double(Q.token_count()));
    }
    CHECK(spearman(f, closeness) >= 0.3);
}

TEST_CASE("IndexParams validation and default mL") {
    IndexParams p;
    CHECK(p.effective_mL() == doctest::Approx(1.0 / std::log(16.0)));
    p.mL = 0.5;
    CHECK(p.effective_mL() == doctest::Approx(0.5));
    p.M = 1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.M = 16;
    p.efC = 4;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
