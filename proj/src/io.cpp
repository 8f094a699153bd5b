#include "mvann/io.hpp"

#include <algorithm>
#include <cmath>

#include "mvann/binio.hpp"
#include "mvann/util.hpp"

namespace mvann {

void write_mvd(const std::string& path, const Dataset& dataset) {
    dataset.validate();
    bool weights = false;
    for (const auto& o : dataset.objects)
        if (!o.weights.empty()) weights = true;

    BinWriter w(path);
    w.magic("MVD1");
    w.pod<uint16_t>(1);
    uint16_t flags = (weights ? 1 : 0) | (dataset.normalized ? 2 : 0);
    w.pod<uint16_t>(flags);
    w.pod<uint32_t>(dataset.dim);
    w.pod<uint64_t>(dataset.size());
    for (const auto& o : dataset.objects) {
        const uint32_t c = uint32_t(o.token_count());
        w.pod<uint32_t>(c);
        if (weights) {
            if (o.weights.empty()) {
                for (uint32_t i = 0; i < c; ++i) w.pod<float>(1.0f);
            } else {
                w.bytes(o.weights.data(), sizeof(float) * c);
            }
        }
        w.bytes(o.values.data(), sizeof(float) * o.values.size());
    }
    w.close();
}

Dataset read_mvd(const std::string& path) {
    BinReader r(path);
    r.expect_magic("MVD1");
    if (r.pod<uint16_t>() != 1) r.fail("unsupported version");
    uint16_t flags = r.pod<uint16_t>();
    const bool weights = flags & 1;

    Dataset ds;
    ds.normalized = flags & 2;
    ds.dim = r.pod<uint32_t>();
    if (ds.dim < 1) r.fail("dim must be >= 1");
    uint64_t n = r.pod<uint64_t>();
    ds.objects.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        auto& o = ds.objects[i];
        o.id = uint32_t(i);
        o.dim = ds.dim;
        uint32_t c = r.pod<uint32_t>();
        if (c < 1) r.fail("object with zero tokens");
        if (weights) {
            o.weights.resize(c);
            r.bytes(o.weights.data(), sizeof(float) * c);
            for (float wv : o.weights)
                if (!(wv >= 0.0f && wv <= 1.0f)) r.fail("weight outside [0,1]");
        }
        o.values.resize(size_t(c) * ds.dim);
        r.bytes(o.values.data(), sizeof(float) * o.values.size());
        for (float v : o.values)
            if (!std::isfinite(v)) r.fail("non-finite coordinate");
    }
    r.expect_eof();
    ds.validate();
    return ds;
}

SyntheticData generate_synthetic(const GeneratorSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const uint32_t d = spec.dim;

    std::vector<float> centroids(size_t(spec.clusters) * d);
    for (uint32_t c = 0; c < spec.clusters; ++c) {
        float* p = centroids.data() + size_t(c) * d;
        double n2 = 0;
        for (uint32_t i = 0; i < d; ++i) {
            p[i] = float(gaussian(rng));
            n2 += double(p[i]) * p[i];
        }
        double inv = 1.0 / std::sqrt(n2);
        for (uint32_t i = 0; i < d; ++i) p[i] = float(p[i] * inv);
    }

    SyntheticData out;
    out.dataset.dim = d;
    out.dataset.normalized = true;
    out.dataset.objects.resize(spec.n);
    out.topics.resize(spec.n);
    for (uint64_t i = 0; i < spec.n; ++i) {
        auto& o = out.dataset.objects[i];
        o.id = uint32_t(i);
        o.dim = d;

        uint32_t ntopics = std::min<uint32_t>(
            spec.clusters, 1 + uint32_t(uniform01(rng) * 3.0) % 3);
        auto& topics = out.topics[i];
        while (topics.size() < ntopics) {
            uint32_t t = uint32_t(uniform01(rng) * spec.clusters) % spec.clusters;
            if (std::find(topics.begin(), topics.end(), t) == topics.end())
                topics.push_back(t);
        }
        // Dirichlet(1) topic mixture via normalized exponential draws
        std::vector<double> mix(ntopics);
        double msum = 0;
        for (auto& m : mix) {
            m = -std::log(uniform01(rng));
            msum += m;
        }
        for (auto& m : mix) m /= msum;

        uint32_t c = spec.c_min + uint32_t(uniform01(rng) * (spec.c_max - spec.c_min + 1)) %
                                      (spec.c_max - spec.c_min + 1);
        o.values.resize(size_t(c) * d);
        for (uint32_t t = 0; t < c; ++t) {
            double u = uniform01(rng), acc = 0;
            uint32_t topic = topics.back();
            for (uint32_t m = 0; m < ntopics; ++m) {
                acc += mix[m];
                if (u <= acc) { topic = topics[m]; break; }
            }
            const float* cp = centroids.data() + size_t(topic) * d;
            float* tp = o.values.data() + size_t(t) * d;
            double n2 = 0;
            for (uint32_t j = 0; j < d; ++j) {
                tp[j] = float(cp[j] + spec.sigma * gaussian(rng));
                n2 += double(tp[j]) * tp[j];
            }
            double inv = 1.0 / std::sqrt(n2);
            for (uint32_t j = 0; j < d; ++j) tp[j] = float(tp[j] * inv);
        }
    }
    return out;
}

uint64_t dataset_hash(const Dataset& dataset) {
    uint64_t h = fnv1a64(&dataset.dim, sizeof(dataset.dim));
    uint8_t norm = dataset.normalized ? 1 : 0;
    h = fnv1a64(&norm, 1, h);
    for (const auto& o : dataset.objects) {
        uint32_t c = uint32_t(o.token_count());
        h = fnv1a64(&c, sizeof(c), h);
        if (!o.weights.empty())
            h = fnv1a64(o.weights.data(), sizeof(float) * o.weights.size(), h);
        h = fnv1a64(o.values.data(), sizeof(float) * o.values.size(), h);
    }
    return h;
}

namespace {

void write_sim(BinWriter& w, const SimilarityConfig& s) {
    w.pod<uint32_t>(s.gamma);
    w.pod<uint8_t>(uint8_t(s.distance));
    w.pod<uint8_t>(s.use_weights);
    w.pod<uint8_t>(s.approx);
    w.pod<uint8_t>(s.exact_rerank);
}

SimilarityConfig read_sim(BinReader& r) {
    SimilarityConfig s;
    s.gamma = r.pod<uint32_t>();
    s.distance = DistanceKind(r.pod<uint8_t>());
    s.use_weights = r.pod<uint8_t>();
    s.approx = r.pod<uint8_t>();
    s.exact_rerank = r.pod<uint8_t>();
    return s;
}

} // namespace

void save_index(const std::string& path, const MvIndex& index,
                const TokenIndex& token_index, const AntTable& ant,
                const Dataset& dataset) {
    BinWriter w(path);
    w.magic("MVIX");
    w.pod<uint16_t>(1);
    w.pod<uint64_t>(dataset_hash(dataset));

    // multi-vector graph
    w.pod<uint32_t>(index.params.M);
    w.pod<uint32_t>(index.params.efC);
    w.pod<double>(index.params.mL);
    w.pod<uint64_t>(index.params.seed);
    write_sim(w, index.params.sim);
    w.pod<int64_t>(index.entry);
    w.pod<int32_t>(index.top);
    w.pod<uint64_t>(index.nodes.size());
    for (const auto& nd : index.nodes) {
        w.pod<int32_t>(nd.level);
        for (const auto& layer : nd.links) {
            w.pod<uint32_t>(uint32_t(layer.size()));
            for (const auto& [id, wt] : layer) {
                w.pod<uint32_t>(id);
                w.pod<float>(wt);
            }
        }
    }

    // token graph
    w.pod<uint32_t>(token_index.params_.M);
    w.pod<uint32_t>(token_index.params_.efC);
    w.pod<uint64_t>(token_index.params_.seed);
    w.pod<int64_t>(token_index.entry_);
    w.pod<int32_t>(token_index.top_);
    w.pod<uint64_t>(token_index.nodes_.size());
    for (const auto& nd : token_index.nodes_) {
        w.pod<int32_t>(nd.level);
        for (const auto& layer : nd.links) {
            w.pod<uint32_t>(uint32_t(layer.size()));
            for (uint32_t id : layer) w.pod<uint32_t>(id);
        }
    }

    // navigation table
    w.pod<uint32_t>(ant.M);
    w.pod<uint32_t>(ant.gamma);
    w.pod<uint32_t>(ant.M_prime);
    w.pod<uint64_t>(ant.lists.size());
    for (const auto& list : ant.lists) {
        w.pod<uint32_t>(uint32_t(list.size()));
        for (const auto& e : list) {
            w.pod<uint32_t>(e.target);
            w.pod<double>(e.base_score);
        }
    }
    w.close();
}

void load_index(const std::string& path, MvIndex& index, TokenIndex& token_index,
                AntTable& ant, const Dataset& dataset) {
    BinReader r(path);
    r.expect_magic("MVIX");
    if (r.pod<uint16_t>() != 1) r.fail("unsupported version");
    uint64_t hash = r.pod<uint64_t>();
    if (hash != dataset_hash(dataset))
        throw FormatError(path + ": dataset hash mismatch (index built from different data)");

    index.params.M = r.pod<uint32_t>();
    index.params.efC = r.pod<uint32_t>();
    index.params.mL = r.pod<double>();
    index.params.seed = r.pod<uint64_t>();
    index.params.sim = read_sim(r);
    index.entry = r.pod<int64_t>();
    index.top = r.pod<int32_t>();
    uint64_t n = r.pod<uint64_t>();
    if (n != dataset.size()) r.fail("node count does not match dataset");
    index.nodes.assign(n, {});
    for (auto& nd : index.nodes) {
        nd.level = r.pod<int32_t>();
        if (nd.level < 0) r.fail("negative node level");
        nd.links.resize(size_t(nd.level) + 1);
        for (auto& layer : nd.links) {
            uint32_t cnt = r.pod<uint32_t>();
            layer.resize(cnt);
            for (auto& [id, wt] : layer) {
                id = r.pod<uint32_t>();
                wt = r.pod<float>();
                if (id >= n) r.fail("edge to out-of-range node");
            }
        }
    }
    index.data = &dataset;

    token_index.params_.M = r.pod<uint32_t>();
    token_index.params_.efC = r.pod<uint32_t>();
    token_index.params_.seed = r.pod<uint64_t>();
    token_index.entry_ = r.pod<int64_t>();
    token_index.top_ = r.pod<int32_t>();
    uint64_t nt = r.pod<uint64_t>();
    if (nt != dataset.total_tokens()) r.fail("token count does not match dataset");
    token_index.nodes_.assign(nt, {});
    for (auto& nd : token_index.nodes_) {
        nd.level = r.pod<int32_t>();
        if (nd.level < 0) r.fail("negative token level");
        nd.links.resize(size_t(nd.level) + 1);
        for (auto& layer : nd.links) {
            uint32_t cnt = r.pod<uint32_t>();
            layer.resize(cnt);
            for (auto& id : layer) {
                id = r.pod<uint32_t>();
                if (id >= nt) r.fail("token edge out of range");
            }
        }
    }
    token_index.attach(dataset);

    ant.M = r.pod<uint32_t>();
    ant.gamma = r.pod<uint32_t>();
    ant.M_prime = r.pod<uint32_t>();
    uint64_t na = r.pod<uint64_t>();
    if (na != dataset.total_tokens()) r.fail("navigation table size mismatch");
    ant.lists.assign(na, {});
    for (auto& list : ant.lists) {
        uint32_t cnt = r.pod<uint32_t>();
        list.resize(cnt);
        for (auto& e : list) {
            e.target = r.pod<uint32_t>();
            e.base_score = r.pod<double>();
            if (e.target >= dataset.size()) r.fail("navigation target out of range");
        }
    }
    ant.token_offset_.clear();
    uint32_t off = 0;
    for (const auto& o : dataset.objects) {
        ant.token_offset_.push_back(off);
        off += uint32_t(o.token_count());
    }
    r.expect_eof();
}

} // namespace mvann
