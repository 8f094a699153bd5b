#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvann/io.hpp"
#include "mvann/oracle.hpp"
#include "mvann/search.hpp"

using namespace mvann;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

uint64_t env_seed() {
    if (const char* s = std::getenv("MVANN_SEED")) return std::strtoull(s, nullptr, 10);
    return 0;
}

SimilarityConfig metric_from_name(const std::string& name, uint32_t gamma) {
    if (name == "maxsim") return metric_preset(MetricPreset::MaxSim);
    if (name == "chamfer") return metric_preset(MetricPreset::WeightedChamfer);
    if (name == "agg-gnn") return metric_preset(MetricPreset::AggregateGnn, gamma);
    throw CLI::ValidationError("--metric", "unknown metric: " + name);
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t idx = size_t(p * (v.size() - 1) + 0.5);
    return v[std::min(idx, v.size() - 1)];
}

struct LoadedIndex {
    Dataset data;
    MvIndex index;
    TokenIndex tokens;
    AntTable ant;
};

LoadedIndex load_all(const std::string& index_path, const std::string& data_path) {
    LoadedIndex li;
    li.data = read_mvd(data_path);
    load_index(index_path, li.index, li.tokens, li.ant, li.data);
    return li;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mvann: native graph-based multi-vector similarity search"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a clustered synthetic .mvd dataset");
    GeneratorSpec spec;
    spec.seed = env_seed();
    std::string gen_out;
    gen->add_option("--n", spec.n, "object count");
    gen->add_option("--dim", spec.dim, "token dimension");
    gen->add_option("--c-min", spec.c_min, "min tokens per object");
    gen->add_option("--c-max", spec.c_max, "max tokens per object");
    gen->add_option("--clusters", spec.clusters, "topic count");
    gen->add_option("--sigma", spec.sigma, "intra-cluster noise");
    gen->add_option("--seed", spec.seed, "rng seed");
    gen->add_option("--out", gen_out, "output .mvd path")->required();

    // build
    auto* build = app.add_subcommand("build", "build the index (graph + token index + ANT)");
    std::string b_data, b_out, b_metric = "maxsim";
    IndexParams iparams;
    uint32_t b_gamma = 1, b_threads = 1;
    iparams.seed = env_seed();
    build->add_option("--data", b_data, ".mvd dataset")->required();
    build->add_option("--M", iparams.M, "max neighbors per node per layer");
    build->add_option("--ef-construction", iparams.efC, "construction beam width");
    build->add_option("--gamma", b_gamma, "gamma for agg-gnn");
    build->add_option("--metric", b_metric, "maxsim|chamfer|agg-gnn");
    build->add_option("--ml", iparams.mL, "layer normalization factor (default 1/ln M)");
    build->add_option("--threads", b_threads, "construction threads");
    build->add_option("--seed", iparams.seed, "rng seed");
    build->add_option("--out", b_out, "output .mvix path")->required();

    // ground-truth
    auto* gt = app.add_subcommand("ground-truth", "exact linear-scan top-k");
    std::string g_data, g_queries, g_out, g_metric = "maxsim";
    uint32_t g_k = 10, g_gamma = 1;
    gt->add_option("--data", g_data, ".mvd dataset")->required();
    gt->add_option("--queries", g_queries, ".mvd queries")->required();
    gt->add_option("--k", g_k, "result count");
    gt->add_option("--gamma", g_gamma, "gamma for agg-gnn");
    gt->add_option("--metric", g_metric, "maxsim|chamfer|agg-gnn");
    gt->add_option("--out", g_out, "output .mvgt path")->required();

    // search
    auto* search = app.add_subcommand("search", "query the index, JSON lines out");
    std::string s_index, s_data, s_queries, s_out, s_aug = "on", s_rerank = "on";
    uint32_t s_k = 10, s_ef = 64;
    search->add_option("--index", s_index, ".mvix index")->required();
    search->add_option("--data", s_data, ".mvd dataset the index was built from")->required();
    search->add_option("--queries", s_queries, ".mvd queries")->required();
    search->add_option("--k", s_k, "result count");
    search->add_option("--ef-search", s_ef, "search beam width");
    search->add_option("--augmented", s_aug, "on|off")->check(CLI::IsMember({"on", "off"}));
    search->add_option("--exact-rerank", s_rerank, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    search->add_option("--out", s_out, "output JSON-lines path")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "recall/latency sweep, CSV out");
    std::string e_index, e_data, e_queries, e_gt, e_out;
    uint32_t e_k = 10;
    std::vector<uint32_t> e_sweep{32, 64, 128, 256};
    bench->add_option("--index", e_index, ".mvix index")->required();
    bench->add_option("--data", e_data, ".mvd dataset")->required();
    bench->add_option("--queries", e_queries, ".mvd queries")->required();
    bench->add_option("--ground-truth", e_gt, ".mvgt file")->required();
    bench->add_option("--k", e_k, "result count");
    bench->add_option("--ef-sweep", e_sweep, "efS values")->delimiter(',');
    bench->add_option("--out", e_out, "output CSV path")->required();

    // audit
    auto* audit = app.add_subcommand("audit", "structural audits of a built index");
    std::string a_index, a_data;
    audit->add_option("--index", a_index, ".mvix index")->required();
    audit->add_option("--data", a_data, ".mvd dataset")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto data = generate_synthetic(spec);
            write_mvd(gen_out, data.dataset);
            std::cout << "objects " << data.dataset.size() << "\n"
                      << "tokens " << data.dataset.total_tokens() << "\n";
        } else if (*build) {
            Dataset data = read_mvd(b_data);
            iparams.sim = metric_from_name(b_metric, b_gamma);
            iparams.sim.approx = true; // clustered kernel for large objects
            auto t0 = Clock::now();
            MvIndex index;
            index.build(data, iparams, b_threads);
            TokenIndex tokens;
            TokenHnswParams tp;
            tp.seed = iparams.seed;
            tokens.build(data, tp);
            AntTable ant = build_ant(data, tokens, iparams.M, iparams.sim.gamma, b_threads);
            double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            save_index(b_out, index, tokens, ant, data);

            std::cout << "build_seconds " << secs << "\n";
            std::vector<size_t> per_layer(size_t(index.top) + 1, 0);
            size_t degree_sum = 0;
            for (const auto& nd : index.nodes) {
                for (int32_t l = 0; l <= nd.level; ++l) ++per_layer[l];
                degree_sum += nd.links[0].size();
            }
            for (size_t l = 0; l < per_layer.size(); ++l)
                std::cout << "layer " << l << " nodes " << per_layer[l] << "\n";
            std::cout << "mean_degree_layer0 "
                      << double(degree_sum) / double(index.nodes.size()) << "\n";
        } else if (*gt) {
            Dataset data = read_mvd(g_data);
            Dataset queries = read_mvd(g_queries);
            SimilarityConfig sim = metric_from_name(g_metric, g_gamma);
            GroundTruth truth;
            truth.k = std::min<uint32_t>(g_k, uint32_t(data.size()));
            for (const auto& q : queries.objects)
                truth.rows.push_back(linear_scan_topk(data, q, truth.k, sim));
            write_mvgt(g_out, truth);
        } else if (*search) {
            auto li = load_all(s_index, s_data);
            Dataset queries = read_mvd(s_queries);
            SearchParams sp;
            sp.k = s_k;
            sp.efS = s_ef;
            sp.augmented = s_aug == "on";
            sp.sim = li.index.params.sim;
            sp.sim.exact_rerank = s_rerank == "on";
            std::ofstream out(s_out);
            if (!out) throw std::runtime_error("cannot open " + s_out);
            for (size_t qi = 0; qi < queries.objects.size(); ++qi) {
                auto t0 = Clock::now();
                auto res = knn_search(li.index, &li.ant, queries.objects[qi], sp);
                double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
                json row;
                row["query"] = qi;
                json ids = json::array(), scores = json::array();
                for (const auto& [id, s] : res) {
                    ids.push_back(id);
                    scores.push_back(s);
                }
                row["ids"] = ids;
                row["scores"] = scores;
                row["latency_ms"] = ms;
                out << row.dump() << "\n";
            }
        } else if (*bench) {
            auto li = load_all(e_index, e_data);
            Dataset queries = read_mvd(e_queries);
            GroundTruth truth = read_mvgt(e_gt);
            if (truth.rows.size() != queries.objects.size())
                throw std::runtime_error("ground truth / query count mismatch");
            std::ofstream out(e_out);
            if (!out) throw std::runtime_error("cannot open " + e_out);
            out << "efS,k,recall,lat_mean_ms,lat_p50_ms,lat_p95_ms,n_queries\n";
            for (uint32_t ef : e_sweep) {
                SearchParams sp;
                sp.k = e_k;
                sp.efS = std::max(ef, e_k);
                sp.sim = li.index.params.sim;
                sp.sim.exact_rerank = true;
                // warm-up pass, excluded from timing
                for (const auto& q : queries.objects) knn_search(li.index, &li.ant, q, sp);
                std::vector<double> lat;
                double rsum = 0;
                for (size_t qi = 0; qi < queries.objects.size(); ++qi) {
                    auto t0 = Clock::now();
                    auto res = knn_search(li.index, &li.ant, queries.objects[qi], sp);
                    lat.push_back(
                        std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
                    std::vector<uint64_t> got, want;
                    for (const auto& [id, s] : res) got.push_back(id);
                    for (const auto& [id, s] : truth.rows[qi]) want.push_back(id);
                    rsum += recall(got, want, truth.k);
                }
                double mean = 0;
                for (double l : lat) mean += l;
                mean /= lat.size();
                out << ef << "," << e_k << "," << rsum / queries.objects.size() << ","
                    << mean << "," << percentile(lat, 0.5) << "," << percentile(lat, 0.95)
                    << "," << queries.objects.size() << "\n";
            }
        } else if (*audit) {
            auto li = load_all(a_index, a_data);
            auto issues = li.index.audit();
            for (size_t t = 0; t < li.ant.lists.size(); ++t) {
                const auto& list = li.ant.lists[t];
                TokenRef ref = li.tokens.ref(uint32_t(t));
                if (list.size() > li.ant.M)
                    issues.push_back("ant list too long for token " + std::to_string(t));
                for (size_t i = 0; i < list.size(); ++i) {
                    if (list[i].target == ref.owner)
                        issues.push_back("ant self-owner target at token " + std::to_string(t));
                    if (i > 0 && (list[i - 1].base_score < list[i].base_score ||
                                  (list[i - 1].base_score == list[i].base_score &&
                                   list[i - 1].target >= list[i].target)))
                        issues.push_back("ant list unsorted at token " + std::to_string(t));
                }
            }
            for (const auto& nd : li.tokens.nodes_)
                for (const auto& layer : nd.links)
                    if (layer.size() > li.tokens.params_.M)
                        issues.push_back("token graph degree bound violated");
            if (!issues.empty()) {
                for (const auto& i : issues) std::cerr << "audit: " << i << "\n";
                return 1;
            }
            std::cout << "audit: ok\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
