#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvann/ant.hpp"
#include "mvann/mv_index.hpp"
#include "mvann/token_index.hpp"
#include "mvann/types.hpp"

namespace mvann {

/// .mvd dataset file: "MVD1", version u16, flags u16 (bit0 weights,
/// bit1 normalized), dim u32, object count u64, then per object in id
/// order: u32 c, optional c f32 weights, c*dim f32 token values.
void write_mvd(const std::string& path, const Dataset& dataset);
Dataset read_mvd(const std::string& path);

struct GeneratorSpec {
    uint64_t n = 1000;
    uint32_t dim = 32;
    uint32_t c_min = 2;
    uint32_t c_max = 8;
    uint32_t clusters = 10;
    double sigma = 0.15;
    uint64_t seed = 0;

    void validate() const {
        if (c_min < 2 || c_min > c_max)
            throw std::invalid_argument("GeneratorSpec: need 2 <= c_min <= c_max");
        if (sigma <= 0) throw std::invalid_argument("GeneratorSpec: sigma must be > 0");
        if (clusters < 1) throw std::invalid_argument("GeneratorSpec: clusters must be >= 1");
        if (n < 1) throw std::invalid_argument("GeneratorSpec: n must be >= 1");
    }
};

struct SyntheticData {
    Dataset dataset;
    std::vector<std::vector<uint32_t>> topics; // per object, its topic ids
};

/// Clustered synthetic multi-vectors: topic centroids on the unit sphere,
/// tokens = normalize(centroid + Gaussian noise), topics per object drawn
/// from a Dirichlet over 1-3 topics. Deterministic given seed.
SyntheticData generate_synthetic(const GeneratorSpec& spec);

/// FNV-1a content hash of a dataset (dim, flags, weights, token values).
uint64_t dataset_hash(const Dataset& dataset);

/// .mvix container: MvIndex graph + TokenIndex graph + AntTable plus the
/// content hash of the source dataset.
void save_index(const std::string& path, const MvIndex& index,
                const TokenIndex& token_index, const AntTable& ant,
                const Dataset& dataset);

/// Loads and re-attaches the structures to `dataset`; refuses to load when
/// the stored hash does not match.
void load_index(const std::string& path, MvIndex& index, TokenIndex& token_index,
                AntTable& ant, const Dataset& dataset);

} // namespace mvann
