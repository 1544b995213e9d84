#pragma once

#include <cstdint>
#include <string>

namespace fairgen {

// Deterministic COMPAS-style recidivism table: mixed numeric/categorical
// columns, an imbalanced binary sex column, and a label driven mostly by the
// criminal-history features with a weak direct sex effect. A few cells are
// left empty to exercise row dropping.
struct SynthSpec {
    int rows = 6800;
    std::uint64_t seed = 17;
    int missing_cells = 3;
    double male_fraction = 0.9;
    double direct_effect = 0.0;  // sex -> label log-odds shift beyond the latent path
    double feature_shift = 1.4;  // sex -> latent-risk shift
    double signal = 4.0;         // latent-risk -> label log-odds scale
};

void write_synthetic_compas(const std::string& csv_path, const SynthSpec& spec);

// Schema matching write_synthetic_compas output (sex sensitive, recidivism
// label, race carrying a map so it can be promoted to sensitive).
std::string synthetic_compas_schema_json();

}  // namespace fairgen
