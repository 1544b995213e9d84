#include "fairgen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "fairgen/errors.hpp"
#include "fairgen/rng.hpp"

namespace fairgen {

void write_synthetic_compas(const std::string& csv_path, const SynthSpec& spec) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("write_synthetic_compas: cannot write '" + csv_path + "'");
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };

    out << "age,juv_fel_count,priors_count,days_b_screening,c_charge_degree,race,sex,two_year_recid\n";
    for (int i = 0; i < spec.rows; ++i) {
        const int male = unif(rng) < spec.male_fraction ? 1 : 0;
        // The sensitive attribute shifts the latent risk itself, so the label
        // signal and the group gap are carried by the same features.
        const double u = normal(rng) + spec.feature_shift * male;
        const int race_b = unif(rng) < 0.55 + 0.12 * std::tanh(u) ? 1 : 0;
        // Coarse feature grid, COMPAS-style: heavy row collisions.
        const long priors = std::clamp(std::lround(1.4 * u + 1.0 + normal(rng)), 0L, 10L);
        const long age = std::clamp(5 * std::lround((35.0 - 4.0 * u + 9.0 * normal(rng)) / 5.0), 20L, 70L);
        const long juv = std::clamp(std::lround(0.35 * u + 0.4 * normal(rng)), 0L, 3L);
        const char degree = unif(rng) < sigmoid(0.5 * u) ? 'F' : 'M';
        const long days = std::clamp(4 * std::lround(normal(rng) * 2.0), -12L, 12L);
        const int recid =
            unif(rng) < sigmoid(spec.signal * (u - 0.5) + spec.direct_effect * male - 0.35) ? 1 : 0;

        out << age << "," << juv << ",";
        // A handful of missing cells at fixed positions.
        const bool missing = spec.missing_cells > 0 && i > 0 && i % (spec.rows / (spec.missing_cells + 1)) == 0 &&
                             i / (spec.rows / (spec.missing_cells + 1)) <= spec.missing_cells;
        if (missing)
            out << "";
        else
            out << priors;
        out << "," << days << "," << degree << "," << (race_b ? "grpB" : "grpA") << ","
            << (male ? "Male" : "Female") << "," << recid << "\n";
    }
}

std::string synthetic_compas_schema_json() {
    return R"({"columns": {
  "age": "feature-numeric",
  "juv_fel_count": "feature-numeric",
  "priors_count": "feature-numeric",
  "days_b_screening": "feature-numeric",
  "c_charge_degree": "feature-categorical",
  "race": {"role": "feature-categorical", "map": {"grpA": 0, "grpB": 1}},
  "sex": {"role": "sensitive", "map": {"Female": 0, "Male": 1}},
  "two_year_recid": {"role": "label", "map": {"0": 0, "1": 1}}
}})";
}

}  // namespace fairgen
