#include <CLI11.hpp>

#include <cstdio>
#include <fstream>

#include "fairgen/synth.hpp"

// Writes the synthetic COMPAS-style benchmark table plus its schema. The
// repository ships no real dataset; this generator produces a drop-in stand-in
// with the same shape (imbalanced binary sex column, mixed feature types,
// recidivism-style label).
int main(int argc, char** argv) {
    CLI::App app{"generate the synthetic COMPAS-style dataset and schema"};
    std::string out = "compas_synth.csv";
    std::string schema_out = "compas_synth.schema.json";
    fairgen::SynthSpec spec;
    app.add_option("--out", out, "CSV output path");
    app.add_option("--schema-out", schema_out, "schema JSON output path");
    app.add_option("--rows", spec.rows, "row count");
    app.add_option("--seed", spec.seed, "generator seed");
    app.add_option("--male-fraction", spec.male_fraction, "sensitive group imbalance");
    app.add_option("--direct-effect", spec.direct_effect, "sex to label log-odds shift");
    app.add_option("--feature-shift", spec.feature_shift, "sex to history-feature shift");
    app.add_option("--signal", spec.signal, "latent-risk to label log-odds scale");
    CLI11_PARSE(app, argc, argv);

    try {
        fairgen::write_synthetic_compas(out, spec);
        std::ofstream s(schema_out);
        s << fairgen::synthetic_compas_schema_json() << "\n";
        std::printf("wrote %s (%d rows) and %s\n", out.c_str(), spec.rows, schema_out.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
