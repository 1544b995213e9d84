#pragma once

#include <map>
#include <string>

#include "fairgen/dataset.hpp"

namespace fairgen {

// Column roles for CSV ingestion. The schema file is JSON:
//
//   {"columns": {
//      "age":           "feature-numeric",
//      "c_charge_degree": {"role": "feature-categorical"},
//      "sex":           {"role": "sensitive", "map": {"Female": 0, "Male": 1}},
//      "two_year_recid": {"role": "label", "map": {"0": 0, "1": 1}}}}
//
// Sensitive and label columns are binarized/encoded through their value maps;
// rows whose value is absent from the map are dropped, as are rows with an
// empty cell in any used column. File columns not named in the schema are
// ignored.
struct ColumnSpec {
    enum class Role { FeatureNumeric, FeatureCategorical, Sensitive, Label, Drop };
    Role role = Role::Drop;
    std::map<std::string, int> value_map;
};

struct Schema {
    std::map<std::string, ColumnSpec> columns;

    static Schema from_json_text(const std::string& text);
    static Schema from_file(const std::string& path);

    // Re-point the sensitive role at `column` (it must carry a value map or
    // hold literal 0/1 values). The previously sensitive column is dropped.
    void set_sensitive(const std::string& column);

    const std::string& sensitive_column() const;
    const std::string& label_column() const;
};

// Loads a headered CSV per the schema: categorical features one-hot encoded in
// lexicographic category order, numeric features standardized to zero mean and
// unit variance over the file (constant columns floor to all-zeros).
Dataset load_csv(const std::string& path, const Schema& schema);

}  // namespace fairgen
