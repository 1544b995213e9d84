#include "fairgen/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fairgen/errors.hpp"

namespace fairgen {
namespace {

constexpr double kVarianceFloor = 1e-8;

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Minimal RFC-4180 field splitter: quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

ColumnSpec::Role parse_role(const std::string& s) {
    if (s == "feature-numeric") return ColumnSpec::Role::FeatureNumeric;
    if (s == "feature-categorical") return ColumnSpec::Role::FeatureCategorical;
    if (s == "sensitive") return ColumnSpec::Role::Sensitive;
    if (s == "label") return ColumnSpec::Role::Label;
    if (s == "drop") return ColumnSpec::Role::Drop;
    throw SchemaError("schema: unknown column role '" + s + "'");
}

bool parse_double(const std::string& s, double* out) {
    std::size_t pos = 0;
    try {
        *out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

}  // namespace

Schema Schema::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("schema: invalid JSON: ") + e.what());
    }
    if (!j.contains("columns") || !j["columns"].is_object())
        throw SchemaError("schema: missing 'columns' object");
    Schema s;
    int n_sensitive = 0, n_label = 0;
    for (auto& [name, spec] : j["columns"].items()) {
        ColumnSpec cs;
        if (spec.is_string()) {
            cs.role = parse_role(spec.get<std::string>());
        } else if (spec.is_object()) {
            if (!spec.contains("role")) throw SchemaError("schema: column '" + name + "' lacks a role");
            cs.role = parse_role(spec["role"].get<std::string>());
            if (spec.contains("map")) {
                for (auto& [v, code] : spec["map"].items()) cs.value_map[v] = code.get<int>();
            }
        } else {
            throw SchemaError("schema: column '" + name + "' must be a string or object");
        }
        if (cs.role == ColumnSpec::Role::Sensitive) ++n_sensitive;
        if (cs.role == ColumnSpec::Role::Label) ++n_label;
        s.columns[name] = std::move(cs);
    }
    if (n_sensitive != 1) throw SchemaError("schema: exactly one sensitive column required");
    if (n_label != 1) throw SchemaError("schema: exactly one label column required");
    return s;
}

Schema Schema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("schema: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void Schema::set_sensitive(const std::string& column) {
    auto it = columns.find(column);
    if (it == columns.end()) throw SchemaError("schema: no column '" + column + "' to make sensitive");
    for (auto& [name, spec] : columns) {
        if (spec.role == ColumnSpec::Role::Sensitive && name != column) spec.role = ColumnSpec::Role::Drop;
    }
    it->second.role = ColumnSpec::Role::Sensitive;
}

const std::string& Schema::sensitive_column() const {
    for (const auto& [name, spec] : columns)
        if (spec.role == ColumnSpec::Role::Sensitive) return name;
    throw SchemaError("schema: no sensitive column");
}

const std::string& Schema::label_column() const {
    for (const auto& [name, spec] : columns)
        if (spec.role == ColumnSpec::Role::Label) return name;
    throw SchemaError("schema: no label column");
}

Dataset load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: empty file");
    const std::vector<std::string> header = split_csv_line(line);

    // Map schema columns to file positions.
    std::map<std::string, int> col_pos;
    for (std::size_t i = 0; i < header.size(); ++i) col_pos[header[i]] = static_cast<int>(i);
    struct Used {
        std::string name;
        int pos;
        const ColumnSpec* spec;
    };
    std::vector<Used> used;
    for (const auto& [name, spec] : schema.columns) {
        if (spec.role == ColumnSpec::Role::Drop) continue;
        auto it = col_pos.find(name);
        if (it == col_pos.end()) throw SchemaError("load_csv: file lacks schema column '" + name + "'");
        used.push_back({name, it->second, &spec});
    }
    // std::map iteration gives lexicographic column order; keep file order instead.
    std::sort(used.begin(), used.end(), [](const Used& a, const Used& b) { return a.pos < b.pos; });

    // Pass 1: keep rows with all used cells present and mappable.
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("load_csv: row with " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        bool keep = true;
        for (const auto& u : used) {
            const std::string& v = fields[static_cast<std::size_t>(u.pos)];
            if (v.empty()) {
                keep = false;
                break;
            }
            if ((u.spec->role == ColumnSpec::Role::Sensitive || u.spec->role == ColumnSpec::Role::Label) &&
                !u.spec->value_map.empty() && !u.spec->value_map.count(v)) {
                keep = false;  // value outside the declared binarization
                break;
            }
        }
        if (keep) rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw DataError("load_csv: no usable rows");

    // Category sets for one-hot columns, lexicographic for determinism.
    std::map<std::string, std::vector<std::string>> categories;
    for (const auto& u : used) {
        if (u.spec->role != ColumnSpec::Role::FeatureCategorical) continue;
        std::set<std::string> cats;
        for (const auto& r : rows) cats.insert(r[static_cast<std::size_t>(u.pos)]);
        categories[u.name] = std::vector<std::string>(cats.begin(), cats.end());
    }

    Eigen::Index dim = 0;
    for (const auto& u : used) {
        if (u.spec->role == ColumnSpec::Role::FeatureNumeric) dim += 1;
        if (u.spec->role == ColumnSpec::Role::FeatureCategorical)
            dim += static_cast<Eigen::Index>(categories[u.name].size());
    }

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, dim);
    Eigen::VectorXi t(n), y(n);

    auto decode = [](const ColumnSpec& spec, const std::string& v, const std::string& name) {
        if (!spec.value_map.empty()) return spec.value_map.at(v);
        double d;
        if (!parse_double(v, &d) || d != std::floor(d))
            throw DataError("load_csv: column '" + name + "': non-integer value '" + v + "' without a map");
        return static_cast<int>(d);
    };

    int max_label = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (const auto& u : used) {
            const std::string& v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(u.pos)];
            switch (u.spec->role) {
                case ColumnSpec::Role::FeatureNumeric: {
                    double d;
                    if (!parse_double(v, &d))
                        throw DataError("load_csv: column '" + u.name + "': bad numeric value '" + v + "'");
                    x(i, col++) = d;
                    break;
                }
                case ColumnSpec::Role::FeatureCategorical: {
                    const auto& cats = categories[u.name];
                    auto it = std::lower_bound(cats.begin(), cats.end(), v);
                    x(i, col + (it - cats.begin())) = 1.0;
                    col += static_cast<Eigen::Index>(cats.size());
                    break;
                }
                case ColumnSpec::Role::Sensitive: {
                    int code = decode(*u.spec, v, u.name);
                    if (code != 0 && code != 1)
                        throw DataError("load_csv: column '" + u.name + "': sensitive value maps to " +
                                        std::to_string(code) + ", expected 0/1");
                    t[i] = code;
                    break;
                }
                case ColumnSpec::Role::Label: {
                    int code = decode(*u.spec, v, u.name);
                    if (code < 0) throw DataError("load_csv: column '" + u.name + "': negative label");
                    y[i] = code;
                    max_label = std::max(max_label, code);
                    break;
                }
                case ColumnSpec::Role::Drop:
                    break;
            }
        }
    }

    // Standardize numeric columns only (one-hot columns stay 0/1).
    Eigen::Index col = 0;
    for (const auto& u : used) {
        if (u.spec->role == ColumnSpec::Role::FeatureNumeric) {
            auto c = x.col(col);
            const double mean = c.mean();
            const double var = (c.array() - mean).square().sum() / static_cast<double>(n);
            if (var < kVarianceFloor)
                c.setZero();
            else
                c = (c.array() - mean) / std::sqrt(var);
            ++col;
        } else if (u.spec->role == ColumnSpec::Role::FeatureCategorical) {
            col += static_cast<Eigen::Index>(categories[u.name].size());
        }
    }

    return Dataset(std::move(x), std::move(t), std::move(y), std::max(2, max_label + 1));
}

}  // namespace fairgen
