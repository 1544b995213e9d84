#include "fairgen/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fairgen/csv.hpp"
#include "fairgen/errors.hpp"
#include "fairgen/model.hpp"

namespace fairgen {

namespace {

using nlohmann::json;

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd") return OptimizerKind::SGD;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Seed stream tags, one per independent random decision.
enum : std::uint64_t { kSupersample = 1, kSelection = 2, kTrain = 3, kInit = 4, kSubsets = 5, kTable1 = 6 };

}  // namespace

double default_lambda(Method m) {
    switch (m) {
        case Method::ERM: return 0.0;
        case Method::DiffDP:
        case Method::DiffEopp:
        case Method::DiffEodd: return 2.0;
        case Method::HSIC: return 400.0;
        case Method::PRemover: return 0.4;
    }
    return 0.0;
}

double ExperimentConfig::effective_lambda() const { return lambda < 0.0 ? default_lambda(method) : lambda; }

Metric ExperimentConfig::effective_metric() const {
    if (metric_set) return metric;
    switch (method) {
        case Method::DiffEodd: return Metric::EO;
        case Method::DiffEopp: return Metric::EOPP;
        default: return Metric::DP;
    }
}

TrainConfig ExperimentConfig::train_config(std::uint64_t cell_seed) const {
    TrainConfig tc;
    tc.method = method;
    tc.lambda = effective_lambda();
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    tc.optimizer = optimizer;
    tc.balanced = balanced;
    tc.seed = cell_seed;
    return tc;
}

void ExperimentConfig::apply_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    auto get = [&j](const char* key) { return j.contains(key); };
    if (get("dataset")) dataset_path = j["dataset"].get<std::string>();
    if (get("schema")) schema_path = j["schema"].get<std::string>();
    if (get("sensitive")) sensitive = j["sensitive"].get<std::string>();
    if (get("out")) out_path = j["out"].get<std::string>();
    if (get("metric")) {
        metric = metric_from_string(j["metric"].get<std::string>());
        metric_set = true;
    }
    if (get("method")) method = method_from_string(j["method"].get<std::string>());
    if (get("lambda")) lambda = j["lambda"].get<double>();
    if (get("n")) {
        n_grid.clear();
        if (j["n"].is_array())
            for (const auto& v : j["n"]) n_grid.push_back(v.get<int>());
        else
            n_grid.push_back(j["n"].get<int>());
    }
    if (get("m1")) m1 = j["m1"].get<int>();
    if (get("m2")) m2 = j["m2"].get<int>();
    if (get("m")) m = j["m"].get<int>();
    if (get("subset_budget")) subset_budget = j["subset_budget"].get<int>();
    if (get("k")) k = j["k"].get<int>();
    if (get("balanced")) balanced = j["balanced"].get<bool>();
    if (get("hard_threshold")) hard_threshold = j["hard_threshold"].get<double>();
    if (get("seed")) seed = j["seed"].get<std::uint64_t>();
    if (get("arch")) arch = j["arch"].get<std::string>();
    if (get("epochs")) epochs = j["epochs"].get<int>();
    if (get("batch_size")) batch_size = j["batch_size"].get<int>();
    if (get("learning_rate")) learning_rate = j["learning_rate"].get<double>();
    if (get("optimizer")) optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
    if (get("table1_seeds")) table1_seeds = j["table1_seeds"].get<int>();
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    cfg.apply_json_text(ss.str());
    return cfg;
}

void validate(const ExperimentConfig& cfg, Eigen::Index dataset_size) {
    if (cfg.m1 < 1 || cfg.m2 < 1) throw ConfigError("m1 and m2 must be >= 1");
    if (cfg.k < 1) throw ConfigError("k must be >= 1");
    if (cfg.subset_budget < 1) throw ConfigError("subset_budget must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.n_grid.empty()) throw ConfigError("empty n grid");
    const Metric metric = cfg.effective_metric();
    for (int n : cfg.n_grid) {
        if (n < 1) throw ConfigError("n must be >= 1");
        if (2 * static_cast<Eigen::Index>(n) > dataset_size)
            throw ConfigError("n=" + std::to_string(n) + " needs 2n <= dataset size (" +
                              std::to_string(dataset_size) + ")");
        const int em = cfg.m == 0 ? n : cfg.m;
        if (em < 2 || em > n) throw ConfigError("m must lie in {2,...,n}");
        if ((metric == Metric::EO || metric == Metric::EOPP) && em < 4)
            throw ConfigError("the EO bound requires m >= 4");
    }
    if (cfg.m2 < 2 * (cfg.k + 1))
        throw ConfigError("m2 must be at least 2(k+1) for the MI estimator");
}

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_path.empty() || cfg.schema_path.empty())
        throw ConfigError("dataset and schema paths are required");
    Schema schema = Schema::from_file(cfg.schema_path);
    if (!cfg.sensitive.empty()) schema.set_sensitive(cfg.sensitive);
    return load_csv(cfg.dataset_path, schema);
}

Emitter::Emitter(const std::string& out_path)
    : jsonl_path_(out_path + ".jsonl"), csv_path_(out_path + ".csv") {
    jsonl_ = std::fopen(jsonl_path_.c_str(), "w");
    if (!jsonl_) throw DataError("emit: cannot write '" + jsonl_path_ + "'");
}

Emitter::~Emitter() {
    if (jsonl_) std::fclose(static_cast<std::FILE*>(jsonl_));
    if (csv_) std::fclose(static_cast<std::FILE*>(csv_));
}

void Emitter::record(const std::string& json_line) {
    std::fprintf(static_cast<std::FILE*>(jsonl_), "%s\n", json_line.c_str());
    std::fflush(static_cast<std::FILE*>(jsonl_));
}

void Emitter::plot_row(int n, double mean_gap, double std_gap, std::optional<double> mean_bound,
                       std::optional<double> std_bound) {
    if (!csv_) {
        csv_ = std::fopen(csv_path_.c_str(), "w");
        if (!csv_) throw DataError("emit: cannot write '" + csv_path_ + "'");
        std::fprintf(static_cast<std::FILE*>(csv_), "n,mean_gap,std_gap,mean_bound,std_bound\n");
    }
    auto* f = static_cast<std::FILE*>(csv_);
    std::fprintf(f, "%d,%.17g,%.17g", n, mean_gap, std_gap);
    if (mean_bound)
        std::fprintf(f, ",%.17g", *mean_bound);
    else
        std::fprintf(f, ",");
    if (std_bound)
        std::fprintf(f, ",%.17g\n", *std_bound);
    else
        std::fprintf(f, ",\n");
    std::fflush(f);
}

namespace {

Predictor evaluation_predictor(const Model& model, double hard_threshold) {
    if (hard_threshold < 0.0) return model.predictor();
    return [m = model, thr = hard_threshold](const Eigen::MatrixXd& x) {
        return (m.predict(x).array() >= thr).cast<double>().matrix().eval();
    };
}

struct Cell {
    GapRecord gap;
    double train_acc = 0.0, test_acc = 0.0;
    std::string digest;
    std::vector<LossPair> pairs;  // one per subset, bounds mode only
};

Cell run_cell(const ExperimentConfig& cfg, const SuperSample& ss, const SelectionVector& r,
              const std::vector<SubsetContext>* us, int n, int z, int r_idx) {
    const auto [train_set, test_set] = split(ss, r);
    const Arch arch = Arch::parse(cfg.arch, static_cast<int>(ss.side0.feature_dim()));
    const Model init = Model::init(arch, derive_seed(cfg.seed, {kInit, static_cast<std::uint64_t>(n),
                                                                static_cast<std::uint64_t>(z),
                                                                static_cast<std::uint64_t>(r_idx)}));
    const TrainConfig tc = cfg.train_config(derive_seed(
        cfg.seed, {kTrain, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(z),
                   static_cast<std::uint64_t>(r_idx)}));
    const Model model = train(init, train_set, tc);

    Cell cell;
    const Predictor eval = evaluation_predictor(model, cfg.hard_threshold);
    cell.gap = gap(eval, cfg.effective_metric(), train_set, test_set);
    cell.train_acc = accuracy(model, train_set);
    cell.test_acc = accuracy(model, test_set);
    cell.digest = model.digest();
    if (us) {
        const Eigen::VectorXd preds0 = eval(ss.side0.features());
        const Eigen::VectorXd preds1 = eval(ss.side1.features());
        cell.pairs.reserve(us->size());
        for (const auto& u : *us)
            cell.pairs.push_back(loss_pair(preds0, preds1, ss, r, u, cfg.effective_metric()));
    }
    return cell;
}

json cell_record(const Cell& cell, const ExperimentConfig& cfg, int n, int z, int r_idx) {
    json rec;
    rec["kind"] = "cell";
    rec["n"] = n;
    rec["z"] = z;
    rec["r"] = r_idx;
    rec["method"] = to_string(cfg.method);
    rec["metric"] = to_string(cfg.effective_metric());
    rec["lambda"] = cfg.effective_lambda();
    rec["train_fair"] = cell.gap.train_loss;
    rec["test_fair"] = cell.gap.test_loss;
    rec["gap"] = cell.gap.gap;
    rec["train_acc"] = cell.train_acc;
    rec["test_acc"] = cell.test_acc;
    rec["digest"] = cell.digest;
    if (!cell.pairs.empty()) {
        json deltas = json::array(), ru1 = json::array();
        for (const auto& p : cell.pairs) {
            deltas.push_back(p.delta);
            ru1.push_back(p.r_u1);
        }
        rec["delta_l"] = deltas;
        rec["r_u1"] = ru1;
    }
    return rec;
}

}  // namespace

std::vector<GapSummary> run_gap_experiment(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit) {
    validate(cfg, d.size());
    std::vector<GapSummary> out;
    for (int n : cfg.n_grid) {
        std::vector<double> gap_z, train_z, test_z, acc_z;
        for (int z = 0; z < cfg.m1; ++z) {
            const auto t0 = std::chrono::steady_clock::now();
            Rng zrng(derive_seed(cfg.seed, {kSupersample, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(z)}));
            const SuperSample ss = draw_supersample(d, n, zrng);
            double gap_acc = 0.0, train_acc = 0.0, test_acc = 0.0, acc_acc = 0.0;
            for (int r_idx = 0; r_idx < cfg.m2; ++r_idx) {
                Rng rrng(derive_seed(cfg.seed, {kSelection, static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(z), static_cast<std::uint64_t>(r_idx)}));
                const SelectionVector r = draw_selection(n, rrng);
                const Cell cell = run_cell(cfg, ss, r, nullptr, n, z, r_idx);
                gap_acc += cell.gap.gap;
                train_acc += cell.gap.train_loss;
                test_acc += cell.gap.test_loss;
                acc_acc += cell.test_acc;
                if (emit) emit->record(cell_record(cell, cfg, n, z, r_idx).dump());
            }
            gap_z.push_back(gap_acc / cfg.m2);
            train_z.push_back(train_acc / cfg.m2);
            test_z.push_back(test_acc / cfg.m2);
            acc_z.push_back(acc_acc / cfg.m2);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::fprintf(stderr, "[gaps] method=%s n=%d z=%d/%d %.1fs\n", to_string(cfg.method).c_str(), n, z + 1,
                         cfg.m1, secs);
        }
        GapSummary s;
        s.n = n;
        s.mean_gap = mean_of(gap_z);
        s.std_gap = sample_std_of(gap_z, s.mean_gap);
        double abs_acc = 0.0;
        for (double g : gap_z) abs_acc += std::abs(g);
        s.mean_abs_gap = abs_acc / static_cast<double>(gap_z.size());
        s.mean_train_loss = mean_of(train_z);
        s.mean_test_loss = mean_of(test_z);
        s.mean_test_acc = mean_of(acc_z);
        out.push_back(s);
        if (emit) {
            json rec;
            rec["kind"] = "summary";
            rec["n"] = n;
            rec["method"] = to_string(cfg.method);
            rec["metric"] = to_string(cfg.effective_metric());
            rec["mean_gap"] = s.mean_gap;
            rec["std_gap"] = s.std_gap;
            rec["mean_abs_gap"] = s.mean_abs_gap;
            rec["mean_train_fair"] = s.mean_train_loss;
            rec["mean_test_fair"] = s.mean_test_loss;
            rec["mean_test_acc"] = s.mean_test_acc;
            emit->record(rec.dump());
            emit->plot_row(n, s.mean_gap, s.std_gap, std::nullopt, std::nullopt);
        }
    }
    return out;
}

std::vector<BoundSummary> run_bound_experiment(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit) {
    validate(cfg, d.size());
    const Metric metric = cfg.effective_metric();
    const bool eo_family = metric == Metric::EO || metric == Metric::EOPP;
    std::vector<BoundSummary> out;
    for (int n : cfg.n_grid) {
        const int em = cfg.m == 0 ? n : cfg.m;
        std::vector<std::vector<SubsetSamples>> per_z;
        std::vector<double> gap_z;
        for (int z = 0; z < cfg.m1; ++z) {
            const auto t0 = std::chrono::steady_clock::now();
            Rng zrng(derive_seed(cfg.seed, {kSupersample, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(z)}));
            const SuperSample ss = draw_supersample(d, n, zrng);
            Rng urng(derive_seed(cfg.seed, {kSubsets, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(z)}));
            const std::vector<SubsetContext> us = subsets(n, em, em == n ? 1 : cfg.subset_budget, urng);

            std::vector<SubsetSamples> samples(us.size());
            std::vector<std::vector<std::array<long, 4>>> dp_counts(us.size());
            std::vector<std::vector<std::array<long, 2>>> eo_minima(us.size());
            double gap_acc = 0.0;
            for (int r_idx = 0; r_idx < cfg.m2; ++r_idx) {
                Rng rrng(derive_seed(cfg.seed, {kSelection, static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(z), static_cast<std::uint64_t>(r_idx)}));
                const SelectionVector r = draw_selection(n, rrng);
                const Cell cell = run_cell(cfg, ss, r, &us, n, z, r_idx);
                gap_acc += cell.gap.gap;
                for (std::size_t ui = 0; ui < us.size(); ++ui) {
                    const LossPair& p = cell.pairs[ui];
                    samples[ui].delta.push_back(p.delta);
                    samples[ui].r_u1.push_back(p.r_u1);
                    dp_counts[ui].push_back({p.minus_dp_counts[0], p.minus_dp_counts[1], p.plus_dp_counts[0],
                                             p.plus_dp_counts[1]});
                    eo_minima[ui].push_back({p.minus_min_subgroup, p.plus_min_subgroup});
                }
                if (emit) emit->record(cell_record(cell, cfg, n, z, r_idx).dump());
            }
            for (std::size_t ui = 0; ui < us.size(); ++ui)
                samples[ui].coeff = eo_family ? coeff_eo(eo_minima[ui]) : coeff_dp(dp_counts[ui]);
            per_z.push_back(std::move(samples));
            gap_z.push_back(gap_acc / cfg.m2);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::fprintf(stderr, "[bounds] method=%s n=%d z=%d/%d %.1fs\n", to_string(cfg.method).c_str(), n,
                         z + 1, cfg.m1, secs);
        }

        BoundSummary s;
        s.n = n;
        s.bound = eo_family ? bound_deltal_eo(per_z, em, cfg.k) : bound_deltal_dp(per_z, em, cfg.k);
        for (double g : gap_z) s.abs_gap_per_z.push_back(std::abs(g));
        s.mean_abs_gap = mean_of(s.abs_gap_per_z);
        out.push_back(s);

        if (emit) {
            for (int z = 0; z < cfg.m1; ++z) {
                json rec;
                rec["kind"] = "bound";
                rec["n"] = n;
                rec["z"] = z;
                rec["theorem"] = s.bound.theorem;
                rec["bound"] = s.bound.per_z[static_cast<std::size_t>(z)];
                rec["abs_gap"] = s.abs_gap_per_z[static_cast<std::size_t>(z)];
                rec["mean_gap"] = gap_z[static_cast<std::size_t>(z)];
                emit->record(rec.dump());
            }
            json rec;
            rec["kind"] = "bound_summary";
            rec["n"] = n;
            rec["theorem"] = s.bound.theorem;
            rec["m"] = s.bound.m;
            rec["mean_bound"] = s.bound.value;
            rec["std_bound"] = s.bound.stddev;
            rec["coefficient"] = s.bound.coefficient;
            rec["mi"] = s.bound.mi;
            rec["mean_abs_gap"] = s.mean_abs_gap;
            emit->record(rec.dump());
            const double mean_gap = mean_of(gap_z);
            emit->plot_row(n, mean_gap, sample_std_of(gap_z, mean_gap), s.bound.value, s.bound.stddev);
        }
    }
    return out;
}

std::vector<Table1Row> run_table1(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit) {
    validate(cfg, d.size());
    std::vector<Table1Row> out;
    for (int n : cfg.n_grid) {
        Table1Row rows[2];
        for (int b = 0; b < 2; ++b) {
            rows[b].n = n;
            rows[b].balanced = b == 1;
        }
        for (int s_idx = 0; s_idx < cfg.table1_seeds; ++s_idx) {
            Rng srng(derive_seed(cfg.seed, {kTable1, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s_idx)}));
            std::vector<int> idx(static_cast<std::size_t>(d.size()));
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), srng);
            const Dataset train_set = d.select(std::span<const int>(idx.data(), static_cast<std::size_t>(n)));
            const Dataset test_set = d.select(
                std::span<const int>(idx.data() + n, idx.size() - static_cast<std::size_t>(n)));

            const Arch arch = Arch::parse(cfg.arch, static_cast<int>(d.feature_dim()));
            const std::uint64_t cell = derive_seed(cfg.seed, {kTable1, static_cast<std::uint64_t>(n),
                                                              static_cast<std::uint64_t>(s_idx), 7});
            for (int b = 0; b < 2; ++b) {
                TrainConfig tc = cfg.train_config(cell);
                tc.balanced = b == 1;
                const Model model = train(Model::init(arch, cell), train_set, tc);
                const Predictor eval = evaluation_predictor(model, cfg.hard_threshold);
                const double test_dp = dp_loss(eval, test_set);
                rows[b].per_seed_test_dp.push_back(test_dp);
                if (emit) {
                    json rec;
                    rec["kind"] = "table1";
                    rec["n"] = n;
                    rec["method"] = to_string(cfg.method);
                    rec["balanced"] = b == 1;
                    rec["seed_index"] = s_idx;
                    rec["test_dp"] = test_dp;
                    rec["test_acc"] = accuracy(model, test_set);
                    emit->record(rec.dump());
                }
            }
            std::fprintf(stderr, "[table1] method=%s n=%d seed=%d/%d\n", to_string(cfg.method).c_str(), n,
                         s_idx + 1, cfg.table1_seeds);
        }
        for (int b = 0; b < 2; ++b) {
            rows[b].mean_test_dp = mean_of(rows[b].per_seed_test_dp);
            rows[b].std_test_dp = sample_std_of(rows[b].per_seed_test_dp, rows[b].mean_test_dp);
            if (emit) {
                json rec;
                rec["kind"] = "table1_summary";
                rec["n"] = n;
                rec["method"] = to_string(cfg.method);
                rec["balanced"] = b == 1;
                rec["mean_test_dp"] = rows[b].mean_test_dp;
                rec["std_test_dp"] = rows[b].std_test_dp;
                emit->record(rec.dump());
            }
            out.push_back(rows[b]);
        }
    }
    return out;
}

std::optional<ScatterStats> scatter_stats(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(pairs.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pairs) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pairs) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    ScatterStats s;
    s.r = sxy / std::sqrt(sxx * syy);
    s.slope = sxy / sxx;
    s.intercept = my - s.slope * mx;
    return s;
}

}  // namespace fairgen
