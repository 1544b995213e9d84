#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "fairgen/csv.hpp"
#include "fairgen/dataset.hpp"
#include "fairgen/errors.hpp"
#include "fairgen/synth.hpp"

using namespace fairgen;

namespace {

Dataset tiny(std::initializer_list<std::pair<int, int>> ty, int num_classes = 2) {
    const auto n = static_cast<Eigen::Index>(ty.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
    Eigen::VectorXi t(n), y(n);
    Eigen::Index i = 0;
    for (auto [ti, yi] : ty) {
        x(i, 0) = static_cast<double>(i);
        t[i] = ti;
        y[i] = yi;
        ++i;
    }
    return Dataset(std::move(x), std::move(t), std::move(y), num_classes);
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = std::string("/tmp/fairgen_test_") + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("shifted harmonic mean values") {
    const long two_two[] = {2, 2};
    CHECK(shifted_harmonic_mean(two_two) == doctest::Approx(2.0).epsilon(1e-12));
    const long zeros[] = {0, 0};
    CHECK(shifted_harmonic_mean(zeros) == doctest::Approx(1.0).epsilon(1e-12));
    const long three_five[] = {3, 5};
    CHECK(shifted_harmonic_mean(three_five) == doctest::Approx(35.0 / 12.0).epsilon(1e-12));
    CHECK_THROWS_AS(shifted_harmonic_mean({}), std::invalid_argument);
}

TEST_CASE("shifted harmonic mean properties") {
    Rng rng(7);
    std::uniform_int_distribution<long> cnt(0, 40);
    std::uniform_int_distribution<int> len(1, 6);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<long> a(static_cast<std::size_t>(len(rng)));
        for (auto& v : a) v = cnt(rng);
        const double h = shifted_harmonic_mean(a);
        // Bumping any entry strictly increases H.
        for (std::size_t i = 0; i < a.size(); ++i) {
            auto b = a;
            b[i] += 1;
            CHECK(shifted_harmonic_mean(b) > h);
        }
        // Equal arguments collapse to (a+2)/k.
        std::vector<long> eq(a.size(), a[0]);
        CHECK(shifted_harmonic_mean(eq) ==
              doctest::Approx(static_cast<double>(a[0] + 2) / static_cast<double>(a.size())).epsilon(1e-12));
    }
}

TEST_CASE("group counts") {
    CHECK(group_counts(tiny({})).dp[0] == 0);
    CHECK(group_counts(tiny({})).dp[1] == 0);

    const auto c = group_counts(tiny({{0, 1}, {1, 0}, {1, 1}}));
    CHECK(c.dp[0] == 1);
    CHECK(c.dp[1] == 2);
    CHECK(c.eo(1, 1) == 1);
    CHECK(c.eo(0, 1) == 1);
    CHECK(c.eo(1, 0) == 1);
    CHECK(c.eo(0, 0) == 0);
}

TEST_CASE("group counts add over concatenation and marginalize") {
    Rng rng(11);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::pair<int, int>> rows_a, rows_b;
        for (int i = 0; i < 20; ++i) rows_a.push_back({bit(rng), bit(rng)});
        for (int i = 0; i < 13; ++i) rows_b.push_back({bit(rng), bit(rng)});
        Dataset a = tiny({}), b = tiny({});
        {
            Eigen::MatrixXd xa = Eigen::MatrixXd::Zero(20, 1), xb = Eigen::MatrixXd::Zero(13, 1);
            Eigen::VectorXi ta(20), ya(20), tb(13), yb(13);
            for (int i = 0; i < 20; ++i) {
                ta[i] = rows_a[static_cast<std::size_t>(i)].first;
                ya[i] = rows_a[static_cast<std::size_t>(i)].second;
            }
            for (int i = 0; i < 13; ++i) {
                tb[i] = rows_b[static_cast<std::size_t>(i)].first;
                yb[i] = rows_b[static_cast<std::size_t>(i)].second;
            }
            a = Dataset(xa, ta, ya, 2);
            b = Dataset(xb, tb, yb, 2);
        }
        const auto ca = group_counts(a), cb = group_counts(b), cc = group_counts(Dataset::concat(a, b));
        CHECK(cc.dp[0] == ca.dp[0] + cb.dp[0]);
        CHECK(cc.eo == (ca.eo + cb.eo));
        // dp marginalizes eo over labels.
        CHECK(cc.dp[0] == cc.eo.row(0).sum());
        CHECK(cc.dp[1] == cc.eo.row(1).sum());
    }
}

TEST_CASE("draw_supersample determinism and distinctness") {
    Eigen::MatrixXd x(5000, 2);
    Eigen::VectorXi t(5000), y(5000);
    Rng fill(3);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int i = 0; i < 5000; ++i) {
        x(i, 0) = i;
        x(i, 1) = -i;
        t[i] = bit(fill);
        y[i] = bit(fill);
    }
    const Dataset d(x, t, y, 2);

    Rng r1(42), r2(42);
    const SuperSample a = draw_supersample(d, 100, r1);
    const SuperSample b = draw_supersample(d, 100, r2);
    CHECK(a.side0.features() == b.side0.features());
    CHECK(a.side1.features() == b.side1.features());

    // All 200 drawn rows are distinct (x col 0 is the original row id).
    std::set<long> ids;
    for (int i = 0; i < 100; ++i) {
        ids.insert(std::lround(a.side0.features()(i, 0)));
        ids.insert(std::lround(a.side1.features()(i, 0)));
    }
    CHECK(ids.size() == 200);

    Rng r3(1);
    CHECK_THROWS_AS(draw_supersample(d, 2501, r3), SizeError);

    // n=1 from |d|=2: the only pairing up to order.
    const Dataset d2 = tiny({{0, 0}, {1, 1}});
    Rng r4(5);
    const SuperSample s2 = draw_supersample(d2, 1, r4);
    CHECK(s2.size() == 1);
    CHECK(s2.side0.sensitive()[0] != s2.side1.sensitive()[0]);
}

TEST_CASE("split definition, symmetry and partition") {
    const Dataset d = tiny({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}, {1, 1}});
    Rng rng(9);
    const SuperSample ss = draw_supersample(d, 3, rng);

    const SelectionVector zeros(3, 0);
    auto [tr0, te0] = split(ss, zeros);
    CHECK(tr0.features() == ss.side0.features());
    CHECK(te0.features() == ss.side1.features());

    const SelectionVector r = {1, 0, 1};
    auto [tr, te] = split(ss, r);
    auto [trc, tec] = split(ss, complement(r));
    CHECK(tr.features() == tec.features());
    CHECK(te.features() == trc.features());

    // Union of the two halves is the full supersample as a multiset.
    std::multiset<double> got, want;
    for (int i = 0; i < 3; ++i) {
        got.insert(tr.features()(i, 0));
        got.insert(te.features()(i, 0));
        want.insert(ss.side0.features()(i, 0));
        want.insert(ss.side1.features()(i, 0));
    }
    CHECK(got == want);

    CHECK_THROWS_AS(split(ss, SelectionVector(2, 0)), SizeError);
}

TEST_CASE("load_csv standardizes numeric columns") {
    const std::string path = write_temp("basic.csv",
                                        "a,b,t,y\n"
                                        "1,10,0,0\n"
                                        "2,20,0,1\n"
                                        "3,30,1,0\n"
                                        "4,40,1,1\n");
    const Schema schema = Schema::from_json_text(R"({"columns":{
        "a":"feature-numeric","b":"feature-numeric",
        "t":{"role":"sensitive"},"y":{"role":"label"}}})");
    const Dataset d = load_csv(path, schema);
    CHECK(d.size() == 4);
    CHECK(d.feature_dim() == 2);
    for (int c = 0; c < 2; ++c) {
        const double mean = d.features().col(c).mean();
        const double var = (d.features().col(c).array() - mean).square().sum() / 4.0;
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(var - 1.0) <= 1e-6);
    }
    std::remove(path.c_str());
}

TEST_CASE("load_csv constant column floors to zeros") {
    const std::string path = write_temp("const.csv", "a,t,y\n5,0,0\n5,1,1\n5,0,1\n");
    const Schema schema = Schema::from_json_text(
        R"({"columns":{"a":"feature-numeric","t":{"role":"sensitive"},"y":{"role":"label"}}})");
    const Dataset d = load_csv(path, schema);
    CHECK((d.features().col(0).array() == 0.0).all());
    std::remove(path.c_str());
}

TEST_CASE("load_csv one-hot uses lexicographic category order") {
    const std::string path = write_temp("cat.csv", "c,t,y\nzeta,0,0\nalpha,1,1\nmid,0,1\n");
    const Schema schema = Schema::from_json_text(
        R"({"columns":{"c":"feature-categorical","t":{"role":"sensitive"},"y":{"role":"label"}}})");
    const Dataset d = load_csv(path, schema);
    CHECK(d.feature_dim() == 3);
    // Categories alpha < mid < zeta; first row is zeta -> last indicator.
    CHECK(d.features()(0, 2) == 1.0);
    CHECK(d.features()(1, 0) == 1.0);
    CHECK(d.features()(2, 1) == 1.0);
    std::remove(path.c_str());
}

TEST_CASE("load_csv error paths") {
    const std::string path = write_temp("err.csv", "a,t,y\n1,0,0\n2,1,1\n");
    CHECK_THROWS_AS(load_csv(path, Schema::from_json_text(R"({"columns":{
        "missing":"feature-numeric","t":{"role":"sensitive"},"y":{"role":"label"}}})")),
                    SchemaError);
    std::remove(path.c_str());

    const std::string path2 = write_temp("err2.csv", "a,t,y\n1,2,0\n2,1,1\n");
    CHECK_THROWS_AS(load_csv(path2, Schema::from_json_text(R"({"columns":{
        "a":"feature-numeric","t":{"role":"sensitive"},"y":{"role":"label"}}})")),
                    DataError);
    std::remove(path2.c_str());

    CHECK_THROWS_AS(Schema::from_json_text(R"({"columns":{"a":"feature-numeric"}})"), SchemaError);
    CHECK_THROWS_AS(Schema::from_json_text("not json"), SchemaError);
}

TEST_CASE("load_csv drops rows with missing cells and unmapped values") {
    const std::string path = write_temp("drop.csv",
                                        "a,t,y\n"
                                        "1,m,0\n"
                                        ",f,1\n"
                                        "3,x,1\n"
                                        "4,f,0\n");
    const Schema schema = Schema::from_json_text(R"({"columns":{
        "a":"feature-numeric",
        "t":{"role":"sensitive","map":{"f":0,"m":1}},
        "y":{"role":"label"}}})");
    const Dataset d = load_csv(path, schema);
    CHECK(d.size() == 2);  // the empty cell and the unmapped 'x' rows are gone
    std::remove(path.c_str());
}

TEST_CASE("synthetic table ingests with full row accounting") {
    SynthSpec spec;
    spec.rows = 600;
    spec.seed = 4;
    const std::string path = "/tmp/fairgen_test_synth.csv";
    write_synthetic_compas(path, spec);

    // Independent count of complete rows straight off the file.
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    long complete = 0;
    while (std::getline(in, line))
        if (line.find(",,") == std::string::npos) ++complete;

    const Schema schema = Schema::from_json_text(synthetic_compas_schema_json());
    const Dataset d = load_csv(path, schema);
    const auto c = group_counts(d);
    CHECK(c.dp[0] + c.dp[1] == d.size());
    CHECK(d.size() == complete);
    CHECK(d.size() < spec.rows);  // the injected missing cells dropped rows
    CHECK(c.dp[1] > c.dp[0]);    // sex imbalance present

    // The race column can be promoted to sensitive.
    Schema race_schema = Schema::from_json_text(synthetic_compas_schema_json());
    race_schema.set_sensitive("race");
    const Dataset dr = load_csv(path, race_schema);
    CHECK(dr.feature_dim() < d.feature_dim());  // race indicators left the feature block
    std::remove(path.c_str());
}
