#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "plam/model_io.hpp"

using namespace plam;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::string kDataDir = PLAM_DATA_DIR;

Dataset make_dataset(const std::vector<std::string>& names, const MatrixXd& vals,
                     const std::string& target) {
    std::vector<VarKind> kinds(names.size(), VarKind::Continuous);
    int t = 0;
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == target) t = int(i);
    return Dataset(names, vals, t, kinds);
}

Dataset synthetic(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    MatrixXd vals(n, 4);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        vals(i, 2) = N(rng);
        vals(i, 3) = std::sin(2.0 * vals(i, 0)) + 0.5 * vals(i, 1) * vals(i, 2) + 0.4 * N(rng);
    }
    return make_dataset({"a", "b", "c", "y"}, vals, "y");
}

}  // namespace

TEST_CASE("ingest: boston schema") {
    IngestReport report;
    const Dataset d = ingest_csv(kDataDir + "/boston.csv", "Medv", {}, &report);
    CHECK(d.n_rows() == 506);
    CHECK(d.n_cols() == 14);
    CHECK(d.target_name() == "Medv");
    CHECK(d.kind(d.column_index("Chas")) == VarKind::Binary);
    CHECK(d.kind(d.column_index("Lstat")) == VarKind::Continuous);
    CHECK(report.rows_rejected == 0);

    // override applies and is recorded
    const Dataset d2 =
        ingest_csv(kDataDir + "/boston.csv", "Medv", {{"Rad", VarKind::Excluded}}, &report);
    CHECK(d2.kind(d2.column_index("Rad")) == VarKind::Excluded);
}

TEST_CASE("ingest: credit card schema") {
    const Dataset d = ingest_csv(kDataDir + "/creditcard.csv", "Card");
    CHECK(d.n_rows() == 1319);
    CHECK(d.n_cols() == 12);
    CHECK(d.kind(d.column_index("Card")) == VarKind::Binary);
    CHECK(d.kind(d.column_index("Owner")) == VarKind::Binary);
    CHECK(d.kind(d.column_index("Selfemp")) == VarKind::Binary);
    CHECK(d.kind(d.column_index("Majorcards")) == VarKind::Binary);
    CHECK(d.kind(d.column_index("Share")) == VarKind::Continuous);
}

TEST_CASE("ingest: error paths and constant columns") {
    CHECK_THROWS_AS(ingest_csv(kDataDir + "/boston.csv", "NotAColumn"), MissingTarget);
    CHECK_THROWS_AS(ingest_csv(kDataDir + "/does_not_exist.csv", "y"), EmptyFile);

    const std::string tmp = "/tmp/plam_test_const.csv";
    {
        FILE* f = std::fopen(tmp.c_str(), "w");
        std::fputs("a,b,y\n1,5,2\n2,5,3\n3,5,4\n4,5,5\n", f);
        std::fclose(f);
    }
    IngestReport report;
    const Dataset d = ingest_csv(tmp, "y", {}, &report);
    CHECK(d.kind(d.column_index("b")) == VarKind::Excluded);
    bool flagged = false;
    for (const auto& w : report.warnings) flagged |= (w.code == "ConstantColumn");
    CHECK(flagged);

    {
        FILE* f = std::fopen(tmp.c_str(), "w");
        std::fputs("a,y\n1,2\nxx,3\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(ingest_csv(tmp, "y"), NonNumericCell);
    std::remove(tmp.c_str());
}

TEST_CASE("model json round trip: additive model predicts bit-identically") {
    const Dataset d = synthetic(200, 3);
    const ModelSpec spec = parse_model_spec("gam");
    const FittedModel fitted = fit_model(spec, d, 7);
    const VectorXd before = fitted.predict(d);

    const json j = model_to_json(fitted, {{"command", "fit"}, {"seed", 7}});
    const std::string text = j.dump();
    const FittedModel reloaded = model_from_json(json::parse(text));
    const VectorXd after = reloaded.predict(d);
    REQUIRE(before.size() == after.size());
    for (Eigen::Index i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("model json round trip: partial linear model with quantile support") {
    const Dataset d = synthetic(300, 5);
    const ModelSpec spec = parse_model_spec("gama:alpha=0.05");
    const FittedModel fitted = fit_model(spec, d, 11);
    const json j = model_to_json(fitted, {{"seed", 11}});
    const FittedModel reloaded = model_from_json(json::parse(j.dump()));

    const VectorXd a = fitted.predict(d);
    const VectorXd b = reloaded.predict(d);
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    // marginal effects reproduce from the stored quantile support
    if (!fitted.plm->retained_pairs.empty()) {
        const auto& term = fitted.plm->final_fit.smooths[0];
        const VectorXd grid = VectorXd::LinSpaced(20, term.basis.knots[0],
                                                  term.basis.knots[term.basis.dim - 1]);
        const auto m1 =
            marginal_effects(*fitted.plm, term.basis.variable_id, grid, {0.5});
        const auto m2 =
            marginal_effects(*reloaded.plm, term.basis.variable_id, grid, {0.5});
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            CHECK(m1.contexts[0].curve[i] == m2.contexts[0].curve[i]);
    }
}

TEST_CASE("model json round trip: ensembles and pltr") {
    const Dataset d = synthetic(150, 13);
    {
        ModelSpec spec = parse_model_spec("forest");
        spec.forest.n_trees = 15;
        const FittedModel fitted = fit_model(spec, d, 3);
        const FittedModel reloaded = model_from_json(json::parse(model_to_json(fitted, {}).dump()));
        const VectorXd a = fitted.predict(d);
        const VectorXd b = reloaded.predict(d);
        for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    {
        ModelSpec spec = parse_model_spec("boosting");
        spec.boost.n_trees = 20;
        const FittedModel fitted = fit_model(spec, d, 3);
        const FittedModel reloaded = model_from_json(json::parse(model_to_json(fitted, {}).dump()));
        const VectorXd a = fitted.predict(d);
        const VectorXd b = reloaded.predict(d);
        for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    {
        // binary target for pltr
        std::mt19937_64 rng(17);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd vals(300, 3);
        for (int i = 0; i < 300; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = N(rng);
            vals(i, 2) = vals(i, 0) + 0.5 * N(rng) > 0 ? 1.0 : 0.0;
        }
        const Dataset dc = make_dataset({"a", "b", "y"}, vals, "y");
        const FittedModel fitted = fit_model(parse_model_spec("pltr"), dc, 3);
        const FittedModel reloaded = model_from_json(json::parse(model_to_json(fitted, {}).dump()));
        const VectorXd a = fitted.predict(dc);
        const VectorXd b = reloaded.predict(dc);
        for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("augmented linear models round trip with their design recipe") {
    const Dataset d = synthetic(220, 23);
    for (const char* name : {"ols", "ols-augmented", "lasso:lambda=1se", "am:alpha=0.05"}) {
        const FittedModel fitted = fit_model(parse_model_spec(name), d, 5);
        const FittedModel reloaded = model_from_json(json::parse(model_to_json(fitted, {}).dump()));
        const VectorXd a = fitted.predict(d);
        const VectorXd b = reloaded.predict(d);
        for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("atomic writes land complete files") {
    const std::string path = "/tmp/plam_test_atomic.json";
    write_json_atomic(path, {{"hello", 1.5}});
    const json j = read_json_file(path);
    CHECK(j.at("hello").get<double>() == 1.5);
    std::remove(path.c_str());
}
