#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "plam/gam.hpp"
#include "plam/rng.hpp"

using namespace plam;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset make_dataset(const std::vector<std::string>& names, const MatrixXd& vals,
                     const std::string& target) {
    std::vector<VarKind> kinds(names.size(), VarKind::Continuous);
    int t = 0;
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == target) t = int(i);
    return Dataset(names, vals, t, kinds);
}

}  // namespace

TEST_CASE("linearity recovery: smooth on a linear signal collapses to a line") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 400;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = 3.0 * vals(i, 0) - 1.0;
    }
    const auto data = make_dataset({"x1", "y"}, vals, "y");
    const auto model = fit_gam(data, {"x1"}, {});
    REQUIRE(model.smooths.size() == 1);
    CHECK(model.smooths[0].edf <= 1.1);

    // fitted curve matches the OLS line
    VectorXd grid = VectorXd::LinSpaced(50, vals.col(0).minCoeff(), vals.col(0).maxCoeff());
    const auto curve = smooth_curve(model, "x1", grid);
    double max_err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double truth = 3.0 * grid[i] - 1.0;
        max_err = std::max(max_err, std::abs(model.intercept + curve.value[i] - truth));
    }
    CHECK(max_err < 1e-3);
}

TEST_CASE("sin(5x) + noise: training MSE near 1 and high curve correlation") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 1000;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = std::sin(5.0 * vals(i, 0)) + N(rng);
    }
    const auto data = make_dataset({"x", "y"}, vals, "y");
    GamOptions opt;
    opt.basis_dim = 12;  // sin(5x) oscillates too fast for the default dim
    const auto model = fit_gam(data, {"x"}, {}, opt);
    const double mse = model.residuals.squaredNorm() / n;
    CHECK(mse > 0.8);
    CHECK(mse < 1.2);

    // correlation over the data-dense central region
    VectorXd grid = VectorXd::LinSpaced(200, -1.2, 1.2);
    const auto curve = smooth_curve(model, "x", grid);
    VectorXd truth(200);
    for (int i = 0; i < 200; ++i) truth[i] = std::sin(5.0 * grid[i]);
    const double c = ((curve.value.array() - curve.value.mean()) *
                      (truth.array() - truth.mean()))
                         .sum() /
                     std::sqrt((curve.value.array() - curve.value.mean()).square().sum() *
                               (truth.array() - truth.mean()).square().sum());
    CHECK(c > 0.95);
}

TEST_CASE("one-block backfitting equals a direct penalized solve") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 300;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = std::exp(0.8 * vals(i, 0)) + 0.5 * N(rng);
    }
    const auto data = make_dataset({"x", "y"}, vals, "y");
    const auto model = fit_gam(data, {"x"}, {});

    const auto bb = build_cubic_basis(vals.col(0), 6, "x");
    const PenalizedBlock block(bb.design, penalty_matrix(bb.basis));
    const VectorXd y = vals.col(1);
    const VectorXd yc = y.array() - y.mean();
    const auto choice = select_psi_gcv(block, yc);
    const VectorXd theta = block.solve(block.project(yc), choice.psi);
    const VectorXd direct = block.fitted(theta).array() + y.mean();

    VectorXd fitted = y - model.residuals;
    CHECK((fitted - direct).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(model.intercept == doctest::Approx(y.mean()).epsilon(1e-10));
}

TEST_CASE("reconstruction identity and mean-zero smooths") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 350;
    MatrixXd vals(n, 4);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        vals(i, 2) = N(rng);
        vals(i, 3) = std::sin(3.0 * vals(i, 0)) + vals(i, 1) * vals(i, 1) + 0.5 * vals(i, 2) +
                     0.3 * N(rng);
    }
    const auto data = make_dataset({"a", "b", "z", "y"}, vals, "y");
    const auto model = fit_gam(data, {"a", "b"}, {"z"});

    const VectorXd pred = predict(model, data);
    CHECK((pred + model.residuals - vals.col(3)).cwiseAbs().maxCoeff() < 1e-8);

    for (const auto& term : model.smooths) {
        const int col = data.column_index(term.basis.variable_id);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += term.eval(vals(i, col));
        CHECK(std::abs(s / n) < 1e-8);
    }
}

TEST_CASE("prediction at the training means of linear smooth data is the intercept") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 200;
    MatrixXd vals(n, 3);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = 2.0 + 0.5 * N(rng);
        vals(i, 2) = 1.5 + 2.0 * vals(i, 0) - 3.0 * vals(i, 1);
    }
    const auto data = make_dataset({"a", "b", "y"}, vals, "y");
    const auto model = fit_gam(data, {"a", "b"}, {});

    MatrixXd one(1, 3);
    one(0, 0) = vals.col(0).mean();
    one(0, 1) = vals.col(1).mean();
    one(0, 2) = 0.0;
    const auto point = make_dataset({"a", "b", "y"}, one, "y");
    const VectorXd pred = predict(model, point);
    CHECK(std::abs(pred[0] - model.intercept) < 1e-6);
}

TEST_CASE("extrapolation is linear: prediction lies on the boundary tangent") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 300;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = std::atan(2.0 * vals(i, 0)) + 0.1 * N(rng);
    }
    const auto data = make_dataset({"x", "y"}, vals, "y");
    const auto model = fit_gam(data, {"x"}, {});
    const auto& term = model.smooths[0];
    const double hi = term.basis.knots[term.basis.dim - 1];

    // finite-difference slope just inside the boundary
    const double h = 1e-5;
    const double slope = (term.eval(hi) - term.eval(hi - h)) / h;
    for (double step : {0.5, 1.0, 3.0}) {
        const double expected = term.eval(hi) + slope * step;
        CHECK(term.eval(hi + step) == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("smooth summary: null term gives F=0 p=1; strong signal is significant") {
    std::mt19937_64 rng(47);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 1000;
    MatrixXd vals(n, 3);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        vals(i, 2) = std::sin(5.0 * vals(i, 0)) + N(rng);
    }
    const auto data = make_dataset({"sig", "nul", "y"}, vals, "y");
    const auto model = fit_gam(data, {"sig", "nul"}, {});
    const auto summary = smooth_summary(model);
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].ref_df == 5.0);
    CHECK(summary[0].p_value < 0.001);
    CHECK(summary[1].f_stat < summary[0].f_stat);
    for (const auto& row : summary) {
        CHECK(row.p_value >= 0.0);
        CHECK(row.p_value <= 1.0);
        CHECK(row.f_stat >= 0.0);
    }
}

TEST_CASE("location equivariance: shifting y moves only the intercept") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 250;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = vals(i, 0) * vals(i, 0) + 0.3 * N(rng);
    }
    const auto d0 = make_dataset({"x", "y"}, vals, "y");
    MatrixXd shifted = vals;
    shifted.col(1).array() += 10.0;
    const auto d1 = make_dataset({"x", "y"}, shifted, "y");

    const auto m0 = fit_gam(d0, {"x"}, {});
    const auto m1 = fit_gam(d1, {"x"}, {});
    VectorXd grid = VectorXd::LinSpaced(60, -2.0, 2.0);
    const auto c0 = smooth_curve(m0, "x", grid);
    const auto c1 = smooth_curve(m1, "x", grid);
    CHECK((c0.value - c1.value).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(m1.intercept - m0.intercept == doctest::Approx(10.0).epsilon(1e-8));
}

TEST_CASE("smooth curve on training x equals training contributions") {
    std::mt19937_64 rng(59);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 150;
    MatrixXd vals(n, 2);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = std::cos(2.0 * vals(i, 0)) + 0.2 * N(rng);
    }
    const auto data = make_dataset({"x", "y"}, vals, "y");
    const auto model = fit_gam(data, {"x"}, {});
    const auto curve = smooth_curve(model, "x", vals.col(0));
    const VectorXd fitted = vals.col(1) - model.residuals;
    CHECK((curve.value.array() + model.intercept - fitted.array()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_THROWS_AS(smooth_curve(model, "nope", vals.col(0)), UnknownVariable);
}

TEST_CASE("degenerate smooth variables are demoted to linear terms") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 200;
    MatrixXd vals(n, 3);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = (i % 2 == 0) ? 1.0 : 0.0;
        vals(i, 2) = vals(i, 0) + 2.0 * vals(i, 1) + 0.3 * N(rng);
    }
    const auto data = make_dataset({"x", "bin", "y"}, vals, "y");
    const auto model = fit_gam(data, {"x", "bin"}, {});
    CHECK(model.smooths.size() == 1);
    REQUIRE(model.linear_names.size() == 1);
    CHECK(model.linear_names[0] == "bin");
    bool saw_warning = false;
    for (const auto& w : model.warnings) saw_warning |= (w.code == "SmoothDemoted");
    CHECK(saw_warning);
}

TEST_CASE("empty model errors; schema mismatch errors") {
    MatrixXd vals(10, 2);
    vals.setRandom();
    const auto data = make_dataset({"x", "y"}, vals, "y");
    CHECK_THROWS_AS(fit_gam(data, {}, {}), EmptyModel);

    const auto model = fit_gam(data, {}, {"x"});
    const auto other = make_dataset({"w", "y"}, vals, "y");
    CHECK_THROWS_AS(predict(model, other), SchemaMismatch);
}

TEST_CASE("backfitting objective is non-increasing once psi is frozen") {
    std::mt19937_64 rng(67);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 150;
        MatrixXd vals(n, 4);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = 0.7 * vals(i, 0) + 0.7 * N(rng);  // correlated smooths
            vals(i, 2) = N(rng);
            vals(i, 3) = std::sin(2.0 * vals(i, 0)) + std::tanh(vals(i, 1)) + 0.4 * vals(i, 2) +
                         0.5 * N(rng);
        }
        const auto data = make_dataset({"a", "b", "z", "y"}, vals, "y");
        const auto model = fit_gam(data, {"a", "b"}, {"z"});
        for (size_t c = size_t(model.gcv_freeze_cycle); c + 1 < model.objective_trace.size(); ++c)
            CHECK(model.objective_trace[c + 1] <= model.objective_trace[c] * (1.0 + 1e-10));
    }
}

TEST_CASE("gaussian residuals are orthogonal to regressors on unpenalized fits") {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 400;
    MatrixXd vals(n, 3);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        // exactly linear in both: fitted smooths live in the penalty null space
        vals(i, 2) = 1.0 + 2.0 * vals(i, 0) - 0.5 * vals(i, 1);
    }
    const auto data = make_dataset({"a", "z", "y"}, vals, "y");
    const auto model = fit_gam(data, {"a"}, {"z"});
    const VectorXd r = model.residuals;
    const double rn = r.norm();      // ~0 for an exact fit
    CHECK(rn / std::sqrt(double(n)) < 1e-6);

    const auto bb = build_cubic_basis(vals.col(0), 6, "a");
    for (int l = 0; l < bb.design.cols(); ++l) {
        const double corr = std::abs(r.dot(bb.design.col(l))) /
                            std::max(1e-12, r.norm() * bb.design.col(l).norm());
        CHECK(corr < 1.0);  // well-defined
    }
    const double lin_dot = std::abs(r.dot(vals.col(1)));
    CHECK(lin_dot / n < 1e-5);
}
