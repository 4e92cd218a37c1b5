#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "plam/baselines.hpp"
#include "plam/evaluation.hpp"
#include "plam/gam.hpp"

using namespace plam;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset make_dataset(const std::vector<std::string>& names, const MatrixXd& vals,
                     const std::string& target, std::vector<VarKind> kinds = {}) {
    if (kinds.empty()) kinds.assign(names.size(), VarKind::Continuous);
    int t = 0;
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == target) t = int(i);
    return Dataset(names, vals, t, kinds);
}

Dataset random_dataset(int n, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    MatrixXd vals(n, p + 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= p; ++j) vals(i, j) = N(rng);
    std::vector<std::string> names;
    for (int j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
    names.push_back("y");
    return make_dataset(names, vals, "y");
}

double subset_sse(const std::vector<int>& rows, const VectorXd& y) {
    if (rows.empty()) return 0.0;
    double s = 0.0, sq = 0.0;
    for (int r : rows) {
        s += y[r];
        sq += y[r] * y[r];
    }
    return sq - s * s / double(rows.size());
}

double best_single_split_sse(const std::vector<int>& rows, const MatrixXd& X, const VectorXd& y,
                             int min_leaf) {
    double best = subset_sse(rows, y);  // no split
    for (int f = 0; f < X.cols(); ++f) {
        std::vector<double> vals;
        for (int r : rows) vals.push_back(X(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (size_t t = 0; t + 1 < vals.size(); ++t) {
            const double thr = 0.5 * (vals[t] + vals[t + 1]);
            std::vector<int> l, r;
            for (int row : rows) (X(row, f) <= thr ? l : r).push_back(row);
            if (int(l.size()) < min_leaf || int(r.size()) < min_leaf) continue;
            best = std::min(best, subset_sse(l, y) + subset_sse(r, y));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("augmented design column counts") {
    {
        const Dataset d = random_dataset(40, 10, 1);
        const auto a = augment(d, 3, true);
        CHECK(a.X.cols() == 75);
        CHECK(a.catalog.size() == 45);
    }
    {
        const Dataset d = random_dataset(40, 5, 2);
        const auto a = augment(d, 1, false);
        CHECK(a.X.cols() == 5);
        for (int j = 0; j < 5; ++j)
            CHECK((a.X.col(j) - d.column(j)).cwiseAbs().maxCoeff() == 0.0);
    }
    {
        // one binary among three: no powers of the binary, all interactions
        std::mt19937_64 rng(3);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd vals(30, 4);
        for (int i = 0; i < 30; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = i % 2;
            vals(i, 2) = N(rng);
            vals(i, 3) = N(rng);
        }
        const Dataset d = make_dataset(
            {"a", "b", "c", "y"}, vals, "y",
            {VarKind::Continuous, VarKind::Binary, VarKind::Continuous, VarKind::Continuous});
        const auto a = augment(d, 3, true);
        // 3 linear + 2 squares + 2 cubes + 3 interactions
        CHECK(a.X.cols() == 10);
        CHECK(a.interaction_cols.size() == 3);
    }
}

TEST_CASE("ols: exact recovery, collinearity pinning, normal-equation oracle") {
    {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd X(25, 1);
        for (int i = 0; i < 25; ++i) X(i, 0) = N(rng);
        const VectorXd y = 3.0 * X.col(0).array() - 2.0;
        const auto m = fit_ols(X, y);
        CHECK(m.coefficients[0] == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(m.intercept == doctest::Approx(-2.0).epsilon(1e-10));
    }
    {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd X(30, 3);
        for (int i = 0; i < 30; ++i) {
            X(i, 0) = N(rng);
            X(i, 2) = N(rng);
        }
        X.col(1) = X.col(0);
        VectorXd y(30);
        for (int i = 0; i < 30; ++i) y[i] = X(i, 0) + X(i, 2) + 0.1 * N(rng);
        const auto m = fit_ols(X, y);
        CHECK(m.pinned.size() == 1);
        // fit unchanged: residuals orthogonal to the span
        const VectorXd fitted = predict(m, X);
        MatrixXd D(30, 3);
        D.col(0).setOnes();
        D.col(1) = X.col(0);
        D.col(2) = X.col(2);
        const VectorXd proj = D * (D.transpose() * D).ldlt().solve(D.transpose() * y);
        CHECK((fitted - proj).cwiseAbs().maxCoeff() < 1e-8);
    }
    {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd X(20, 5);
        VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 5; ++j) X(i, j) = N(rng);
            y[i] = N(rng);
        }
        const auto m = fit_ols(X, y);
        MatrixXd D(20, 6);
        D.col(0).setOnes();
        D.rightCols(5) = X;
        const VectorXd oracle = (D.transpose() * D).ldlt().solve(D.transpose() * y);
        CHECK(std::abs(m.intercept - oracle[0]) < 1e-8);
        CHECK((m.coefficients - oracle.tail(5)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("tree: step function, constant target, brute-force depth-2 oracle") {
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const int n = 200;
        MatrixXd vals(n, 2);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = U(rng);
            vals(i, 1) = vals(i, 0) > 0.5 ? 1.0 : 0.0;
        }
        const Dataset d = make_dataset({"x", "y"}, vals, "y");
        const TreeModel t = fit_tree(d, TreeTask::Regression, {1, 5});
        REQUIRE(t.nodes[0].feature == 0);
        CHECK(std::abs(t.nodes[0].threshold - 0.5) < 0.05);
        CHECK(t.n_leaves() == 2);
    }
    {
        MatrixXd vals(20, 2);
        vals.col(0).setLinSpaced(20, 0.0, 1.0);
        vals.col(1).setConstant(3.3);
        const Dataset d = make_dataset({"x", "y"}, vals, "y");
        const TreeModel t = fit_tree(d, TreeTask::Regression, {0, 2});
        CHECK(t.n_leaves() == 1);
        CHECK(t.nodes[0].value == doctest::Approx(3.3));
    }
    for (int rep = 0; rep < 30; ++rep) {
        std::mt19937_64 rng(100 + rep);
        std::normal_distribution<double> N(0.0, 1.0);
        const int n = 30;
        MatrixXd X(n, 2);
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = N(rng);
            X(i, 1) = N(rng);
            y[i] = N(rng);
        }
        const TreeModel t = fit_tree_matrix(X, y, TreeTask::Regression, {2, 2});
        // every chosen split must match the exhaustive best split over the
        // rows reaching that node
        std::vector<std::vector<int>> node_rows(t.nodes.size());
        for (int i = 0; i < n; ++i) node_rows[0].push_back(i);
        for (size_t id = 0; id < t.nodes.size(); ++id) {
            const auto& nd = t.nodes[id];
            if (nd.feature < 0) continue;
            for (int r : node_rows[id])
                node_rows[size_t(X(r, nd.feature) <= nd.threshold ? nd.left : nd.right)]
                    .push_back(r);
            const double parent = subset_sse(node_rows[id], y);
            std::vector<int> l = node_rows[size_t(nd.left)], rrows = node_rows[size_t(nd.right)];
            const double chosen = subset_sse(l, y) + subset_sse(rrows, y);
            const double best = best_single_split_sse(node_rows[id], X, y, 2);
            CHECK(chosen <= best + 1e-9);
            CHECK(chosen <= parent + 1e-9);
        }
    }
}

TEST_CASE("forest: reductions and the averaging identity") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 150;
    MatrixXd vals(n, 4);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        vals(i, 2) = N(rng);
        vals(i, 3) = vals(i, 0) + std::sin(vals(i, 1)) + 0.3 * N(rng);
    }
    const Dataset d = make_dataset({"a", "b", "c", "y"}, vals, "y");

    ForestOptions single;
    single.n_trees = 1;
    single.bootstrap = false;
    single.mtry = 3;
    single.min_leaf = 5;
    const EnsembleModel f1 = fit_random_forest(d, TreeTask::Regression, single, 7);
    const TreeModel t1 = fit_tree(d, TreeTask::Regression, {0, 5});
    MatrixXd X = vals.leftCols(3);
    CHECK((f1.predict(X) - t1.predict(X)).cwiseAbs().maxCoeff() == 0.0);

    ForestOptions opts;
    opts.n_trees = 25;
    const EnsembleModel f = fit_random_forest(d, TreeTask::Regression, opts, 7);
    MatrixXd pts = X.topRows(10);
    VectorXd manual = VectorXd::Zero(10);
    for (const auto& t : f.trees) manual += t.predict(pts);
    manual /= double(f.trees.size());
    CHECK((f.predict(pts) - manual).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("boosting: first-stage reduction and monotone training loss") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N(0.0, 1.0);
    const int n = 200;
    MatrixXd vals(n, 3);
    for (int i = 0; i < n; ++i) {
        vals(i, 0) = N(rng);
        vals(i, 1) = N(rng);
        vals(i, 2) = vals(i, 0) * vals(i, 0) + 0.4 * N(rng);
    }
    const Dataset d = make_dataset({"a", "b", "y"}, vals, "y");

    BoostOptions one;
    one.n_trees = 1;
    one.learning_rate = 1.0;
    one.validation_fraction = 0.0;
    one.max_depth = 3;
    const EnsembleModel b1 = fit_gradient_boosting(d, one, 5);
    const VectorXd yc = vals.col(2).array() - vals.col(2).mean();
    MatrixXd X = vals.leftCols(2);
    const TreeModel tref = fit_tree_matrix(X, yc, TreeTask::Regression, {3, 5});
    CHECK((b1.predict(X) - (tref.predict(X).array() + vals.col(2).mean()).matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    BoostOptions opts;
    opts.n_trees = 60;
    opts.validation_fraction = 0.0;
    const EnsembleModel b = fit_gradient_boosting(d, opts, 5);
    for (size_t i = 1; i < b.train_loss_trace.size(); ++i)
        CHECK(b.train_loss_trace[i] <= b.train_loss_trace[i - 1] + 1e-12);

    BoostOptions logi;
    logi.n_trees = 40;
    logi.loss = BoostLoss::Logistic;
    logi.validation_fraction = 0.0;
    MatrixXd cvals = vals;
    for (int i = 0; i < n; ++i) cvals(i, 2) = vals(i, 0) > 0 ? 1.0 : 0.0;
    const Dataset dc = make_dataset({"a", "b", "y"}, cvals, "y");
    const EnsembleModel bl = fit_gradient_boosting(dc, logi, 5);
    CHECK(bl.train_loss_trace.back() < bl.train_loss_trace.front());
    const VectorXd prob = bl.predict(X);
    CHECK(prob.minCoeff() >= 0.0);
    CHECK(prob.maxCoeff() <= 1.0);
}

TEST_CASE("variable importance: concentration, normalization, symmetry") {
    {
        std::mt19937_64 rng(19);
        std::normal_distribution<double> N(0.0, 1.0);
        const int n = 300;
        MatrixXd vals(n, 4);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = N(rng);
            vals(i, 2) = N(rng);
            vals(i, 3) = 2.0 * vals(i, 0) + 0.2 * N(rng);
        }
        const Dataset d = make_dataset({"a", "b", "c", "y"}, vals, "y");
        ForestOptions opts;
        opts.n_trees = 40;
        opts.mtry = 3;  // all features in play at every split
        const EnsembleModel f = fit_random_forest(d, TreeTask::Regression, opts, 3);
        const auto imp = variable_importance(f, {"a", "b", "c"});
        double total = 0.0;
        for (const auto& [name, score] : imp) total += score;
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(imp[0].first == "a");
        CHECK(imp[0].second > 0.9);
    }
    {
        int in_band = 0;
        const int seeds = 50;
        for (int s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(400 + s);
            std::normal_distribution<double> N(0.0, 1.0);
            const int n = 200;
            MatrixXd vals(n, 3);
            for (int i = 0; i < n; ++i) {
                vals(i, 0) = N(rng);
                vals(i, 1) = N(rng);
                vals(i, 2) = vals(i, 0) + vals(i, 1) + 0.3 * N(rng);
            }
            const Dataset d = make_dataset({"a", "b", "y"}, vals, "y");
            ForestOptions opts;
            opts.n_trees = 30;
            const EnsembleModel f = fit_random_forest(d, TreeTask::Regression, opts, s);
            const auto imp = variable_importance(f, {"a", "b"});
            for (const auto& [name, score] : imp)
                if (name == "a" && score >= 0.35 && score <= 0.65) ++in_band;
        }
        CHECK(in_band >= 40);
    }
}

TEST_CASE("pltr: separator, degenerate covariate, proximity to a GAM") {
    {
        std::mt19937_64 rng(23);
        std::normal_distribution<double> N(0.0, 1.0);
        const int n = 300;
        MatrixXd vals(n, 3);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = N(rng);
            vals(i, 2) = vals(i, 0) > 0.3 ? 1.0 : 0.0;
        }
        const Dataset d = make_dataset({"a", "b", "y"}, vals, "y");
        const PltrModel m = fit_pltr(d, 5);
        const VectorXd prob = m.predict_probability(vals.leftCols(2));
        CHECK(auc(prob, vals.col(2)) == doctest::Approx(1.0).epsilon(1e-9));
    }
    {
        std::mt19937_64 rng(29);
        std::normal_distribution<double> N(0.0, 1.0);
        const int n = 200;
        MatrixXd vals(n, 3);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = 1.0;  // constant
            vals(i, 2) = vals(i, 0) > 0 ? 1.0 : 0.0;
        }
        const Dataset d = make_dataset({"a", "b", "y"}, vals, "y");
        const PltrModel m = fit_pltr(d, 5);
        for (const auto& leaf : m.v1) CHECK(leaf.feature != 1);
        bool warned = false;
        for (const auto& w : m.warnings) warned |= (w.code == "DegenerateSplit");
        CHECK(warned);
    }
    {
        // one strong nonlinear driver: the tree thresholds track it nearly as
        // well as the smooth fit does
        std::mt19937_64 rng(31);
        std::normal_distribution<double> N(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const int n = 900;
        MatrixXd vals(n, 4);
        for (int i = 0; i < n; ++i) {
            vals(i, 0) = N(rng);
            vals(i, 1) = N(rng);
            vals(i, 2) = N(rng);
            const double eta = 3.0 * std::tanh(2.0 * vals(i, 0)) - 0.5 * vals(i, 1);
            const double p = 1.0 / (1.0 + std::exp(-eta));
            vals(i, 3) = U(rng) < p ? 1.0 : 0.0;
        }
        const Dataset d = make_dataset({"a", "b", "c", "y"}, vals, "y");
        const PltrModel pltr = fit_pltr(d, 5);
        const VectorXd pltr_prob = pltr.predict_probability(vals.leftCols(3));
        GamOptions gopt;
        gopt.family = Family::LinearProbability;
        const AdditiveModel gam = fit_gam(d, {"a", "b", "c"}, {}, gopt);
        const VectorXd gam_pred = vals.col(3) - gam.residuals;
        const double a1 = auc(pltr_prob, vals.col(3));
        const double a2 = auc(gam_pred, vals.col(3));
        CHECK(std::abs(a1 - a2) < 0.02);
    }
}
