#include "plam/selection.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "plam/rng.hpp"
#include "plam/stats.hpp"

namespace plam {

std::string to_string(LambdaRule r) { return r == LambdaRule::Min ? "min" : "1se"; }

LambdaRule lambda_rule_from_string(const std::string& s) {
    if (s == "min") return LambdaRule::Min;
    if (s == "1se") return LambdaRule::OneSe;
    throw std::invalid_argument("unknown lambda rule: " + s);
}

namespace {

constexpr double kCdTol = 1e-8;
constexpr int kCdMaxSweeps = 100000;

struct Standardized {
    Eigen::MatrixXd X;        // zero-mean columns with |col|^2 = n (dropped cols zeroed)
    Eigen::VectorXd mean, sd;  // sd == 0 marks a dropped column
    Eigen::VectorXd yc;
    double y_mean = 0.0;
    Warnings warnings;
};

Standardized standardize(Eigen::Ref<const Eigen::MatrixXd> X,
                         Eigen::Ref<const Eigen::VectorXd> y) {
    Standardized s;
    const Eigen::Index n = X.rows(), p = X.cols();
    s.X.resize(n, p);
    s.mean.resize(p);
    s.sd.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        s.mean[j] = X.col(j).mean();
        Eigen::VectorXd c = X.col(j).array() - s.mean[j];
        const double v = c.squaredNorm() / double(n);
        if (v < 1e-24) {
            s.sd[j] = 0.0;
            s.X.col(j).setZero();
            s.warnings.push_back({"ZeroVarianceColumn", "column " + std::to_string(j) + " dropped"});
        } else {
            s.sd[j] = std::sqrt(v);
            s.X.col(j) = c / s.sd[j];
        }
    }
    s.y_mean = y.mean();
    s.yc = y.array() - s.y_mean;
    return s;
}

// coordinate descent on the standardized problem; beta is warm-started in place
void cd_solve(const Standardized& s, double lambda, const Eigen::VectorXd& weights,
              Eigen::VectorXd& beta) {
    const Eigen::Index n = s.X.rows(), p = s.X.cols();
    Eigen::VectorXd r = s.yc - s.X * beta;
    auto soft = [](double v, double t) {
        if (v > t) return v - t;
        if (v < -t) return v + t;
        return 0.0;
    };
    auto sweep = [&](bool active_only) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (s.sd[j] == 0.0) continue;
            if (weights[j] >= 1e12) continue;  // effectively excluded
            if (active_only && beta[j] == 0.0) continue;
            const double rho = s.X.col(j).dot(r) / double(n) + beta[j];
            const double nb = soft(rho, lambda * weights[j]);
            if (nb != beta[j]) {
                r += s.X.col(j) * (beta[j] - nb);
                max_change = std::max(max_change, std::abs(nb - beta[j]));
                beta[j] = nb;
            }
        }
        return max_change;
    };

    for (int outer = 0; outer < kCdMaxSweeps; ++outer) {
        if (sweep(false) < kCdTol) break;
        for (int inner = 0; inner < kCdMaxSweeps; ++inner)
            if (sweep(true) < kCdTol) break;
    }
}

double lambda_max_of(const Standardized& s, const Eigen::VectorXd& weights) {
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < s.X.cols(); ++j) {
        if (s.sd[j] == 0.0 || weights[j] >= 1e12) continue;
        lmax = std::max(lmax, std::abs(s.X.col(j).dot(s.yc)) / (double(s.X.rows()) * weights[j]));
    }
    return lmax;
}

Eigen::VectorXd unit_weights(Eigen::Index p) { return Eigen::VectorXd::Ones(p); }

}  // namespace

LassoFit fit_lasso(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y,
                   double lambda, const Eigen::VectorXd* penalty_weights) {
    if (X.rows() < 2) throw std::invalid_argument("fit_lasso: need n >= 2");
    if (X.rows() != y.size()) throw LengthMismatch("fit_lasso: X rows vs y");
    if (lambda < 0.0) throw std::invalid_argument("fit_lasso: lambda must be nonnegative");

    const Standardized s = standardize(X, y);
    const Eigen::VectorXd w = penalty_weights ? *penalty_weights : unit_weights(X.cols());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
    cd_solve(s, lambda, w, beta);

    LassoFit fit;
    fit.warnings = s.warnings;
    fit.coefficients.resize(X.cols());
    double dot = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        fit.coefficients[j] = (s.sd[j] == 0.0) ? 0.0 : beta[j] / s.sd[j];
        dot += fit.coefficients[j] * s.mean[j];
    }
    fit.intercept = s.y_mean - dot;
    return fit;
}

CvCurve cv_lambda(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y, int k,
                  std::uint64_t seed, const Eigen::VectorXd* penalty_weights) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (n < 2 * k) throw std::invalid_argument("cv_lambda: need n >= 2k");
    const Eigen::VectorXd w = penalty_weights ? *penalty_weights : unit_weights(p);

    const Standardized full = standardize(X, y);
    const double lmax = lambda_max_of(full, w);
    if (lmax <= 0.0) throw std::invalid_argument("cv_lambda: no eligible columns");

    constexpr int kGrid = 100;
    CvCurve curve;
    curve.lambdas.resize(kGrid);
    for (int g = 0; g < kGrid; ++g)
        curve.lambdas[g] = lmax * std::pow(10.0, -4.0 * double(g) / double(kGrid - 1));

    std::vector<int> fold(static_cast<size_t>(n), 0);
    {
        std::vector<int> perm(static_cast<size_t>(n), 0);
        for (Eigen::Index i = 0; i < n; ++i) perm[size_t(i)] = int(i);
        auto rng = make_rng(derive_seed(seed, "cv_folds"));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < n; ++i) fold[size_t(perm[size_t(i)])] = int(i % k);
    }

    Eigen::MatrixXd fold_mse = Eigen::MatrixXd::Zero(kGrid, k);
    for (int f = 0; f < k; ++f) {
        std::vector<int> tr, te;
        for (Eigen::Index i = 0; i < n; ++i)
            (fold[size_t(i)] == f ? te : tr).push_back(int(i));
        Eigen::MatrixXd Xtr(tr.size(), p), Xte(te.size(), p);
        Eigen::VectorXd ytr(tr.size()), yte(te.size());
        for (size_t i = 0; i < tr.size(); ++i) {
            Xtr.row(Eigen::Index(i)) = X.row(tr[i]);
            ytr[Eigen::Index(i)] = y[tr[i]];
        }
        for (size_t i = 0; i < te.size(); ++i) {
            Xte.row(Eigen::Index(i)) = X.row(te[i]);
            yte[Eigen::Index(i)] = y[te[i]];
        }
        const Standardized s = standardize(Xtr, ytr);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        for (int g = 0; g < kGrid; ++g) {
            cd_solve(s, curve.lambdas[g], w, beta);
            // original-scale prediction on the held-out rows
            Eigen::VectorXd coef(p);
            double dot = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                coef[j] = (s.sd[j] == 0.0) ? 0.0 : beta[j] / s.sd[j];
                dot += coef[j] * s.mean[j];
            }
            const double b0 = s.y_mean - dot;
            const Eigen::VectorXd pred = (Xte * coef).array() + b0;
            fold_mse(g, f) = (pred - yte).squaredNorm() / double(te.size());
        }
    }

    curve.mean_error.resize(kGrid);
    curve.se_error.resize(kGrid);
    for (int g = 0; g < kGrid; ++g) {
        const Eigen::VectorXd row = fold_mse.row(g);
        curve.mean_error[g] = row.mean();
        curve.se_error[g] = stats::sd(row) / std::sqrt(double(k));
    }
    int gmin = 0;
    for (int g = 1; g < kGrid; ++g)
        if (curve.mean_error[g] < curve.mean_error[gmin]) gmin = g;
    curve.lambda_min = curve.lambdas[gmin];
    const double cutoff = curve.mean_error[gmin] + curve.se_error[gmin];
    int g1se = gmin;
    for (int g = 0; g <= gmin; ++g) {
        if (curve.mean_error[g] <= cutoff) {
            g1se = g;
            break;
        }
    }
    curve.lambda_1se = curve.lambdas[g1se];
    return curve;
}

namespace {

SelectionResult package_lasso(Eigen::Ref<const Eigen::MatrixXd> X,
                              Eigen::Ref<const Eigen::VectorXd> y, const CvCurve& curve,
                              LambdaRule rule, const Eigen::VectorXd* weights,
                              const std::string& method) {
    SelectionResult res;
    res.method = method;
    res.lambda = curve.pick(rule);
    res.lambda_rule = to_string(rule);
    res.path = curve;
    const LassoFit fit = fit_lasso(X, y, res.lambda, weights);
    res.intercept = fit.intercept;
    res.warnings = fit.warnings;
    std::vector<double> coefs;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (fit.coefficients[j] != 0.0) {
            res.retained.push_back(int(j));
            coefs.push_back(fit.coefficients[j]);
        }
    }
    res.coefficients = Eigen::Map<Eigen::VectorXd>(coefs.data(), Eigen::Index(coefs.size()));
    return res;
}

}  // namespace

SelectionResult lasso_select(Eigen::Ref<const Eigen::MatrixXd> X,
                             Eigen::Ref<const Eigen::VectorXd> y, LambdaRule rule, int k,
                             std::uint64_t seed) {
    const CvCurve curve = cv_lambda(X, y, k, seed);
    return package_lasso(X, y, curve, rule, nullptr, "lasso");
}

SelectionResult fit_adaptive_lasso(Eigen::Ref<const Eigen::MatrixXd> X,
                                   Eigen::Ref<const Eigen::VectorXd> y, double nu, LambdaRule rule,
                                   int k, std::uint64_t seed) {
    if (nu <= 0.0) throw std::invalid_argument("fit_adaptive_lasso: nu must be positive");
    const Standardized s = standardize(X, y);
    const Eigen::Index n = X.rows(), p = X.cols();

    // ridge initial estimates on the standardized problem, penalty by GCV
    Eigen::BDCSVD<Eigen::MatrixXd> svd(s.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::VectorXd uty = svd.matrixU().transpose() * s.yc;
    const double ynorm = s.yc.squaredNorm();
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_kappa = double(n);
    for (int t = 0; t < 60; ++t) {
        const double kappa = double(n) * std::pow(10.0, -8.0 + 16.0 * double(t) / 59.0);
        double rss = ynorm, edf = 0.0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            const double s2 = sv[i] * sv[i];
            const double shrink = s2 / (s2 + kappa);
            rss += uty[i] * uty[i] * (shrink * shrink - 2.0 * shrink);
            edf += shrink;
        }
        const double denom = std::max(double(n) - edf, 1e-3);
        const double gcv = double(n) * std::max(rss, 0.0) / (denom * denom);
        if (gcv < best_gcv) {
            best_gcv = gcv;
            best_kappa = kappa;
        }
    }
    Eigen::VectorXd shrink(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        shrink[i] = sv[i] / (sv[i] * sv[i] + best_kappa);
    const Eigen::VectorXd ridge_beta = svd.matrixV() * (shrink.asDiagonal() * uty);

    const double max_init = ridge_beta.cwiseAbs().maxCoeff();
    Eigen::VectorXd w(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (s.sd[j] == 0.0 || std::abs(ridge_beta[j]) < 1e-12 * std::max(max_init, 1e-300))
            w[j] = 1e12;  // excluded: no support in the initial estimate
        else
            w[j] = std::pow(std::abs(ridge_beta[j]), -nu);
    }
    // normalize eligible weights to mean one so lambda stays comparable
    double sum = 0.0;
    int cnt = 0;
    for (Eigen::Index j = 0; j < p; ++j)
        if (w[j] < 1e12) {
            sum += w[j];
            ++cnt;
        }
    if (cnt == 0) throw std::invalid_argument("fit_adaptive_lasso: no eligible columns");
    for (Eigen::Index j = 0; j < p; ++j)
        if (w[j] < 1e12) w[j] *= double(cnt) / sum;

    const CvCurve curve = cv_lambda(X, y, k, seed, &w);
    SelectionResult res = package_lasso(X, y, curve, rule, &w, "adaptive-lasso");
    return res;
}

// ---------------------------------------------------------------------------
// diagnostic battery
// ---------------------------------------------------------------------------

namespace {

// R^2 and rank of the regression of v on [1, A] via a rank-revealing solve.
struct AuxFit {
    double r2 = 0.0;
    Eigen::Index rank = 0;
    double rss = 0.0;
};

AuxFit aux_regression(const Eigen::MatrixXd& A, const Eigen::VectorXd& v) {
    Eigen::MatrixXd D(A.rows(), A.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(A.cols()) = A;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    const Eigen::VectorXd b = qr.solve(v);
    AuxFit out;
    out.rss = (v - D * b).squaredNorm();
    const double tss = (v.array() - v.mean()).square().sum();
    out.r2 = tss > 0.0 ? std::max(0.0, 1.0 - out.rss / tss) : 0.0;
    out.rank = qr.rank();
    return out;
}

DiagnosticTest white_test(const Eigen::VectorXd& e, const Eigen::MatrixXd& X) {
    const Eigen::Index n = e.size(), k = X.cols();
    const Eigen::VectorXd e2 = e.array().square();

    // auxiliary regressors: levels + squares + cross products, trimmed when the
    // column count would swamp the sample
    const Eigen::Index with_cross = 2 * k + k * (k - 1) / 2;
    std::vector<Eigen::VectorXd> cols;
    auto push_levels = [&] {
        for (Eigen::Index j = 0; j < k; ++j) cols.push_back(X.col(j));
    };
    auto push_squares = [&] {
        for (Eigen::Index j = 0; j < k; ++j) cols.push_back(X.col(j).array().square());
    };
    if (with_cross + 1 <= n / 3) {
        push_levels();
        push_squares();
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = a + 1; b < k; ++b)
                cols.push_back(X.col(a).cwiseProduct(X.col(b)));
    } else if (2 * k + 1 <= n / 3) {
        push_levels();
        push_squares();
    } else {
        push_squares();
    }
    Eigen::MatrixXd A(n, Eigen::Index(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) A.col(Eigen::Index(j)) = cols[j];

    const AuxFit fit = aux_regression(A, e2);
    DiagnosticTest t;
    t.name = "white";
    const double df = std::max(double(fit.rank) - 1.0, 1.0);
    t.statistic = double(n) * fit.r2;
    t.p_value = stats::chi2_sf(t.statistic, df);
    return t;
}

DiagnosticTest doornik_hansen_test(const Eigen::VectorXd& e) {
    const double n = double(e.size());
    const double m = e.mean();
    const Eigen::ArrayXd c = e.array() - m;
    const double m2 = c.square().mean();
    const double m3 = c.cube().mean();
    const double m4 = c.square().square().mean();
    const double rb1 = m3 / std::pow(m2, 1.5);  // sqrt(b1)
    const double b1 = rb1 * rb1;
    const double b2 = m4 / (m2 * m2);

    // transformed skewness (D'Agostino)
    const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                         ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    const double delta = 1.0 / std::sqrt(std::log(std::sqrt(w2)));
    const double yv = rb1 * std::sqrt((w2 - 1.0) * (n + 1.0) * (n + 3.0) / (12.0 * (n - 2.0)));
    const double z1 = delta * std::log(yv + std::sqrt(yv * yv + 1.0));

    // transformed kurtosis (gamma approximation)
    const double dh = (n - 3.0) * (n + 1.0) * (n * n + 15.0 * n - 4.0);
    const double a = (n - 2.0) * (n + 5.0) * (n + 7.0) * (n * n + 27.0 * n - 70.0) / (6.0 * dh);
    const double cc = (n - 7.0) * (n + 5.0) * (n + 7.0) * (n * n + 2.0 * n - 5.0) / (6.0 * dh);
    const double kk = (n + 5.0) * (n + 7.0) *
                      (n * n * n + 37.0 * n * n + 11.0 * n - 313.0) / (12.0 * dh);
    const double alpha = a + b1 * cc;
    const double chi = std::max((b2 - 1.0 - b1) * 2.0 * kk, 1e-12);
    const double z2 = (std::cbrt(chi / (2.0 * alpha)) - 1.0 + 1.0 / (9.0 * alpha)) *
                      std::sqrt(9.0 * alpha);

    DiagnosticTest t;
    t.name = "normality";
    t.statistic = z1 * z1 + z2 * z2;
    t.p_value = stats::chi2_sf(t.statistic, 2.0);
    return t;
}

DiagnosticTest reset_test(const Eigen::VectorXd& e, const Eigen::VectorXd& fitted,
                          const Eigen::MatrixXd& X) {
    const Eigen::Index n = e.size(), k = X.cols();
    DiagnosticTest t;
    t.name = "reset";
    const double fs = stats::sd(fitted);
    if (fs < 1e-12) {
        t.statistic = 0.0;
        t.p_value = 1.0;
        return t;
    }
    const Eigen::ArrayXd z = (fitted.array() - fitted.mean()) / fs;
    Eigen::MatrixXd A(n, k + 2);
    A.leftCols(k) = X;
    A.col(k) = z.square();
    A.col(k + 1) = z.cube();

    const AuxFit restricted = aux_regression(X, e);
    const AuxFit extended = aux_regression(A, e);
    const double added = double(extended.rank - restricted.rank);
    const double df2 = double(n) - double(extended.rank);
    if (added < 0.5 || df2 < 1.0) {
        t.statistic = 0.0;
        t.p_value = 1.0;
        return t;
    }
    t.statistic = ((restricted.rss - extended.rss) / added) / (extended.rss / df2);
    t.statistic = std::max(t.statistic, 0.0);
    t.p_value = stats::f_sf(t.statistic, added, df2);
    return t;
}

}  // namespace

std::vector<DiagnosticTest> diagnostic_battery(Eigen::Ref<const Eigen::VectorXd> residuals,
                                               Eigen::Ref<const Eigen::VectorXd> fitted,
                                               Eigen::Ref<const Eigen::MatrixXd> X_terminal) {
    const Eigen::VectorXd e = residuals;
    const Eigen::VectorXd f = fitted;
    const Eigen::MatrixXd X = X_terminal;
    return {white_test(e, X), doornik_hansen_test(e), reset_test(e, f, X)};
}

bool battery_passes(const std::vector<DiagnosticTest>& tests, double level) {
    for (const auto& t : tests)
        if (t.p_value <= level) return false;
    return true;
}

// ---------------------------------------------------------------------------
// general-to-specific search
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxGetsColumns = 255;
using Mask = std::bitset<kMaxGetsColumns>;

struct MaskLess {
    bool operator()(const Mask& a, const Mask& b) const {
        for (int w = kMaxGetsColumns - 1; w >= 0; --w)
            if (a[size_t(w)] != b[size_t(w)]) return b[size_t(w)];
        return false;
    }
};

struct NodeEval {
    bool valid = false;
    double rss = 0.0;
    int k = 0;
    std::vector<int> cols;
    Eigen::VectorXd coefs;   // intercept first
    Eigen::VectorXd tstats;  // aligned with cols
};

struct GetsEngine {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    Eigen::MatrixXd G;  // [1 X]'[1 X]
    Eigen::VectorXd g;  // [1 X]'y
    double yy = 0.0;
    Eigen::Index n = 0;
    int K = 0;
    std::map<Mask, NodeEval, MaskLess> cache;
    long evals = 0;

    GetsEngine(const Eigen::MatrixXd& X_, const Eigen::VectorXd& y_) : X(X_), y(y_) {
        n = X.rows();
        K = int(X.cols());
        Eigen::MatrixXd A(n, K + 1);
        A.col(0).setOnes();
        A.rightCols(K) = X;
        G = A.transpose() * A;
        g = A.transpose() * y;
        yy = y.squaredNorm();
    }

    const NodeEval& eval(const Mask& m) {
        auto it = cache.find(m);
        if (it != cache.end()) return it->second;
        ++evals;
        NodeEval ev;
        for (int j = 0; j < K; ++j)
            if (m[size_t(j)]) ev.cols.push_back(j);
        ev.k = int(ev.cols.size());
        const int d = ev.k + 1;
        Eigen::MatrixXd Gs(d, d);
        Eigen::VectorXd gs(d);
        std::vector<int> idx(static_cast<size_t>(d), 0);
        idx[0] = 0;
        for (int i = 0; i < ev.k; ++i) idx[size_t(i + 1)] = ev.cols[size_t(i)] + 1;
        for (int a = 0; a < d; ++a) {
            gs[a] = g[idx[size_t(a)]];
            for (int b = 0; b < d; ++b) Gs(a, b) = G(idx[size_t(a)], idx[size_t(b)]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Gs);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0 ||
            ldlt.vectorD().maxCoeff() / ldlt.vectorD().minCoeff() > 1e13) {
            ev.valid = false;
            return cache.emplace(m, std::move(ev)).first->second;
        }
        ev.coefs = ldlt.solve(gs);
        ev.rss = std::max(yy - ev.coefs.dot(2.0 * gs - Gs * ev.coefs), 0.0);
        const double dof = double(n) - double(d);
        if (dof < 1.0) {
            ev.valid = false;
            return cache.emplace(m, std::move(ev)).first->second;
        }
        const double sigma2 = std::max(ev.rss / dof, 1e-300);
        const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
        ev.tstats.resize(ev.k);
        for (int i = 0; i < ev.k; ++i)
            ev.tstats[i] = ev.coefs[i + 1] / std::sqrt(sigma2 * std::max(inv(i + 1, i + 1), 1e-300));
        ev.valid = true;
        return cache.emplace(m, std::move(ev)).first->second;
    }

    Eigen::VectorXd fitted_of(const NodeEval& ev) const {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(n, ev.coefs[0]);
        for (int i = 0; i < ev.k; ++i) f += ev.coefs[i + 1] * X.col(ev.cols[size_t(i)]);
        return f;
    }
};

double bic_of(const NodeEval& ev, Eigen::Index n) {
    return double(n) * std::log(std::max(ev.rss, 1e-300) / double(n)) +
           double(ev.k + 1) * std::log(double(n));
}

}  // namespace

SelectionResult gets_select(Eigen::Ref<const Eigen::MatrixXd> X,
                            Eigen::Ref<const Eigen::VectorXd> y, double alpha,
                            GetsOptions options) {
    const Eigen::Index n = X.rows();
    const int K = int(X.cols());
    if (K > kMaxGetsColumns) throw std::invalid_argument("gets_select: too many candidates");
    if (n <= K + 10) throw std::invalid_argument("gets_select: need n > columns + 10");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("gets_select: alpha in (0,1)");

    const Eigen::MatrixXd Xm = X;
    const Eigen::VectorXd ym = y;
    GetsEngine engine(Xm, ym);

    Mask gum;
    for (int j = 0; j < K; ++j) gum.set(size_t(j));
    const NodeEval& gum_ev = engine.eval(gum);
    if (!gum_ev.valid) throw SingularSystem("GUM is not estimable");

    // battery calibration on the GUM: tests that already fail there are
    // discarded for the search
    const Eigen::VectorXd gum_fitted = engine.fitted_of(gum_ev);
    const auto gum_tests = diagnostic_battery(ym - gum_fitted, gum_fitted, Xm);
    std::array<bool, 3> test_active{};
    for (size_t t = 0; t < gum_tests.size(); ++t)
        test_active[t] = gum_tests[t].p_value > options.diagnostic_level;

    std::map<int, double> crit_cache;
    auto critical = [&](int k_sub) {
        auto it = crit_cache.find(k_sub);
        if (it != crit_cache.end()) return it->second;
        const double df = std::max(double(n) - double(k_sub) - 1.0, 1.0);
        const double c = stats::t_critical(alpha, df);
        crit_cache.emplace(k_sub, c);
        return c;
    };

    auto encompassing_p = [&](const NodeEval& ev) {
        const int df1 = gum_ev.k - ev.k;
        if (df1 <= 0) return 1.0;
        const double df2 = double(n) - double(gum_ev.k) - 1.0;
        const double f =
            ((ev.rss - gum_ev.rss) / double(df1)) / std::max(gum_ev.rss / df2, 1e-300);
        return stats::f_sf(std::max(f, 0.0), double(df1), df2);
    };

    struct Terminal {
        double bic;
        int k;
        std::vector<int> cols;
        Mask mask;
    };
    std::vector<Terminal> terminals;
    std::set<Mask, MaskLess> expanded;
    std::vector<Mask> stack{gum};

    while (!stack.empty() && engine.evals < options.node_cap) {
        const Mask m = stack.back();
        stack.pop_back();
        if (expanded.count(m)) continue;
        expanded.insert(m);

        const NodeEval& ev = engine.eval(m);
        if (!ev.valid) continue;
        const double crit = critical(ev.k);

        std::vector<int> insig;  // positions within ev.cols
        for (int i = 0; i < ev.k; ++i)
            if (std::abs(ev.tstats[i]) < crit) insig.push_back(i);

        if (insig.empty()) {
            if (encompassing_p(ev) > alpha) {
                bool diag_ok = true;
                if (test_active[0] || test_active[1] || test_active[2]) {
                    Eigen::MatrixXd Xt(n, ev.k);
                    for (int i = 0; i < ev.k; ++i) Xt.col(i) = Xm.col(ev.cols[size_t(i)]);
                    const Eigen::VectorXd f = engine.fitted_of(ev);
                    const auto tests = diagnostic_battery(ym - f, f, Xt);
                    for (size_t t = 0; t < tests.size(); ++t)
                        if (test_active[t] && tests[t].p_value <= options.diagnostic_level)
                            diag_ok = false;
                }
                if (diag_ok) terminals.push_back({bic_of(ev, n), ev.k, ev.cols, m});
            }
            continue;
        }

        // branch on the most insignificant candidates first (largest p-values)
        std::sort(insig.begin(), insig.end(), [&](int a, int b) {
            const double ta = std::abs(ev.tstats[a]), tb = std::abs(ev.tstats[b]);
            if (ta != tb) return ta < tb;
            return ev.cols[size_t(a)] < ev.cols[size_t(b)];
        });
        const int branches = std::min<int>(options.max_branches, int(insig.size()));
        for (int bidx = branches - 1; bidx >= 0; --bidx) {
            Mask child = m;
            child.reset(size_t(ev.cols[size_t(insig[size_t(bidx)])]));
            if (!expanded.count(child)) stack.push_back(child);
        }
    }

    SelectionResult res;
    res.method = "gets";
    res.alpha = alpha;
    res.node_evaluations = engine.evals;

    const NodeEval* winner = nullptr;
    if (terminals.empty()) {
        winner = &gum_ev;
        res.gum_returned = true;
        res.warnings.push_back(
            {"NoValidReduction", "every reduction failed the terminal gates; GUM returned"});
    } else {
        std::sort(terminals.begin(), terminals.end(), [](const Terminal& a, const Terminal& b) {
            if (a.bic != b.bic) return a.bic < b.bic;
            if (a.k != b.k) return a.k < b.k;
            return a.cols < b.cols;
        });
        winner = &engine.eval(terminals.front().mask);
    }

    res.retained = winner->cols;
    res.intercept = winner->coefs.size() > 0 ? winner->coefs[0] : 0.0;
    res.coefficients.resize(winner->k);
    for (int i = 0; i < winner->k; ++i) res.coefficients[i] = winner->coefs[i + 1];

    // diagnostics of the winning model, plus the encompassing record
    {
        Eigen::MatrixXd Xt(n, winner->k);
        for (int i = 0; i < winner->k; ++i) Xt.col(i) = Xm.col(winner->cols[size_t(i)]);
        const Eigen::VectorXd f = engine.fitted_of(*winner);
        res.diagnostics = winner->k > 0 ? diagnostic_battery(ym - f, f, Xt)
                                        : diagnostic_battery(ym - f, f, Eigen::MatrixXd(n, 0));
        DiagnosticTest enc;
        enc.name = "encompassing";
        enc.p_value = encompassing_p(*winner);
        enc.statistic = 0.0;
        res.diagnostics.push_back(enc);
    }
    return res;
}

}  // namespace plam
