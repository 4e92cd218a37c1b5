#include "plam/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace plam {

namespace {

// Second-derivative map of a natural cubic interpolating spline: with values
// theta at knots, the second derivatives at interior knots are Bm^-1 D theta
// (Green & Silverman banded construction); boundary second derivatives are 0.
Eigen::MatrixXd curvature_map_from_knots(const Eigen::VectorXd& knots) {
    const int d = int(knots.size());
    const int m = d - 2;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, d);
    Eigen::MatrixXd Bm = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const double h0 = knots[i + 1] - knots[i];
        const double h1 = knots[i + 2] - knots[i + 1];
        D(i, i) = 1.0 / h0;
        D(i, i + 1) = -1.0 / h0 - 1.0 / h1;
        D(i, i + 2) = 1.0 / h1;
        Bm(i, i) = (h0 + h1) / 3.0;
        if (i + 1 < m) {
            Bm(i, i + 1) = h1 / 6.0;
            Bm(i + 1, i) = h1 / 6.0;
        }
    }
    return Bm.ldlt().solve(D);
}

int segment_of(const Eigen::VectorXd& knots, double x) {
    // largest i with knots[i] <= x, clamped to a valid segment start
    const int d = int(knots.size());
    int lo = 0, hi = d - 2;
    if (x <= knots[0]) return 0;
    if (x >= knots[d - 1]) return d - 2;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (knots[mid] <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    return std::min(lo, d - 2);
}

}  // namespace

Eigen::RowVectorXd SplineBasis::row(double x) const {
    const int d = dim;
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(d);
    const double lo = knots[0], hi = knots[d - 1];
    if (x < lo) {
        // linear extension: g(lo) + g'(lo) (x - lo)
        a = deriv_row(lo) * (x - lo);
        a(0) += 1.0;
        return a;
    }
    if (x > hi) {
        a = deriv_row(hi) * (x - hi);
        a(d - 1) += 1.0;
        return a;
    }
    const int i = segment_of(knots, x);
    const double h = knots[i + 1] - knots[i];
    const double u = knots[i + 1] - x;
    const double v = x - knots[i];
    a(i) += u / h;
    a(i + 1) += v / h;
    const double clo = (u * u * u / h - h * u) / 6.0;
    const double chi = (v * v * v / h - h * v) / 6.0;
    // delta_i = curvature_map.row(i-1) . theta for interior knots, 0 at boundaries
    if (i >= 1) a += clo * curvature_map.row(i - 1);
    if (i + 1 <= d - 2) a += chi * curvature_map.row(i);
    return a;
}

Eigen::RowVectorXd SplineBasis::deriv_row(double x) const {
    const int d = dim;
    const double lo = knots[0], hi = knots[d - 1];
    const double xc = std::clamp(x, lo, hi);
    const int i = segment_of(knots, xc);
    const double h = knots[i + 1] - knots[i];
    const double u = knots[i + 1] - xc;
    const double v = xc - knots[i];
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(d);
    a(i) -= 1.0 / h;
    a(i + 1) += 1.0 / h;
    const double clo = -(3.0 * u * u / h - h) / 6.0;
    const double chi = (3.0 * v * v / h - h) / 6.0;
    if (i >= 1) a += clo * curvature_map.row(i - 1);
    if (i + 1 <= d - 2) a += chi * curvature_map.row(i);
    return a;
}

BasisBuild build_cubic_basis(Eigen::Ref<const Eigen::VectorXd> x, int dim,
                             const std::string& variable_id) {
    if (dim < 4) throw std::invalid_argument("build_cubic_basis: dim must be >= 4");
    std::vector<double> uniq(x.data(), x.data() + x.size());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (int(uniq.size()) < dim + 2)
        throw TooFewDistinctValues(variable_id + ": " + std::to_string(uniq.size()) +
                                   " distinct values for dim " + std::to_string(dim));

    SplineBasis basis;
    basis.variable_id = variable_id;
    basis.dim = dim;
    basis.knots.resize(dim);
    const double mu = double(uniq.size() - 1);
    for (int l = 0; l < dim; ++l) {
        const double h = mu * double(l) / double(dim - 1);
        const auto idx = std::min(size_t(h), uniq.size() - 2);
        const double frac = h - double(idx);
        basis.knots[l] = uniq[idx] + frac * (uniq[idx + 1] - uniq[idx]);
    }
    basis.knots[0] = uniq.front();
    basis.knots[dim - 1] = uniq.back();
    basis.curvature_map = curvature_map_from_knots(basis.knots);

    Eigen::MatrixXd design(x.size(), dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) design.row(i) = basis.row(x[i]);
    basis.centering = design.colwise().mean();
    design.rowwise() -= basis.centering.transpose();
    return {std::move(basis), std::move(design)};
}

SplineBasis rebuild_basis(const std::string& variable_id, Eigen::VectorXd knots) {
    if (knots.size() < 4) throw std::invalid_argument("rebuild_basis: need at least 4 knots");
    for (Eigen::Index i = 0; i + 1 < knots.size(); ++i)
        if (!(knots[i] < knots[i + 1]))
            throw std::invalid_argument("rebuild_basis: knots must be strictly ascending");
    SplineBasis basis;
    basis.variable_id = variable_id;
    basis.dim = int(knots.size());
    basis.knots = std::move(knots);
    basis.centering = Eigen::VectorXd::Zero(basis.dim);
    basis.curvature_map = curvature_map_from_knots(basis.knots);
    return basis;
}

PenaltyMatrix penalty_matrix(const SplineBasis& basis) {
    // S = D' Bm^-1 D written via the curvature map F = Bm^-1 D: S = D' F.
    // Rebuild D and Bm from the knots so S is exactly symmetric by averaging.
    const int d = basis.dim;
    const int m = d - 2;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, d);
    Eigen::MatrixXd Bm = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const double h0 = basis.knots[i + 1] - basis.knots[i];
        const double h1 = basis.knots[i + 2] - basis.knots[i + 1];
        D(i, i) = 1.0 / h0;
        D(i, i + 1) = -1.0 / h0 - 1.0 / h1;
        D(i, i + 2) = 1.0 / h1;
        Bm(i, i) = (h0 + h1) / 3.0;
        if (i + 1 < m) Bm(i, i + 1) = Bm(i + 1, i) = h1 / 6.0;
    }
    Eigen::MatrixXd S = D.transpose() * Bm.ldlt().solve(D);
    return 0.5 * (S + S.transpose());
}

PenalizedLsFit penalized_ls(Eigen::Ref<const Eigen::MatrixXd> design,
                            Eigen::Ref<const Eigen::MatrixXd> penalty,
                            Eigen::Ref<const Eigen::VectorXd> y, double psi) {
    if (psi < 0.0) throw std::invalid_argument("penalized_ls: psi must be nonnegative");
    if (design.rows() != y.size()) throw LengthMismatch("penalized_ls: design rows vs y");

    // whitened solve: perfectly conditioned in psi, so the singularity gate
    // reduces to the design itself (relative eigenvalue cut at 1e-12)
    const PenalizedBlock block(design, penalty);
    if (block.rank() < design.cols())
        throw SingularSystem("penalized normal matrix condition exceeds 1e12");

    PenalizedLsFit fit;
    fit.coefficients = block.solve(block.project(y), psi);
    fit.edf = block.edf(psi);
    fit.hat_diag = block.hat_diag(psi);
    return fit;
}

PenalizedBlock::PenalizedBlock(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty)
    : design_(design), n_(design.rows()) {
    Eigen::MatrixXd gram = design.transpose() * design;
    gram = 0.5 * (gram + gram.transpose());
    design_scale_ = gram.trace();
    penalty_scale_ = penalty.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gram);
    const double emax = eg.eigenvalues().maxCoeff();
    const double tol = std::max(emax, 1.0) * 1e-12;
    std::vector<int> keep;
    for (int i = 0; i < gram.rows(); ++i)
        if (eg.eigenvalues()[i] > tol) keep.push_back(i);
    const int r = int(keep.size());
    if (r == 0) throw SingularSystem("design block has rank zero");

    Eigen::MatrixXd T(gram.rows(), r);
    for (int k = 0; k < r; ++k)
        T.col(k) = eg.eigenvectors().col(keep[size_t(k)]) /
                   std::sqrt(eg.eigenvalues()[keep[size_t(k)]]);

    Eigen::MatrixXd pen_w = T.transpose() * penalty * T;
    pen_w = 0.5 * (pen_w + pen_w.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(pen_w);
    pen_eigs_ = ep.eigenvalues().cwiseMax(0.0);
    coef_map_ = T * ep.eigenvectors();
    whitened_ = design_ * coef_map_;
}

Eigen::VectorXd PenalizedBlock::project(Eigen::Ref<const Eigen::VectorXd> y) const {
    return whitened_.transpose() * y;
}

Eigen::VectorXd PenalizedBlock::solve(const Eigen::VectorXd& projected, double psi) const {
    const Eigen::VectorXd alpha =
        projected.array() / (1.0 + psi * pen_eigs_.array());
    return coef_map_ * alpha;
}

double PenalizedBlock::edf(double psi) const {
    return (1.0 / (1.0 + psi * pen_eigs_.array())).sum();
}

double PenalizedBlock::rss(const Eigen::VectorXd& projected, double y_sq_norm, double psi) const {
    // orthogonal split: |y - fit|^2 = |y - P y|^2 + |z - alpha|^2 with the
    // whitened design orthonormal; only the first term can cancel, and it is
    // constant in psi, so GCV comparisons across psi stay exact. The floor
    // keeps roundoff in exactly-representable responses from steering GCV.
    const double rss0 = std::max(y_sq_norm - projected.squaredNorm(),
                                 64.0 * std::numeric_limits<double>::epsilon() * y_sq_norm);
    const Eigen::ArrayXd miss =
        (psi * pen_eigs_.array()) / (1.0 + psi * pen_eigs_.array());
    return rss0 + (projected.array().square() * miss.square()).sum();
}

double PenalizedBlock::gcv(const Eigen::VectorXd& projected, double y_sq_norm, double psi) const {
    const double n = double(n_);
    const double denom = std::max(n - edf(psi), 1e-3);
    return n * rss(projected, y_sq_norm, psi) / (denom * denom);
}

Eigen::VectorXd PenalizedBlock::hat_diag(double psi) const {
    const Eigen::ArrayXd shrink = 1.0 / (1.0 + psi * pen_eigs_.array());
    return (whitened_.array().square().rowwise() * shrink.transpose()).rowwise().sum();
}

Eigen::VectorXd PenalizedBlock::fitted(const Eigen::VectorXd& coefficients) const {
    return design_ * coefficients;
}

GcvChoice select_psi_gcv(const PenalizedBlock& block,
                         Eigen::Ref<const Eigen::VectorXd> partial_residual) {
    GcvChoice out;
    if (block.penalty_scale() <= 0.0) {
        out.psi = 0.0;
        out.edf = block.edf(0.0);
        out.at_boundary = true;
        const Eigen::VectorXd z0 = block.project(partial_residual);
        out.gcv = block.gcv(z0, partial_residual.squaredNorm(), 0.0);
        return out;
    }
    const double scale = block.design_scale() / block.penalty_scale();
    const Eigen::VectorXd z = block.project(partial_residual);
    const double ynorm = partial_residual.squaredNorm();

    constexpr int kGrid = 30;
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    std::vector<double> log_psi(kGrid);
    for (int k = 0; k < kGrid; ++k) {
        log_psi[size_t(k)] = std::log10(scale) - 6.0 + 12.0 * double(k) / double(kGrid - 1);
        const double g = block.gcv(z, ynorm, std::pow(10.0, log_psi[size_t(k)]));
        if (g < best) {
            best = g;
            best_k = k;
        }
    }

    double lo = log_psi[size_t(std::max(0, best_k - 1))];
    double hi = log_psi[size_t(std::min(kGrid - 1, best_k + 1))];
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    double fa = block.gcv(z, ynorm, std::pow(10.0, a));
    double fb = block.gcv(z, ynorm, std::pow(10.0, b));
    for (int it = 0; it < 40 && hi - lo > 1e-4; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - gr * (hi - lo);
            fa = block.gcv(z, ynorm, std::pow(10.0, a));
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + gr * (hi - lo);
            fb = block.gcv(z, ynorm, std::pow(10.0, b));
        }
    }
    const double refined = 0.5 * (lo + hi);
    const double gref = block.gcv(z, ynorm, std::pow(10.0, refined));

    out.at_boundary = (best_k == 0 || best_k == kGrid - 1);
    if (gref <= best) {
        out.psi = std::pow(10.0, refined);
        out.gcv = gref;
    } else {
        out.psi = std::pow(10.0, log_psi[size_t(best_k)]);
        out.gcv = best;
    }
    out.edf = block.edf(out.psi);
    return out;
}

}  // namespace plam
