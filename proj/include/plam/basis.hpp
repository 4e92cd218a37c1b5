#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "plam/errors.hpp"

namespace plam {

// Natural cubic regression spline in value parameterization: coefficient l is
// the function value at knot l, the curve between knots is the natural
// interpolating cubic, and extension beyond the boundary knots is linear.
// Knots sit at quantiles of the distinct sample values.
struct SplineBasis {
    std::string variable_id;
    int degree = 3;
    int dim = 0;                    // number of basis functions == number of knots
    Eigen::VectorXd knots;          // strictly ascending
    Eigen::VectorXd centering;      // training column means of the design block

    // value-to-second-derivative map at interior knots (rows 1..dim-2)
    Eigen::MatrixXd curvature_map;  // (dim-2) x dim

    // Uncentered design row a(x): g(x) = a(x) . theta.
    Eigen::RowVectorXd row(double x) const;
    // d/dx of the design row.
    Eigen::RowVectorXd deriv_row(double x) const;

    double eval(double x, const Eigen::VectorXd& theta) const { return row(x).dot(theta); }
    double eval_deriv(double x, const Eigen::VectorXd& theta) const {
        return deriv_row(x).dot(theta);
    }
};

using PenaltyMatrix = Eigen::MatrixXd;

struct BasisBuild {
    SplineBasis basis;
    Eigen::MatrixXd design;  // n x dim, columns centered
};

// Knots at quantiles of the distinct values of x (boundary knots at min/max).
// Throws TooFewDistinctValues when x has fewer than dim+2 distinct values,
// which signals that the variable must be treated as linear-only.
BasisBuild build_cubic_basis(Eigen::Ref<const Eigen::VectorXd> x, int dim,
                             const std::string& variable_id = {});

// S with theta' S theta = integral of g'' squared over the knot range.
PenaltyMatrix penalty_matrix(const SplineBasis& basis);

// Reconstructs evaluation state from stored knots (deserialization path).
SplineBasis rebuild_basis(const std::string& variable_id, Eigen::VectorXd knots);

struct PenalizedLsFit {
    Eigen::VectorXd coefficients;
    double edf = 0.0;
    Eigen::VectorXd hat_diag;
};

// argmin |y - B theta|^2 + psi theta' S theta for a full-column-rank design.
// Throws SingularSystem when the penalized normal matrix has condition > 1e12.
PenalizedLsFit penalized_ls(Eigen::Ref<const Eigen::MatrixXd> design,
                            Eigen::Ref<const Eigen::MatrixXd> penalty,
                            Eigen::Ref<const Eigen::VectorXd> y, double psi);

// Shared smooth-fitting engine. Decomposes one (design, penalty) pair once so
// that solves, RSS, edf and GCV are O(dim) per candidate psi afterwards.
// Tolerates the structural rank deficiency of centered value bases: directions
// of the coefficient space not identified by the data are pinned to zero
// (minimum-norm solution).
class PenalizedBlock {
public:
    PenalizedBlock(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty);

    int rank() const { return int(pen_eigs_.size()); }
    double design_scale() const { return design_scale_; }
    double penalty_scale() const { return penalty_scale_; }

    // Projection of a response onto the whitened design; all per-psi queries
    // take this as input so the O(n) work happens once per response.
    Eigen::VectorXd project(Eigen::Ref<const Eigen::VectorXd> y) const;

    Eigen::VectorXd solve(const Eigen::VectorXd& projected, double psi) const;  // coefficients
    double edf(double psi) const;
    double rss(const Eigen::VectorXd& projected, double y_sq_norm, double psi) const;
    double gcv(const Eigen::VectorXd& projected, double y_sq_norm, double psi) const;
    Eigen::VectorXd hat_diag(double psi) const;
    Eigen::VectorXd fitted(const Eigen::VectorXd& coefficients) const;

    const Eigen::MatrixXd& design() const { return design_; }

private:
    Eigen::MatrixXd design_;       // n x d
    Eigen::MatrixXd coef_map_;     // d x r: theta = coef_map * alpha
    Eigen::MatrixXd whitened_;     // n x r with unit Gram
    Eigen::VectorXd pen_eigs_;     // r penalty eigenvalues in whitened space
    double design_scale_ = 0.0;    // tr(B'B)
    double penalty_scale_ = 0.0;   // tr(S)
    Eigen::Index n_ = 0;
};

struct GcvChoice {
    double psi = 0.0;
    double edf = 0.0;
    double gcv = 0.0;
    bool at_boundary = false;
};

// Minimizes GCV(psi) = n RSS / (n - edf)^2 over a 30-point log grid spanning
// [1e-6, 1e6] x tr(B'B)/tr(S), refined by golden section around the minimum.
GcvChoice select_psi_gcv(const PenalizedBlock& block,
                         Eigen::Ref<const Eigen::VectorXd> partial_residual);

}  // namespace plam
