#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "plam/basis.hpp"
#include "plam/dataset.hpp"

namespace plam {

enum class Family { Gaussian, LinearProbability };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

// One fitted smooth component, stored so that evaluation needs only the knots
// and coefficients: the training-sample centering is already folded into the
// coefficient vector (the basis reproduces constants exactly).
struct SmoothTerm {
    SplineBasis basis;
    Eigen::VectorXd coefficients;
    double psi = 0.0;
    double edf = 0.0;
    double train_sq_norm = 0.0;  // |g_j(x_train)|^2, used by the F summary

    double eval(double x) const { return basis.eval(x, coefficients); }
    double eval_deriv(double x) const { return basis.eval_deriv(x, coefficients); }
};

struct AdditiveModel {
    double intercept = 0.0;
    std::vector<std::string> linear_names;
    Eigen::VectorXd linear_coefs;
    std::vector<SmoothTerm> smooths;
    Family family = Family::Gaussian;
    Eigen::VectorXd residuals;
    std::uint64_t schema_fingerprint = 0;

    Eigen::Index n_train = 0;
    double total_edf = 0.0;
    double sigma2 = 0.0;  // RSS / (n - total_edf)
    int cycles = 0;
    std::vector<double> objective_trace;  // penalized RSS per outer cycle
    int gcv_freeze_cycle = 5;
    Warnings warnings;

    const SmoothTerm* smooth_for(const std::string& variable) const;
};

struct SmoothSummaryRow {
    std::string variable;
    double edf = 0.0;
    double ref_df = 0.0;
    double f_stat = 0.0;
    double p_value = 1.0;
};

using SmoothSummary = std::vector<SmoothSummaryRow>;

struct GamOptions {
    int basis_dim = 6;
    int max_cycles = 200;
    double tol = 1e-6;       // relative to sd of the response
    int gcv_freeze = 5;      // cycles after which per-term psi stays fixed
    Family family = Family::Gaussian;
};

// Precomputed design state for fitting additive models with a fixed covariate
// layout: reusable across many responses (the double-residual first stage fits
// S+1 regressions on identical smooth designs).
class GamWorkspace {
public:
    GamWorkspace(const Dataset& data, std::vector<std::string> smooth_vars,
                 std::vector<std::string> linear_vars, GamOptions options = {});

    AdditiveModel fit(Eigen::Ref<const Eigen::VectorXd> y) const;

    const std::vector<std::string>& smooth_vars() const { return smooth_vars_; }
    const std::vector<std::string>& linear_vars() const { return linear_vars_; }
    const Warnings& warnings() const { return warnings_; }

private:
    struct SmoothBlock {
        std::string name;
        BasisBuild build;
        PenaltyMatrix penalty;
        std::unique_ptr<PenalizedBlock> solver;
    };

    GamOptions options_;
    std::vector<std::string> smooth_vars_;
    std::vector<std::string> linear_vars_;
    std::vector<SmoothBlock> blocks_;
    Eigen::MatrixXd linear_design_;  // n x (1 + L), first column is ones
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> linear_qr_;
    std::vector<int> pinned_linear_;  // columns dropped for rank deficiency
    std::uint64_t fingerprint_ = 0;
    Eigen::Index n_ = 0;
    Warnings warnings_;
};

// Fits y = intercept + Z gamma + sum_j g_j(X_j) + e by backfitting with
// per-term GCV smoothing selection. Smooth variables that cannot support a
// spline basis are demoted to linear terms with a warning.
AdditiveModel fit_gam(const Dataset& data, const std::vector<std::string>& smooth_vars,
                      const std::vector<std::string>& linear_vars, GamOptions options = {});

Eigen::VectorXd predict(const AdditiveModel& model, const Dataset& newdata);

// Wald-type F statistics on the smooth components; approximate by design
// (penalized coefficients), with reference df = basis dim - 1.
SmoothSummary smooth_summary(const AdditiveModel& model);

struct CurvePoints {
    Eigen::VectorXd x;
    Eigen::VectorXd value;
};

CurvePoints smooth_curve(const AdditiveModel& model, const std::string& variable,
                         Eigen::Ref<const Eigen::VectorXd> grid);

}  // namespace plam
