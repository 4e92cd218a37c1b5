#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plam/errors.hpp"

namespace plam {

enum class LambdaRule { Min, OneSe };

std::string to_string(LambdaRule r);
LambdaRule lambda_rule_from_string(const std::string& s);

struct CvCurve {
    Eigen::VectorXd lambdas;     // descending grid
    Eigen::VectorXd mean_error;  // mean CV MSE per lambda
    Eigen::VectorXd se_error;    // CV standard error per lambda
    double lambda_min = 0.0;
    double lambda_1se = 0.0;

    double pick(LambdaRule rule) const {
        return rule == LambdaRule::Min ? lambda_min : lambda_1se;
    }
};

struct DiagnosticTest {
    std::string name;
    double statistic = 0.0;
    double p_value = 1.0;
};

struct SelectionResult {
    std::string method;          // lasso | adaptive-lasso | gets
    std::vector<int> retained;   // candidate-column indices, ascending
    Eigen::VectorXd coefficients;  // aligned to retained, original scale
    double intercept = 0.0;

    // tuning record: lambda for penalized methods, alpha for gets
    double lambda = 0.0;
    std::string lambda_rule;
    double alpha = 0.0;
    std::optional<CvCurve> path;

    std::vector<DiagnosticTest> diagnostics;
    Warnings warnings;
    bool gum_returned = false;   // gets only: no valid reduction found
    long node_evaluations = 0;   // gets only

    bool retains(int col) const {
        for (int r : retained)
            if (r == col) return true;
        return false;
    }
};

struct LassoFit {
    Eigen::VectorXd coefficients;  // length X.cols(), original scale
    double intercept = 0.0;
    Warnings warnings;
};

// Cyclic coordinate descent for (1/2n)|y - b0 - X b|^2 + lambda sum w_k |b_k|.
// Columns are standardized internally; coefficients return on the original
// scale. Optional per-coefficient penalty weights (adaptive lasso).
LassoFit fit_lasso(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y,
                   double lambda, const Eigen::VectorXd* penalty_weights = nullptr);

// 100-point log grid from lambda_max down to 1e-4 lambda_max, k-fold CV MSE.
CvCurve cv_lambda(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y,
                  int k = 10, std::uint64_t seed = 0,
                  const Eigen::VectorXd* penalty_weights = nullptr);

// Lasso with CV-chosen lambda, packaged as a selection result.
SelectionResult lasso_select(Eigen::Ref<const Eigen::MatrixXd> X,
                             Eigen::Ref<const Eigen::VectorXd> y, LambdaRule rule, int k = 10,
                             std::uint64_t seed = 0);

// Adaptive lasso: ridge initial estimates (penalty by GCV), weights
// |theta0|^-nu, lambda by k-fold CV under the chosen rule.
SelectionResult fit_adaptive_lasso(Eigen::Ref<const Eigen::MatrixXd> X,
                                   Eigen::Ref<const Eigen::VectorXd> y, double nu = 1.0,
                                   LambdaRule rule = LambdaRule::Min, int k = 10,
                                   std::uint64_t seed = 0);

// White heteroskedasticity, Doornik-Hansen normality, RESET. The battery
// passes iff all p-values exceed 0.01. `fitted` feeds the RESET powers.
std::vector<DiagnosticTest> diagnostic_battery(Eigen::Ref<const Eigen::VectorXd> residuals,
                                               Eigen::Ref<const Eigen::VectorXd> fitted,
                                               Eigen::Ref<const Eigen::MatrixXd> X_terminal);

bool battery_passes(const std::vector<DiagnosticTest>& tests, double level = 0.01);

struct GetsOptions {
    long node_cap = 10000;
    int max_branches = 8;
    double diagnostic_level = 0.01;
};

// Simplified general-to-specific search: multi-path backward elimination from
// the GUM with t-ratio pruning at target size alpha, diagnostic battery and an
// F encompassing test against the GUM as terminal gates, Schwarz-criterion
// choice among terminals. Battery tests already failing on the GUM are
// discarded for the search, matching how the reference implementation treats
// an incongruent starting model.
SelectionResult gets_select(Eigen::Ref<const Eigen::MatrixXd> X,
                            Eigen::Ref<const Eigen::VectorXd> y, double alpha,
                            GetsOptions options = {});

}  // namespace plam
