#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "plam/gam.hpp"
#include "plam/selection.hpp"

namespace plam {

enum class SelectEngine { Lasso, AdaptiveLasso, Gets };

std::string to_string(SelectEngine e);

struct SelectTuning {
    LambdaRule rule = LambdaRule::OneSe;  // penalized engines
    double alpha = 0.05;                  // gets
};

struct InteractionBuild {
    Eigen::MatrixXd Z;                            // n x |kept| product columns
    std::vector<std::pair<int, int>> pairs;       // full catalog, data column indices, j < k
    std::vector<std::string> pair_names;          // "A*B" per catalog entry
    std::vector<int> kept;                        // catalog indices backing Z's columns
    Warnings warnings;

    Eigen::Index catalog_size() const { return Eigen::Index(pairs.size()); }
};

// All unordered covariate pairs in lexicographic order; constant products are
// dropped from Z (still listed in the catalog), exact duplicates are retained
// but flagged collinear.
InteractionBuild build_interactions(const Dataset& data);

struct FirstStageSummary {
    std::string response;
    double total_edf = 0.0;
    double rss = 0.0;
    int cycles = 0;
};

struct DoubleResiduals {
    Eigen::VectorXd u_y;
    Eigen::MatrixXd v_Z;              // n x |catalog_index| residualized interactions
    std::vector<int> catalog_index;   // v_Z column -> catalog entry
    double gram_check = 0.0;          // smallest eigenvalue of v_Z' v_Z / n
    double gram_max = 0.0;            // largest, for the relative threshold
    std::vector<FirstStageSummary> summaries;
    Warnings warnings;
};

// u_y = y - GAM(y | X), column s of v_Z = Z_s - GAM(Z_s | X); S+1 independent
// additive fits sharing one precomputed workspace.
DoubleResiduals double_residuals(const Dataset& data, const InteractionBuild& interactions,
                                 GamOptions options = {});

struct ConcurvityReport {
    bool ok = true;
    std::vector<int> offending;  // catalog indices of near-null-space columns
    double smallest_eig = 0.0;
    double largest_eig = 0.0;
};

// ok iff lambda_min(v'v/n) > 1e-8 * lambda_max; otherwise lists the columns
// loading on the near-null eigenvectors.
ConcurvityReport check_concurvity(const DoubleResiduals& dr);

struct MarginalEffectCurve {
    std::string variable;
    Eigen::VectorXd grid;
    Eigen::VectorXd base;  // g_j'(grid)
    struct Context {
        std::string label;
        double c_j = 0.0;
        Eigen::VectorXd curve;  // base + c_j
    };
    std::vector<Context> contexts;
};

struct PartialLinearModel {
    AdditiveModel final_fit;   // smooths on X, linear part = retained interactions
    SelectionResult selection;  // indices into the full interaction catalog
    std::vector<std::pair<std::string, std::string>> catalog;  // pair names
    std::vector<int> retained_pairs;                           // catalog indices
    std::vector<FirstStageSummary> first_stage;
    std::string variant;  // gamla | gama | gamla-alasso | gamla* | gama* | gamla-alasso*
    double gram_check = 0.0;
    std::uint64_t base_fingerprint = 0;
    Warnings warnings;

    // sorted training values of every variable appearing in a retained pair,
    // so marginal-effect context quantiles need no access to the training file
    std::map<std::string, std::vector<double>> quantile_support;

    int n_interactions() const { return int(retained_pairs.size()); }
};

Eigen::VectorXd predict(const PartialLinearModel& model, const Dataset& newdata);

// Shared first-stage artifacts so several variants can run per dataset without
// refitting the S+1 additive regressions.
struct GamlaFirstStage {
    InteractionBuild interactions;
    DoubleResiduals residuals;     // v_Z empty when with_vz was false
    bool has_vz = false;
    GamOptions gam_options;        // reused by the refit step
};

GamlaFirstStage compute_first_stage(const Dataset& data, bool with_vz = true,
                                    GamOptions options = {});

PartialLinearModel fit_gamla_from_stage(const Dataset& data, const GamlaFirstStage& stage,
                                        SelectEngine engine, SelectTuning tuning,
                                        std::uint64_t seed, bool naive);

// Two-step estimator: double residuals, selection on (u_y, v_Z), additive
// refit with the retained interactions entering linearly.
PartialLinearModel fit_gamla(const Dataset& data, SelectEngine method, LambdaRule lambda_rule,
                             std::uint64_t seed);

PartialLinearModel fit_gama(const Dataset& data, double alpha, std::uint64_t seed);

// Ablation variants: selection regresses u_y on the raw interactions.
PartialLinearModel fit_naive_variants(const Dataset& data, SelectEngine engine,
                                      SelectTuning tuning, std::uint64_t seed);

MarginalEffectCurve marginal_effects(const PartialLinearModel& model, const std::string& variable,
                                     Eigen::Ref<const Eigen::VectorXd> grid,
                                     const std::vector<double>& context_quantiles);

}  // namespace plam
