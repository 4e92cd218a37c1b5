#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "plam/dataset.hpp"
#include "plam/models.hpp"

namespace plam {

// setup 1: nonlinear g, correlated covariates; 2: nonlinear, independent;
// 3: linear g, correlated; 4: linear, independent
struct DgpConfig {
    int setup = 1;
    int p = 10;
    int q = 5;
    int n_in = 1000;
    int n_out = 1000;
    double noise_sd = 1.0;
    double u_variance = 0.4;
    double xi = 6.0;
    std::uint64_t seed = 0;

    bool nonlinear() const { return setup == 1 || setup == 2; }
    bool correlated() const { return setup == 1 || setup == 3; }
};

struct DgpTruth {
    std::vector<std::pair<int, int>> relevant_pairs;  // 0-based data columns (j, j+q)
    std::set<int> relevant_catalog;                   // indices into the S-pair catalog
    Eigen::VectorXd gamma_pairs;                      // coefficient per relevant pair
    Eigen::VectorXd gamma_linear;                     // linear setups: slope per j <= q
};

struct MonteCarloRow {
    std::string model_id;
    bool selection = false;
    double mean_potency = 0.0;
    double mean_gauge = 0.0;
    double mean_mse = 0.0;
    int replications = 0;
    int failures = 0;
};

struct MonteCarloReport {
    DgpConfig config;
    int n_r = 0;
    std::vector<MonteCarloRow> rows;
};

// The q nonlinear signal functions (1-based index); zero beyond q.
double eval_g(int j, double x);

// Lexicographic catalog position of the unordered pair (a, b), 0-based.
int pair_catalog_index(int a, int b, int p);

// gamma = xi * sqrt(diag of E[W'W]^-1), E[W'W] estimated from a 1e6-row
// super-sample split into n_in-row blocks; linear setups calibrate the slope
// coefficients with the same rule (fixed point over the covariate dependence).
DgpTruth calibrate_gamma(const DgpConfig& config);

struct DgpSample {
    Dataset train;
    Dataset test;
    DgpTruth truth;
};

DgpSample gen_dgp(const DgpConfig& config, int replication_index);

// True conditional mean E[y | X] under the DGP.
Eigen::VectorXd dgp_conditional_mean(const DgpConfig& config, const DgpTruth& truth,
                                     const Dataset& data);

// Fits every spec per replication (first-stage artifacts shared), aggregates
// potency/gauge (selectors) and out-of-sample MSE. Replications run in
// parallel with derived seeds; aggregation is index-ordered.
MonteCarloReport run_monte_carlo(const DgpConfig& config,
                                 const std::vector<ModelSpec>& specs, int n_r,
                                 std::uint64_t seed, bool with_oracle = false);

}  // namespace plam
