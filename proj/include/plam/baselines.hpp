#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "plam/dataset.hpp"
#include "plam/selection.hpp"

namespace plam {

// ---------------------------------------------------------------------------
// augmented parametric designs
// ---------------------------------------------------------------------------

struct AugmentedDesign {
    Eigen::MatrixXd X;
    std::vector<std::string> names;
    std::vector<int> interaction_cols;              // design columns holding products
    std::vector<int> interaction_catalog;           // catalog entry per product column
    std::vector<std::pair<int, int>> catalog;       // all pairs (data col indices), j < k
    std::vector<std::string> catalog_names;
    Warnings warnings;
};

// X* = (X^1, X^2, X^3, I): linear terms for every feature, powers only of
// continuous features, products of all feature couples.
AugmentedDesign augment(const Dataset& data, int powers = 3, bool with_interactions = true);

// ---------------------------------------------------------------------------
// linear model
// ---------------------------------------------------------------------------

struct LinearModel {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    std::vector<int> pinned;  // rank-deficient columns pinned to zero
    Warnings warnings;
};

LinearModel fit_ols(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y,
                    std::vector<std::string> names = {}, bool ridge_of_last_resort = false);

Eigen::VectorXd predict(const LinearModel& model, Eigen::Ref<const Eigen::MatrixXd> X);

// ---------------------------------------------------------------------------
// trees and ensembles
// ---------------------------------------------------------------------------

enum class TreeTask { Regression, Classification };

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;  // leaf: mean response (== class-1 share for 0/1 targets)
    int n_rows = 0;
    double criterion_reduction = 0.0;  // split nodes: SSE or Gini improvement
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // node 0 is the root
    TreeTask task = TreeTask::Regression;
    int max_depth = 0;
    int min_leaf = 1;

    double predict_row(const Eigen::RowVectorXd& x) const;
    Eigen::VectorXd predict(Eigen::Ref<const Eigen::MatrixXd> X) const;
    int n_leaves() const;
};

struct TreeOptions {
    int max_depth = 0;  // 0: unlimited
    int min_leaf = 5;
};

TreeModel fit_tree(const Dataset& data, TreeTask task, TreeOptions options = {});
TreeModel fit_tree_matrix(Eigen::Ref<const Eigen::MatrixXd> X,
                          Eigen::Ref<const Eigen::VectorXd> y, TreeTask task,
                          TreeOptions options = {});

enum class EnsembleKind { Forest, Boosting };
enum class BoostLoss { Squared, Logistic };

struct ForestOptions {
    int n_trees = 500;
    int mtry = 0;  // 0: p/3 for regression, sqrt(p) for classification
    int min_leaf = 5;
    int max_depth = 0;
    bool bootstrap = true;
};

struct BoostOptions {
    int n_trees = 500;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
    BoostLoss loss = BoostLoss::Squared;
    double validation_fraction = 0.2;  // early-stopping slice; 0 disables
    int patience = 20;
};

struct EnsembleModel {
    EnsembleKind kind = EnsembleKind::Forest;
    TreeTask task = TreeTask::Regression;
    std::vector<TreeModel> trees;
    double init_value = 0.0;     // boosting offset
    double learning_rate = 1.0;  // boosting: constant per-tree weight
    BoostLoss loss = BoostLoss::Squared;
    std::vector<double> train_loss_trace;
    int n_features = 0;

    Eigen::VectorXd predict(Eigen::Ref<const Eigen::MatrixXd> X) const;
};

EnsembleModel fit_random_forest(const Dataset& data, TreeTask task, ForestOptions options,
                                std::uint64_t seed);

EnsembleModel fit_gradient_boosting(const Dataset& data, BoostOptions options, std::uint64_t seed);

// Total split-criterion reduction per variable, normalized to sum one.
std::vector<std::pair<std::string, double>> variable_importance(
    const EnsembleModel& model, const std::vector<std::string>& feature_names);

// ---------------------------------------------------------------------------
// penalized logistic tree regression
// ---------------------------------------------------------------------------

struct PltrModel {
    struct UnivariateLeaf {
        int feature = -1;
        double threshold = 0.0;
        std::string name;
    };
    struct BivariateLeaf {
        int root_feature = -1;
        double root_threshold = 0.0;
        bool follow_left = true;  // which root branch holds the second split
        int leaf_feature = -1;
        double leaf_threshold = 0.0;
        std::string name;
    };

    std::vector<std::string> feature_names;
    std::vector<UnivariateLeaf> v1;
    std::vector<BivariateLeaf> v2;
    Eigen::VectorXd coefficients;  // over [features, v1, v2]
    double intercept = 0.0;
    double lambda = 0.0;
    Warnings warnings;

    Eigen::MatrixXd design(Eigen::Ref<const Eigen::MatrixXd> X) const;
    Eigen::VectorXd predict_probability(Eigen::Ref<const Eigen::MatrixXd> X) const;
};

// Threshold effects from one- and two-split trees plugged into an
// adaptive-lasso logistic regression (ridge initial weights, nu = 1,
// lambda_min by 10-fold CV).
PltrModel fit_pltr(const Dataset& data, std::uint64_t seed);

}  // namespace plam
