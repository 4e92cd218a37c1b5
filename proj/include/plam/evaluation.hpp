#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "plam/dataset.hpp"
#include "plam/models.hpp"

namespace plam {

struct CvPredictions {
    std::vector<int> fold;        // per-row fold id
    Eigen::VectorXd predictions;  // out-of-fold prediction per row
    std::string model_id;
    int k = 10;
    std::uint64_t seed = 0;
    double mean_interactions = -1.0;  // selection models: mean retained count per fold
};

std::vector<int> make_folds(Eigen::Index n, int k, std::uint64_t seed);

// Refits the spec k times on fold complements; all tuning happens inside the
// training folds. Deterministic given (data, spec, k, seed).
CvPredictions kfold_cv(const Dataset& data, const ModelSpec& spec, int k = 10,
                       std::uint64_t seed = 0);

double mse(Eigen::Ref<const Eigen::VectorXd> pred, Eigen::Ref<const Eigen::VectorXd> truth);

// Scores are clamped to [0,1]; ties count one half (rank method).
double auc(Eigen::Ref<const Eigen::VectorXd> scores, Eigen::Ref<const Eigen::VectorXd> labels);

struct AucTestResult {
    double auc1 = 0.0, auc2 = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double variance = 0.0;  // estimated var of auc1 - auc2
};

// DeLong-type paired comparison of two score vectors on shared labels.
AucTestResult auc_test(Eigen::Ref<const Eigen::VectorXd> scores1,
                       Eigen::Ref<const Eigen::VectorXd> scores2,
                       Eigen::Ref<const Eigen::VectorXd> labels);

struct McsResult {
    std::vector<int> surviving;          // model indices with p >= alpha
    std::vector<int> elimination_order;  // first eliminated ... last standing
    Eigen::VectorXd p_values;            // MCS p-value per model
    int bootstrap_count = 0;
    double alpha = 0.0;
};

// Model confidence set with the range statistic over standardized pairwise
// mean loss differentials; iid bootstrap (block size one), max-so-far p rule.
McsResult mcs(Eigen::Ref<const Eigen::MatrixXd> loss_matrix, int B = 10000,
              double alpha_mcs = 0.10, std::uint64_t seed = 0);

double potency(const std::set<int>& selected, const std::set<int>& relevant);
double gauge(const std::set<int>& selected, const std::set<int>& relevant, int catalog_size);

}  // namespace plam
