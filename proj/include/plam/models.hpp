#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plam/baselines.hpp"
#include "plam/dataset.hpp"
#include "plam/gamla.hpp"

namespace plam {

enum class ModelKind {
    Gam,
    Gamla,
    GamlaAlasso,
    Gama,
    GamlaStar,
    GamlaAlassoStar,
    GamaStar,
    Ols,
    OlsAugmented,
    LassoAugmented,
    AlassoAugmented,
    GetsAugmented,  // "am" on the CLI
    Tree,
    Forest,
    Boosting,
    Pltr,
};

struct ModelSpec {
    ModelKind kind = ModelKind::Gam;
    LambdaRule rule = LambdaRule::OneSe;
    double alpha = 0.05;
    int basis_dim = 6;
    TreeOptions tree;
    ForestOptions forest;
    BoostOptions boost;

    std::string id() const;
    bool selects_interactions() const;
    bool is_naive_variant() const;
    bool needs_double_residuals() const;
};

// Parses "gama:alpha=0.05", "gamla:lambda=1se", "forest", "am:alpha=0.01", ...
ModelSpec parse_model_spec(const std::string& text);

// A fitted model of any supported kind with a uniform prediction surface.
struct FittedModel {
    ModelSpec spec;
    bool classification = false;

    std::optional<AdditiveModel> gam;
    std::optional<PartialLinearModel> plm;
    std::optional<LinearModel> linear;  // over an augmented design
    int aug_powers = 0;                 // augmented-design recipe; 0 = raw features
    bool aug_interactions = false;
    std::optional<SelectionResult> selection;  // augmented-design selectors
    std::optional<EnsembleModel> ensemble;
    std::optional<TreeModel> tree;
    std::optional<PltrModel> pltr;

    std::vector<int> retained_interactions;  // catalog indices, when applicable

    Eigen::VectorXd predict(const Dataset& data) const;
};

bool target_is_binary(const Dataset& data);

FittedModel fit_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed);

// Variant sharing precomputed first-stage artifacts across several
// partial-linear specs on the same training data.
FittedModel fit_model_with_stage(const ModelSpec& spec, const Dataset& train,
                                 const GamlaFirstStage* stage, std::uint64_t seed);

}  // namespace plam
