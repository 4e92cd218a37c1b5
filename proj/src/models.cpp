#include "plam/models.hpp"

#include <set>

#include "plam/rng.hpp"

namespace plam {

namespace {

std::string kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Gam: return "gam";
        case ModelKind::Gamla: return "gamla";
        case ModelKind::GamlaAlasso: return "gamla-alasso";
        case ModelKind::Gama: return "gama";
        case ModelKind::GamlaStar: return "gamla*";
        case ModelKind::GamlaAlassoStar: return "gamla-alasso*";
        case ModelKind::GamaStar: return "gama*";
        case ModelKind::Ols: return "ols";
        case ModelKind::OlsAugmented: return "ols-augmented";
        case ModelKind::LassoAugmented: return "lasso";
        case ModelKind::AlassoAugmented: return "alasso";
        case ModelKind::GetsAugmented: return "am";
        case ModelKind::Tree: return "tree";
        case ModelKind::Forest: return "forest";
        case ModelKind::Boosting: return "boosting";
        case ModelKind::Pltr: return "pltr";
    }
    return "?";
}

bool uses_lambda(ModelKind k) {
    return k == ModelKind::Gamla || k == ModelKind::GamlaAlasso || k == ModelKind::GamlaStar ||
           k == ModelKind::GamlaAlassoStar || k == ModelKind::LassoAugmented ||
           k == ModelKind::AlassoAugmented;
}

bool uses_alpha(ModelKind k) {
    return k == ModelKind::Gama || k == ModelKind::GamaStar || k == ModelKind::GetsAugmented;
}

}  // namespace

std::string ModelSpec::id() const {
    std::string args;
    if (uses_lambda(kind)) args = "lambda=" + to_string(rule);
    if (uses_alpha(kind)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "alpha=%g", alpha);
        args = buf;
    }
    const bool smooths = kind == ModelKind::Gam || kind == ModelKind::Gamla ||
                         kind == ModelKind::GamlaAlasso || kind == ModelKind::Gama ||
                         kind == ModelKind::GamlaStar || kind == ModelKind::GamlaAlassoStar ||
                         kind == ModelKind::GamaStar;
    if (smooths && basis_dim != 6)
        args += (args.empty() ? "" : ",") + std::string("dim=") + std::to_string(basis_dim);
    std::string out = kind_name(kind);
    if (!args.empty()) out += "(" + args + ")";
    return out;
}

bool ModelSpec::selects_interactions() const {
    switch (kind) {
        case ModelKind::Gamla:
        case ModelKind::GamlaAlasso:
        case ModelKind::Gama:
        case ModelKind::GamlaStar:
        case ModelKind::GamlaAlassoStar:
        case ModelKind::GamaStar:
        case ModelKind::LassoAugmented:
        case ModelKind::AlassoAugmented:
        case ModelKind::GetsAugmented:
            return true;
        default:
            return false;
    }
}

bool ModelSpec::is_naive_variant() const {
    return kind == ModelKind::GamlaStar || kind == ModelKind::GamlaAlassoStar ||
           kind == ModelKind::GamaStar;
}

bool ModelSpec::needs_double_residuals() const {
    return kind == ModelKind::Gamla || kind == ModelKind::GamlaAlasso || kind == ModelKind::Gama;
}

ModelSpec parse_model_spec(const std::string& text) {
    ModelSpec spec;
    std::string name = text, args;
    if (const auto pos = text.find(':'); pos != std::string::npos) {
        name = text.substr(0, pos);
        args = text.substr(pos + 1);
    }
    static const std::vector<std::pair<std::string, ModelKind>> kinds = {
        {"gam", ModelKind::Gam},
        {"gamla-alasso*", ModelKind::GamlaAlassoStar},
        {"gamla-alasso", ModelKind::GamlaAlasso},
        {"gamla*", ModelKind::GamlaStar},
        {"gamla", ModelKind::Gamla},
        {"gama*", ModelKind::GamaStar},
        {"gama", ModelKind::Gama},
        {"ols-augmented", ModelKind::OlsAugmented},
        {"ols", ModelKind::Ols},
        {"lasso", ModelKind::LassoAugmented},
        {"alasso", ModelKind::AlassoAugmented},
        {"am", ModelKind::GetsAugmented},
        {"tree", ModelKind::Tree},
        {"forest", ModelKind::Forest},
        {"boosting", ModelKind::Boosting},
        {"pltr", ModelKind::Pltr},
    };
    bool found = false;
    for (const auto& [n, k] : kinds) {
        if (name == n) {
            spec.kind = k;
            found = true;
            break;
        }
    }
    if (!found) throw std::invalid_argument("unknown model: " + name);

    size_t start = 0;
    while (start < args.size()) {
        size_t end = args.find(';', start);
        if (end == std::string::npos) end = args.size();
        const std::string kv = args.substr(start, end - start);
        start = end + 1;
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("model tuning expects key=value, got: " + kv);
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "lambda")
            spec.rule = lambda_rule_from_string(value);
        else if (key == "alpha")
            spec.alpha = std::stod(value);
        else if (key == "trees")
            spec.forest.n_trees = spec.boost.n_trees = std::stoi(value);
        else if (key == "depth") {
            spec.tree.max_depth = std::stoi(value);
            spec.boost.max_depth = std::stoi(value);
        } else if (key == "min_leaf") {
            spec.tree.min_leaf = spec.forest.min_leaf = spec.boost.min_leaf = std::stoi(value);
        } else if (key == "mtry")
            spec.forest.mtry = std::stoi(value);
        else if (key == "learning_rate")
            spec.boost.learning_rate = std::stod(value);
        else
            throw std::invalid_argument("unknown tuning key: " + key);
    }
    return spec;
}

bool target_is_binary(const Dataset& data) {
    const Eigen::VectorXd y = data.target();
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) return false;
    return true;
}

namespace {

Eigen::VectorXd full_coefficients(const SelectionResult& sel, Eigen::Index p) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (size_t i = 0; i < sel.retained.size(); ++i)
        beta[sel.retained[i]] = sel.coefficients[Eigen::Index(i)];
    return beta;
}

std::vector<std::string> smoothable_features(const Dataset& data) {
    std::vector<std::string> out;
    for (int c : data.feature_indices()) out.push_back(data.names()[size_t(c)]);
    return out;
}

}  // namespace

Eigen::VectorXd FittedModel::predict(const Dataset& data) const {
    if (gam) return plam::predict(*gam, data);
    if (plm) return plam::predict(*plm, data);
    if (linear) {
        const AugmentedDesign design = augment(data, aug_powers, aug_interactions);
        return plam::predict(*linear, design.X);
    }
    if (ensemble) {
        const auto feats = data.feature_indices();
        Eigen::MatrixXd X(data.n_rows(), Eigen::Index(feats.size()));
        for (size_t j = 0; j < feats.size(); ++j) X.col(Eigen::Index(j)) = data.column(feats[j]);
        return ensemble->predict(X);
    }
    if (tree) {
        const auto feats = data.feature_indices();
        Eigen::MatrixXd X(data.n_rows(), Eigen::Index(feats.size()));
        for (size_t j = 0; j < feats.size(); ++j) X.col(Eigen::Index(j)) = data.column(feats[j]);
        return tree->predict(X);
    }
    if (pltr) {
        const auto feats = data.feature_indices();
        Eigen::MatrixXd X(data.n_rows(), Eigen::Index(feats.size()));
        for (size_t j = 0; j < feats.size(); ++j) X.col(Eigen::Index(j)) = data.column(feats[j]);
        return pltr->predict_probability(X);
    }
    throw std::logic_error("FittedModel: nothing fitted");
}

FittedModel fit_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed) {
    return fit_model_with_stage(spec, train, nullptr, seed);
}

FittedModel fit_model_with_stage(const ModelSpec& spec, const Dataset& train,
                                 const GamlaFirstStage* stage, std::uint64_t seed) {
    FittedModel out;
    out.spec = spec;
    out.classification = target_is_binary(train);
    GamOptions gopt;
    gopt.family = out.classification ? Family::LinearProbability : Family::Gaussian;
    gopt.basis_dim = spec.basis_dim;

    auto plm_fit = [&](SelectEngine engine, bool naive) {
        SelectTuning tuning;
        tuning.rule = spec.rule;
        tuning.alpha = spec.alpha;
        std::optional<GamlaFirstStage> local;
        const GamlaFirstStage* st = stage;
        if (!st || (!naive && !st->has_vz)) {
            local = compute_first_stage(train, !naive, gopt);
            st = &*local;
        }
        out.plm = fit_gamla_from_stage(train, *st, engine, tuning, seed, naive);
        out.retained_interactions = out.plm->retained_pairs;
    };

    switch (spec.kind) {
        case ModelKind::Gam:
            out.gam = fit_gam(train, smoothable_features(train), {}, gopt);
            break;
        case ModelKind::Gamla:
            plm_fit(SelectEngine::Lasso, false);
            break;
        case ModelKind::GamlaAlasso:
            plm_fit(SelectEngine::AdaptiveLasso, false);
            break;
        case ModelKind::Gama:
            plm_fit(SelectEngine::Gets, false);
            break;
        case ModelKind::GamlaStar:
            plm_fit(SelectEngine::Lasso, true);
            break;
        case ModelKind::GamlaAlassoStar:
            plm_fit(SelectEngine::AdaptiveLasso, true);
            break;
        case ModelKind::GamaStar:
            plm_fit(SelectEngine::Gets, true);
            break;
        case ModelKind::Ols: {
            out.aug_powers = 1;
            out.aug_interactions = false;
            const AugmentedDesign d = augment(train, 1, false);
            out.linear = fit_ols(d.X, train.target(), d.names);
            break;
        }
        case ModelKind::OlsAugmented: {
            out.aug_powers = 3;
            out.aug_interactions = true;
            const AugmentedDesign d = augment(train, 3, true);
            out.linear = fit_ols(d.X, train.target(), d.names);
            break;
        }
        case ModelKind::LassoAugmented:
        case ModelKind::AlassoAugmented:
        case ModelKind::GetsAugmented: {
            out.aug_powers = 3;
            out.aug_interactions = true;
            const AugmentedDesign d = augment(train, 3, true);
            SelectionResult sel;
            if (spec.kind == ModelKind::LassoAugmented)
                sel = lasso_select(d.X, train.target(), spec.rule, 10, derive_seed(seed, "sel"));
            else if (spec.kind == ModelKind::AlassoAugmented)
                sel = fit_adaptive_lasso(d.X, train.target(), 1.0, spec.rule, 10,
                                         derive_seed(seed, "sel"));
            else
                sel = gets_select(d.X, train.target(), spec.alpha);

            LinearModel lm;
            lm.names = d.names;
            lm.intercept = sel.intercept;
            lm.coefficients = full_coefficients(sel, d.X.cols());
            out.linear = std::move(lm);
            for (size_t c = 0; c < d.interaction_cols.size(); ++c)
                if (sel.retains(d.interaction_cols[c]))
                    out.retained_interactions.push_back(d.interaction_catalog[c]);
            out.selection = std::move(sel);
            break;
        }
        case ModelKind::Tree:
            out.tree = fit_tree(train,
                                out.classification ? TreeTask::Classification
                                                   : TreeTask::Regression,
                                spec.tree);
            break;
        case ModelKind::Forest:
            out.ensemble = fit_random_forest(train,
                                             out.classification ? TreeTask::Classification
                                                                : TreeTask::Regression,
                                             spec.forest, derive_seed(seed, "forest"));
            break;
        case ModelKind::Boosting: {
            BoostOptions bopt = spec.boost;
            bopt.loss = out.classification ? BoostLoss::Logistic : BoostLoss::Squared;
            out.ensemble = fit_gradient_boosting(train, bopt, derive_seed(seed, "boost"));
            break;
        }
        case ModelKind::Pltr:
            out.pltr = fit_pltr(train, derive_seed(seed, "pltr"));
            break;
    }
    return out;
}

}  // namespace plam
