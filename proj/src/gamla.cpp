#include "plam/gamla.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "plam/rng.hpp"
#include "plam/stats.hpp"

namespace plam {

std::string to_string(SelectEngine e) {
    switch (e) {
        case SelectEngine::Lasso: return "lasso";
        case SelectEngine::AdaptiveLasso: return "adaptive-lasso";
        case SelectEngine::Gets: return "gets";
    }
    return "?";
}

InteractionBuild build_interactions(const Dataset& data) {
    const auto feats = data.feature_indices();
    if (feats.size() < 2)
        throw std::invalid_argument("build_interactions: need at least two variables");

    InteractionBuild out;
    std::vector<Eigen::VectorXd> kept_cols;
    for (size_t a = 0; a < feats.size(); ++a) {
        for (size_t b = a + 1; b < feats.size(); ++b) {
            const int j = feats[a], k = feats[b];
            out.pairs.emplace_back(j, k);
            out.pair_names.push_back(data.names()[size_t(j)] + "*" + data.names()[size_t(k)]);
            Eigen::VectorXd prod = data.column(j).cwiseProduct(data.column(k));
            const double var = (prod.array() - prod.mean()).square().sum();
            if (var < 1e-20 * double(prod.size())) {
                out.warnings.push_back({"ConstantInteraction", out.pair_names.back() + " dropped"});
                continue;
            }
            out.kept.push_back(int(out.pairs.size()) - 1);
            kept_cols.push_back(std::move(prod));
        }
    }
    out.Z.resize(data.n_rows(), Eigen::Index(kept_cols.size()));
    for (size_t c = 0; c < kept_cols.size(); ++c) out.Z.col(Eigen::Index(c)) = kept_cols[c];

    // exact or near-exact duplicates stay in the candidate set but get flagged
    if (out.Z.cols() > 1) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.Z);
        qr.setThreshold(1e-10);
        if (qr.rank() < out.Z.cols()) {
            const auto perm = qr.colsPermutation().indices();
            for (Eigen::Index c = qr.rank(); c < perm.size(); ++c)
                out.warnings.push_back(
                    {"CollinearInteraction",
                     out.pair_names[size_t(out.kept[size_t(perm[c])])] + " collinear, retained"});
        }
    }
    return out;
}

DoubleResiduals double_residuals(const Dataset& data, const InteractionBuild& interactions,
                                 GamOptions options) {
    std::vector<std::string> all_features;
    for (int c : data.feature_indices()) all_features.push_back(data.names()[size_t(c)]);
    GamWorkspace ws(data, all_features, {}, options);

    DoubleResiduals dr;
    {
        const AdditiveModel fit = ws.fit(data.target());
        dr.u_y = fit.residuals;
        dr.summaries.push_back({"y", fit.total_edf, fit.residuals.squaredNorm(), fit.cycles});
    }

    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index s = 0; s < interactions.Z.cols(); ++s) {
        const int cat = interactions.kept[size_t(s)];
        try {
            const AdditiveModel fit = ws.fit(interactions.Z.col(s));
            cols.push_back(fit.residuals);
            dr.catalog_index.push_back(cat);
            dr.summaries.push_back({interactions.pair_names[size_t(cat)], fit.total_edf,
                                    fit.residuals.squaredNorm(), fit.cycles});
        } catch (const Error& e) {
            dr.warnings.push_back({"FirstStageFailure",
                                   interactions.pair_names[size_t(cat)] + ": " + e.what()});
        }
    }
    dr.v_Z.resize(data.n_rows(), Eigen::Index(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) dr.v_Z.col(Eigen::Index(c)) = cols[c];

    if (dr.v_Z.cols() > 0) {
        Eigen::MatrixXd gram = dr.v_Z.transpose() * dr.v_Z / double(data.n_rows());
        gram = 0.5 * (gram + gram.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        dr.gram_check = es.eigenvalues().minCoeff();
        dr.gram_max = es.eigenvalues().maxCoeff();
    }
    return dr;
}

ConcurvityReport check_concurvity(const DoubleResiduals& dr) {
    ConcurvityReport rep;
    rep.smallest_eig = dr.gram_check;
    rep.largest_eig = dr.gram_max;
    if (dr.v_Z.cols() == 0) return rep;
    const double tol = 1e-8 * dr.gram_max;
    if (dr.gram_check > tol) return rep;

    rep.ok = false;
    Eigen::MatrixXd gram = dr.v_Z.transpose() * dr.v_Z / double(dr.v_Z.rows());
    gram = 0.5 * (gram + gram.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    std::set<int> offending;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()[i] > tol) continue;
        const Eigen::VectorXd v = es.eigenvectors().col(i).cwiseAbs();
        Eigen::Index argmax = 0;
        v.maxCoeff(&argmax);
        offending.insert(dr.catalog_index[size_t(argmax)]);
        for (Eigen::Index j = 0; j < v.size(); ++j)
            if (v[j] >= 0.3) offending.insert(dr.catalog_index[size_t(j)]);
    }
    rep.offending.assign(offending.begin(), offending.end());
    return rep;
}

GamlaFirstStage compute_first_stage(const Dataset& data, bool with_vz, GamOptions options) {
    GamlaFirstStage stage;
    stage.gam_options = options;
    stage.interactions = build_interactions(data);
    if (with_vz) {
        stage.residuals = double_residuals(data, stage.interactions, options);
        stage.has_vz = true;
    } else {
        std::vector<std::string> all_features;
        for (int c : data.feature_indices()) all_features.push_back(data.names()[size_t(c)]);
        GamWorkspace ws(data, all_features, {}, options);
        const AdditiveModel fit = ws.fit(data.target());
        stage.residuals.u_y = fit.residuals;
        stage.residuals.summaries.push_back(
            {"y", fit.total_edf, fit.residuals.squaredNorm(), fit.cycles});
        stage.has_vz = false;
    }
    return stage;
}

namespace {

// dataset with the retained interaction products appended as linear columns
Dataset augment_with_pairs(const Dataset& data,
                           const std::vector<std::pair<int, int>>& pairs,
                           const std::vector<std::string>& names) {
    const Eigen::Index n = data.n_rows();
    Eigen::MatrixXd vals(n, data.n_cols() + Eigen::Index(pairs.size()));
    vals.leftCols(data.n_cols()) = data.values();
    std::vector<std::string> all_names = data.names();
    std::vector<VarKind> kinds = data.kinds();
    for (size_t s = 0; s < pairs.size(); ++s) {
        vals.col(data.n_cols() + Eigen::Index(s)) =
            data.column(pairs[s].first).cwiseProduct(data.column(pairs[s].second));
        all_names.push_back(names[s]);
        kinds.push_back(VarKind::Excluded);
    }
    return Dataset(all_names, std::move(vals), data.target_index(), std::move(kinds));
}

}  // namespace

PartialLinearModel fit_gamla_from_stage(const Dataset& data, const GamlaFirstStage& stage,
                                        SelectEngine engine, SelectTuning tuning,
                                        std::uint64_t seed, bool naive) {
    const auto& inter = stage.interactions;
    PartialLinearModel model;
    model.base_fingerprint = data.schema_fingerprint();
    model.first_stage = stage.residuals.summaries;
    model.gram_check = stage.residuals.gram_check;
    for (const auto& [j, k] : inter.pairs)
        model.catalog.emplace_back(data.names()[size_t(j)], data.names()[size_t(k)]);

    // candidate matrix and the catalog index backing each of its columns
    Eigen::MatrixXd cand;
    std::vector<int> cand_catalog;
    if (naive) {
        cand = inter.Z;
        cand_catalog = inter.kept;
    } else {
        if (!stage.has_vz)
            throw std::invalid_argument("first stage lacks residualized interactions");
        const ConcurvityReport rep = check_concurvity(stage.residuals);
        if (!rep.ok) {
            const double frac =
                double(rep.offending.size()) / double(std::max<size_t>(1, inter.pairs.size()));
            if (frac > 0.20)
                throw ConcurvityViolation(std::to_string(rep.offending.size()) +
                                          " of " + std::to_string(inter.pairs.size()) +
                                          " interaction columns violate positive definiteness");
            std::set<int> bad(rep.offending.begin(), rep.offending.end());
            std::vector<Eigen::Index> keep;
            for (Eigen::Index c = 0; c < stage.residuals.v_Z.cols(); ++c)
                if (!bad.count(stage.residuals.catalog_index[size_t(c)])) keep.push_back(c);
            cand.resize(stage.residuals.v_Z.rows(), Eigen::Index(keep.size()));
            for (size_t c = 0; c < keep.size(); ++c) {
                cand.col(Eigen::Index(c)) = stage.residuals.v_Z.col(keep[c]);
                cand_catalog.push_back(stage.residuals.catalog_index[size_t(keep[c])]);
            }
            for (int cat : rep.offending)
                model.warnings.push_back(
                    {"ConcurvityDrop", inter.pair_names[size_t(cat)] + " excluded from selection"});
        } else {
            cand = stage.residuals.v_Z;
            cand_catalog = stage.residuals.catalog_index;
        }
    }

    // step 2: selection on (u_y, candidates)
    const Eigen::VectorXd& u_y = stage.residuals.u_y;
    if (cand.cols() > 0) {
        switch (engine) {
            case SelectEngine::Lasso:
                model.selection = lasso_select(cand, u_y, tuning.rule, 10, derive_seed(seed, "sel"));
                break;
            case SelectEngine::AdaptiveLasso:
                model.selection =
                    fit_adaptive_lasso(cand, u_y, 1.0, tuning.rule, 10, derive_seed(seed, "sel"));
                break;
            case SelectEngine::Gets:
                model.selection = gets_select(cand, u_y, tuning.alpha);
                break;
        }
        // map candidate-column indices back to catalog entries
        std::vector<int> retained_catalog;
        for (int c : model.selection.retained) retained_catalog.push_back(cand_catalog[size_t(c)]);
        model.selection.retained = retained_catalog;
        model.retained_pairs = retained_catalog;
    }

    std::string variant = to_string(engine) == "gets" ? "gama" : "gamla";
    if (engine == SelectEngine::AdaptiveLasso) variant = "gamla-alasso";
    if (naive) variant += "*";
    model.variant = variant;

    // step 3: additive refit with the retained interactions entering linearly
    std::vector<std::pair<int, int>> sel_pairs;
    std::vector<std::string> sel_names;
    for (int cat : model.retained_pairs) {
        sel_pairs.push_back(inter.pairs[size_t(cat)]);
        sel_names.push_back(inter.pair_names[size_t(cat)]);
    }
    const Dataset refit_data = augment_with_pairs(data, sel_pairs, sel_names);
    std::vector<std::string> smooth_vars;
    for (int c : data.feature_indices()) smooth_vars.push_back(data.names()[size_t(c)]);
    model.final_fit = fit_gam(refit_data, smooth_vars, sel_names, stage.gam_options);

    // quantile support for marginal effects
    std::set<std::string> involved;
    for (int cat : model.retained_pairs) {
        involved.insert(model.catalog[size_t(cat)].first);
        involved.insert(model.catalog[size_t(cat)].second);
    }
    for (const auto& name : involved) {
        const Eigen::VectorXd col = data.column(data.column_index(name));
        std::vector<double> sorted(col.data(), col.data() + col.size());
        std::sort(sorted.begin(), sorted.end());
        model.quantile_support[name] = std::move(sorted);
    }
    for (const auto& w : inter.warnings) model.warnings.push_back(w);
    for (const auto& w : stage.residuals.warnings) model.warnings.push_back(w);
    return model;
}

Eigen::VectorXd predict(const PartialLinearModel& model, const Dataset& newdata) {
    if (newdata.schema_fingerprint() != model.base_fingerprint)
        throw SchemaMismatch("prediction data schema differs from training schema");
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::string> names;
    for (int cat : model.retained_pairs) {
        const auto& [a, b] = model.catalog[size_t(cat)];
        pairs.emplace_back(newdata.column_index(a), newdata.column_index(b));
        names.push_back(a + "*" + b);
    }
    const Dataset augmented = augment_with_pairs(newdata, pairs, names);
    return predict(model.final_fit, augmented);
}

PartialLinearModel fit_gamla(const Dataset& data, SelectEngine method, LambdaRule lambda_rule,
                             std::uint64_t seed) {
    if (method == SelectEngine::Gets)
        throw std::invalid_argument("fit_gamla: use fit_gama for the gets engine");
    const GamlaFirstStage stage = compute_first_stage(data, true);
    SelectTuning tuning;
    tuning.rule = lambda_rule;
    return fit_gamla_from_stage(data, stage, method, tuning, seed, false);
}

PartialLinearModel fit_gama(const Dataset& data, double alpha, std::uint64_t seed) {
    const GamlaFirstStage stage = compute_first_stage(data, true);
    SelectTuning tuning;
    tuning.alpha = alpha;
    return fit_gamla_from_stage(data, stage, SelectEngine::Gets, tuning, seed, false);
}

PartialLinearModel fit_naive_variants(const Dataset& data, SelectEngine engine,
                                      SelectTuning tuning, std::uint64_t seed) {
    const GamlaFirstStage stage = compute_first_stage(data, false);
    return fit_gamla_from_stage(data, stage, engine, tuning, seed, true);
}

MarginalEffectCurve marginal_effects(const PartialLinearModel& model, const std::string& variable,
                                     Eigen::Ref<const Eigen::VectorXd> grid,
                                     const std::vector<double>& context_quantiles) {
    const SmoothTerm* term = model.final_fit.smooth_for(variable);
    if (!term) throw UnknownVariable(variable + " has no smooth term");

    MarginalEffectCurve out;
    out.variable = variable;
    out.grid = grid;
    out.base.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) out.base[i] = term->eval_deriv(grid[i]);

    // partner variables of the retained pairs involving `variable`, with the
    // linear coefficients from the refit
    std::vector<std::pair<std::string, double>> partners;
    for (int cat : model.retained_pairs) {
        const auto& [a, b] = model.catalog[size_t(cat)];
        if (a != variable && b != variable) continue;
        const std::string partner = (a == variable) ? b : a;
        const std::string pair_name = a + "*" + b;
        double coef = 0.0;
        for (size_t l = 0; l < model.final_fit.linear_names.size(); ++l)
            if (model.final_fit.linear_names[l] == pair_name)
                coef = model.final_fit.linear_coefs[Eigen::Index(l)];
        partners.emplace_back(partner, coef);
    }

    for (double q : context_quantiles) {
        MarginalEffectCurve::Context ctx;
        ctx.label = "q" + std::to_string(q);
        ctx.c_j = 0.0;
        for (const auto& [partner, coef] : partners) {
            const auto it = model.quantile_support.find(partner);
            if (it == model.quantile_support.end()) continue;
            ctx.c_j += coef * stats::quantile_sorted(it->second, q);
        }
        ctx.curve = out.base.array() + ctx.c_j;
        out.contexts.push_back(std::move(ctx));
    }
    return out;
}

}  // namespace plam
