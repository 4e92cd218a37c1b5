#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "plam/evaluation.hpp"
#include "plam/model_io.hpp"
#include "plam/models.hpp"
#include "plam/simulation.hpp"

namespace {

using plam::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitFit = 4;

std::map<std::string, plam::VarKind> parse_kinds(const std::string& text) {
    std::map<std::string, plam::VarKind> out;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const std::string kv = text.substr(start, end - start);
        start = end + 1;
        if (kv.empty()) continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--kinds expects name=kind, got: " + kv);
        out[kv.substr(0, eq)] = plam::var_kind_from_string(kv.substr(eq + 1));
    }
    return out;
}

plam::ModelSpec spec_from_args(const std::string& model, const std::string& tuning) {
    std::string text = model;
    if (!tuning.empty() && model.find(':') == std::string::npos) text += ":" + tuning;
    return plam::parse_model_spec(text);
}

json dataset_config(const plam::Dataset& data) {
    json cols = json::array();
    for (size_t i = 0; i < data.names().size(); ++i)
        cols.push_back({{"name", data.names()[i]}, {"kind", plam::to_string(data.kind(int(i)))}});
    return {{"provenance", data.provenance()},
            {"target", data.target_name()},
            {"columns", cols}};
}

std::vector<double> parse_levels(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

int cmd_fit(const std::string& data_path, const std::string& target, const std::string& model,
            const std::string& tuning, const std::string& kinds, std::uint64_t seed,
            const std::string& out_path) {
    const plam::ModelSpec spec = spec_from_args(model, tuning);
    plam::IngestReport ingest;
    const plam::Dataset data = plam::ingest_csv(data_path, target, parse_kinds(kinds), &ingest);

    plam::FittedModel fitted;
    try {
        fitted = plam::fit_model(spec, data, seed);
    } catch (const plam::Error& e) {
        std::cerr << "fit failed: " << e.what() << "\n";
        return kExitFit;
    }

    json config = {{"command", "fit"},
                   {"model", spec.id()},
                   {"seed", seed},
                   {"data", dataset_config(data)},
                   {"rows_rejected", ingest.rows_rejected}};
    if (!out_path.empty()) plam::write_json_atomic(out_path, plam::model_to_json(fitted, config));

    std::printf("model: %s\n", spec.id().c_str());
    if (spec.selects_interactions())
        std::printf("retained interactions: %zu\n", fitted.retained_interactions.size());
    const plam::AdditiveModel* am =
        fitted.gam ? &*fitted.gam : (fitted.plm ? &fitted.plm->final_fit : nullptr);
    if (am) {
        std::printf("%-16s %8s %4s %10s %10s\n", "smooth", "edf", "df", "F", "p");
        for (const auto& row : plam::smooth_summary(*am))
            std::printf("%-16s %8.3f %4.0f %10.3f %10.4f\n", row.variable.c_str(), row.edf,
                        row.ref_df, row.f_stat, row.p_value);
    }
    if (fitted.plm && fitted.plm->selection.method == "gets")
        std::printf("gets nodes evaluated: %ld\n", fitted.plm->selection.node_evaluations);
    if (fitted.plm && fitted.plm->selection.lambda > 0.0)
        std::printf("lambda (%s): %g\n", fitted.plm->selection.lambda_rule.c_str(),
                    fitted.plm->selection.lambda);
    if (!out_path.empty()) std::printf("model written to %s\n", out_path.c_str());
    return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& target,
                 const std::vector<std::string>& models, const std::string& tuning,
                 const std::string& kinds, int k, std::uint64_t seed, double alpha_mcs,
                 const std::string& out_path) {
    plam::IngestReport ingest;
    const plam::Dataset data = plam::ingest_csv(data_path, target, parse_kinds(kinds), &ingest);
    const bool classify = plam::target_is_binary(data);

    std::vector<plam::ModelSpec> specs;
    for (const auto& m : models) specs.push_back(spec_from_args(m, tuning));

    std::vector<plam::CvPredictions> preds;
    for (const auto& spec : specs) {
        try {
            preds.push_back(plam::kfold_cv(data, spec, k, seed));
        } catch (const plam::Error& e) {
            std::cerr << "evaluation of " << spec.id() << " failed: " << e.what() << "\n";
            return kExitFit;
        }
        std::fflush(stdout);
    }

    json config = {{"command", "evaluate"}, {"k", k},   {"seed", seed},
                   {"alpha_mcs", alpha_mcs}, {"data", dataset_config(data)}};
    json results = json::array();
    const Eigen::VectorXd y = data.target();

    if (classify) {
        std::printf("%-28s %10s %14s\n", "model", "auc", "interactions");
        for (const auto& p : preds) {
            const double a = plam::auc(p.predictions, y);
            json row = {{"model", p.model_id}, {"auc", a}};
            if (p.mean_interactions >= 0.0) row["mean_interactions"] = p.mean_interactions;
            results.push_back(row);
            std::printf("%-28s %10.4f %14s\n", p.model_id.c_str(), a,
                        p.mean_interactions >= 0.0
                            ? std::to_string(p.mean_interactions).c_str()
                            : "-");
        }
        json matrix = json::array();
        std::printf("pairwise AUC test p-values:\n");
        for (size_t i = 0; i < preds.size(); ++i) {
            json line = json::array();
            for (size_t j = 0; j < preds.size(); ++j) {
                if (j <= i) {
                    line.push_back(nullptr);
                    continue;
                }
                const auto t = plam::auc_test(preds[i].predictions, preds[j].predictions, y);
                line.push_back(t.p_value);
                std::printf("  %s vs %s: p=%.4f\n", preds[i].model_id.c_str(),
                            preds[j].model_id.c_str(), t.p_value);
            }
            matrix.push_back(line);
        }
        json out = {{"config", config}, {"models", results}, {"auc_test_p", matrix}};
        if (!out_path.empty()) plam::write_json_atomic(out_path, out);
    } else {
        Eigen::MatrixXd losses(data.n_rows(), Eigen::Index(preds.size()));
        for (size_t i = 0; i < preds.size(); ++i)
            losses.col(Eigen::Index(i)) = (preds[i].predictions - y).array().square();
        const plam::McsResult m = plam::mcs(losses, 10000, alpha_mcs, seed);

        std::printf("%-28s %10s %8s %14s\n", "model", "mse", "mcs-p", "interactions");
        for (size_t i = 0; i < preds.size(); ++i) {
            const double e = plam::mse(preds[i].predictions, y);
            json row = {{"model", preds[i].model_id},
                        {"mse", e},
                        {"mcs_p", m.p_values[Eigen::Index(i)]}};
            if (preds[i].mean_interactions >= 0.0)
                row["mean_interactions"] = preds[i].mean_interactions;
            results.push_back(row);
            std::printf("%-28s %10.3f %8.3f %14s\n", preds[i].model_id.c_str(), e,
                        m.p_values[Eigen::Index(i)],
                        preds[i].mean_interactions >= 0.0
                            ? std::to_string(preds[i].mean_interactions).c_str()
                            : "-");
        }
        std::vector<std::string> ids;
        for (const auto& p : preds) ids.push_back(p.model_id);
        json out = {{"config", config},
                    {"models", results},
                    {"mcs", plam::mcs_to_json(m, ids)}};
        if (!out_path.empty()) plam::write_json_atomic(out_path, out);
    }
    return 0;
}

int cmd_simulate(int setup, const std::string& models, const std::string& tuning, int n_r,
                 std::uint64_t seed, const std::string& out_prefix) {
    plam::DgpConfig cfg;
    cfg.setup = setup;
    cfg.seed = seed;

    std::vector<plam::ModelSpec> specs;
    std::stringstream ss(models);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) specs.push_back(spec_from_args(tok, tuning));
    }
    if (specs.empty()) {
        std::cerr << "no models given\n";
        return kExitConfig;
    }

    const plam::MonteCarloReport report = plam::run_monte_carlo(cfg, specs, n_r, seed);

    std::printf("%-28s %10s %10s %10s %6s %5s\n", "Model", "Potency", "Gauge", "MSE", "reps",
                "fail");
    std::string csv = "model,potency,gauge,mse,replications,failures\n";
    for (const auto& row : report.rows) {
        if (row.selection)
            std::printf("%-28s %10.3f %10.3f %10.3f %6d %5d\n", row.model_id.c_str(),
                        row.mean_potency, row.mean_gauge, row.mean_mse, row.replications,
                        row.failures);
        else
            std::printf("%-28s %10s %10s %10.3f %6d %5d\n", row.model_id.c_str(), "-", "-",
                        row.mean_mse, row.replications, row.failures);
        csv += row.model_id + ",";
        csv += row.selection ? plam::csv_escape_number(row.mean_potency) : "";
        csv += ",";
        csv += row.selection ? plam::csv_escape_number(row.mean_gauge) : "";
        csv += "," + plam::csv_escape_number(row.mean_mse) + "," +
               std::to_string(row.replications) + "," + std::to_string(row.failures) + "\n";
    }

    if (!out_prefix.empty()) {
        json config = {{"command", "simulate"}, {"setup", setup},
                       {"n_r", n_r},            {"seed", seed},
                       {"p", cfg.p},            {"q", cfg.q},
                       {"n_in", cfg.n_in},      {"n_out", cfg.n_out}};
        plam::write_json_atomic(out_prefix + ".json",
                                json{{"config", config},
                                     {"rows", plam::report_rows_to_json(report)}});
        plam::write_text_atomic(out_prefix + ".csv", csv);
        std::printf("report written to %s.{json,csv}\n", out_prefix.c_str());
    }
    return 0;
}

int cmd_export_effects(const std::string& model_path, const std::string& variable, int grid_size,
                       const std::string& levels, const std::string& out_prefix) {
    const plam::FittedModel model = plam::model_from_json(plam::read_json_file(model_path));
    const plam::AdditiveModel* am =
        model.gam ? &*model.gam : (model.plm ? &model.plm->final_fit : nullptr);
    if (!am) {
        std::cerr << "model has no smooth terms\n";
        return kExitConfig;
    }
    const plam::SmoothTerm* term = am->smooth_for(variable);
    if (!term) {
        std::cerr << "no smooth term for " << variable << "\n";
        return kExitConfig;
    }
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(
        grid_size, term->basis.knots[0], term->basis.knots[term->basis.dim - 1]);

    const auto curve = plam::smooth_curve(*am, variable, grid);
    std::string smooth_csv = "x,value\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        smooth_csv += plam::csv_escape_number(curve.x[i]) + "," +
                      plam::csv_escape_number(curve.value[i]) + "\n";
    plam::write_text_atomic(out_prefix + "_smooth.csv", smooth_csv);

    std::string marg_csv = "x,label,value\n";
    if (model.plm) {
        const auto me =
            plam::marginal_effects(*model.plm, variable, grid, parse_levels(levels));
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            marg_csv += plam::csv_escape_number(me.grid[i]) + ",base," +
                        plam::csv_escape_number(me.base[i]) + "\n";
        for (const auto& ctx : me.contexts)
            for (Eigen::Index i = 0; i < grid.size(); ++i)
                marg_csv += plam::csv_escape_number(me.grid[i]) + "," + ctx.label + "," +
                            plam::csv_escape_number(ctx.curve[i]) + "\n";
    } else {
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            marg_csv += plam::csv_escape_number(grid[i]) + ",base," +
                        plam::csv_escape_number(term->eval_deriv(grid[i])) + "\n";
    }
    plam::write_text_atomic(out_prefix + "_marginal.csv", marg_csv);
    std::printf("curves written to %s_{smooth,marginal}.csv\n", out_prefix.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partial linear additive models: GAM(L)A estimation and benchmarks"};
    app.require_subcommand(1);

    std::string data_path, target, model, tuning, kinds, out_path;
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    int k = 10;
    double alpha_mcs = 0.10;
    int setup = 1, n_r = 200, grid_size = 200;
    std::string model_file, variable, levels = "0.025,0.5,0.975", sim_models;

    auto* fit = app.add_subcommand("fit", "fit one model and write the model JSON");
    fit->add_option("--data", data_path)->required();
    fit->add_option("--target", target)->required();
    fit->add_option("--model", model)->required();
    fit->add_option("--tuning", tuning);
    fit->add_option("--kinds", kinds);
    fit->add_option("--seed", seed);
    fit->add_option("--out", out_path);

    auto* ev = app.add_subcommand("evaluate", "k-fold CV comparison on shared folds");
    ev->add_option("--data", data_path)->required();
    ev->add_option("--target", target)->required();
    ev->add_option("--model", models)->required();
    ev->add_option("--tuning", tuning);
    ev->add_option("--kinds", kinds);
    ev->add_option("--k", k);
    ev->add_option("--seed", seed);
    ev->add_option("--alpha-mcs", alpha_mcs);
    ev->add_option("--out", out_path);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo sweep over a DGP setup");
    sim->add_option("--setup", setup)->check(CLI::Range(1, 4));
    sim->add_option("--models", sim_models)->required();
    sim->add_option("--tuning", tuning);
    sim->add_option("--replications", n_r);
    sim->add_option("--seed", seed);
    sim->add_option("--out", out_path);

    auto* ex = app.add_subcommand("export-effects", "smooth and marginal-effect curve CSVs");
    ex->add_option("--model-file", model_file)->required();
    ex->add_option("--variable", variable)->required();
    ex->add_option("--grid-size", grid_size);
    ex->add_option("--quantiles", levels);
    ex->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (fit->parsed()) return cmd_fit(data_path, target, model, tuning, kinds, seed, out_path);
        if (ev->parsed())
            return cmd_evaluate(data_path, target, models, tuning, kinds, k, seed, alpha_mcs,
                                out_path);
        if (sim->parsed()) return cmd_simulate(setup, sim_models, tuning, n_r, seed, out_path);
        if (ex->parsed())
            return cmd_export_effects(model_file, variable, grid_size, levels, out_path);
    } catch (const plam::MissingTarget& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    } catch (const plam::NonNumericCell& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    } catch (const plam::EmptyFile& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    } catch (const plam::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitFit;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
