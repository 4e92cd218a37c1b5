#include "plam/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace plam {

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[Eigen::Index(i)] = a[i].get<double>();
    return v;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t from_hex64(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

json spec_to_json(const ModelSpec& spec) {
    json j;
    j["id"] = spec.id();
    j["lambda"] = to_string(spec.rule);
    j["alpha"] = spec.alpha;
    j["basis_dim"] = spec.basis_dim;
    j["tree"] = {{"max_depth", spec.tree.max_depth}, {"min_leaf", spec.tree.min_leaf}};
    j["forest"] = {{"n_trees", spec.forest.n_trees},
                   {"mtry", spec.forest.mtry},
                   {"min_leaf", spec.forest.min_leaf},
                   {"max_depth", spec.forest.max_depth},
                   {"bootstrap", spec.forest.bootstrap}};
    j["boost"] = {{"n_trees", spec.boost.n_trees},
                  {"learning_rate", spec.boost.learning_rate},
                  {"max_depth", spec.boost.max_depth},
                  {"min_leaf", spec.boost.min_leaf},
                  {"validation_fraction", spec.boost.validation_fraction},
                  {"patience", spec.boost.patience}};
    return j;
}

ModelSpec spec_from_json(const json& j) {
    const std::string id = j.at("id").get<std::string>();
    ModelSpec spec = parse_model_spec(id.substr(0, id.find('(')));
    spec.rule = lambda_rule_from_string(j.at("lambda").get<std::string>());
    spec.alpha = j.at("alpha").get<double>();
    spec.basis_dim = j.at("basis_dim").get<int>();
    spec.tree.max_depth = j.at("tree").at("max_depth").get<int>();
    spec.tree.min_leaf = j.at("tree").at("min_leaf").get<int>();
    spec.forest.n_trees = j.at("forest").at("n_trees").get<int>();
    spec.forest.mtry = j.at("forest").at("mtry").get<int>();
    spec.forest.min_leaf = j.at("forest").at("min_leaf").get<int>();
    spec.forest.max_depth = j.at("forest").at("max_depth").get<int>();
    spec.forest.bootstrap = j.at("forest").at("bootstrap").get<bool>();
    spec.boost.n_trees = j.at("boost").at("n_trees").get<int>();
    spec.boost.learning_rate = j.at("boost").at("learning_rate").get<double>();
    spec.boost.max_depth = j.at("boost").at("max_depth").get<int>();
    spec.boost.min_leaf = j.at("boost").at("min_leaf").get<int>();
    spec.boost.validation_fraction = j.at("boost").at("validation_fraction").get<double>();
    spec.boost.patience = j.at("boost").at("patience").get<int>();
    return spec;
}

json additive_to_json(const AdditiveModel& m) {
    json j;
    j["intercept"] = m.intercept;
    j["family"] = to_string(m.family);
    json lt = json::array();
    for (size_t i = 0; i < m.linear_names.size(); ++i)
        lt.push_back({{"name", m.linear_names[i]}, {"coef", m.linear_coefs[Eigen::Index(i)]}});
    j["linear_terms"] = lt;
    json smooths = json::array();
    for (const auto& t : m.smooths) {
        smooths.push_back({{"variable", t.basis.variable_id},
                           {"knots", vec_to_json(t.basis.knots)},
                           {"coefficients", vec_to_json(t.coefficients)},
                           {"psi", t.psi},
                           {"edf", t.edf},
                           {"train_sq_norm", t.train_sq_norm}});
    }
    j["smooths"] = smooths;
    j["fingerprint"] = hex64(m.schema_fingerprint);
    j["n_train"] = m.n_train;
    j["total_edf"] = m.total_edf;
    j["sigma2"] = m.sigma2;
    return j;
}

AdditiveModel additive_from_json(const json& j) {
    AdditiveModel m;
    m.intercept = j.at("intercept").get<double>();
    m.family = family_from_string(j.at("family").get<std::string>());
    const auto& lt = j.at("linear_terms");
    m.linear_coefs.resize(Eigen::Index(lt.size()));
    for (size_t i = 0; i < lt.size(); ++i) {
        m.linear_names.push_back(lt[i].at("name").get<std::string>());
        m.linear_coefs[Eigen::Index(i)] = lt[i].at("coef").get<double>();
    }
    for (const auto& s : j.at("smooths")) {
        SmoothTerm t;
        t.basis = rebuild_basis(s.at("variable").get<std::string>(),
                                vec_from_json(s.at("knots")));
        t.coefficients = vec_from_json(s.at("coefficients"));
        t.psi = s.at("psi").get<double>();
        t.edf = s.at("edf").get<double>();
        t.train_sq_norm = s.at("train_sq_norm").get<double>();
        m.smooths.push_back(std::move(t));
    }
    m.schema_fingerprint = from_hex64(j.at("fingerprint").get<std::string>());
    m.n_train = j.at("n_train").get<Eigen::Index>();
    m.total_edf = j.at("total_edf").get<double>();
    m.sigma2 = j.at("sigma2").get<double>();
    return m;
}

json selection_to_json(const SelectionResult& s) {
    json j;
    j["method"] = s.method;
    j["retained"] = s.retained;
    j["coefficients"] = vec_to_json(s.coefficients);
    j["intercept"] = s.intercept;
    j["lambda"] = s.lambda;
    j["lambda_rule"] = s.lambda_rule;
    j["alpha"] = s.alpha;
    j["gum_returned"] = s.gum_returned;
    j["node_evaluations"] = s.node_evaluations;
    json diags = json::array();
    for (const auto& d : s.diagnostics)
        diags.push_back({{"name", d.name}, {"statistic", d.statistic}, {"p_value", d.p_value}});
    j["diagnostics"] = diags;
    if (s.path) {
        j["path"] = {{"lambdas", vec_to_json(s.path->lambdas)},
                     {"mean_error", vec_to_json(s.path->mean_error)},
                     {"se_error", vec_to_json(s.path->se_error)},
                     {"lambda_min", s.path->lambda_min},
                     {"lambda_1se", s.path->lambda_1se}};
    }
    return j;
}

SelectionResult selection_from_json(const json& j) {
    SelectionResult s;
    s.method = j.at("method").get<std::string>();
    s.retained = j.at("retained").get<std::vector<int>>();
    s.coefficients = vec_from_json(j.at("coefficients"));
    s.intercept = j.at("intercept").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.lambda_rule = j.at("lambda_rule").get<std::string>();
    s.alpha = j.at("alpha").get<double>();
    s.gum_returned = j.at("gum_returned").get<bool>();
    s.node_evaluations = j.at("node_evaluations").get<long>();
    for (const auto& d : j.at("diagnostics")) {
        s.diagnostics.push_back({d.at("name").get<std::string>(),
                                 d.at("statistic").get<double>(),
                                 d.at("p_value").get<double>()});
    }
    if (j.contains("path")) {
        CvCurve c;
        c.lambdas = vec_from_json(j.at("path").at("lambdas"));
        c.mean_error = vec_from_json(j.at("path").at("mean_error"));
        c.se_error = vec_from_json(j.at("path").at("se_error"));
        c.lambda_min = j.at("path").at("lambda_min").get<double>();
        c.lambda_1se = j.at("path").at("lambda_1se").get<double>();
        s.path = std::move(c);
    }
    return s;
}

json plm_to_json(const PartialLinearModel& m) {
    json j;
    j["variant"] = m.variant;
    j["final_fit"] = additive_to_json(m.final_fit);
    json cat = json::array();
    for (const auto& [a, b] : m.catalog) cat.push_back({a, b});
    j["catalog"] = cat;
    j["retained_pairs"] = m.retained_pairs;
    j["selection"] = selection_to_json(m.selection);
    j["gram_check"] = m.gram_check;
    j["base_fingerprint"] = hex64(m.base_fingerprint);
    json fs = json::array();
    for (const auto& f : m.first_stage)
        fs.push_back({{"response", f.response},
                      {"total_edf", f.total_edf},
                      {"rss", f.rss},
                      {"cycles", f.cycles}});
    j["first_stage"] = fs;
    json qs;
    for (const auto& [name, values] : m.quantile_support) qs[name] = values;
    j["quantile_support"] = qs;
    return j;
}

PartialLinearModel plm_from_json(const json& j) {
    PartialLinearModel m;
    m.variant = j.at("variant").get<std::string>();
    m.final_fit = additive_from_json(j.at("final_fit"));
    for (const auto& c : j.at("catalog"))
        m.catalog.emplace_back(c[0].get<std::string>(), c[1].get<std::string>());
    m.retained_pairs = j.at("retained_pairs").get<std::vector<int>>();
    m.selection = selection_from_json(j.at("selection"));
    m.gram_check = j.at("gram_check").get<double>();
    m.base_fingerprint = from_hex64(j.at("base_fingerprint").get<std::string>());
    for (const auto& f : j.at("first_stage"))
        m.first_stage.push_back({f.at("response").get<std::string>(),
                                 f.at("total_edf").get<double>(), f.at("rss").get<double>(),
                                 f.at("cycles").get<int>()});
    for (const auto& [name, values] : j.at("quantile_support").items())
        m.quantile_support[name] = values.get<std::vector<double>>();
    return m;
}

json tree_to_json(const TreeModel& t) {
    json nodes = json::array();
    for (const auto& nd : t.nodes)
        nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value, nd.n_rows,
                         nd.criterion_reduction});
    return {{"task", t.task == TreeTask::Regression ? "regression" : "classification"},
            {"max_depth", t.max_depth},
            {"min_leaf", t.min_leaf},
            {"nodes", nodes}};
}

TreeModel tree_from_json(const json& j) {
    TreeModel t;
    t.task = j.at("task").get<std::string>() == "regression" ? TreeTask::Regression
                                                             : TreeTask::Classification;
    t.max_depth = j.at("max_depth").get<int>();
    t.min_leaf = j.at("min_leaf").get<int>();
    for (const auto& nd : j.at("nodes")) {
        TreeNode node;
        node.feature = nd[0].get<int>();
        node.threshold = nd[1].get<double>();
        node.left = nd[2].get<int>();
        node.right = nd[3].get<int>();
        node.value = nd[4].get<double>();
        node.n_rows = nd[5].get<int>();
        node.criterion_reduction = nd[6].get<double>();
        t.nodes.push_back(node);
    }
    return t;
}

json ensemble_to_json(const EnsembleModel& m) {
    json j;
    j["kind"] = m.kind == EnsembleKind::Forest ? "forest" : "boosting";
    j["task"] = m.task == TreeTask::Regression ? "regression" : "classification";
    j["loss"] = m.loss == BoostLoss::Squared ? "squared" : "logistic";
    j["init_value"] = m.init_value;
    j["learning_rate"] = m.learning_rate;
    j["n_features"] = m.n_features;
    j["train_loss_trace"] = m.train_loss_trace;
    json trees = json::array();
    for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
    j["trees"] = trees;
    return j;
}

EnsembleModel ensemble_from_json(const json& j) {
    EnsembleModel m;
    m.kind = j.at("kind").get<std::string>() == "forest" ? EnsembleKind::Forest
                                                         : EnsembleKind::Boosting;
    m.task = j.at("task").get<std::string>() == "regression" ? TreeTask::Regression
                                                             : TreeTask::Classification;
    m.loss = j.at("loss").get<std::string>() == "squared" ? BoostLoss::Squared
                                                          : BoostLoss::Logistic;
    m.init_value = j.at("init_value").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.n_features = j.at("n_features").get<int>();
    m.train_loss_trace = j.at("train_loss_trace").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
    return m;
}

json linear_to_json(const FittedModel& fm) {
    const LinearModel& m = *fm.linear;
    json j;
    j["names"] = m.names;
    j["coefficients"] = vec_to_json(m.coefficients);
    j["intercept"] = m.intercept;
    j["pinned"] = m.pinned;
    j["aug_powers"] = fm.aug_powers;
    j["aug_interactions"] = fm.aug_interactions;
    return j;
}

json pltr_to_json(const PltrModel& m) {
    json j;
    j["feature_names"] = m.feature_names;
    json v1 = json::array();
    for (const auto& s : m.v1)
        v1.push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"name", s.name}});
    j["v1"] = v1;
    json v2 = json::array();
    for (const auto& s : m.v2)
        v2.push_back({{"root_feature", s.root_feature},
                      {"root_threshold", s.root_threshold},
                      {"follow_left", s.follow_left},
                      {"leaf_feature", s.leaf_feature},
                      {"leaf_threshold", s.leaf_threshold},
                      {"name", s.name}});
    j["v2"] = v2;
    j["coefficients"] = vec_to_json(m.coefficients);
    j["intercept"] = m.intercept;
    j["lambda"] = m.lambda;
    return j;
}

PltrModel pltr_from_json(const json& j) {
    PltrModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("v1")) {
        PltrModel::UnivariateLeaf leaf;
        leaf.feature = s.at("feature").get<int>();
        leaf.threshold = s.at("threshold").get<double>();
        leaf.name = s.at("name").get<std::string>();
        m.v1.push_back(leaf);
    }
    for (const auto& s : j.at("v2")) {
        PltrModel::BivariateLeaf leaf;
        leaf.root_feature = s.at("root_feature").get<int>();
        leaf.root_threshold = s.at("root_threshold").get<double>();
        leaf.follow_left = s.at("follow_left").get<bool>();
        leaf.leaf_feature = s.at("leaf_feature").get<int>();
        leaf.leaf_threshold = s.at("leaf_threshold").get<double>();
        leaf.name = s.at("name").get<std::string>();
        m.v2.push_back(leaf);
    }
    m.coefficients = vec_from_json(j.at("coefficients"));
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.at("lambda").get<double>();
    return m;
}

}  // namespace

json model_to_json(const FittedModel& model, const json& run_config) {
    json j;
    j["schema_version"] = 1;
    j["variant"] = model.spec.id();
    j["config"] = run_config;
    j["spec"] = spec_to_json(model.spec);
    j["classification"] = model.classification;
    if (model.gam) j["additive"] = additive_to_json(*model.gam);
    if (model.plm) j["partial_linear"] = plm_to_json(*model.plm);
    if (model.linear) j["linear"] = linear_to_json(model);
    if (model.selection) j["selection"] = selection_to_json(*model.selection);
    if (model.ensemble) j["ensemble"] = ensemble_to_json(*model.ensemble);
    if (model.tree) j["tree"] = tree_to_json(*model.tree);
    if (model.pltr) j["pltr"] = pltr_to_json(*model.pltr);
    j["retained_interactions"] = model.retained_interactions;
    return j;
}

FittedModel model_from_json(const json& j) {
    FittedModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.classification = j.at("classification").get<bool>();
    if (j.contains("additive")) m.gam = additive_from_json(j.at("additive"));
    if (j.contains("partial_linear")) m.plm = plm_from_json(j.at("partial_linear"));
    if (j.contains("linear")) {
        LinearModel lm;
        const auto& lj = j.at("linear");
        lm.names = lj.at("names").get<std::vector<std::string>>();
        lm.coefficients = vec_from_json(lj.at("coefficients"));
        lm.intercept = lj.at("intercept").get<double>();
        lm.pinned = lj.at("pinned").get<std::vector<int>>();
        m.linear = std::move(lm);
        m.aug_powers = lj.at("aug_powers").get<int>();
        m.aug_interactions = lj.at("aug_interactions").get<bool>();
    }
    if (j.contains("selection")) m.selection = selection_from_json(j.at("selection"));
    if (j.contains("ensemble")) m.ensemble = ensemble_from_json(j.at("ensemble"));
    if (j.contains("tree")) m.tree = tree_from_json(j.at("tree"));
    if (j.contains("pltr")) m.pltr = pltr_from_json(j.at("pltr"));
    m.retained_interactions = j.at("retained_interactions").get<std::vector<int>>();
    return m;
}

json mcs_to_json(const McsResult& mcs, const std::vector<std::string>& model_ids) {
    json j;
    j["alpha"] = mcs.alpha;
    j["bootstrap_count"] = mcs.bootstrap_count;
    json per = json::array();
    for (size_t i = 0; i < model_ids.size(); ++i)
        per.push_back({{"model", model_ids[i]},
                       {"p_value", mcs.p_values[Eigen::Index(i)]},
                       {"surviving", std::find(mcs.surviving.begin(), mcs.surviving.end(),
                                               int(i)) != mcs.surviving.end()}});
    j["models"] = per;
    json order = json::array();
    for (int e : mcs.elimination_order) order.push_back(model_ids[size_t(e)]);
    j["elimination_order"] = order;
    return j;
}

json auc_test_to_json(const AucTestResult& t) {
    return {{"auc1", t.auc1},
            {"auc2", t.auc2},
            {"z", t.z},
            {"p_value", t.p_value},
            {"variance", t.variance}};
}

json report_rows_to_json(const MonteCarloReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row;
        row["model"] = r.model_id;
        if (r.selection) {
            row["potency"] = r.mean_potency;
            row["gauge"] = r.mean_gauge;
        }
        row["mse"] = r.mean_mse;
        row["replications"] = r.replications;
        row["failures"] = r.failures;
        rows.push_back(row);
    }
    return rows;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp);
        out << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename to " + path);
}

void write_json_atomic(const std::string& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

std::string csv_escape_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace plam
