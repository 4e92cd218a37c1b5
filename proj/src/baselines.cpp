#include "plam/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "plam/rng.hpp"
#include "plam/stats.hpp"

namespace plam {

// ---------------------------------------------------------------------------
// augmented designs and OLS
// ---------------------------------------------------------------------------

AugmentedDesign augment(const Dataset& data, int powers, bool with_interactions) {
    if (powers < 1 || powers > 3) throw std::invalid_argument("augment: powers must be 1..3");
    const auto feats = data.feature_indices();
    AugmentedDesign out;
    std::vector<Eigen::VectorXd> cols;

    for (int c : feats) {
        cols.push_back(data.column(c));
        out.names.push_back(data.names()[size_t(c)]);
    }
    for (int h = 2; h <= powers; ++h) {
        for (int c : feats) {
            if (data.kind(c) != VarKind::Continuous) continue;
            cols.push_back(data.column(c).array().pow(double(h)));
            out.names.push_back(data.names()[size_t(c)] + "^" + std::to_string(h));
        }
    }
    if (with_interactions) {
        for (size_t a = 0; a < feats.size(); ++a) {
            for (size_t b = a + 1; b < feats.size(); ++b) {
                const int j = feats[a], k = feats[b];
                out.catalog.emplace_back(j, k);
                out.catalog_names.push_back(data.names()[size_t(j)] + "*" +
                                            data.names()[size_t(k)]);
                Eigen::VectorXd prod = data.column(j).cwiseProduct(data.column(k));
                const double var = (prod.array() - prod.mean()).square().sum();
                if (var < 1e-20 * double(prod.size())) {
                    out.warnings.push_back(
                        {"ConstantInteraction", out.catalog_names.back() + " dropped"});
                    continue;
                }
                out.interaction_cols.push_back(int(cols.size()));
                out.interaction_catalog.push_back(int(out.catalog.size()) - 1);
                cols.push_back(std::move(prod));
                out.names.push_back(out.catalog_names.back());
            }
        }
    }
    out.X.resize(data.n_rows(), Eigen::Index(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) out.X.col(Eigen::Index(c)) = cols[c];
    return out;
}

LinearModel fit_ols(Eigen::Ref<const Eigen::MatrixXd> X, Eigen::Ref<const Eigen::VectorXd> y,
                    std::vector<std::string> names, bool ridge_of_last_resort) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (n <= p && !ridge_of_last_resort)
        throw std::invalid_argument("fit_ols: need n > columns (or the ridge fallback)");

    LinearModel model;
    model.names = names.empty() ? std::vector<std::string>(size_t(p)) : std::move(names);

    Eigen::MatrixXd D(n, p + 1);
    D.col(0).setOnes();
    D.rightCols(p) = X;

    if (n <= p) {
        // ridge of last resort keeps the call usable on oversized designs
        const double kappa = 1e-6 * D.squaredNorm() / double(n);
        Eigen::MatrixXd G = D.transpose() * D;
        G.diagonal().array() += kappa;
        const Eigen::VectorXd b = G.ldlt().solve(D.transpose() * y);
        model.intercept = b[0];
        model.coefficients = b.tail(p);
        model.warnings.push_back({"RidgeFallback", "n <= columns"});
        return model;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    Eigen::VectorXd b = qr.solve(y);
    if (qr.rank() < D.cols()) {
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index c = qr.rank(); c < perm.size(); ++c) {
            b[perm[c]] = 0.0;
            if (perm[c] > 0) model.pinned.push_back(int(perm[c]) - 1);
        }
        // re-solve on the retained columns so the fit is unchanged
        std::vector<Eigen::Index> keep;
        for (Eigen::Index c = 0; c < qr.rank(); ++c) keep.push_back(perm[c]);
        std::sort(keep.begin(), keep.end());
        Eigen::MatrixXd Dk(n, Eigen::Index(keep.size()));
        for (size_t c = 0; c < keep.size(); ++c) Dk.col(Eigen::Index(c)) = D.col(keep[c]);
        const Eigen::VectorXd bk = (Dk.transpose() * Dk).ldlt().solve(Dk.transpose() * y);
        b.setZero();
        for (size_t c = 0; c < keep.size(); ++c) b[keep[c]] = bk[Eigen::Index(c)];
        model.warnings.push_back(
            {"RankDeficient", std::to_string(model.pinned.size()) + " columns pinned to zero"});
    }
    model.intercept = b[0];
    model.coefficients = b.tail(p);
    return model;
}

Eigen::VectorXd predict(const LinearModel& model, Eigen::Ref<const Eigen::MatrixXd> X) {
    return (X * model.coefficients).array() + model.intercept;
}

// ---------------------------------------------------------------------------
// CART
// ---------------------------------------------------------------------------

namespace {

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double reduction = 0.0;
};

// impurity mass: SSE for regression, n * gini for classification; both are
// additive over children so reduction = parent - left - right
double impurity_mass(TreeTask task, double sum, double sum_sq, double n) {
    if (n <= 0.0) return 0.0;
    if (task == TreeTask::Regression) return sum_sq - sum * sum / n;
    const double p = sum / n;
    return 2.0 * n * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, TreeTask task,
                TreeOptions options, int mtry, std::mt19937_64* rng)
        : X_(X), y_(y), task_(task), opt_(options), mtry_(mtry), rng_(rng) {}

    TreeModel build(std::vector<int> rows) {
        TreeModel model;
        model.task = task_;
        model.max_depth = opt_.max_depth;
        model.min_leaf = opt_.min_leaf;
        nodes_ = &model.nodes;
        grow(std::move(rows), 0);
        return model;
    }

private:
    int grow(std::vector<int> rows, int depth) {
        const int id = int(nodes_->size());
        nodes_->push_back({});
        auto& node = (*nodes_)[size_t(id)];
        node.n_rows = int(rows.size());

        double sum = 0.0, sum_sq = 0.0;
        for (int r : rows) {
            sum += y_[r];
            sum_sq += y_[r] * y_[r];
        }
        const double n = double(rows.size());
        node.value = sum / n;

        const double parent_mass = impurity_mass(task_, sum, sum_sq, n);
        const bool depth_ok = opt_.max_depth <= 0 || depth < opt_.max_depth;
        if (!depth_ok || int(rows.size()) < 2 * opt_.min_leaf || parent_mass <= 1e-12)
            return id;

        const BestSplit split = best_split(rows, sum, sum_sq, parent_mass);
        if (!split.found) return id;

        std::vector<int> left, right;
        left.reserve(rows.size());
        right.reserve(rows.size());
        for (int r : rows)
            (X_(r, split.feature) <= split.threshold ? left : right).push_back(r);

        node.feature = split.feature;
        node.threshold = split.threshold;
        node.criterion_reduction = split.reduction;
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        (*nodes_)[size_t(id)].left = l;
        (*nodes_)[size_t(id)].right = r;
        return id;
    }

    BestSplit best_split(const std::vector<int>& rows, double sum, double sum_sq,
                         double parent_mass) {
        std::vector<int> features(size_t(X_.cols()));
        std::iota(features.begin(), features.end(), 0);
        if (mtry_ > 0 && mtry_ < int(features.size()) && rng_) {
            // partial Fisher-Yates: first mtry entries form the sample
            for (int i = 0; i < mtry_; ++i) {
                std::uniform_int_distribution<int> U(i, int(features.size()) - 1);
                std::swap(features[size_t(i)], features[size_t(U(*rng_))]);
            }
            features.resize(size_t(mtry_));
            std::sort(features.begin(), features.end());
        }

        BestSplit best;
        std::vector<std::pair<double, double>> xy(rows.size());
        for (int f : features) {
            for (size_t i = 0; i < rows.size(); ++i)
                xy[i] = {X_(rows[i], f), y_[rows[i]]};
            std::sort(xy.begin(), xy.end());
            double lsum = 0.0, lsq = 0.0;
            const double tot = double(rows.size());
            for (size_t i = 0; i + 1 < xy.size(); ++i) {
                lsum += xy[i].second;
                lsq += xy[i].second * xy[i].second;
                if (xy[i].first == xy[i + 1].first) continue;
                const double nl = double(i + 1), nr = tot - nl;
                if (nl < opt_.min_leaf || nr < opt_.min_leaf) continue;
                const double mass = impurity_mass(task_, lsum, lsq, nl) +
                                    impurity_mass(task_, sum - lsum, sum_sq - lsq, nr);
                const double reduction = parent_mass - mass;
                if (reduction > best.reduction + 1e-12 || !best.found) {
                    if (reduction <= 0.0 && best.found) continue;
                    best.found = true;
                    best.feature = f;
                    best.threshold = 0.5 * (xy[i].first + xy[i + 1].first);
                    best.reduction = reduction;
                }
            }
        }
        if (best.found && best.reduction <= 1e-12) best.found = false;
        return best;
    }

    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    TreeTask task_;
    TreeOptions opt_;
    int mtry_ = 0;
    std::mt19937_64* rng_ = nullptr;
    std::vector<TreeNode>* nodes_ = nullptr;
};

Eigen::MatrixXd feature_matrix(const Dataset& data) {
    const auto feats = data.feature_indices();
    Eigen::MatrixXd X(data.n_rows(), Eigen::Index(feats.size()));
    for (size_t j = 0; j < feats.size(); ++j) X.col(Eigen::Index(j)) = data.column(feats[j]);
    return X;
}

std::vector<int> all_rows(Eigen::Index n) {
    std::vector<int> rows(size_t(n), 0);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

double TreeModel::predict_row(const Eigen::RowVectorXd& x) const {
    int id = 0;
    while (nodes[size_t(id)].feature >= 0) {
        const auto& nd = nodes[size_t(id)];
        id = (x[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[size_t(id)].value;
}

Eigen::VectorXd TreeModel::predict(Eigen::Ref<const Eigen::MatrixXd> X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
    return out;
}

int TreeModel::n_leaves() const {
    int c = 0;
    for (const auto& nd : nodes) c += (nd.feature < 0);
    return c;
}

TreeModel fit_tree_matrix(Eigen::Ref<const Eigen::MatrixXd> X,
                          Eigen::Ref<const Eigen::VectorXd> y, TreeTask task,
                          TreeOptions options) {
    if (X.rows() < 2 * options.min_leaf)
        throw std::invalid_argument("fit_tree: need n >= 2 min_leaf");
    const Eigen::MatrixXd Xm = X;
    const Eigen::VectorXd ym = y;
    TreeBuilder builder(Xm, ym, task, options, 0, nullptr);
    return builder.build(all_rows(X.rows()));
}

TreeModel fit_tree(const Dataset& data, TreeTask task, TreeOptions options) {
    return fit_tree_matrix(feature_matrix(data), data.target(), task, options);
}

Eigen::VectorXd EnsembleModel::predict(Eigen::Ref<const Eigen::MatrixXd> X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    if (kind == EnsembleKind::Forest) {
        for (const auto& t : trees) out += t.predict(X);
        out /= double(trees.size());
        return out;
    }
    out.array() += init_value;
    for (const auto& t : trees) out += learning_rate * t.predict(X);
    if (task == TreeTask::Classification && loss == BoostLoss::Logistic)
        out = (1.0 / (1.0 + (-out.array()).exp())).matrix();
    return out;
}

EnsembleModel fit_random_forest(const Dataset& data, TreeTask task, ForestOptions options,
                                std::uint64_t seed) {
    const Eigen::MatrixXd X = feature_matrix(data);
    const Eigen::VectorXd y = data.target();
    const Eigen::Index n = X.rows();
    const int p = int(X.cols());
    int mtry = options.mtry;
    if (mtry <= 0)
        mtry = task == TreeTask::Regression ? (p + 2) / 3
                                            : int(std::ceil(std::sqrt(double(p))));
    mtry = std::min(mtry, p);

    EnsembleModel model;
    model.kind = EnsembleKind::Forest;
    model.task = task;
    model.n_features = p;
    TreeOptions topt{options.max_depth, options.min_leaf};

    for (int b = 0; b < options.n_trees; ++b) {
        auto rng = make_rng(derive_seed(seed, std::uint64_t(b)));
        std::vector<int> rows;
        if (options.bootstrap) {
            rows.resize(size_t(n));
            std::uniform_int_distribution<int> U(0, int(n) - 1);
            for (auto& r : rows) r = U(rng);
        } else {
            rows = all_rows(n);
        }
        TreeBuilder builder(X, y, task, topt, mtry == p ? 0 : mtry, &rng);
        model.trees.push_back(builder.build(std::move(rows)));
    }
    return model;
}

EnsembleModel fit_gradient_boosting(const Dataset& data, BoostOptions options,
                                    std::uint64_t seed) {
    const Eigen::MatrixXd X = feature_matrix(data);
    const Eigen::VectorXd y = data.target();
    const Eigen::Index n = X.rows();
    const bool logistic = options.loss == BoostLoss::Logistic;

    EnsembleModel model;
    model.kind = EnsembleKind::Boosting;
    model.task = logistic ? TreeTask::Classification : TreeTask::Regression;
    model.loss = options.loss;
    model.learning_rate = options.learning_rate;
    model.n_features = int(X.cols());

    std::vector<int> train_rows = all_rows(n), val_rows;
    if (options.validation_fraction > 0.0 && n >= 20) {
        auto rng = make_rng(derive_seed(seed, "holdout"));
        std::shuffle(train_rows.begin(), train_rows.end(), rng);
        const size_t n_val = size_t(std::floor(options.validation_fraction * double(n)));
        val_rows.assign(train_rows.end() - long(n_val), train_rows.end());
        train_rows.resize(train_rows.size() - n_val);
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(val_rows.begin(), val_rows.end());
    }

    if (logistic) {
        const double p0 = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
        model.init_value = std::log(p0 / (1.0 - p0));
    } else {
        double s = 0.0;
        for (int r : train_rows) s += y[r];
        model.init_value = s / double(train_rows.size());
    }

    Eigen::VectorXd F = Eigen::VectorXd::Constant(n, model.init_value);
    auto loss_on = [&](const std::vector<int>& rows) {
        double acc = 0.0;
        for (int r : rows) {
            if (logistic) {
                const double p = std::clamp(1.0 / (1.0 + std::exp(-F[r])), 1e-12, 1.0 - 1e-12);
                acc += -(y[r] * std::log(p) + (1.0 - y[r]) * std::log(1.0 - p));
            } else {
                const double d = y[r] - F[r];
                acc += d * d;
            }
        }
        return acc / double(rows.size());
    };

    TreeOptions topt{options.max_depth, options.min_leaf};
    double best_val = val_rows.empty() ? 0.0 : loss_on(val_rows);
    int best_b = 0;
    Eigen::VectorXd grad(n);
    for (int b = 0; b < options.n_trees; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
            grad[i] = logistic ? y[i] - 1.0 / (1.0 + std::exp(-F[i])) : y[i] - F[i];
        }
        TreeBuilder builder(X, grad, TreeTask::Regression, topt, 0, nullptr);
        TreeModel tree = builder.build(train_rows);
        const Eigen::VectorXd step = tree.predict(X);
        F += options.learning_rate * step;
        model.trees.push_back(std::move(tree));
        model.train_loss_trace.push_back(loss_on(train_rows));

        if (!val_rows.empty()) {
            const double vl = loss_on(val_rows);
            if (vl < best_val - 1e-12) {
                best_val = vl;
                best_b = b + 1;
            } else if (b + 1 - best_b >= options.patience) {
                break;
            }
        }
    }
    if (!val_rows.empty() && best_b > 0 && best_b < int(model.trees.size())) {
        model.trees.resize(size_t(best_b));
        model.train_loss_trace.resize(size_t(best_b));
    }
    return model;
}

std::vector<std::pair<std::string, double>> variable_importance(
    const EnsembleModel& model, const std::vector<std::string>& feature_names) {
    std::vector<double> score(size_t(model.n_features), 0.0);
    for (const auto& tree : model.trees)
        for (const auto& nd : tree.nodes)
            if (nd.feature >= 0) score[size_t(nd.feature)] += nd.criterion_reduction;
    const double total = std::accumulate(score.begin(), score.end(), 0.0);
    std::vector<std::pair<std::string, double>> out;
    for (size_t j = 0; j < score.size(); ++j) {
        const std::string name =
            j < feature_names.size() ? feature_names[j] : "x" + std::to_string(j);
        out.emplace_back(name, total > 0.0 ? score[j] / total : 0.0);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// ---------------------------------------------------------------------------
// PLTR
// ---------------------------------------------------------------------------

namespace {

struct PenLogisticFit {
    Eigen::VectorXd beta;  // original scale
    double intercept = 0.0;
};

// IRLS with an inner weighted coordinate descent; columns standardized once,
// per-coefficient penalty factors, intercept unpenalized.
PenLogisticFit penalized_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double lambda, const Eigen::VectorXd& pf,
                                  const std::vector<int>& rows) {
    const Eigen::Index p = X.cols();
    const Eigen::Index n = Eigen::Index(rows.size());
    Eigen::MatrixXd Xs(n, p);
    Eigen::VectorXd ys(n), mean(p), sd(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        Xs.row(i) = X.row(rows[size_t(i)]);
        ys[i] = y[rows[size_t(i)]];
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        mean[j] = Xs.col(j).mean();
        Xs.col(j).array() -= mean[j];
        const double v = Xs.col(j).squaredNorm() / double(n);
        sd[j] = v > 1e-24 ? std::sqrt(v) : 0.0;
        if (sd[j] > 0.0) Xs.col(j) /= sd[j];
    }

    const double p0 = std::clamp(ys.mean(), 1e-6, 1.0 - 1e-6);
    double b0 = std::log(p0 / (1.0 - p0));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, b0);

    for (int irls = 0; irls < 30; ++irls) {
        const Eigen::ArrayXd prob =
            (1.0 / (1.0 + (-eta.array()).exp())).min(1.0 - 1e-9).max(1e-9);
        const Eigen::ArrayXd w = (prob * (1.0 - prob)).max(1e-6);
        const Eigen::VectorXd z = eta.array() + (ys.array() - prob) / w;

        Eigen::VectorXd r = z - eta;
        Eigen::VectorXd vj(p);
        for (Eigen::Index j = 0; j < p; ++j)
            vj[j] = (w * Xs.col(j).array().square()).mean();
        const double wsum = w.sum();

        double outer_change = 0.0;
        for (int sweep = 0; sweep < 2000; ++sweep) {
            double max_change = 0.0;
            {
                const double nb0 = b0 + (w * r.array()).sum() / wsum;
                r.array() -= (nb0 - b0);
                max_change = std::max(max_change, std::abs(nb0 - b0));
                b0 = nb0;
            }
            for (Eigen::Index j = 0; j < p; ++j) {
                if (sd[j] == 0.0 || pf[j] >= 1e12) continue;
                const double rho =
                    (w * Xs.col(j).array() * r.array()).mean() + vj[j] * beta[j];
                const double t = lambda * pf[j];
                double nb = 0.0;
                if (rho > t)
                    nb = (rho - t) / vj[j];
                else if (rho < -t)
                    nb = (rho + t) / vj[j];
                if (nb != beta[j]) {
                    r -= Xs.col(j) * (nb - beta[j]);
                    max_change = std::max(max_change, std::abs(nb - beta[j]));
                    beta[j] = nb;
                }
            }
            outer_change = max_change;
            if (max_change < 1e-7) break;
        }
        eta = z - r;
        if (outer_change < 1e-6 && irls > 0) break;
    }

    PenLogisticFit fit;
    fit.beta.resize(p);
    double dot = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        fit.beta[j] = sd[j] > 0.0 ? beta[j] / sd[j] : 0.0;
        dot += fit.beta[j] * mean[j];
    }
    fit.intercept = b0 - dot;
    return fit;
}

double heldout_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const PenLogisticFit& fit, const std::vector<int>& rows) {
    double acc = 0.0;
    for (int r : rows) {
        const double eta = fit.intercept + X.row(r).dot(fit.beta);
        const double p = std::clamp(1.0 / (1.0 + std::exp(-eta)), 1e-12, 1.0 - 1e-12);
        acc += -2.0 * (y[r] * std::log(p) + (1.0 - y[r]) * std::log(1.0 - p));
    }
    return acc / double(rows.size());
}

// logistic ridge (all coefficients penalized equally) for the adaptive weights
Eigen::VectorXd logistic_ridge_init(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    std::uint64_t seed) {
    const Eigen::Index n = X.rows(), p = X.cols();
    Eigen::MatrixXd Xs = X;
    Eigen::VectorXd mean(p), sd(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        mean[j] = Xs.col(j).mean();
        Xs.col(j).array() -= mean[j];
        const double v = Xs.col(j).squaredNorm() / double(n);
        sd[j] = v > 1e-24 ? std::sqrt(v) : 0.0;
        if (sd[j] > 0.0) Xs.col(j) /= sd[j];
    }

    auto irls_ridge = [&](double kappa, const std::vector<int>& rows) {
        Eigen::MatrixXd A(rows.size(), p + 1);
        Eigen::VectorXd yr(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            A(Eigen::Index(i), 0) = 1.0;
            A.row(Eigen::Index(i)).tail(p) = Xs.row(rows[i]);
            yr[Eigen::Index(i)] = y[rows[i]];
        }
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
        const double pm = std::clamp(yr.mean(), 1e-6, 1.0 - 1e-6);
        theta[0] = std::log(pm / (1.0 - pm));
        for (int it = 0; it < 50; ++it) {
            const Eigen::VectorXd eta = A * theta;
            const Eigen::ArrayXd prob =
                (1.0 / (1.0 + (-eta.array()).exp())).min(1.0 - 1e-9).max(1e-9);
            const Eigen::ArrayXd w = (prob * (1.0 - prob)).max(1e-6);
            const Eigen::VectorXd z = eta.array() + (yr.array() - prob) / w;
            Eigen::MatrixXd G = A.transpose() * (A.array().colwise() * w).matrix();
            for (Eigen::Index j = 1; j <= p; ++j) G(j, j) += kappa;
            const Eigen::VectorXd nt = G.ldlt().solve(A.transpose() * (w * z.array()).matrix());
            const double ch = (nt - theta).cwiseAbs().maxCoeff();
            theta = nt;
            if (ch < 1e-8) break;
        }
        return theta;
    };

    // pick the ridge penalty by 10-fold CV deviance
    std::vector<int> fold(size_t(n), 0);
    {
        std::vector<int> perm(size_t(n), 0);
        std::iota(perm.begin(), perm.end(), 0);
        auto rng = make_rng(derive_seed(seed, "ridge_folds"));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < n; ++i) fold[size_t(perm[size_t(i)])] = int(i % 10);
    }
    double best_dev = std::numeric_limits<double>::infinity();
    double best_kappa = 1.0;
    for (int t = 0; t < 8; ++t) {
        const double kappa = double(n) * std::pow(10.0, -5.0 + t);
        double dev = 0.0;
        for (int f = 0; f < 10; ++f) {
            std::vector<int> tr, te;
            for (Eigen::Index i = 0; i < n; ++i)
                (fold[size_t(i)] == f ? te : tr).push_back(int(i));
            const Eigen::VectorXd theta = irls_ridge(kappa, tr);
            for (int r : te) {
                const double eta = theta[0] + Xs.row(r).dot(theta.tail(p));
                const double pr = std::clamp(1.0 / (1.0 + std::exp(-eta)), 1e-12, 1.0 - 1e-12);
                dev += -2.0 * (y[r] * std::log(pr) + (1.0 - y[r]) * std::log(1.0 - pr));
            }
        }
        if (dev < best_dev) {
            best_dev = dev;
            best_kappa = kappa;
        }
    }
    std::vector<int> rows = all_rows(n);
    const Eigen::VectorXd theta = irls_ridge(best_kappa, rows);
    return theta.tail(p);  // standardized scale, which is what the weights need
}

}  // namespace

Eigen::MatrixXd PltrModel::design(Eigen::Ref<const Eigen::MatrixXd> X) const {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd D(n, X.cols() + Eigen::Index(v1.size() + v2.size()));
    D.leftCols(X.cols()) = X;
    Eigen::Index c = X.cols();
    for (const auto& s : v1) {
        for (Eigen::Index i = 0; i < n; ++i)
            D(i, c) = X(i, s.feature) <= s.threshold ? 1.0 : 0.0;
        ++c;
    }
    for (const auto& s : v2) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool root_left = X(i, s.root_feature) <= s.root_threshold;
            const bool in_branch = (root_left == s.follow_left);
            D(i, c) = (in_branch && X(i, s.leaf_feature) <= s.leaf_threshold) ? 1.0 : 0.0;
        }
        ++c;
    }
    return D;
}

Eigen::VectorXd PltrModel::predict_probability(Eigen::Ref<const Eigen::MatrixXd> X) const {
    const Eigen::MatrixXd D = design(X);
    const Eigen::VectorXd eta = (D * coefficients).array() + intercept;
    return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
}

PltrModel fit_pltr(const Dataset& data, std::uint64_t seed) {
    const Eigen::MatrixXd X = feature_matrix(data);
    const Eigen::VectorXd y = data.target();
    const Eigen::Index n = X.rows();
    const int p = int(X.cols());
    if (p < 2) throw std::invalid_argument("fit_pltr: need at least two variables");
    for (Eigen::Index i = 0; i < n; ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
            throw std::invalid_argument("fit_pltr: target must be 0/1");

    PltrModel model;
    for (int c : data.feature_indices()) model.feature_names.push_back(data.names()[size_t(c)]);

    TreeOptions stump_opt{1, 5};
    std::vector<int> rows = all_rows(n);

    // univariate threshold effects: the first (left) leaf of a one-split tree
    for (int j = 0; j < p; ++j) {
        Eigen::MatrixXd Xj = X.col(j);
        TreeBuilder bj(Xj, y, TreeTask::Classification, stump_opt, 0, nullptr);
        TreeModel tj = bj.build(rows);
        if (tj.nodes[0].feature < 0) {
            model.warnings.push_back({"DegenerateSplit", model.feature_names[size_t(j)]});
            continue;
        }
        PltrModel::UnivariateLeaf leaf;
        leaf.feature = j;
        leaf.threshold = tj.nodes[0].threshold;
        leaf.name = "V1(" + model.feature_names[size_t(j)] + ")";
        model.v1.push_back(leaf);
    }

    // bivariate threshold effects: two-split tree per couple, keep the deeper
    // left leaf
    TreeOptions pair_opt{2, 5};
    for (int j = 0; j < p; ++j) {
        for (int k = j + 1; k < p; ++k) {
            Eigen::MatrixXd Xp(n, 2);
            Xp.col(0) = X.col(j);
            Xp.col(1) = X.col(k);
            TreeBuilder builder(Xp, y, TreeTask::Classification, pair_opt, 0, nullptr);
            TreeModel t2 = builder.build(rows);
            const auto& root = t2.nodes[0];
            if (root.feature < 0) {
                model.warnings.push_back({"DegenerateSplit", model.feature_names[size_t(j)] +
                                                                 "*" +
                                                                 model.feature_names[size_t(k)]});
                continue;
            }
            const auto& lc = t2.nodes[size_t(root.left)];
            const auto& rc = t2.nodes[size_t(root.right)];
            // best-first with two splits: exactly one child is split further
            const TreeNode* split_child = nullptr;
            bool follow_left = true;
            if (lc.feature >= 0 && (rc.feature < 0 || lc.criterion_reduction >=
                                                          rc.criterion_reduction)) {
                split_child = &lc;
                follow_left = true;
            } else if (rc.feature >= 0) {
                split_child = &rc;
                follow_left = false;
            }
            if (!split_child) {
                model.warnings.push_back({"DegenerateSplit", model.feature_names[size_t(j)] +
                                                                 "*" +
                                                                 model.feature_names[size_t(k)]});
                continue;
            }
            PltrModel::BivariateLeaf leaf;
            leaf.root_feature = root.feature == 0 ? j : k;
            leaf.root_threshold = root.threshold;
            leaf.follow_left = follow_left;
            leaf.leaf_feature = split_child->feature == 0 ? j : k;
            leaf.leaf_threshold = split_child->threshold;
            leaf.name = "V2(" + model.feature_names[size_t(j)] + "," +
                        model.feature_names[size_t(k)] + ")";
            model.v2.push_back(leaf);
        }
    }

    // adaptive-lasso logistic on (X, V1, V2), lambda_min by 10-fold CV
    const Eigen::MatrixXd D = model.design(X);
    const Eigen::VectorXd init = logistic_ridge_init(D, y, seed);
    const double max_init = init.cwiseAbs().maxCoeff();
    Eigen::VectorXd pf(D.cols());
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
        const double a = std::abs(init[j]);
        pf[j] = (a < 1e-12 * std::max(max_init, 1e-300)) ? 1e12 : 1.0 / a;
    }
    double s = 0.0;
    int cnt = 0;
    for (Eigen::Index j = 0; j < D.cols(); ++j)
        if (pf[j] < 1e12) {
            s += pf[j];
            ++cnt;
        }
    for (Eigen::Index j = 0; j < D.cols(); ++j)
        if (pf[j] < 1e12) pf[j] *= double(cnt) / s;

    // lambda path from the null-model gradient
    
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
        if (pf[j] >= 1e12) continue;
        const Eigen::VectorXd c = D.col(j).array() - D.col(j).mean();
        const double v = c.squaredNorm() / double(n);
        if (v < 1e-24) continue;
        lmax = std::max(lmax, std::abs(c.dot(y) / std::sqrt(v)) / (double(n) * pf[j]));
    }
    constexpr int kGrid = 40;
    std::vector<double> grid(kGrid);
    for (int g = 0; g < kGrid; ++g)
        grid[size_t(g)] = lmax * std::pow(10.0, -3.0 * double(g) / double(kGrid - 1));

    std::vector<int> fold(size_t(n), 0);
    {
        std::vector<int> perm(size_t(n), 0);
        std::iota(perm.begin(), perm.end(), 0);
        auto rng = make_rng(derive_seed(seed, "pltr_folds"));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < n; ++i) fold[size_t(perm[size_t(i)])] = int(i % 10);
    }
    std::vector<double> cv_dev(kGrid, 0.0);
    for (int f = 0; f < 10; ++f) {
        std::vector<int> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) (fold[size_t(i)] == f ? te : tr).push_back(int(i));
        for (int g = 0; g < kGrid; ++g) {
            const PenLogisticFit fit = penalized_logistic(D, y, grid[size_t(g)], pf, tr);
            cv_dev[size_t(g)] += heldout_deviance(D, y, fit, te);
        }
    }
    int gmin = 0;
    for (int g = 1; g < kGrid; ++g)
        if (cv_dev[size_t(g)] < cv_dev[size_t(gmin)]) gmin = g;

    model.lambda = grid[size_t(gmin)];
    const PenLogisticFit final_fit = penalized_logistic(D, y, model.lambda, pf, all_rows(n));
    model.coefficients = final_fit.beta;
    model.intercept = final_fit.intercept;
    return model;
}

}  // namespace plam
