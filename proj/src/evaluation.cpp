#include "plam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plam/rng.hpp"
#include "plam/stats.hpp"

namespace plam {

std::vector<int> make_folds(Eigen::Index n, int k, std::uint64_t seed) {
    std::vector<int> perm(size_t(n), 0);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = make_rng(derive_seed(seed, "folds"));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(size_t(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) fold[size_t(perm[size_t(i)])] = int(i % k);
    return fold;
}

CvPredictions kfold_cv(const Dataset& data, const ModelSpec& spec, int k, std::uint64_t seed) {
    const Eigen::Index n = data.n_rows();
    if (n < 2 * k && k != n)  // k == n is leave-one-out
        throw std::invalid_argument("kfold_cv: need n >= 2k (or k == n)");

    CvPredictions out;
    out.fold = make_folds(n, k, seed);
    out.predictions.resize(n);
    out.model_id = spec.id();
    out.k = k;
    out.seed = seed;

    double interaction_sum = 0.0;
    bool selector = spec.selects_interactions();
    for (int f = 0; f < k; ++f) {
        std::vector<int> tr, te;
        for (Eigen::Index i = 0; i < n; ++i)
            (out.fold[size_t(i)] == f ? te : tr).push_back(int(i));
        const Dataset train = data.subset_rows(tr);
        const Dataset test = data.subset_rows(te);
        FittedModel model;
        try {
            model = fit_model(spec, train, derive_seed(seed, std::uint64_t(1000 + f)));
        } catch (const Error& e) {
            throw Error("fold " + std::to_string(f) + ": " + e.what());
        }
        const Eigen::VectorXd pred = model.predict(test);
        for (size_t i = 0; i < te.size(); ++i) out.predictions[te[i]] = pred[Eigen::Index(i)];
        if (selector) interaction_sum += double(model.retained_interactions.size());
    }
    if (selector) out.mean_interactions = interaction_sum / double(k);
    return out;
}

double mse(Eigen::Ref<const Eigen::VectorXd> pred, Eigen::Ref<const Eigen::VectorXd> truth) {
    if (pred.size() != truth.size()) throw LengthMismatch("mse: prediction vs truth");
    return (pred - truth).squaredNorm() / double(pred.size());
}

namespace {

// placement values: for each positive, the fraction of negatives it beats
// (ties half); symmetric for negatives
void placements(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels,
                Eigen::VectorXd& v_pos, Eigen::VectorXd& v_neg) {
    std::vector<double> pos, neg;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        (labels[i] > 0.5 ? pos : neg).push_back(std::clamp(scores[i], 0.0, 1.0));
    if (pos.empty() || neg.empty()) throw SingleClass("both classes required");

    std::vector<double> sorted_pos = pos, sorted_neg = neg;
    std::sort(sorted_pos.begin(), sorted_pos.end());
    std::sort(sorted_neg.begin(), sorted_neg.end());

    v_pos.resize(Eigen::Index(pos.size()));
    v_neg.resize(Eigen::Index(neg.size()));
    for (size_t i = 0; i < pos.size(); ++i) {
        const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), pos[i]);
        const auto hi = std::upper_bound(sorted_neg.begin(), sorted_neg.end(), pos[i]);
        const double below = double(lo - sorted_neg.begin());
        const double ties = double(hi - lo);
        v_pos[Eigen::Index(i)] = (below + 0.5 * ties) / double(neg.size());
    }
    for (size_t j = 0; j < neg.size(); ++j) {
        const auto lo = std::lower_bound(sorted_pos.begin(), sorted_pos.end(), neg[j]);
        const auto hi = std::upper_bound(sorted_pos.begin(), sorted_pos.end(), neg[j]);
        const double above = double(sorted_pos.end() - hi);
        const double ties = double(hi - lo);
        v_neg[Eigen::Index(j)] = (above + 0.5 * ties) / double(pos.size());
    }
}

double covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() < 2) return 0.0;
    return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / double(a.size() - 1);
}

}  // namespace

double auc(Eigen::Ref<const Eigen::VectorXd> scores, Eigen::Ref<const Eigen::VectorXd> labels) {
    if (scores.size() != labels.size()) throw LengthMismatch("auc: scores vs labels");
    Eigen::VectorXd v_pos, v_neg;
    placements(scores, labels, v_pos, v_neg);
    return v_pos.mean();
}

AucTestResult auc_test(Eigen::Ref<const Eigen::VectorXd> scores1,
                       Eigen::Ref<const Eigen::VectorXd> scores2,
                       Eigen::Ref<const Eigen::VectorXd> labels) {
    if (scores1.size() != labels.size() || scores2.size() != labels.size())
        throw LengthMismatch("auc_test: scores vs labels");

    AucTestResult res;
    Eigen::VectorXd p1, n1, p2, n2;
    placements(scores1, labels, p1, n1);
    placements(scores2, labels, p2, n2);
    res.auc1 = p1.mean();
    res.auc2 = p2.mean();
    const double delta = res.auc1 - res.auc2;

    const double npos = double(p1.size()), nneg = double(n1.size());
    res.variance = (covariance(p1, p1) + covariance(p2, p2) - 2.0 * covariance(p1, p2)) / npos +
                   (covariance(n1, n1) + covariance(n2, n2) - 2.0 * covariance(n1, n2)) / nneg;

    if ((scores1 - scores2).cwiseAbs().maxCoeff() == 0.0 || res.variance <= 1e-300) {
        // identical rankings or no sampling variance: no evidence of difference
        res.z = 0.0;
        res.p_value = delta == 0.0 ? 1.0 : 0.0;
        return res;
    }
    res.z = delta / std::sqrt(res.variance);
    res.p_value = 2.0 * (1.0 - stats::normal_cdf(std::abs(res.z)));
    return res;
}

McsResult mcs(Eigen::Ref<const Eigen::MatrixXd> loss_matrix, int B, double alpha_mcs,
              std::uint64_t seed) {
    const Eigen::Index n = loss_matrix.rows();
    const int m = int(loss_matrix.cols());
    if (m < 2) throw std::invalid_argument("mcs: need at least two models");
    if (n < 30) throw std::invalid_argument("mcs: need at least 30 rows");

    // bootstrap means (iid resampling, block size one), one derived seed per draw
    Eigen::MatrixXd boot(B, m);
    const Eigen::VectorXd sample_mean = loss_matrix.colwise().mean();
    for (int b = 0; b < B; ++b) {
        auto rng = make_rng(derive_seed(seed, std::uint64_t(b)));
        std::uniform_int_distribution<Eigen::Index> U(0, n - 1);
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m);
        for (Eigen::Index i = 0; i < n; ++i) acc += loss_matrix.row(U(rng));
        boot.row(b) = acc / double(n);
    }

    // pairwise variances of the mean differentials (fixed across elimination)
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const double d = sample_mean[i] - sample_mean[j];
            double acc = 0.0;
            for (int b = 0; b < B; ++b) {
                const double db = boot(b, i) - boot(b, j) - d;
                acc += db * db;
            }
            var(i, j) = var(j, i) = acc / double(B);
        }
    }
    auto tstat = [&](int i, int j, double diff) {
        if (var(i, j) <= 1e-300) return (std::abs(diff) <= 1e-300) ? 0.0 : (diff > 0 ? 1e9 : -1e9);
        return diff / std::sqrt(var(i, j));
    };

    McsResult res;
    res.bootstrap_count = B;
    res.alpha = alpha_mcs;
    res.p_values = Eigen::VectorXd::Ones(m);

    std::vector<int> active(size_t(m), 0);
    std::iota(active.begin(), active.end(), 0);
    double p_so_far = 0.0;
    while (active.size() > 1) {
        double t_obs = -1e300;
        int worst = active[0];
        for (int i : active) {
            double ti = -1e300;
            for (int j : active) {
                if (i == j) continue;
                ti = std::max(ti, tstat(i, j, sample_mean[i] - sample_mean[j]));
            }
            if (ti > t_obs) {
                t_obs = ti;
                worst = i;
            }
        }
        // bootstrap distribution of the range statistic on the active set
        int count = 0;
        for (int b = 0; b < B; ++b) {
            double tb = 0.0;
            for (size_t a = 0; a < active.size(); ++a) {
                for (size_t c = a + 1; c < active.size(); ++c) {
                    const int i = active[a], j = active[c];
                    if (var(i, j) <= 1e-300) continue;
                    const double db = std::abs(boot(b, i) - boot(b, j) -
                                               (sample_mean[i] - sample_mean[j])) /
                                      std::sqrt(var(i, j));
                    tb = std::max(tb, db);
                }
            }
            if (tb >= t_obs) ++count;
        }
        const double p_step = double(count) / double(B);
        p_so_far = std::max(p_so_far, p_step);
        res.p_values[worst] = p_so_far;
        res.elimination_order.push_back(worst);
        active.erase(std::find(active.begin(), active.end(), worst));
    }
    res.p_values[active[0]] = 1.0;
    res.elimination_order.push_back(active[0]);

    for (int i = 0; i < m; ++i)
        if (res.p_values[i] >= alpha_mcs) res.surviving.push_back(i);
    return res;
}

double potency(const std::set<int>& selected, const std::set<int>& relevant) {
    if (relevant.empty()) throw EmptyRelevant("potency needs a nonempty relevant set");
    int hit = 0;
    for (int r : relevant) hit += selected.count(r) > 0;
    return double(hit) / double(relevant.size());
}

double gauge(const std::set<int>& selected, const std::set<int>& relevant, int catalog_size) {
    const int denom = catalog_size - int(relevant.size());
    if (denom <= 0) return 0.0;
    int miss = 0;
    for (int s : selected) miss += relevant.count(s) == 0;
    return double(miss) / double(denom);
}

}  // namespace plam
