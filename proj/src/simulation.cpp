#include "plam/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include "plam/evaluation.hpp"
#include "plam/rng.hpp"

namespace plam {

double eval_g(int j, double x) {
    switch (j) {
        case 1: return std::sin(5.0 * x);
        case 2: return x > 0.0 ? 0.0 : 5.0 * x;
        case 3: {
            if (x <= 0.0) return 0.0;
            const double lx = std::log(x);
            return std::exp(-lx * lx / 0.5) / (x * 0.5 * std::sqrt(2.0 * M_PI));
        }
        case 4: return std::exp(x);
        case 5: return std::atan(10.0 * x);
        default: return 0.0;
    }
}

int pair_catalog_index(int a, int b, int p) {
    if (a > b) std::swap(a, b);
    return a * (2 * p - a - 1) / 2 + (b - a - 1);
}

namespace {

// pinned values of -g_j(x)/x at |x| < 1e-12 (measure-zero determinism guard)
double ratio_sentinel_nonlinear(int j) {
    switch (j) {
        case 1: return -5.0;
        case 2: return -5.0;
        case 3: return 0.0;
        case 4: return -1.0;
        case 5: return -10.0;
        default: return 0.0;
    }
}

// covariate block for `n` rows under the given setup; consumes the rng stream
// in a fixed order (base normals, then dependence noise)
Eigen::MatrixXd draw_covariates(const DgpConfig& cfg, const Eigen::VectorXd& gamma_linear,
                                Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd X(n, cfg.p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < cfg.q; ++j) X(i, j) = N(rng);

    const double u_sd = std::sqrt(cfg.u_variance);
    if (cfg.correlated()) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = cfg.q; j < cfg.p; ++j) {
                const int base = j - cfg.q;  // 0-based index of the driving column
                const double x = X(i, base);
                double ratio;
                if (cfg.nonlinear()) {
                    ratio = std::abs(x) < 1e-12 ? ratio_sentinel_nonlinear(base + 1)
                                                : -eval_g(base + 1, x) / x;
                } else {
                    ratio = -gamma_linear[base];
                }
                X(i, j) = ratio + u_sd * N(rng);
            }
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (int j = cfg.q; j < cfg.p; ++j) X(i, j) = N(rng);
    }
    return X;
}

double signal_of(const DgpConfig& cfg, const Eigen::VectorXd& gamma_linear, int j1based,
                 double x) {
    if (cfg.nonlinear()) return eval_g(j1based, x);
    return j1based <= cfg.q ? gamma_linear[j1based - 1] * x : 0.0;
}

// regressor matrix W = (all S interactions in catalog order, signal columns)
Eigen::MatrixXd assemble_w(const DgpConfig& cfg, const Eigen::MatrixXd& X) {
    const int S = cfg.p * (cfg.p - 1) / 2;
    Eigen::MatrixXd W(X.rows(), S + cfg.q);
    int c = 0;
    for (int a = 0; a < cfg.p; ++a)
        for (int b = a + 1; b < cfg.p; ++b) W.col(c++) = X.col(a).cwiseProduct(X.col(b));
    for (int j = 1; j <= cfg.q; ++j) {
        if (cfg.nonlinear()) {
            for (Eigen::Index i = 0; i < X.rows(); ++i) W(i, c) = eval_g(j, X(i, j - 1));
        } else {
            // scale-free placeholder: rescaling a signal column leaves the
            // interaction entries of the inverse Gram unchanged
            W.col(c) = X.col(j - 1);
        }
        ++c;
    }
    return W;
}

struct CalibKey {
    int setup, p, q, n_in;
    double xi, u_var;
    std::uint64_t seed;
    bool operator<(const CalibKey& o) const {
        return std::tie(setup, p, q, n_in, xi, u_var, seed) <
               std::tie(o.setup, o.p, o.q, o.n_in, o.xi, o.u_var, o.seed);
    }
};

std::mutex calib_mutex;
std::map<CalibKey, DgpTruth> calib_cache;

DgpTruth calibrate_impl(const DgpConfig& cfg) {
    const int S = cfg.p * (cfg.p - 1) / 2;
    const int dim = S + cfg.q;
    const long total_rows = 1000000;
    const long blocks = std::max<long>(1, total_rows / cfg.n_in);

    DgpTruth truth;
    for (int j = 0; j < cfg.q; ++j) {
        truth.relevant_pairs.emplace_back(j, j + cfg.q);
        truth.relevant_catalog.insert(pair_catalog_index(j, j + cfg.q, cfg.p));
    }
    truth.gamma_pairs = Eigen::VectorXd::Constant(cfg.q, cfg.xi / std::sqrt(double(cfg.n_in)));
    if (!cfg.nonlinear())
        truth.gamma_linear =
            Eigen::VectorXd::Constant(cfg.q, cfg.xi / std::sqrt(double(cfg.n_in)));

    // linear correlated covariates depend on gamma itself: iterate to the
    // fixed point (the same rng stream every pass keeps this deterministic)
    const int passes = (cfg.setup == 3) ? 4 : 1;
    for (int pass = 0; pass < passes; ++pass) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
        auto rng = make_rng(derive_seed(cfg.seed, "calibration"));
        for (long b = 0; b < blocks; ++b) {
            const Eigen::MatrixXd X = draw_covariates(cfg, truth.gamma_linear, cfg.n_in, rng);
            const Eigen::MatrixXd W = assemble_w(cfg, X);
            gram.noalias() += W.transpose() * W;
        }
        gram /= double(blocks);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        const double emax = es.eigenvalues().maxCoeff();
        const double emin = es.eigenvalues().minCoeff();
        if (emin <= 0.0 || emax / emin > 1e10)
            throw SingularGram("estimated E[W'W] has condition above 1e10");
        const Eigen::MatrixXd inv = es.eigenvectors() *
                                    es.eigenvalues().cwiseInverse().asDiagonal() *
                                    es.eigenvectors().transpose();

        for (int j = 0; j < cfg.q; ++j) {
            const int cat = pair_catalog_index(j, j + cfg.q, cfg.p);
            truth.gamma_pairs[j] = cfg.xi * std::sqrt(inv(cat, cat));
        }
        if (!cfg.nonlinear()) {
            for (int j = 0; j < cfg.q; ++j)
                truth.gamma_linear[j] = cfg.xi * std::sqrt(inv(S + j, S + j));
        }
    }
    return truth;
}

}  // namespace

DgpTruth calibrate_gamma(const DgpConfig& cfg) {
    const CalibKey key{cfg.setup, cfg.p, cfg.q, cfg.n_in, cfg.xi, cfg.u_variance, cfg.seed};
    {
        std::lock_guard<std::mutex> lock(calib_mutex);
        const auto it = calib_cache.find(key);
        if (it != calib_cache.end()) return it->second;
    }
    DgpTruth truth = calibrate_impl(cfg);
    std::lock_guard<std::mutex> lock(calib_mutex);
    calib_cache.emplace(key, truth);
    return truth;
}

DgpSample gen_dgp(const DgpConfig& cfg, int replication_index) {
    const DgpTruth truth = calibrate_gamma(cfg);
    const Eigen::Index n = cfg.n_in + cfg.n_out;
    auto rng = make_rng(derive_seed(derive_seed(cfg.seed, "dgp"), std::uint64_t(replication_index)));

    const Eigen::MatrixXd X = draw_covariates(cfg, truth.gamma_linear, n, rng);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = 0.0;
        for (int j = 0; j < cfg.q; ++j)
            v += truth.gamma_pairs[j] * X(i, j) * X(i, j + cfg.q);
        for (int j = 1; j <= cfg.q; ++j)
            v += signal_of(cfg, truth.gamma_linear, j, X(i, j - 1));
        y[i] = v + cfg.noise_sd * N(rng);
    }

    std::vector<std::string> names;
    for (int j = 1; j <= cfg.p; ++j) names.push_back("x" + std::to_string(j));
    names.push_back("y");
    Eigen::MatrixXd vals(n, cfg.p + 1);
    vals.leftCols(cfg.p) = X;
    vals.col(cfg.p) = y;
    std::vector<VarKind> kinds(size_t(cfg.p) + 1, VarKind::Continuous);
    const Dataset all(names, std::move(vals), cfg.p, kinds, "dgp");

    std::vector<int> head(size_t(cfg.n_in), 0), tail(size_t(cfg.n_out), 0);
    for (int i = 0; i < cfg.n_in; ++i) head[size_t(i)] = i;
    for (int i = 0; i < cfg.n_out; ++i) tail[size_t(i)] = cfg.n_in + i;

    DgpSample sample{all.subset_rows(head), all.subset_rows(tail), truth};
    return sample;
}

Eigen::VectorXd dgp_conditional_mean(const DgpConfig& cfg, const DgpTruth& truth,
                                     const Dataset& data) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(data.n_rows());
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        double v = 0.0;
        for (int j = 0; j < cfg.q; ++j)
            v += truth.gamma_pairs[j] * data.values()(i, j) * data.values()(i, j + cfg.q);
        for (int j = 1; j <= cfg.q; ++j)
            v += signal_of(cfg, truth.gamma_linear, j, data.values()(i, j - 1));
        out[i] = v;
    }
    return out;
}

namespace {

struct RepOutcome {
    struct PerModel {
        bool ok = false;
        double potency = 0.0, gauge = 0.0, mse = 0.0;
        bool selection = false;
    };
    std::vector<PerModel> models;
};

int thread_budget() {
    if (const char* env = std::getenv("PLAM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

}  // namespace

MonteCarloReport run_monte_carlo(const DgpConfig& config, const std::vector<ModelSpec>& specs,
                                 int n_r, std::uint64_t seed, bool with_oracle) {
    DgpConfig cfg = config;
    cfg.seed = seed;
    calibrate_gamma(cfg);  // fill the cache before workers start

    const int m = int(specs.size());
    bool any_dr = false, any_stage = false;
    for (const auto& s : specs) {
        any_dr |= s.needs_double_residuals();
        any_stage |= s.needs_double_residuals() || s.is_naive_variant();
    }

    std::vector<RepOutcome> outcomes{size_t(n_r)};
    std::atomic<int> next_rep{0};
    auto worker = [&]() {
        while (true) {
            const int r = next_rep.fetch_add(1);
            if (r >= n_r) break;
            RepOutcome& out = outcomes[size_t(r)];
            out.models.resize(size_t(m) + (with_oracle ? 1 : 0));

            const DgpSample sample = gen_dgp(cfg, r);
            const int S = cfg.p * (cfg.p - 1) / 2;

            GamlaFirstStage stage;
            bool stage_ok = false;
            if (any_stage) {
                GamOptions sopt;  // shared stage: first stage-user's basis dim
                for (const auto& s : specs) {
                    if (s.needs_double_residuals() || s.is_naive_variant()) {
                        sopt.basis_dim = s.basis_dim;
                        break;
                    }
                }
                try {
                    stage = compute_first_stage(sample.train, any_dr, sopt);
                    stage_ok = true;
                } catch (const Error&) {
                    stage_ok = false;
                }
            }

            for (int s = 0; s < m; ++s) {
                auto& slot = out.models[size_t(s)];
                const ModelSpec& spec = specs[size_t(s)];
                const bool uses_stage = spec.needs_double_residuals() || spec.is_naive_variant();
                try {
                    const std::uint64_t mseed =
                        derive_seed(derive_seed(seed, spec.id()), std::uint64_t(r));
                    const FittedModel fit = fit_model_with_stage(
                        spec, sample.train, (uses_stage && stage_ok) ? &stage : nullptr, mseed);
                    const Eigen::VectorXd pred = fit.predict(sample.test);
                    slot.mse = mse(pred, sample.test.target());
                    if (spec.selects_interactions()) {
                        slot.selection = true;
                        const std::set<int> selected(fit.retained_interactions.begin(),
                                                     fit.retained_interactions.end());
                        slot.potency = potency(selected, sample.truth.relevant_catalog);
                        slot.gauge = gauge(selected, sample.truth.relevant_catalog, S);
                    }
                    slot.ok = true;
                } catch (const Error&) {
                    slot.ok = false;
                } catch (const std::invalid_argument&) {
                    slot.ok = false;
                }
            }
            if (with_oracle) {
                auto& slot = out.models.back();
                const Eigen::VectorXd pred =
                    dgp_conditional_mean(cfg, sample.truth, sample.test);
                slot.mse = mse(pred, sample.test.target());
                slot.ok = true;
            }
        }
    };

    const int n_threads = std::min(thread_budget(), std::max(1, n_r));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    MonteCarloReport report;
    report.config = cfg;
    report.n_r = n_r;
    const int total = m + (with_oracle ? 1 : 0);
    for (int s = 0; s < total; ++s) {
        MonteCarloRow row;
        row.model_id = s < m ? specs[size_t(s)].id() : "oracle";
        int ok = 0;
        double pot = 0.0, gau = 0.0, err = 0.0;
        bool selection = false;
        for (int r = 0; r < n_r; ++r) {
            const auto& slot = outcomes[size_t(r)].models[size_t(s)];
            if (!slot.ok) continue;
            ++ok;
            pot += slot.potency;
            gau += slot.gauge;
            err += slot.mse;
            selection |= slot.selection;
        }
        row.selection = selection;
        row.replications = ok;
        row.failures = n_r - ok;
        if (ok > 0) {
            row.mean_potency = selection ? pot / ok : 0.0;
            row.mean_gauge = selection ? gau / ok : 0.0;
            row.mean_mse = err / ok;
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace plam
