#include "plam/gam.hpp"

#include <algorithm>
#include <cmath>

#include "plam/stats.hpp"

namespace plam {

std::string to_string(Family f) {
    return f == Family::Gaussian ? "gaussian" : "linear-probability";
}

Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::Gaussian;
    if (s == "linear-probability") return Family::LinearProbability;
    throw std::invalid_argument("unknown family: " + s);
}

const SmoothTerm* AdditiveModel::smooth_for(const std::string& variable) const {
    for (const auto& t : smooths)
        if (t.basis.variable_id == variable) return &t;
    return nullptr;
}

GamWorkspace::GamWorkspace(const Dataset& data, std::vector<std::string> smooth_vars,
                           std::vector<std::string> linear_vars, GamOptions options)
    : options_(options), n_(data.n_rows()) {
    fingerprint_ = data.schema_fingerprint();

    for (const auto& name : smooth_vars) {
        const int col = data.column_index(name);
        if (col < 0) throw UnknownVariable(name);
        bool demote = data.kind(col) != VarKind::Continuous;
        if (!demote) {
            try {
                SmoothBlock blk;
                blk.name = name;
                blk.build = build_cubic_basis(data.column(col), options_.basis_dim, name);
                blk.penalty = penalty_matrix(blk.build.basis);
                blk.solver = std::make_unique<PenalizedBlock>(blk.build.design, blk.penalty);
                blocks_.push_back(std::move(blk));
                smooth_vars_.push_back(name);
            } catch (const TooFewDistinctValues&) {
                demote = true;
            }
        }
        if (demote) {
            warnings_.push_back({"SmoothDemoted", name + " treated as linear"});
            linear_vars.push_back(name);
        }
    }
    linear_vars_ = std::move(linear_vars);

    if (blocks_.empty() && linear_vars_.empty())
        throw EmptyModel("no smooth or linear variables to fit");

    linear_design_.resize(n_, 1 + Eigen::Index(linear_vars_.size()));
    linear_design_.col(0).setOnes();
    for (size_t j = 0; j < linear_vars_.size(); ++j) {
        const int col = data.column_index(linear_vars_[j]);
        if (col < 0) throw UnknownVariable(linear_vars_[j]);
        linear_design_.col(Eigen::Index(j + 1)) = data.column(col);
    }
    linear_qr_.compute(linear_design_);
    linear_qr_.setThreshold(1e-10);
    if (linear_qr_.rank() < linear_design_.cols()) {
        // identify columns outside the pivoted rank set; they get zero weight
        const auto perm = linear_qr_.colsPermutation().indices();
        const Eigen::Index r = linear_qr_.rank();
        for (Eigen::Index k = r; k < perm.size(); ++k) {
            pinned_linear_.push_back(int(perm[k]));
            if (perm[k] > 0)
                warnings_.push_back(
                    {"PinnedLinearColumn", linear_vars_[size_t(perm[k] - 1)] + " pinned to zero"});
        }
    }
}

AdditiveModel GamWorkspace::fit(Eigen::Ref<const Eigen::VectorXd> y) const {
    const Eigen::Index n = n_;
    if (y.size() != n) throw LengthMismatch("response length differs from design rows");
    const double y_sd = std::max(stats::sd(y), 1e-12);
    const double tol = options_.tol * y_sd;

    const size_t J = blocks_.size();
    Eigen::VectorXd fitted_linear = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::VectorXd> fitted_smooth(J, Eigen::VectorXd::Zero(n));
    std::vector<Eigen::VectorXd> theta(J);
    std::vector<double> psi(J, 0.0), edf(J, 0.0);
    Eigen::VectorXd lin_coefs;

    AdditiveModel model;
    model.family = options_.family;
    model.schema_fingerprint = fingerprint_;
    model.n_train = n;
    model.warnings = warnings_;
    model.gcv_freeze_cycle = options_.gcv_freeze;

    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
    bool converged = false;
    int cycle = 0;
    for (cycle = 1; cycle <= options_.max_cycles; ++cycle) {
        double max_change = 0.0;

        Eigen::VectorXd r = y - (total - fitted_linear);
        Eigen::VectorXd new_lin_coefs = linear_qr_.solve(r);
        for (int p : pinned_linear_) new_lin_coefs[p] = 0.0;
        Eigen::VectorXd new_fitted_linear = linear_design_ * new_lin_coefs;
        max_change = std::max(max_change, (new_fitted_linear - fitted_linear).cwiseAbs().maxCoeff());
        total += new_fitted_linear - fitted_linear;
        fitted_linear = std::move(new_fitted_linear);
        lin_coefs = std::move(new_lin_coefs);

        for (size_t j = 0; j < J; ++j) {
            r = y - (total - fitted_smooth[j]);
            const auto& solver = *blocks_[j].solver;
            const Eigen::VectorXd z = solver.project(r);
            if (cycle <= options_.gcv_freeze) {
                const auto choice = select_psi_gcv(solver, r);
                psi[j] = choice.psi;
            }
            theta[j] = solver.solve(z, psi[j]);
            edf[j] = solver.edf(psi[j]);
            Eigen::VectorXd new_fit = solver.fitted(theta[j]);
            max_change = std::max(max_change, (new_fit - fitted_smooth[j]).cwiseAbs().maxCoeff());
            total += new_fit - fitted_smooth[j];
            fitted_smooth[j] = std::move(new_fit);
        }

        double penalized_rss = (y - total).squaredNorm();
        for (size_t j = 0; j < J; ++j)
            penalized_rss += psi[j] * theta[j].dot(blocks_[j].penalty * theta[j]);
        model.objective_trace.push_back(penalized_rss);

        if (max_change < tol) {
            converged = true;
            break;
        }
    }
    model.cycles = std::min(cycle, options_.max_cycles);
    if (!converged) {
        // correlated smooths can leave a flat direction where components keep
        // trading small amounts; a stalled objective means the fit is done
        const auto& tr = model.objective_trace;
        bool stalled = tr.size() >= 10;
        if (stalled) {
            const double a = tr[tr.size() - 10], b = tr.back();
            stalled = std::abs(a - b) <= 1e-5 * std::max(1.0, std::abs(b));
        }
        if (!stalled) {
            std::string tail;
            for (size_t k = tr.size() >= 5 ? tr.size() - 5 : 0; k < tr.size(); ++k)
                tail += " " + std::to_string(tr[k]);
            throw NoConvergence("backfitting did not converge; objective tail:" + tail);
        }
        model.warnings.push_back({"ConvergedOnObjective",
                                  "component cycling with a stalled objective at cycle cap"});
    }

    model.intercept = lin_coefs[0];
    model.linear_names = linear_vars_;
    model.linear_coefs = lin_coefs.tail(lin_coefs.size() - 1);
    model.residuals = y - total;

    double total_edf = double(linear_qr_.rank());
    for (size_t j = 0; j < J; ++j) {
        SmoothTerm term;
        term.basis = blocks_[j].build.basis;
        // fold the centering offset into the coefficients: the basis
        // reproduces constants, so subtracting a constant coefficient shift
        // gives the same centered function without storing the offset
        const double offset = blocks_[j].build.basis.centering.dot(theta[j]);
        term.coefficients = theta[j].array() - offset;
        term.psi = psi[j];
        term.edf = edf[j];
        term.train_sq_norm = fitted_smooth[j].squaredNorm();
        total_edf += edf[j];
        model.smooths.push_back(std::move(term));
    }
    model.total_edf = total_edf;
    const double dof = std::max(double(n) - total_edf, 1.0);
    model.sigma2 = model.residuals.squaredNorm() / dof;
    return model;
}

AdditiveModel fit_gam(const Dataset& data, const std::vector<std::string>& smooth_vars,
                      const std::vector<std::string>& linear_vars, GamOptions options) {
    GamWorkspace ws(data, smooth_vars, linear_vars, options);
    return ws.fit(data.target());
}

Eigen::VectorXd predict(const AdditiveModel& model, const Dataset& newdata) {
    if (newdata.schema_fingerprint() != model.schema_fingerprint)
        throw SchemaMismatch("prediction data schema differs from training schema");
    const Eigen::Index n = newdata.n_rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, model.intercept);
    for (size_t j = 0; j < model.linear_names.size(); ++j) {
        const int col = newdata.column_index(model.linear_names[j]);
        if (col < 0) throw SchemaMismatch("missing column " + model.linear_names[j]);
        out += model.linear_coefs[Eigen::Index(j)] * newdata.column(col);
    }
    for (const auto& term : model.smooths) {
        const int col = newdata.column_index(term.basis.variable_id);
        if (col < 0) throw SchemaMismatch("missing column " + term.basis.variable_id);
        const Eigen::VectorXd x = newdata.column(col);
        for (Eigen::Index i = 0; i < n; ++i) out[i] += term.eval(x[i]);
    }
    return out;
}

SmoothSummary smooth_summary(const AdditiveModel& model) {
    SmoothSummary rows;
    const double n = double(model.n_train);
    const double denom_df = std::max(n - model.total_edf, 1.0);
    for (const auto& term : model.smooths) {
        SmoothSummaryRow row;
        row.variable = term.basis.variable_id;
        row.edf = term.edf;
        row.ref_df = double(term.basis.dim - 1);
        if (term.edf > 1e-8 && model.sigma2 > 0.0) {
            row.f_stat = (term.train_sq_norm / term.edf) / model.sigma2;
            row.p_value = stats::f_sf(row.f_stat, term.edf, denom_df);
        } else {
            row.f_stat = 0.0;
            row.p_value = 1.0;
        }
        rows.push_back(row);
    }
    return rows;
}

CurvePoints smooth_curve(const AdditiveModel& model, const std::string& variable,
                         Eigen::Ref<const Eigen::VectorXd> grid) {
    const SmoothTerm* term = model.smooth_for(variable);
    if (!term) throw UnknownVariable(variable + " has no smooth term");
    CurvePoints pts;
    pts.x = grid;
    pts.value.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) pts.value[i] = term->eval(grid[i]);
    return pts;
}

}  // namespace plam
