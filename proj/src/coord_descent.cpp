#include <dplc/coord_descent.hpp>

#include <cmath>

namespace dplc {

StandardizedDesign StandardizedDesign::from(const Eigen::MatrixXd& raw)
{
    StandardizedDesign d;
    const Index n = raw.rows();
    if (n == 0) throw InputError("empty dataset");
    d.center = raw.colwise().mean().transpose();
    d.x = raw.rowwise() - d.center.transpose();
    d.scale.resize(raw.cols());
    for (Index j = 0; j < raw.cols(); ++j) {
        const double sd = std::sqrt(d.x.col(j).squaredNorm() / static_cast<double>(n));
        if (sd > 1e-12 * (1.0 + d.center(j) * d.center(j))) {
            d.scale(j) = sd;
            d.x.col(j) /= sd;
        } else {
            d.scale(j) = 0.0;
            d.x.col(j).setZero();
        }
    }
    return d;
}

Eigen::VectorXd StandardizedDesign::to_original(const Eigen::VectorXd& beta_std) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(beta_std.size());
    for (Index j = 0; j < beta_std.size(); ++j)
        if (scale(j) > 0 && beta_std(j) != 0.0) out(j) = beta_std(j) / scale(j);
    return out;
}

Eigen::VectorXd StandardizedDesign::to_standardized(const Eigen::VectorXd& beta) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(beta.size());
    for (Index j = 0; j < beta.size(); ++j)
        if (scale(j) > 0 && beta(j) != 0.0) out(j) = beta(j) * scale(j);
    return out;
}

SurrogateInputs surrogate_inputs(Index j, const CdState& state, const Eigen::MatrixXd& x)
{
    const auto col = x.col(j);
    const double v = std::max(kCurvatureFloor, col.cwiseAbs2().dot(state.weights));
    const double h = col.dot(state.weights.cwiseProduct(state.residual)) + v * state.beta(j);
    return {h, v};
}

double coordinate_update(double h, double v, double current, const ScadConfigd& cfg, ThresholdRule rule,
                         bool* safeguarded)
{
    if (rule == ThresholdRule::exact) return scad_exact_minimizer(h, v, cfg);
    const double candidate = scad_threshold(h, v, cfg);
    const double f_candidate = scad_objective(candidate, h, v, cfg);
    const double f_current = scad_objective(current, h, v, cfg);
    if (f_candidate <= f_current + 1e-14 * (1.0 + std::abs(f_current))) return candidate;
    if (safeguarded) *safeguarded = true;
    return scad_exact_minimizer(h, v, cfg);
}

namespace {

double surrogate_value(const CdState& s, const ScadConfigd& cfg)
{
    double pen = 0;
    for (Index j = 0; j < s.beta.size(); ++j) pen += scad_value(std::abs(s.beta(j)), cfg);
    return 0.5 * s.residual.cwiseAbs2().dot(s.weights) + pen;
}

// Refresh W, y and r at the current beta (one IRLS step).
std::size_t refresh(CdState& s, Eigen::VectorXd& y, const StandardizedDesign& design, const Eigen::VectorXi& status,
                    const RiskIndex& index, const Eigen::VectorXd& g_vals)
{
    s.xi.noalias() = design.x * s.beta;
    const auto d = cox_derivatives((s.xi + g_vals).eval(), status, index, true, true);
    s.weights = d.hess_diag;
    auto wr = working_response(s.xi, d.grad, s.weights);
    y = std::move(wr.y);
    s.residual = y - s.xi;
    return wr.floored.size();
}

} // namespace

CdResult cd_fit(const StandardizedDesign& design, const Eigen::VectorXi& status, const RiskIndex& index,
                const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta_init, const ScadConfigd& cfg,
                const CdSettings& settings)
{
    cfg.validate();
    const Index n = design.rows();
    const Index p = design.cols();
    if (g_vals.size() != n) throw InputError("cd_fit: g_vals size does not match dataset");
    if (beta_init.size() != p) throw InputError("cd_fit: beta_init size does not match covariates");
    if (!g_vals.allFinite() || !beta_init.allFinite()) throw NumericalError("cd_fit: non-finite input");

    CdResult result;
    CdState s;
    s.beta = design.to_standardized(beta_init);
    Eigen::VectorXd y;
    Eigen::VectorXd previous(p);

    for (int sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
        result.floored_weights += refresh(s, y, design, status, index, g_vals);
        previous = s.beta;
        double before = settings.audit ? surrogate_value(s, cfg) : 0.0;

        for (Index j = 0; j < p; ++j) {
            if (design.scale(j) == 0.0) continue;
            const auto [h, v] = surrogate_inputs(j, s, design.x);
            bool guarded = false;
            const double updated = coordinate_update(h, v, s.beta(j), cfg, settings.rule, &guarded);
            if (guarded) ++result.safeguarded_updates;
            const double delta = updated - s.beta(j);
            if (delta != 0.0) {
                s.residual.noalias() -= delta * design.x.col(j);
                s.beta(j) = updated;
            }
            if (settings.audit) {
                const double after = surrogate_value(s, cfg);
                result.max_surrogate_increase = std::max(result.max_surrogate_increase, after - before);
                before = after;
            }
        }

        if (settings.audit) {
            const Eigen::VectorXd fresh = y - design.x * s.beta;
            result.max_residual_drift =
                std::max(result.max_residual_drift, (fresh - s.residual).cwiseAbs().maxCoeff());
        }
        if (!s.beta.allFinite() || s.beta.cwiseAbs().maxCoeff() > kDivergenceBound)
            throw NumericalError("divergence; reduce step or increase lambda");

        result.sweeps = sweep;
        if ((s.beta - previous).norm() <= settings.tol) {
            result.converged = true;
            break;
        }
    }

    result.beta_standardized = s.beta;
    result.beta = design.to_original(s.beta);
    return result;
}

CdResult cd_fit(const SurvivalDatasetd& dataset, const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta_init,
                const ScadConfigd& cfg, const CdSettings& settings)
{
    const auto design = StandardizedDesign::from(dataset.x);
    const RiskIndex index(dataset.times);
    return cd_fit(design, dataset.status, index, g_vals, beta_init, cfg, settings);
}

double penalized_loss(const StandardizedDesign& design, const Eigen::VectorXi& status, const RiskIndex& index,
                      const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta, const ScadConfigd& cfg)
{
    const Eigen::VectorXd beta_std = design.to_standardized(beta);
    const Eigen::VectorXd eta = design.x * beta_std + g_vals;
    double q = cox_derivatives(eta, status, index, false, false).loss;
    for (Index j = 0; j < beta_std.size(); ++j) q += scad_value(std::abs(beta_std(j)), cfg);
    return q;
}

} // namespace dplc
