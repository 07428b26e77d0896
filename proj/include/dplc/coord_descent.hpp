#pragma once

// SCAD-penalized coordinate descent for the linear coefficients with the
// network contribution held fixed. Each sweep works on the diagonal-Hessian
// weighted least-squares surrogate of the partial likelihood.

#include <dplc/scad.hpp>
#include <dplc/survival.hpp>

#include <Eigen/Dense>

namespace dplc {

/// Columns centered and scaled to unit (1/n) variance; constant columns keep scale 0.
struct StandardizedDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd center;
    Eigen::VectorXd scale;

    static StandardizedDesign from(const Eigen::MatrixXd& raw);

    Index rows() const { return x.rows(); }
    Index cols() const { return x.cols(); }
    Eigen::VectorXd to_original(const Eigen::VectorXd& beta_std) const;
    Eigen::VectorXd to_standardized(const Eigen::VectorXd& beta) const;
};

/**
 * exact: global minimizer of the one-dimensional surrogate v/2 b^2 - h b + p(|b|).
 * rescaled: the closed-form threshold f(h)/v, which minimizes the surrogate with the
 * penalty rescaled to p(v|b|)/v; identical to exact when v == 1.
 */
enum class ThresholdRule { exact, rescaled };

struct CdSettings {
    double tol = 1e-6;       // stop when ||beta^(t) - beta^(t-1)||_2 <= tol
    int max_sweeps = 200;
    ThresholdRule rule = ThresholdRule::exact;
    bool audit = false;      // track surrogate descent and residual drift (extra O(np) per sweep)
};

/// Per-sweep working quantities, synchronized at sweep boundaries.
struct CdState {
    Eigen::VectorXd beta;      // standardized scale
    Eigen::VectorXd xi;        // X_std beta
    Eigen::VectorXd residual;  // y(xi) - xi
    Eigen::VectorXd weights;   // diagonal W(xi)
};

struct SurrogateInputs {
    double h;
    double v;
};

inline constexpr double kCurvatureFloor = 1e-10;
inline constexpr double kDivergenceBound = 1e6;

/// h_j = x_j' W r + v_j beta_j and v_j = x_j' W x_j (floored).
SurrogateInputs surrogate_inputs(Index j, const CdState& state, const Eigen::MatrixXd& x);

/**
 * Coordinate update for one coefficient. Under the rescaled rule a closed-form
 * step that would increase the local surrogate (possible only when v != 1) is
 * replaced by the exact minimizer and reported through safeguarded.
 */
double coordinate_update(double h, double v, double current, const ScadConfigd& cfg,
                         ThresholdRule rule = ThresholdRule::exact, bool* safeguarded = nullptr);

struct CdResult {
    Eigen::VectorXd beta;               // original covariate scale, exact zeros preserved
    Eigen::VectorXd beta_standardized;
    int sweeps = 0;
    bool converged = false;
    int safeguarded_updates = 0;
    std::size_t floored_weights = 0;
    double max_surrogate_increase = 0;  // audit only
    double max_residual_drift = 0;      // audit only
};

CdResult cd_fit(const StandardizedDesign& design, const Eigen::VectorXi& status, const RiskIndex& index,
                const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta_init, const ScadConfigd& cfg,
                const CdSettings& settings = {});

CdResult cd_fit(const SurvivalDatasetd& dataset, const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta_init,
                const ScadConfigd& cfg, const CdSettings& settings = {});

/// Penalized loss Q = q(X beta + g) + sum_j p_lambda(|beta_std_j|).
double penalized_loss(const StandardizedDesign& design, const Eigen::VectorXi& status, const RiskIndex& index,
                      const Eigen::VectorXd& g_vals, const Eigen::VectorXd& beta, const ScadConfigd& cfg);

} // namespace dplc
