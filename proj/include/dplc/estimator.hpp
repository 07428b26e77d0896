#pragma once

// Alternating estimation of the partially linear Cox model: network steps with
// beta fixed, coordinate-descent steps with g fixed, plus tuning by BIC.

#include <dplc/coord_descent.hpp>
#include <dplc/network.hpp>
#include <dplc/scad.hpp>
#include <dplc/survival.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace dplc {

struct FitConfig {
    ScadConfigd scad;
    NetworkArch arch;          // input_dim 0 means "take it from the data"
    AdamConfig adam;
    CdSettings cd;
    double outer_tol = 1e-4;
    int max_outer = 50;
    bool use_network = true;   // false gives the g == 0 Cox-SCAD model
    std::uint64_t seed = 1;

    void validate() const;
};

struct FitDiagnostics {
    std::vector<double> loss_trace;  // penalized loss Q after each outer iteration
    std::vector<int> cd_sweeps;
    int outer_iterations = 0;
    bool converged = false;
    double neg_loglik = 0;           // q at the returned estimate
    double bic = 0;
    double train_c_index = 0;        // NaN when no comparable pairs
};

struct FittedModel {
    Eigen::VectorXd beta;            // original covariate scale, exact zeros off the support
    std::optional<Network> net;      // empty for the g == 0 model
    std::vector<Index> support;
    double lambda = 0;
    FitDiagnostics diagnostics;

    Index num_linear() const { return beta.size(); }
    /// Centered g(z) in eval mode; zeros without a network.
    Eigen::VectorXd g_values(const Eigen::MatrixXd& z) const;
};

struct WarmStart {
    Eigen::VectorXd beta;
    std::optional<Network> net;
};

FittedModel fit(const SurvivalDatasetd& dataset, const FitConfig& cfg, const WarmStart* warm = nullptr);

/// beta' x + g(z) for each row; larger means higher hazard.
Eigen::VectorXd predict_eta(const FittedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

/// -2 n loglik + log(n) s with loglik the per-subject averaged log partial likelihood.
double bic_value(double loglik, Index n, Index support_size);
double bic(const FittedModel& model, const SurvivalDatasetd& dataset);

struct LambdaPathEntry {
    double lambda = 0;
    Eigen::VectorXd beta;
    double bic = 0;
    double neg_loglik = 0;
    Index support_size = 0;
};

struct LambdaPath {
    double best_lambda = 0;
    std::size_t best_index = 0;
    std::vector<LambdaPathEntry> entries;
    FittedModel best_model;
};

/// Fits along an ascending grid with warm starts; argmin BIC, ties toward larger lambda.
LambdaPath tune_lambda(const SurvivalDatasetd& dataset, const std::vector<double>& lambda_grid, const FitConfig& cfg);

/// Log-spaced grid of count values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

struct ArchGrid {
    std::vector<Index> depths;   // number of hidden layers
    std::vector<Index> widths;   // common width of every hidden layer
    std::vector<double> dropouts;
    std::vector<double> learning_rates;

    std::size_t size() const { return depths.size() * widths.size() * dropouts.size() * learning_rates.size(); }
};

enum class ArchCriterion { validation, training_bic };

struct ArchCandidate {
    NetworkArch arch;
    double learning_rate = 0;
    double score = 0;
};

struct ArchitectureChoice {
    NetworkArch arch;
    double learning_rate = 0;
    double score = 0;
    std::vector<ArchCandidate> evaluated;
};

/**
 * Exhaustive grid search at the configured lambda. The validation criterion
 * fits on a stratified split and scores held-out partial likelihood; ties go
 * to the smaller network (depth, then width).
 */
ArchitectureChoice tune_architecture(const SurvivalDatasetd& dataset, const ArchGrid& grid, const FitConfig& cfg,
                                     ArchCriterion criterion = ArchCriterion::validation,
                                     double validation_fraction = 0.2);

struct TuningPlan {
    std::vector<double> lambda_grid;
    std::optional<ArchGrid> arch_grid;  // architecture search when set with more than one cell
    ArchCriterion arch_criterion = ArchCriterion::validation;
};

struct TunedFit {
    LambdaPath path;
    std::optional<ArchitectureChoice> architecture;
    FitConfig config;  // configuration of the selected model
};

/**
 * Full tuning protocol: with an architecture grid, a pilot lambda path at the
 * base architecture picks lambda, the grid is searched at that lambda, and the
 * final lambda path runs with the chosen architecture and learning rate.
 */
TunedFit tune_and_fit(const SurvivalDatasetd& dataset, const TuningPlan& plan, const FitConfig& cfg);

struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};

/// Random split stratified by event status; each stratum contributes round(train_fraction * size) to train.
Split stratified_split(const Eigen::VectorXi& status, double train_fraction, Rng& rng);

} // namespace dplc
