#pragma once

// Simulation benchmark: data-generating process with calibrated censoring and
// the replicated experiment runner.

#include <dplc/estimator.hpp>
#include <dplc/metrics.hpp>

#include <functional>
#include <string>
#include <vector>

namespace dplc {

enum class G0Kind { linear, nonlinear, zero };

struct SimConfig {
    Index n = 500;
    Index p = 100;
    Index r = 8;
    Index s_beta = 10;
    double rho = 0.2;
    G0Kind g0 = G0Kind::linear;
    double target_censoring = 0.30;
    double mu = 1.0;
    double beta_min = 0.5;  // nonzero |beta0_j| ~ U[beta_min, beta_max] with random sign
    double beta_max = 2.0;
    double alpha_bound = 2.0;  // linear g0 coefficients ~ U(-alpha_bound, alpha_bound)

    void validate() const;
};

struct Covariates {
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
};

/// Rows of [x z] ~ N(0, (1-rho) I + rho 11') via sqrt(1-rho) e_i + sqrt(rho) e_0.
Covariates gen_covariates(const SimConfig& cfg, Rng& rng);

struct G0Value {
    double value = 0;
    bool perturbed = false;  // z2 == z3 in the nonlinear form
};

G0Value g0_eval(const Eigen::Ref<const Eigen::VectorXd>& z, G0Kind kind, const Eigen::VectorXd& alpha);

/// Exponential event times with hazard mu exp(eta0), by inverse-CDF sampling.
Eigen::VectorXd gen_survival(const Eigen::VectorXd& eta0, double mu, Rng& rng);

/// mean_i P(C_i < U_i) for C_i ~ U[0, bound].
double expected_censoring_rate(const Eigen::VectorXd& event_times, double bound);

/// Upper bound of the uniform censoring distribution giving the target censoring rate.
double calibrate_censoring(const Eigen::VectorXd& event_times, double target_rate);

struct SimulatedData {
    SurvivalDatasetd data;
    Eigen::VectorXd beta0;
    Eigen::VectorXd alpha0;
    std::vector<Index> support;
    double censoring_bound = 0;
    double censoring_rate = 0;  // realized
    Index perturbed = 0;
};

SimulatedData simulate(const SimConfig& cfg, Rng& rng);

enum class Method { dplc, cox_scad };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ExperimentConfig {
    FitConfig fit;
    TuningPlan tuning;
    std::vector<Method> methods{Method::dplc};
    double train_fraction = 0.8;
    int threads = 1;
};

struct ReplicateResult {
    int replicate = 0;
    Method method = Method::dplc;
    bool ok = true;
    std::string error;
    double c_index = 0;
    SelectionRow selection;
    bool has_truth = true;
    double lambda = 0;
    std::string architecture;  // hidden widths joined by 'x', "none" without a network
    double learning_rate = 0;
    double dropout = 0;
    double censoring_rate = 0;
    Index train_size = 0;
    Index test_size = 0;
};

struct MethodSummary {
    Method method = Method::dplc;
    Summary c_index;
    Summary selected, fpn, fpr, fnn, fnr;
    int failures = 0;
};

struct ExperimentReport {
    std::vector<ReplicateResult> rows;  // replicate-major, methods in configured order
    std::vector<MethodSummary> summaries;
    Summary censoring;
};

/// Generator seeded deterministically from (master seed, replicate).
Rng replicate_rng(std::uint64_t master_seed, int replicate);

/**
 * Independent replicates: simulate, split train/test stratified by status,
 * tune and fit each method on train, score C-index on test and support
 * recovery against the truth. on_replicate sees each replicate's rows in
 * replicate order even when running on several threads.
 */
ExperimentReport run_experiment(const SimConfig& sim, const ExperimentConfig& exp, int replicates,
                                std::uint64_t seed,
                                const std::function<void(const std::vector<ReplicateResult>&)>& on_replicate = {});

} // namespace dplc
