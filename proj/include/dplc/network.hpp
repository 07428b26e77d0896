#pragma once

// Fully connected ReLU network used as the nonparametric risk function g(z),
// trained on the partial likelihood with the linear part held fixed.

#include <dplc/survival.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace dplc {

using Rng = std::mt19937_64;

/// Hidden layers use ReLU and dropout; the output layer is linear with width 1.
struct NetworkArch {
    Index input_dim = 0;
    std::vector<Index> hidden;
    double dropout = 0.0;

    Index depth() const { return static_cast<Index>(hidden.size()); }
    Index num_parameters() const;
    void validate() const;
};

class Network {
public:
    Network() = default;
    explicit Network(NetworkArch arch);

    const NetworkArch& arch() const { return arch_; }
    Index num_layers() const { return static_cast<Index>(weights_.size()); }

    // weight(l) is (fan_out x fan_in)
    Eigen::MatrixXd& weight(Index l) { return weights_[static_cast<std::size_t>(l)]; }
    const Eigen::MatrixXd& weight(Index l) const { return weights_[static_cast<std::size_t>(l)]; }
    Eigen::VectorXd& bias(Index l) { return biases_[static_cast<std::size_t>(l)]; }
    const Eigen::VectorXd& bias(Index l) const { return biases_[static_cast<std::size_t>(l)]; }

    double center_offset() const { return center_offset_; }
    void set_center_offset(double c) { center_offset_ = c; }

    /// All parameters, layer by layer: weights column-major then bias.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    bool all_finite() const;

private:
    NetworkArch arch_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
    double center_offset_ = 0.0;
};

/// Xavier-uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases.
Network init_network(const NetworkArch& arch, std::uint64_t seed);

enum class Mode { train, eval };

/// Per-hidden-layer dropout masks, already scaled by 1/(1-rate); n x width each.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

DropoutMasks sample_dropout_masks(const Network& net, Index n, Rng& rng);

/**
 * Network output for each row of z. Eval mode is deterministic and subtracts
 * the centering offset; train mode applies inverted dropout and returns raw
 * outputs.
 */
Eigen::VectorXd forward(const Network& net, const Eigen::MatrixXd& z, Mode mode, Rng* rng = nullptr);

/// Raw (uncentered) eval-mode outputs.
Eigen::VectorXd forward_raw(const Network& net, const Eigen::MatrixXd& z);

struct NetworkGradient {
    double loss = 0;           // q at the sampled mask
    Eigen::VectorXd gradient;  // same layout as Network::parameters()
};

/// Backpropagate dq/d eta through g for a given set of masks (empty = no dropout).
NetworkGradient backprop(const Network& net, const Eigen::MatrixXd& z, const Eigen::VectorXd& xi,
                         const Eigen::VectorXi& status, const RiskIndex& index, const DropoutMasks& masks);

/// Gradient of q with respect to every network parameter, beta held fixed.
NetworkGradient grad_params(const Network& net, const SurvivalDatasetd& dataset, const RiskIndex& index,
                            const Eigen::VectorXd& beta_fixed, Rng& rng);

struct AdamConfig {
    double r1 = 0.9;
    double r2 = 0.999;
    double learning_rate = 0.01;
    double eps0 = 1e-8;
    int inner_steps = 20;
    double tol = 1e-8;  // stop when ||Theta^(t) - Theta^(t-1)||_2 <= tol
    bool keep_best = true;  // early stopping: return the iterate with the lowest dropout-free loss, start included

    void validate() const;
};

struct AdamFitResult {
    Network net;
    int steps = 0;
    std::vector<double> loss_trace;  // train-mode q before each step
};

/**
 * Up to inner_steps full-batch Adam updates of the network with the linear
 * predictor xi = X beta fixed. Moments start from zero on every call. The
 * returned network is centered over z.
 */
AdamFitResult adam_fit(Network net, const Eigen::MatrixXd& z, const Eigen::VectorXd& xi,
                       const Eigen::VectorXi& status, const RiskIndex& index, const AdamConfig& cfg, Rng& rng);

AdamFitResult adam_fit(Network net, const SurvivalDatasetd& dataset, const RiskIndex& index,
                       const Eigen::VectorXd& beta_fixed, const AdamConfig& cfg, Rng& rng);

/// Set the offset so the eval-mode outputs over z have mean zero.
Network center(Network net, const Eigen::MatrixXd& z);

} // namespace dplc
