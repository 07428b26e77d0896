#include <dplc/network.hpp>

#include <cmath>
#include <limits>
#include <utility>

namespace dplc {

Index NetworkArch::num_parameters() const
{
    Index total = 0;
    Index fan_in = input_dim;
    for (const Index w : hidden) {
        total += w * fan_in + w;
        fan_in = w;
    }
    return total + fan_in + 1;
}

void NetworkArch::validate() const
{
    if (input_dim < 1) throw InputError("network: input dimension must be positive");
    for (const Index w : hidden)
        if (w < 1) throw InputError("network: hidden widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("network: dropout rate must lie in [0, 1)");
}

Network::Network(NetworkArch arch) : arch_(std::move(arch))
{
    arch_.validate();
    Index fan_in = arch_.input_dim;
    for (const Index w : arch_.hidden) {
        weights_.emplace_back(Eigen::MatrixXd::Zero(w, fan_in));
        biases_.emplace_back(Eigen::VectorXd::Zero(w));
        fan_in = w;
    }
    weights_.emplace_back(Eigen::MatrixXd::Zero(1, fan_in));
    biases_.emplace_back(Eigen::VectorXd::Zero(1));
}

Eigen::VectorXd Network::parameters() const
{
    Eigen::VectorXd flat(arch_.num_parameters());
    Index pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const auto& w = weights_[l];
        flat.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
        pos += w.size();
        flat.segment(pos, biases_[l].size()) = biases_[l];
        pos += biases_[l].size();
    }
    return flat;
}

void Network::set_parameters(const Eigen::VectorXd& flat)
{
    if (flat.size() != arch_.num_parameters()) throw InputError("network: parameter vector has wrong size");
    Index pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto& w = weights_[l];
        Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = flat.segment(pos, w.size());
        pos += w.size();
        biases_[l] = flat.segment(pos, biases_[l].size());
        pos += biases_[l].size();
    }
}

bool Network::all_finite() const
{
    for (std::size_t l = 0; l < weights_.size(); ++l)
        if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return std::isfinite(center_offset_);
}

Network init_network(const NetworkArch& arch, std::uint64_t seed)
{
    Network net(arch);
    Rng rng(seed);
    for (Index l = 0; l < net.num_layers(); ++l) {
        auto& w = net.weight(l);
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> unif(-bound, bound);
        for (Index c = 0; c < w.cols(); ++c)
            for (Index r = 0; r < w.rows(); ++r) w(r, c) = unif(rng);
    }
    return net;
}

DropoutMasks sample_dropout_masks(const Network& net, Index n, Rng& rng)
{
    DropoutMasks masks;
    const double rate = net.arch().dropout;
    if (rate <= 0.0) return masks;
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (const Index width : net.arch().hidden) {
        Eigen::MatrixXd m(n, width);
        for (Index c = 0; c < width; ++c)
            for (Index r = 0; r < n; ++r) m(r, c) = keep(rng) ? scale : 0.0;
        masks.push_back(std::move(m));
    }
    return masks;
}

namespace {

void check_input(const Network& net, const Eigen::MatrixXd& z)
{
    if (z.cols() != net.arch().input_dim) throw InputError("network: input has wrong number of columns");
}

// Pre-activations of every layer; activations[l] is the input to layer l.
struct ForwardPass {
    std::vector<Eigen::MatrixXd> activations;
    std::vector<Eigen::MatrixXd> pre;
    Eigen::VectorXd output;
};

ForwardPass run_forward(const Network& net, const Eigen::MatrixXd& z, const DropoutMasks& masks)
{
    ForwardPass fp;
    const Index layers = net.num_layers();
    fp.activations.reserve(static_cast<std::size_t>(layers));
    fp.pre.reserve(static_cast<std::size_t>(layers));
    fp.activations.push_back(z);
    for (Index l = 0; l < layers; ++l) {
        Eigen::MatrixXd pre = fp.activations.back() * net.weight(l).transpose();
        pre.rowwise() += net.bias(l).transpose();
        fp.pre.push_back(pre);
        if (l + 1 < layers) {
            Eigen::MatrixXd act = pre.cwiseMax(0.0);
            if (!masks.empty()) act.array() *= masks[static_cast<std::size_t>(l)].array();
            fp.activations.push_back(std::move(act));
        }
    }
    fp.output = fp.pre.back().col(0);
    return fp;
}

} // namespace

Eigen::VectorXd forward_raw(const Network& net, const Eigen::MatrixXd& z)
{
    check_input(net, z);
    return run_forward(net, z, {}).output;
}

Eigen::VectorXd forward(const Network& net, const Eigen::MatrixXd& z, Mode mode, Rng* rng)
{
    check_input(net, z);
    if (mode == Mode::eval) {
        Eigen::VectorXd out = run_forward(net, z, {}).output;
        out.array() -= net.center_offset();
        return out;
    }
    DropoutMasks masks;
    if (net.arch().dropout > 0.0) {
        if (!rng) throw InputError("network: train mode with dropout requires a random generator");
        masks = sample_dropout_masks(net, z.rows(), *rng);
    }
    return run_forward(net, z, masks).output;
}

NetworkGradient backprop(const Network& net, const Eigen::MatrixXd& z, const Eigen::VectorXd& xi,
                         const Eigen::VectorXi& status, const RiskIndex& index, const DropoutMasks& masks)
{
    check_input(net, z);
    const auto fp = run_forward(net, z, masks);
    const auto d = cox_derivatives((xi + fp.output).eval(), status, index, true, false);

    NetworkGradient out;
    out.loss = d.loss;
    out.gradient.resize(net.arch().num_parameters());

    std::vector<Eigen::MatrixXd> grad_w(static_cast<std::size_t>(net.num_layers()));
    std::vector<Eigen::VectorXd> grad_b(static_cast<std::size_t>(net.num_layers()));
    Eigen::MatrixXd delta = d.grad;  // n x 1
    for (Index l = net.num_layers() - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        grad_w[ul] = delta.transpose() * fp.activations[ul];
        grad_b[ul] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * net.weight(l);
            back.array() *= (fp.pre[ul - 1].array() > 0.0).cast<double>();
            if (!masks.empty()) back.array() *= masks[ul - 1].array();
            delta = std::move(back);
        }
    }

    Index pos = 0;
    for (std::size_t l = 0; l < grad_w.size(); ++l) {
        out.gradient.segment(pos, grad_w[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(grad_w[l].data(), grad_w[l].size());
        pos += grad_w[l].size();
        out.gradient.segment(pos, grad_b[l].size()) = grad_b[l];
        pos += grad_b[l].size();
    }
    return out;
}

NetworkGradient grad_params(const Network& net, const SurvivalDatasetd& dataset, const RiskIndex& index,
                            const Eigen::VectorXd& beta_fixed, Rng& rng)
{
    const Eigen::VectorXd xi = dataset.x * beta_fixed;
    const auto masks = sample_dropout_masks(net, dataset.size(), rng);
    return backprop(net, dataset.z, xi, dataset.status, index, masks);
}

void AdamConfig::validate() const
{
    if (!(r1 > 0.0 && r1 < 1.0) || !(r2 > 0.0 && r2 < 1.0)) throw InputError("adam: decay rates must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw InputError("adam: learning rate must be positive");
    if (!(eps0 > 0.0)) throw InputError("adam: eps0 must be positive");
    if (inner_steps < 1) throw InputError("adam: inner_steps must be at least 1");
    if (!(tol >= 0.0)) throw InputError("adam: tolerance must be nonnegative");
}

AdamFitResult adam_fit(Network net, const Eigen::MatrixXd& z, const Eigen::VectorXd& xi,
                       const Eigen::VectorXi& status, const RiskIndex& index, const AdamConfig& cfg, Rng& rng)
{
    cfg.validate();
    AdamFitResult result;
    Eigen::VectorXd theta = net.parameters();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    double decay1 = 1.0;
    double decay2 = 1.0;

    const auto eval_loss = [&](const Network& candidate) {
        const Eigen::VectorXd eta = xi + forward_raw(candidate, z);
        const double q = eta.allFinite() ? cox_derivatives(eta, status, index, false, false).loss
                                         : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(q)) throw NumericalError("training diverged");
        return q;
    };
    Eigen::VectorXd best_theta = theta;
    double best_loss = cfg.keep_best ? eval_loss(net) : 0.0;

    for (int t = 1; t <= cfg.inner_steps; ++t) {
        const auto masks = sample_dropout_masks(net, z.rows(), rng);
        NetworkGradient g;
        try {
            g = backprop(net, z, xi, status, index, masks);
        } catch (const NumericalError&) {
            throw NumericalError("training diverged");
        }
        if (!std::isfinite(g.loss) || !g.gradient.allFinite()) throw NumericalError("training diverged");
        result.loss_trace.push_back(g.loss);

        m = cfg.r1 * m + (1.0 - cfg.r1) * g.gradient;
        v = cfg.r2 * v + (1.0 - cfg.r2) * g.gradient.cwiseAbs2();
        decay1 *= cfg.r1;
        decay2 *= cfg.r2;
        const Eigen::VectorXd m_hat = m / (1.0 - decay1);
        const Eigen::VectorXd v_hat = v / (1.0 - decay2);
        const Eigen::VectorXd step =
            cfg.learning_rate * (m_hat.array() / (v_hat.array().sqrt() + cfg.eps0)).matrix();
        theta -= step;
        net.set_parameters(theta);
        result.steps = t;
        if (cfg.keep_best) {
            const double q = eval_loss(net);
            if (q < best_loss) {
                best_loss = q;
                best_theta = theta;
            }
        }
        if (step.norm() <= cfg.tol) break;
    }
    if (!net.all_finite()) throw NumericalError("training diverged");
    if (cfg.keep_best) net.set_parameters(best_theta);
    result.net = center(std::move(net), z);
    return result;
}

AdamFitResult adam_fit(Network net, const SurvivalDatasetd& dataset, const RiskIndex& index,
                       const Eigen::VectorXd& beta_fixed, const AdamConfig& cfg, Rng& rng)
{
    const Eigen::VectorXd xi = dataset.x * beta_fixed;
    return adam_fit(std::move(net), dataset.z, xi, dataset.status, index, cfg, rng);
}

Network center(Network net, const Eigen::MatrixXd& z)
{
    const Eigen::VectorXd raw = forward_raw(net, z);
    net.set_center_offset(raw.size() > 0 ? raw.mean() : 0.0);
    return net;
}

} // namespace dplc
