#include "oracles.hpp"

#include <doctest.h>

#include <dplc/network.hpp>

using namespace dplc;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

NetworkArch arch(Index r, std::vector<Index> hidden, double dropout = 0.0)
{
    NetworkArch a;
    a.input_dim = r;
    a.hidden = std::move(hidden);
    a.dropout = dropout;
    return a;
}

MatrixXd normal_matrix(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> normal;
    MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    return m;
}

// q(xi + g(z)) with the literal network and likelihood oracles
double literal_loss(const Network& net, const MatrixXd& z, const VectorXd& xi, const oracle::Instance& in)
{
    return oracle::neg_loglik(in.times, in.status, xi + oracle::net_output(net, z));
}

} // namespace

TEST_CASE("initialization")
{
    const auto net = init_network(arch(2, {4}), 42);
    for (Index l = 0; l < net.num_layers(); ++l) CHECK(net.bias(l).isZero(0));
    CHECK(net.weight(0).cwiseAbs().maxCoeff() <= 1.0);
    CHECK(net.weight(0).rows() == 4);
    CHECK(net.weight(0).cols() == 2);
    CHECK(net.weight(1).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 5.0));
    CHECK(init_network(arch(2, {4}), 42).parameters() == net.parameters());
    CHECK(init_network(arch(2, {4}), 43).parameters() != net.parameters());

    const auto deep = init_network(arch(5, {8, 3}), 1);
    CHECK(deep.num_layers() == 3);
    CHECK(deep.parameters().size() == 5 * 8 + 8 + 8 * 3 + 3 + 3 + 1);
    CHECK(deep.all_finite());

    const auto linear = init_network(arch(3, {}), 1);
    CHECK(linear.num_layers() == 1);
    CHECK(linear.parameters().size() == 4);
}

TEST_CASE("architecture validation")
{
    CHECK_THROWS_AS(arch(0, {2}).validate(), InputError);
    CHECK_THROWS_AS(arch(2, {0}).validate(), InputError);
    CHECK_THROWS_AS(arch(2, {2}, 1.0).validate(), InputError);
    CHECK_THROWS_AS(arch(2, {2}, -0.1).validate(), InputError);
}

TEST_CASE("parameter vector round trip")
{
    auto net = init_network(arch(3, {4, 2}), 9);
    VectorXd theta = VectorXd::LinSpaced(net.parameters().size(), -1, 1);
    net.set_parameters(theta);
    CHECK(net.parameters() == theta);
    CHECK(net.weight(0)(1, 0) == theta(1));  // column-major within the layer
    CHECK_THROWS_AS(net.set_parameters(VectorXd::Zero(3)), InputError);
}

TEST_CASE("forward pass")
{
    Rng rng(5);
    const MatrixXd z = normal_matrix(6, 2, rng);

    Network zero(arch(2, {3}));
    CHECK(forward(zero, z, Mode::eval).isZero(0));

    Network unit(arch(2, {1}));
    unit.weight(0) << 1, 0;
    unit.weight(1) << 1;
    MatrixXd pts(2, 2);
    pts << -3, 7, 2, 5;
    const VectorXd out = forward(unit, pts, Mode::eval);
    CHECK(out(0) == 0.0);
    CHECK(out(1) == 2.0);

    const auto net = init_network(arch(2, {5, 3}), 3);
    CHECK(forward(net, z, Mode::train, &rng) == forward(net, z, Mode::eval));
    CHECK(forward(net, z, Mode::eval) == forward(net, z, Mode::eval));
    CHECK(oracle::rel_err(forward_raw(net, z), oracle::net_output(net, z)) < 1e-14);

    CHECK_THROWS_AS(forward(net, MatrixXd::Zero(3, 4), Mode::eval), InputError);
    const auto dropped = init_network(arch(2, {5}, 0.5), 3);
    CHECK_THROWS_AS(forward(dropped, z, Mode::train), InputError);
}

TEST_CASE("dropout is unbiased at the output of a one-hidden-layer net")
{
    Rng rng(11);
    const MatrixXd z = normal_matrix(4, 3, rng);
    for (const double rate : {0.3, 0.5}) {
        auto net = init_network(arch(3, {8}, rate), 17);
        net.bias(0).setConstant(0.1);
        const VectorXd eval = forward_raw(net, z);
        const int draws = 10000;
        VectorXd sum = VectorXd::Zero(4), sum_sq = VectorXd::Zero(4);
        for (int k = 0; k < draws; ++k) {
            const VectorXd out = forward(net, z, Mode::train, &rng);
            sum += out;
            sum_sq += out.cwiseAbs2();
        }
        const VectorXd mean = sum / draws;
        for (Index i = 0; i < 4; ++i) {
            const double var = sum_sq(i) / draws - mean(i) * mean(i);
            const double se = std::sqrt(var / draws);
            CHECK(std::abs(mean(i) - eval(i)) <= 3 * se + 1e-12);
        }
    }
}

TEST_CASE("masks are scaled survivors")
{
    Rng rng(2);
    const auto net = init_network(arch(2, {6, 4}, 0.25), 1);
    const auto masks = sample_dropout_masks(net, 50, rng);
    REQUIRE(masks.size() == 2);
    CHECK(masks[0].rows() == 50);
    CHECK(masks[0].cols() == 6);
    CHECK(masks[1].cols() == 4);
    for (const auto& m : masks)
        for (Index k = 0; k < m.size(); ++k)
            CHECK((m.data()[k] == 0.0 || m.data()[k] == doctest::Approx(1.0 / 0.75)));
    CHECK(sample_dropout_masks(init_network(arch(2, {6}), 1), 50, rng).empty());
}

TEST_CASE("gradient of the loss with respect to every parameter")
{
    Rng rng(8);
    const auto in = oracle::random_instance(10, rng, false);
    const MatrixXd z = normal_matrix(10, 2, rng);
    const VectorXd xi = 0.3 * in.eta;
    auto net = init_network(arch(2, {3}), 21);
    net.bias(0) << 0.2, -0.1, 0.3;
    const RiskIndex idx(in.times);

    const auto g = backprop(net, z, xi, in.status, idx, {});
    CHECK(g.loss == doctest::Approx(literal_loss(net, z, xi, in)).epsilon(1e-13));
    const auto f = [&](const VectorXd& theta) {
        Network copy = net;
        copy.set_parameters(theta);
        return literal_loss(copy, z, xi, in);
    };
    CHECK(oracle::rel_err(g.gradient, oracle::central_diff(f, net.parameters(), 1e-6)) < 1e-5);

    auto d = oracle::as_dataset(in, 1, 2);
    d.z = z;
    d.x.col(0) = xi;
    const auto viaset = grad_params(net, d, idx, VectorXd::Ones(1), rng);
    CHECK(oracle::rel_err(viaset.gradient, g.gradient) < 1e-14);
}

TEST_CASE("no events means a zero gradient and no movement")
{
    Rng rng(4);
    const MatrixXd z = normal_matrix(12, 2, rng);
    const VectorXd t = VectorXd::LinSpaced(12, 1, 12);
    const VectorXi censored = VectorXi::Zero(12);
    const RiskIndex idx(t);
    const auto net = init_network(arch(2, {4}), 6);
    const auto g = backprop(net, z, VectorXd::Zero(12), censored, idx, {});
    CHECK(g.gradient.isZero(0));

    AdamConfig cfg;
    cfg.inner_steps = 5;
    const auto fit = adam_fit(net, z, VectorXd::Zero(12), censored, idx, cfg, rng);
    CHECK(fit.net.parameters() == net.parameters());
}

TEST_CASE("a fully dropped hidden layer blocks its incoming weights")
{
    Rng rng(10);
    const auto in = oracle::random_instance(15, rng, false);
    const MatrixXd z = normal_matrix(15, 3, rng);
    const auto net = init_network(arch(3, {4, 3}, 0.5), 2);
    DropoutMasks masks{MatrixXd::Constant(15, 4, 2.0), MatrixXd::Zero(15, 3)};
    const auto g = backprop(net, z, VectorXd::Zero(15), in.status, RiskIndex(in.times), masks);
    // layer 0: 12 weights + 4 biases, layer 1: 12 weights + 3 biases
    CHECK(g.gradient.segment(0, 16).isZero(0));
    CHECK(g.gradient.segment(16, 15).isZero(0));
    CHECK_FALSE(g.gradient.tail(4).isZero(0));  // output bias still sees the loss
}

TEST_CASE("first Adam step moves each parameter by about the learning rate")
{
    Rng rng(12);
    const auto in = oracle::random_instance(20, rng, false);
    const MatrixXd z = normal_matrix(20, 2, rng);
    const auto net = init_network(arch(2, {4}), 5);
    const RiskIndex idx(in.times);
    AdamConfig cfg;
    cfg.inner_steps = 1;
    cfg.learning_rate = 0.01;
    cfg.keep_best = false;
    const auto g = backprop(net, z, VectorXd::Zero(20), in.status, idx, {});
    const auto fit = adam_fit(net, z, VectorXd::Zero(20), in.status, idx, cfg, rng);
    const VectorXd step = fit.net.parameters() - net.parameters();
    for (Index k = 0; k < step.size(); ++k) {
        const double expected = -cfg.learning_rate * g.gradient(k) / (std::abs(g.gradient(k)) + cfg.eps0);
        CHECK(step(k) == doctest::Approx(expected).epsilon(1e-9).scale(1e-12));
    }
    CHECK(fit.steps == 1);
    CHECK(fit.loss_trace.size() == 1);
}

TEST_CASE("Adam lowers the loss on a linear toy and returns a centered network")
{
    Rng rng(99);
    const Index n = 300;
    const MatrixXd z = normal_matrix(n, 2, rng);
    const VectorXd g0 = 1.2 * z.col(0) - 0.8 * z.col(1);
    std::uniform_real_distribution<double> unif(0, 1);
    oracle::Instance in;
    in.times.resize(n);
    in.status.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double u = -std::log(1 - unif(rng)) / std::exp(g0(i));
        const double c = 2.5 * unif(rng);
        in.times(i) = std::min(u, c) + 1e-9;
        in.status(i) = u <= c;
    }
    const RiskIndex idx(in.times);
    const auto net = init_network(arch(2, {8}), 7);
    AdamConfig cfg;
    cfg.inner_steps = 200;
    cfg.tol = 0;
    const auto fit = adam_fit(net, z, VectorXd::Zero(n), in.status, idx, cfg, rng);
    CHECK(fit.steps == 200);
    const double before = oracle::neg_loglik(in.times, in.status, oracle::net_output(net, z));
    const double after = oracle::neg_loglik(in.times, in.status, oracle::net_output(fit.net, z));
    CHECK(after < before);
    // smoothed trend: last 20 recorded losses average below the first 20
    const auto avg = [&](std::size_t from) {
        double s = 0;
        for (std::size_t k = from; k < from + 20; ++k) s += fit.loss_trace[k];
        return s / 20;
    };
    CHECK(avg(180) < avg(0));
    CHECK(std::abs(forward(fit.net, z, Mode::eval).mean()) < 1e-10);
}

TEST_CASE("early stopping returns the best dropout-free iterate")
{
    Rng rng(21);
    const auto in = oracle::random_instance(40, rng, true);
    const MatrixXd z = normal_matrix(40, 3, rng);
    const VectorXd xi = 0.3 * normal_matrix(40, 1, rng).col(0);
    const RiskIndex idx(in.times);
    const auto start = init_network(arch(3, {6}, 0.5), 4);
    AdamConfig cfg;
    cfg.learning_rate = 0.2;  // large enough to overshoot
    cfg.inner_steps = 15;
    cfg.tol = 0;

    Rng r1(8), r2(8);
    const auto best = adam_fit(start, z, xi, in.status, idx, cfg, r1);
    cfg.keep_best = false;
    const auto last = adam_fit(start, z, xi, in.status, idx, cfg, r2);
    // same trajectory, only the returned iterate differs
    CHECK(best.loss_trace == last.loss_trace);

    // replay the trajectory and track the literal loss of every iterate
    Network replay = start;
    Eigen::VectorXd theta = start.parameters(), m = VectorXd::Zero(theta.size()), v = m;
    double lowest = literal_loss(start, z, xi, in);
    Rng r3(8);
    for (int t = 1; t <= cfg.inner_steps; ++t) {
        const auto masks = sample_dropout_masks(replay, 40, r3);
        const auto g = backprop(replay, z, xi, in.status, idx, masks).gradient;
        m = cfg.r1 * m + (1 - cfg.r1) * g;
        v = cfg.r2 * v + (1 - cfg.r2) * g.cwiseAbs2();
        const VectorXd mh = m / (1 - std::pow(cfg.r1, t)), vh = v / (1 - std::pow(cfg.r2, t));
        theta -= (cfg.learning_rate * mh.array() / (vh.array().sqrt() + cfg.eps0)).matrix();
        replay.set_parameters(theta);
        lowest = std::min(lowest, literal_loss(replay, z, xi, in));
    }
    CHECK((last.net.parameters() - theta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(literal_loss(best.net, z, xi, in) == doctest::Approx(lowest).epsilon(1e-12));
    CHECK(literal_loss(best.net, z, xi, in) <= literal_loss(start, z, xi, in) + 1e-12);
    CHECK(literal_loss(best.net, z, xi, in) <= literal_loss(last.net, z, xi, in) + 1e-12);
}

TEST_CASE("centering")
{
    Rng rng(1);
    const MatrixXd z = normal_matrix(30, 3, rng);
    Network constant(arch(3, {2}));
    constant.bias(1)(0) = 1.7;
    const auto c = center(constant, z);
    CHECK(forward(c, z, Mode::eval).cwiseAbs().maxCoeff() < 1e-15);

    const auto net = init_network(arch(3, {6, 4}), 8);
    const auto centered = center(net, z);
    const VectorXd before = forward(net, z, Mode::eval);
    const VectorXd after = forward(centered, z, Mode::eval);
    CHECK(std::abs(after.mean()) < 1e-10);
    for (Index i = 1; i < 30; ++i) CHECK(after(i) - after(0) == doctest::Approx(before(i) - before(0)));
}

TEST_CASE("Adam configuration checks")
{
    AdamConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.r1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = AdamConfig{};
    cfg.learning_rate = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = AdamConfig{};
    cfg.inner_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("huge learning rates are reported as divergence")
{
    Rng rng(3);
    const auto in = oracle::random_instance(20, rng, false);
    const MatrixXd z = 1e3 * normal_matrix(20, 2, rng);
    AdamConfig cfg;
    cfg.learning_rate = 1e200;
    cfg.inner_steps = 50;
    CHECK_THROWS_WITH_AS(adam_fit(init_network(arch(2, {4}), 1), z, VectorXd::Zero(20), in.status,
                                  RiskIndex(in.times), cfg, rng),
                         "training diverged", NumericalError);
}
