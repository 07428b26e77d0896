#include "oracles.hpp"

#include <doctest.h>

#include <dplc/survival.hpp>

using namespace dplc;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

SurvivalDatasetd make(std::vector<double> t, std::vector<int> d)
{
    SurvivalDatasetd out;
    out.times = Eigen::Map<VectorXd>(t.data(), static_cast<Index>(t.size()));
    out.status = Eigen::Map<VectorXi>(d.data(), static_cast<Index>(d.size()));
    out.x = Eigen::MatrixXd::Zero(out.times.size(), 1);
    out.z = Eigen::MatrixXd::Zero(out.times.size(), 1);
    return out;
}

VectorXd vec(std::initializer_list<double> v)
{
    VectorXd out(static_cast<Index>(v.size()));
    Index k = 0;
    for (const double x : v) out(k++) = x;
    return out;
}

} // namespace

TEST_CASE("risk index: distinct times")
{
    const auto d = make({1, 2}, {1, 1});
    const RiskIndex idx = build_risk_index(d);
    CHECK(idx.risk_set(0) == std::vector<Index>{0, 1});
    CHECK(idx.risk_set(1) == std::vector<Index>{1});
    CHECK(idx.history_set(0) == std::vector<Index>{0});
    CHECK(idx.history_set(1) == std::vector<Index>{0, 1});
}

TEST_CASE("risk index: tied times are mutually at risk")
{
    const auto d = make({2, 2}, {1, 0});
    const RiskIndex idx = build_risk_index(d);
    for (Index i = 0; i < 2; ++i) {
        CHECK(idx.risk_set(i) == std::vector<Index>{0, 1});
        CHECK(idx.history_set(i) == std::vector<Index>{0, 1});
    }
}

TEST_CASE("risk index: unsorted input matches set comprehension")
{
    const auto d = make({3, 1, 2}, {1, 1, 1});
    const RiskIndex idx = build_risk_index(d);
    CHECK(idx.risk_set(0) == std::vector<Index>{0});
    CHECK(idx.risk_set(1) == std::vector<Index>{0, 1, 2});
    CHECK(idx.risk_set(2) == std::vector<Index>{0, 2});

    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 30; ++rep) {
        const auto in = oracle::random_instance(25, rng, rep % 2 == 0);
        const RiskIndex r(in.times);
        for (Index i = 0; i < 25; ++i) {
            CHECK(r.risk_set(i) == oracle::risk_set(in.times, i));
            CHECK(r.history_set(i) == oracle::history_set(in.times, i));
        }
    }
}

TEST_CASE("risk index: empty dataset")
{
    CHECK_THROWS_WITH_AS(RiskIndex{VectorXd{}}, "empty dataset", InputError);
}

TEST_CASE("partial likelihood values")
{
    {
        const auto d = make({1, 2}, {1, 1});
        const auto idx = build_risk_index(d);
        const auto pred = make_predictor(vec({0, 0}), vec({0, 0}));
        CHECK(neg_log_partial_likelihood(pred, d, idx) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
    }
    {
        const auto d = make({1, 2}, {0, 0});
        const auto idx = build_risk_index(d);
        const auto pred = make_predictor(vec({0.3, -1}), vec({0, 0}));
        CHECK(neg_log_partial_likelihood(pred, d, idx) == 0.0);
        CHECK(grad_eta(pred, d, idx).isZero(0));
        CHECK(hessian_diag(pred, d, idx).isZero(0));
    }
    {
        const auto d = make({1, 2, 3}, {1, 0, 1});
        const auto idx = build_risk_index(d);
        const auto pred = make_predictor(vec({1, 0, -1}), vec({0, 0, 0}));
        const double literal =
            -(1.0 / 3) * ((1 - std::log(std::exp(1) + 1 + std::exp(-1))) + (-1 - std::log(std::exp(-1))));
        CHECK(neg_log_partial_likelihood(pred, d, idx) == doctest::Approx(literal).epsilon(1e-14));
        CHECK(neg_log_partial_likelihood(pred, d, idx) ==
              doctest::Approx(oracle::neg_loglik(d.times, d.status, pred.eta)).epsilon(1e-14));
    }
}

TEST_CASE("partial likelihood: eta splits into xi and g")
{
    const auto pred = make_predictor(vec({1, 2}), vec({0.5, -3}));
    CHECK(pred.eta(0) == 1.5);
    CHECK(pred.eta(1) == -1.0);
    CHECK_THROWS_AS(make_predictor(vec({1}), vec({1, 2})), InputError);
}

TEST_CASE("score and weights on the two-subject example")
{
    const auto d = make({1, 2}, {1, 1});
    const auto idx = build_risk_index(d);
    const auto pred = make_predictor(vec({0, 0}), vec({0, 0}));
    const VectorXd g = grad_eta(pred, d, idx);
    CHECK(g(0) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(g(1) == doctest::Approx(0.25).epsilon(1e-14));

    const auto q = [&](const VectorXd& eta) { return oracle::neg_loglik(d.times, d.status, eta); };
    const VectorXd fd = oracle::central_diff(q, pred.eta, 1e-6);
    CHECK(oracle::rel_err(g, fd) < 1e-8);

    const VectorXd w = hessian_diag(pred, d, idx);
    CHECK(w(0) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(w(1) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(oracle::rel_err(w, oracle::fd_hessian_diag(d.times, d.status, pred.eta)) < 1e-6);

    const auto y = working_response(pred, w, d, idx);
    CHECK(y.y(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(y.y(1) == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(y.floored.empty());
}

TEST_CASE("single subject has zero weight and a floored working response")
{
    const auto d = make({1}, {1});
    const auto idx = build_risk_index(d);
    const auto pred = make_predictor(vec({0.4}), vec({0}));
    CHECK(hessian_diag(pred, d, idx)(0) == doctest::Approx(0.0).epsilon(1e-15));
    const auto y = working_response(pred, hessian_diag(pred, d, idx), d, idx);
    CHECK(y.floored.size() == 1);
    CHECK(std::isfinite(y.y(0)));
}

TEST_CASE("working response: zero-gradient subject keeps xi")
{
    // the earliest subject is censored, so D_m = 0 and C_m holds no events
    const auto d = make({1, 2, 3}, {0, 1, 1});
    const auto idx = build_risk_index(d);
    const auto pred = make_predictor(vec({0.7, 0.1, -0.2}), vec({0.2, 0, 0}));
    const auto y = working_response(pred, hessian_diag(pred, d, idx), d, idx);
    CHECK(y.y(0) == pred.xi(0));
}

TEST_CASE("non-finite predictor is rejected")
{
    const auto d = make({1, 2}, {1, 1});
    const auto idx = build_risk_index(d);
    const auto pred = make_predictor(vec({std::nan(""), 0}), vec({0, 0}));
    CHECK_THROWS_WITH_AS(neg_log_partial_likelihood(pred, d, idx), "non-finite predictor", NumericalError);
    CHECK_THROWS_AS(grad_eta(pred, d, idx), NumericalError);
}

TEST_CASE("properties on random instances")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> shift(-5, 5);
    for (int rep = 0; rep < 40; ++rep) {
        const Index n = 2 + rep % 19;
        const auto in = oracle::random_instance(n, rng, rep % 3 == 0);
        const auto d = oracle::as_dataset(in);
        const auto idx = build_risk_index(d);
        const auto pred = make_predictor(in.eta, VectorXd::Zero(n));
        const double q = neg_log_partial_likelihood(pred, d, idx);
        CHECK(q == doctest::Approx(oracle::neg_loglik(in.times, in.status, in.eta)).epsilon(1e-12));

        const auto shifted = make_predictor(in.eta, VectorXd::Constant(n, shift(rng)));
        CHECK(std::abs(neg_log_partial_likelihood(shifted, d, idx) - q) < 1e-12);

        const VectorXd g = grad_eta(pred, d, idx);
        CHECK(std::abs(g.sum()) < 1e-12);
        CHECK(oracle::rel_err(g, oracle::score(in.times, in.status, in.eta)) < 1e-12);
        const auto qf = [&](const VectorXd& eta) { return oracle::neg_loglik(in.times, in.status, eta); };
        CHECK(oracle::rel_err(g, oracle::central_diff(qf, in.eta, 1e-6)) < 1e-6);

        const VectorXd w = hessian_diag(pred, d, idx);
        CHECK(w.minCoeff() >= -1e-12);
        CHECK(oracle::rel_err(w, oracle::fd_hessian_diag(in.times, in.status, in.eta)) < 1e-4);

        // y - xi = -grad / W componentwise, hence opposite signs wherever W is not floored
        const auto y = working_response(pred, w, d, idx);
        for (Index m = 0; m < n; ++m) {
            if (w(m) < kWeightFloor) continue;
            const double lhs = pred.xi(m) - y.y(m);
            CHECK(lhs == doctest::Approx(g(m) / w(m)).epsilon(1e-10));
        }
    }
}

TEST_CASE("large predictors stay finite")
{
    const auto d = make({1, 2, 3, 4}, {1, 1, 0, 1});
    const auto idx = build_risk_index(d);
    const auto pred = make_predictor(vec({800, -700, 750, 20}), vec({0, 0, 0, 0}));
    CHECK(std::isfinite(neg_log_partial_likelihood(pred, d, idx)));
    CHECK(grad_eta(pred, d, idx).allFinite());
    CHECK(hessian_diag(pred, d, idx).allFinite());
}

TEST_CASE("dataset validation")
{
    auto d = make({1, 2}, {1, 0});
    CHECK_NOTHROW(d.validate());
    d.times(0) = 0;
    CHECK_THROWS_AS(d.validate(), InputError);
    d = make({1, 2}, {1, 2});
    CHECK_THROWS_AS(d.validate(), InputError);
    d = make({1, 2}, {1, 0});
    d.x.resize(3, 1);
    CHECK_THROWS_AS(d.validate(), InputError);
}

TEST_CASE("templated on scalar: long double agrees with double")
{
    SurvivalDataset<long double> d;
    d.times = Eigen::Matrix<long double, -1, 1>(3);
    d.times << 1, 2, 3;
    d.status = VectorXi(3);
    d.status << 1, 0, 1;
    d.x = Eigen::Matrix<long double, -1, -1>::Zero(3, 1);
    d.z = d.x;
    Eigen::Matrix<long double, -1, 1> eta(3);
    eta << 1, 0, -1;
    const auto pred = make_predictor(eta, Eigen::Matrix<long double, -1, 1>::Zero(3));
    const auto q = neg_log_partial_likelihood(pred, d, build_risk_index(d));
    CHECK(static_cast<double>(q) ==
          doctest::Approx(oracle::neg_loglik(vec({1, 2, 3}), d.status, vec({1, 0, -1}))).epsilon(1e-14));
}
