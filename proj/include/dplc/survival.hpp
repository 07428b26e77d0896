#pragma once

// Right-censored survival data, risk-set indexing and the Cox negative log
// partial likelihood with its derivatives in the per-subject linear predictor.

#include <dplc/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace dplc {

using Eigen::Index;

template <typename Scalar>
struct SurvivalDataset {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector times;            // follow-up time, > 0
    Eigen::VectorXi status;  // 1 = event, 0 = censored
    Matrix x;                // penalized covariates, n x p
    Matrix z;                // network covariates, n x r

    Index size() const { return times.size(); }
    Index num_linear() const { return x.cols(); }
    Index num_nonparametric() const { return z.cols(); }
    Index num_events() const { return status.sum(); }

    void validate() const
    {
        const Index n = size();
        if (status.size() != n || x.rows() != n || z.rows() != n)
            throw InputError("dataset: times, status, x and z must have the same number of rows");
        for (Index i = 0; i < n; ++i) {
            if (!std::isfinite(static_cast<double>(times(i))) || !(times(i) > Scalar(0)))
                throw InputError("dataset: times must be finite and positive");
            if (status(i) != 0 && status(i) != 1)
                throw InputError("dataset: status must be 0 or 1");
        }
        if (!x.allFinite() || !z.allFinite())
            throw InputError("dataset: covariates must be finite");
        if (z.cols() > n)
            throw InputError("dataset: network covariate dimension exceeds sample size");
    }

    SurvivalDataset subset(const std::vector<Index>& rows) const
    {
        SurvivalDataset out;
        const auto m = static_cast<Index>(rows.size());
        out.times.resize(m);
        out.status.resize(m);
        out.x.resize(m, x.cols());
        out.z.resize(m, z.cols());
        for (Index k = 0; k < m; ++k) {
            const Index i = rows[static_cast<std::size_t>(k)];
            out.times(k) = times(i);
            out.status(k) = status(i);
            out.x.row(k) = x.row(i);
            out.z.row(k) = z.row(i);
        }
        return out;
    }
};

using SurvivalDatasetd = SurvivalDataset<double>;

/**
 * Risk sets R_i = {j : T_j >= T_i} and history sets C_m = {i : T_i <= T_m}.
 *
 * After sorting by time both are contiguous in the sorted order: R_i is the
 * suffix starting at the first subject tied with i, C_m is the prefix ending
 * at the last subject tied with m. Only the two boundaries are stored.
 */
class RiskIndex {
public:
    RiskIndex() = default;

    template <typename Derived>
    explicit RiskIndex(const Eigen::DenseBase<Derived>& times)
    {
        const Index n = times.size();
        if (n == 0) throw InputError("empty dataset");
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        std::stable_sort(order_.begin(), order_.end(),
                         [&](Index a, Index b) { return times(a) < times(b); });
        risk_begin_.resize(n);
        history_end_.resize(n);
        Index k = 0;
        while (k < n) {
            Index tie_end = k + 1;
            while (tie_end < n && times(order_[tie_end]) == times(order_[k])) ++tie_end;
            for (Index s = k; s < tie_end; ++s) {
                risk_begin_[order_[s]] = k;
                history_end_[order_[s]] = tie_end;
            }
            k = tie_end;
        }
    }

    Index size() const { return static_cast<Index>(order_.size()); }

    /// Subject at sorted position k (ascending time, stable).
    Index subject(Index k) const { return order_[k]; }

    /// Sorted position where R_i begins; R_i spans [risk_begin(i), n).
    Index risk_begin(Index i) const { return risk_begin_[i]; }

    /// Sorted position one past the end of C_m; C_m spans [0, history_end(m)).
    Index history_end(Index m) const { return history_end_[m]; }

    std::vector<Index> risk_set(Index i) const
    {
        std::vector<Index> out(order_.begin() + risk_begin_[i], order_.end());
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<Index> history_set(Index m) const
    {
        std::vector<Index> out(order_.begin(), order_.begin() + history_end_[m]);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::vector<Index> order_;
    std::vector<Index> risk_begin_;
    std::vector<Index> history_end_;
};

template <typename Scalar>
RiskIndex build_risk_index(const SurvivalDataset<Scalar>& dataset)
{
    return RiskIndex(dataset.times);
}

/// eta = xi + g_vals, with xi = X beta and g_vals = g(z).
template <typename Scalar>
struct Predictor {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Vector eta;
    Vector xi;
    Vector g_vals;
};

template <typename DerivedXi, typename DerivedG>
Predictor<typename DerivedXi::Scalar> make_predictor(const Eigen::MatrixBase<DerivedXi>& xi,
                                                     const Eigen::MatrixBase<DerivedG>& g_vals)
{
    if (xi.size() != g_vals.size()) throw InputError("predictor: xi and g sizes differ");
    Predictor<typename DerivedXi::Scalar> out;
    out.xi = xi;
    out.g_vals = g_vals;
    out.eta = out.xi + out.g_vals;
    return out;
}

template <typename Scalar>
struct CoxDerivatives {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Scalar loss{0};
    Vector grad;       // dq/d eta
    Vector hess_diag;  // diagonal of d2q/d eta2
};

namespace detail {

template <typename Scalar>
Scalar log_add_exp(Scalar a, Scalar b)
{
    using std::exp;
    using std::log1p;
    constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const Scalar hi = std::max(a, b);
    const Scalar lo = std::min(a, b);
    return hi + log1p(exp(lo - hi));
}

} // namespace detail

/**
 * Negative log partial likelihood q = -(1/n) sum_i D_i [eta_i - log sum_{j in R_i} exp(eta_j)]
 * and, optionally, its gradient and Hessian diagonal with respect to eta.
 *
 * All risk-set sums are accumulated in the log domain, so any finite eta is safe.
 */
template <typename DerivedEta>
CoxDerivatives<typename DerivedEta::Scalar> cox_derivatives(const Eigen::MatrixBase<DerivedEta>& eta,
                                                            const Eigen::VectorXi& status,
                                                            const RiskIndex& index,
                                                            bool with_grad = true,
                                                            bool with_hessian = true)
{
    using Scalar = typename DerivedEta::Scalar;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using std::exp;
    constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();

    const Index n = index.size();
    if (eta.size() != n || status.size() != n) throw InputError("predictor size does not match dataset");
    if (!eta.allFinite()) throw NumericalError("non-finite predictor");

    // log S at each sorted position: log sum of exp(eta) over the suffix.
    Vector log_suffix(n);
    Scalar acc = neg_inf;
    for (Index k = n - 1; k >= 0; --k) {
        acc = detail::log_add_exp(acc, Scalar(eta(index.subject(k))));
        log_suffix(k) = acc;
    }

    CoxDerivatives<Scalar> out;
    const Scalar inv_n = Scalar(1) / Scalar(n);
    Scalar loss = 0;
    for (Index i = 0; i < n; ++i)
        if (status(i)) loss += eta(i) - log_suffix(index.risk_begin(i));
    out.loss = -inv_n * loss;

    if (!with_grad && !with_hessian) return out;

    // Prefix sums over events of 1/S_i and 1/S_i^2, also in the log domain.
    Vector log_inv(n), log_inv_sq(n);
    Scalar a1 = neg_inf, a2 = neg_inf;
    for (Index k = 0; k < n; ++k) {
        const Index i = index.subject(k);
        if (status(i)) {
            const Scalar ls = log_suffix(index.risk_begin(i));
            a1 = detail::log_add_exp(a1, -ls);
            a2 = detail::log_add_exp(a2, Scalar(-2) * ls);
        }
        log_inv(k) = a1;
        log_inv_sq(k) = a2;
    }

    if (with_grad) out.grad.resize(n);
    if (with_hessian) out.hess_diag.resize(n);
    for (Index m = 0; m < n; ++m) {
        const Index last = index.history_end(m) - 1;
        const Scalar p1 = log_inv(last) == neg_inf ? Scalar(0) : exp(eta(m) + log_inv(last));
        if (with_grad) out.grad(m) = -inv_n * (Scalar(status(m)) - p1);
        if (with_hessian) {
            const Scalar p2 = log_inv_sq(last) == neg_inf ? Scalar(0) : exp(Scalar(2) * eta(m) + log_inv_sq(last));
            out.hess_diag(m) = std::max(Scalar(0), inv_n * (p1 - p2));
        }
    }
    return out;
}

template <typename Scalar>
Scalar neg_log_partial_likelihood(const Predictor<Scalar>& pred, const SurvivalDataset<Scalar>& dataset,
                                  const RiskIndex& index)
{
    return cox_derivatives(pred.eta, dataset.status, index, false, false).loss;
}

template <typename Scalar>
typename Predictor<Scalar>::Vector grad_eta(const Predictor<Scalar>& pred, const SurvivalDataset<Scalar>& dataset,
                                            const RiskIndex& index)
{
    return cox_derivatives(pred.eta, dataset.status, index, true, false).grad;
}

template <typename Scalar>
typename Predictor<Scalar>::Vector hessian_diag(const Predictor<Scalar>& pred, const SurvivalDataset<Scalar>& dataset,
                                                const RiskIndex& index)
{
    return cox_derivatives(pred.eta, dataset.status, index, false, true).hess_diag;
}

/// Floor applied to W_mm before dividing in the working response.
inline constexpr double kWeightFloor = 1e-8;

template <typename Scalar>
struct WorkingResponse {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Vector y;
    std::vector<Index> floored;  // subjects whose W_mm was below the floor
};

/// y_m = xi_m - grad_m / max(W_mm, floor); grad is dq/d eta.
template <typename DerivedXi, typename DerivedGrad, typename DerivedW>
WorkingResponse<typename DerivedXi::Scalar> working_response(const Eigen::MatrixBase<DerivedXi>& xi,
                                                             const Eigen::MatrixBase<DerivedGrad>& grad,
                                                             const Eigen::MatrixBase<DerivedW>& weights)
{
    using Scalar = typename DerivedXi::Scalar;
    WorkingResponse<Scalar> out;
    out.y.resize(xi.size());
    const Scalar floor = Scalar(kWeightFloor);
    for (Index m = 0; m < xi.size(); ++m) {
        Scalar w = weights(m);
        if (w < floor) {
            out.floored.push_back(m);
            w = floor;
        }
        out.y(m) = xi(m) - grad(m) / w;
    }
    return out;
}

template <typename Scalar>
WorkingResponse<Scalar> working_response(const Predictor<Scalar>& pred,
                                         const typename Predictor<Scalar>::Vector& weights,
                                         const SurvivalDataset<Scalar>& dataset, const RiskIndex& index)
{
    const auto grad = cox_derivatives(pred.eta, dataset.status, index, true, false).grad;
    return working_response(pred.xi, grad, weights);
}

} // namespace dplc
