#pragma once

// SCAD penalty: value, derivative and the univariate thresholding rules used
// by coordinate descent.

#include <dplc/errors.hpp>

#include <array>
#include <cmath>
#include <string>

namespace dplc {

template <typename Scalar>
struct ScadConfig {
    Scalar lambda{0};
    Scalar a{3.7};

    void validate() const
    {
        if (!(a > Scalar(2))) throw InputError("scad: shape parameter a must exceed 2");
        if (!(lambda >= Scalar(0))) throw InputError("scad: lambda must be nonnegative");
    }
};

using ScadConfigd = ScadConfig<double>;

namespace detail {
template <typename Scalar>
void require_nonnegative(Scalar theta, const char* what)
{
    if (!(theta >= Scalar(0))) throw InputError(std::string(what) + ": argument must be nonnegative");
}
} // namespace detail

/// p'_lambda(theta) for theta >= 0.
template <typename Scalar>
Scalar scad_derivative(Scalar theta, const ScadConfig<Scalar>& cfg)
{
    detail::require_nonnegative(theta, "scad_derivative");
    const Scalar lambda = cfg.lambda;
    if (theta <= lambda) return lambda;
    const Scalar slack = cfg.a * lambda - theta;
    return slack > Scalar(0) ? slack / (cfg.a - Scalar(1)) : Scalar(0);
}

/// p_lambda(theta) = integral of p'_lambda from 0 to theta.
template <typename Scalar>
Scalar scad_value(Scalar theta, const ScadConfig<Scalar>& cfg)
{
    detail::require_nonnegative(theta, "scad_value");
    const Scalar lambda = cfg.lambda;
    const Scalar a = cfg.a;
    if (theta <= lambda) return lambda * theta;
    if (theta <= a * lambda)
        return (Scalar(2) * a * lambda * theta - theta * theta - lambda * lambda) / (Scalar(2) * (a - Scalar(1)));
    return lambda * lambda * (a + Scalar(1)) / Scalar(2);
}

template <typename Scalar>
Scalar soft_threshold(Scalar h, Scalar lambda)
{
    const Scalar mag = std::abs(h) - lambda;
    if (mag <= Scalar(0)) return Scalar(0);
    return h > Scalar(0) ? mag : -mag;
}

/**
 * Closed-form SCAD thresholding with curvature v:
 *
 *   S(h, lambda) / v                               |h| <= 2 lambda
 *   S(h, a lambda/(a-1)) / (v (1 - 1/(a-1)))       2 lambda < |h| <= a lambda
 *   h / v                                          |h| > a lambda
 *
 * Exact minimizer of v/2 b^2 - h b + p_lambda(|b|) when v == 1; for other v it
 * is the v == 1 solution rescaled by 1/v.
 */
template <typename Scalar>
Scalar scad_threshold(Scalar h, Scalar v, const ScadConfig<Scalar>& cfg)
{
    if (!(v > Scalar(0))) throw InputError("non-positive curvature");
    const Scalar lambda = cfg.lambda;
    const Scalar a = cfg.a;
    const Scalar mag = std::abs(h);
    if (mag <= Scalar(2) * lambda) return soft_threshold(h, lambda) / v;
    if (mag <= a * lambda)
        return soft_threshold(h, a * lambda / (a - Scalar(1))) / (v * (Scalar(1) - Scalar(1) / (a - Scalar(1))));
    return h / v;
}

/// One-dimensional SCAD objective v/2 b^2 - h b + p_lambda(|b|).
template <typename Scalar>
Scalar scad_objective(Scalar b, Scalar h, Scalar v, const ScadConfig<Scalar>& cfg)
{
    return Scalar(0.5) * v * b * b - h * b + scad_value(std::abs(b), cfg);
}

/**
 * Global minimizer of v/2 b^2 - h b + p_lambda(|b|) for any v > 0, including
 * the nonconvex case v < 1/(a-1). Each quadratic piece contributes its clipped
 * stationary point; the knots are checked explicitly.
 */
template <typename Scalar>
Scalar scad_exact_minimizer(Scalar h, Scalar v, const ScadConfig<Scalar>& cfg)
{
    if (!(v > Scalar(0))) throw InputError("non-positive curvature");
    const Scalar lambda = cfg.lambda;
    const Scalar a = cfg.a;
    const Scalar u = std::abs(h);
    const Scalar sign = h < Scalar(0) ? Scalar(-1) : Scalar(1);
    const auto clip = [](Scalar x, Scalar lo, Scalar hi) { return x < lo ? lo : (x > hi ? hi : x); };

    std::array<Scalar, 6> candidates{};
    candidates[0] = Scalar(0);
    candidates[1] = clip((u - lambda) / v, Scalar(0), lambda);
    const Scalar mid_curv = v - Scalar(1) / (a - Scalar(1));
    candidates[2] = mid_curv > Scalar(0)
        ? clip((u - a * lambda / (a - Scalar(1))) / mid_curv, lambda, a * lambda)
        : lambda;
    candidates[3] = std::max(u / v, a * lambda);
    candidates[4] = lambda;
    candidates[5] = a * lambda;

    Scalar best = Scalar(0);
    Scalar best_val = scad_objective(Scalar(0), u, v, cfg);
    for (const Scalar c : candidates) {
        const Scalar val = scad_objective(c, u, v, cfg);
        if (val < best_val || (val == best_val && c < best)) {
            best = c;
            best_val = val;
        }
    }
    return sign * best;
}

} // namespace dplc
