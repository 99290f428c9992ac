#pragma once
/**
 * quadrature.hpp - deterministic tensor-product quadrature.
 *
 * Each axis carries its own rule and base node count.  Refinement doubles
 * the node density on every axis at once; the error estimate is the change
 * between the two finest levels.  Sums are reduced pairwise in a fixed
 * order so results are bit-reproducible for a fixed QuadratureSpec.
 *
 * Axis rules:
 *   double_exponential     tanh-sinh on finite axes, exp-sinh on [a, inf)
 *   exp_transform          x = a - ln(1 - t) followed by tanh-sinh in t
 *                          (finite axes: plain tanh-sinh)
 *   gauss_legendre_mapped  x = a + tan(pi t / 2) followed by Gauss-Legendre
 *                          (finite axes: plain Gauss-Legendre)
 */

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "casimir/core.hpp"

namespace casimir {

enum class AxisRule { exp_transform, double_exponential, gauss_legendre_mapped };

struct AxisSpec {
    AxisRule rule = AxisRule::double_exponential;
    int nodes = 32;
};

struct QuadratureSpec {
    std::vector<AxisSpec> axes;
    double rel_tol = 1e-10;
    // Floor for integrals that are zero or nearly so.
    double abs_tol = 1e-300;
    int max_levels = 5;

    void validate(std::size_t dims) const;

    static QuadratureSpec uniform(std::size_t dims, AxisRule rule = AxisRule::double_exponential,
                                  int nodes = 32, double rel_tol = 1e-10, int max_levels = 5);
};

struct IntegralEstimate {
    double value = 0.0;
    double error_estimate = 0.0;
    std::int64_t evaluations = 0;
};

/// Refinement ran out of levels.  Carries the best estimate reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, IntegralEstimate best)
        : Error(what), best_(best) {}
    const IntegralEstimate& best() const { return best_; }

private:
    IntegralEstimate best_;
};

/// The integrand returned NaN or Inf.
class IntegrandError : public Error {
public:
    IntegrandError(const std::string& what, std::vector<double> point)
        : Error(what), point_(std::move(point)) {}
    const std::vector<double>& point() const { return point_; }

private:
    std::vector<double> point_;
};

using Integrand = std::function<double(std::span<const double>)>;

/// Integral over [0, inf)^n, n = spec.axes.size().
IntegralEstimate integrate_semi_infinite(const Integrand& f, const QuadratureSpec& spec);

/// Integral over a box; an upper bound of +inf makes that axis semi-infinite.
IntegralEstimate integrate_box(const Integrand& f, std::span<const double> lower,
                               std::span<const double> upper, const QuadratureSpec& spec);

/// Integral of f(tau_2, ..., tau_k) over 0 <= tau_2 <= ... <= tau_k <= T.
/// spec.axes.size() must be k - 1.
IntegralEstimate integrate_ordered_simplex(const Integrand& f, int k, double T,
                                           const QuadratureSpec& spec);

/// Maps the unit cube onto the ordered simplex of length T by the nested
/// affine substitution tau_{j+1} = tau_j + (T - tau_j) v_j.  Returns the
/// Jacobian.
double map_ordered_simplex(std::span<const double> unit, double T, std::span<double> times);

/// One-dimensional convenience wrapper.
IntegralEstimate integrate_1d(const std::function<double(double)>& f, double a, double b,
                              AxisSpec axis = {}, double rel_tol = 1e-10, int max_levels = 6);

/// Deterministic pairwise sum.
double pairwise_sum(std::span<const double> values);

namespace detail {

struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
};

/// Nodes and weights for one axis at a refinement level.
Rule1D make_rule(AxisRule rule, int nodes, int level, double a, double b);

}  // namespace detail

}  // namespace casimir
