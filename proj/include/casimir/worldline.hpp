#pragma once
// Scalar worldline route to Casimir-Polder coefficients in vacuum.
//
// Loops are unit-diffusion Brownian bridges: a closed loop of proper time T
// pinned at x(0) = x(T) = r1 visits x(tau) with variance tau (1 - tau / T).
// The order-k TE and TM energies are integrals over T and the ordered
// pinning times of products of such bridge densities.  In vacuum every path
// average is 1, so only the Gaussian pinning factors remain.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "casimir/core.hpp"
#include "casimir/quadrature.hpp"

namespace casimir::worldline {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const VecX>;

// ============================================================================
// Bridge densities
// ============================================================================

struct Pin {
    double tau = 0.0;
    Vec3 position = Vec3::Zero();
};

/// A closed loop of proper time total_time pinned at base for tau = 0 and
/// tau = total_time, plus intermediate pins at strictly increasing times.
struct BridgePinning {
    double total_time = 1.0;
    Vec3 base = Vec3::Zero();
    std::vector<Pin> pins;
    int dim = 3;

    /// Throws DomainError unless 0 < tau_2 < ... < tau_k < total_time.
    void validate() const;
};

/// Density of x(tau) for a bridge from start (tau = 0) back to start at T.
/// d is the vector length.
double bridge_density(double tau, double T, const VecRef& start, const VecRef& target);
double bridge_log_density(double tau, double T, const VecRef& start, const VecRef& target);

/// Density of x(tau_new) given x(tau_prev) = r_prev on the loop pinned at
/// base for 0 and T.  Both orderings of tau_new and tau_prev are accepted.
double conditional_density(double tau_new, const VecRef& r_new, double tau_prev, const VecRef& r_prev,
                           double T, const VecRef& base);

// ============================================================================
// Gaussian chains
// ============================================================================

/// One conditional Gaussian factor exp(-|sum_i c_i x_i|^2 / 2 v) / (2 pi v)^{d/2}.
/// The coefficient row has a +1 on the new atom and minus the (affine) mean
/// weights on the atoms it is conditioned on.
struct ChainFactor {
    double variance = 1.0;
    VecX coeffs;
};

/// Product of bridge factors over atoms 0..k-1 in path order; atom 0 is the
/// loop base.  Positions are supplied at evaluation time.
struct GaussianChainDensity {
    int atoms = 0;
    int dim = 3;
    std::vector<ChainFactor> factors;

    /// Pins at times[j] (j = 0..k-2, strictly increasing in (0, T)) for atoms
    /// 1..k-1, conditioned in the order given by `order` (a permutation of
    /// 0..k-2).  The default conditions forward in time.
    static GaussianChainDensity conditioned(std::span<const double> times, double T, int dim = 3,
                                            std::span<const int> order = {});

    /// Precision matrix L (k x k, per spatial component): the exponent is
    /// (1/2) sum_ab L_ab x_a . x_b.
    MatX precision() const;
    double log_normalization() const;
    double quadratic_form(std::span<const Vec3> x) const;
    double log_value(std::span<const Vec3> x) const;
    double value(std::span<const Vec3> x) const;
};

/// prod_{i in subset} Laplacian_i applied to the chain density, evaluated at x.
/// Exact: polynomial in the gradient and Hessian of the exponent times the
/// density, summed over the partial pairings of derivative slots.
double gaussian_laplacian(const GaussianChainDensity& chain, std::span<const Vec3> x,
                          std::span<const int> subset);

// ============================================================================
// TM operator expansion
// ============================================================================

struct LaplacianTerm {
    std::vector<int> subset;  // atom slots (0-based, path order) carrying a Laplacian
    double weight = 0.0;
};

/// The 2^k terms of the order-k TM bracket, w(S) = (2(k-|S|)-1)!! (-T/2)^|S|.
/// Terms are ordered by subset bitmask.
std::vector<LaplacianTerm> laplacian_expansion(int k, double T);

// ============================================================================
// Integrands
// ============================================================================

/// Order-k TE integrand in (T, tau_2..tau_k) for one assignment of atoms to
/// pins (assignment[0] is the loop base).  Includes the order-k prefactor
/// (-1)^{k+1} (2k-1)!! / (2^{k+1} k (2 pi)^{D/2}) and the T^{-k-D/2}
/// measure; units hbar c / eps0^k with unit polarizabilities.
double n_body_te_integrand(const AtomSystem& system, int k, std::span<const int> assignment,
                           std::span<const double> times, double T, DimensionConfig dims = {});

/// TM counterpart with the Laplacian bracket applied.  only_subset restricts
/// the bracket to the single term with that bitmask.
double n_body_tm_integrand(const AtomSystem& system, int k, std::span<const int> assignment,
                           std::span<const double> times, double T, DimensionConfig dims = {},
                           std::optional<unsigned> only_subset = std::nullopt);

/// Two-body TE integrand in the scale-free variables u = T / r^2 and
/// t = tau' / T, summed over both assignments and converted to the two-body
/// coefficient convention.  Its integral over [0, inf) x (0, 1) is the TE
/// coefficient.
double two_body_te_integrand(double u, double t, double separation = 1.0);

// ============================================================================
// Coefficients
// ============================================================================

/// Which pin assignments enter the sum.  `all` sums over every ordering of
/// distinct atoms (k! terms).  `fixed_base` keeps the loop base on one atom;
/// it is evaluated as the fully symmetrized sum divided by k.
enum class AssignmentSum { all, fixed_base };

/// Axes: u (= T / R^2) first, then the k - 1 simplex axes.
QuadratureSpec default_two_body_spec();
QuadratureSpec default_three_body_spec();

/// Atoms on the z axis at the given separation; the result is scaled by r^7.
CoefficientResult te_two_body_coefficient(const QuadratureSpec& spec = default_two_body_spec(),
                                          double separation = 1.0);
CoefficientResult tm_two_body_coefficient(const QuadratureSpec& spec = default_two_body_spec(),
                                          double separation = 1.0);

/// Three-body coefficients in the positions' own length unit (R = 1).
CoefficientResult te_three_body_coefficient(const AtomSystem& system, AssignmentSum sum = AssignmentSum::all,
                                            const QuadratureSpec& spec = default_three_body_spec());
CoefficientResult tm_three_body_coefficient(const AtomSystem& system, AssignmentSum sum = AssignmentSum::all,
                                            const QuadratureSpec& spec = default_three_body_spec());

/// Generic order-k evaluation behind the functions above (k = 2 or 3).
/// mode is TE or TM; the worldline has no mixed term, so cross_TE_TM is
/// returned as an exact zero and total is TE + TM.
CoefficientResult n_body_coefficient(const AtomSystem& system, int k, Mode mode, AssignmentSum sum,
                                     const QuadratureSpec& spec);

}  // namespace casimir::worldline
