#pragma once
/**
 * green_tensor.hpp - dyadic Green-tensor route to Casimir-Polder coefficients.
 *
 * Two independent evaluations live here:
 *
 *  - the plane-wave (TE/TM) decomposition about the z axis, which splits a
 *    coefficient into pure and mixed polarization pieces.  Only on-axis
 *    configurations are supported: the transverse phases vanish, the
 *    azimuthal integrals are done in closed form, and what remains is a
 *    product of one-dimensional k_rho integrals under an outer s integral.
 *
 *  - the closed-form position-space Green tensor at imaginary frequency,
 *    which gives totals for any geometry through a single s integral.
 *
 * Units: hbar = c = 4 pi eps0 = 1.  The Green tensor returned here is
 * (4 pi eps0) G, so the static limit is (3 n n - 1) / r^3.
 */

#include <array>
#include <complex>
#include <string_view>

#include <Eigen/Core>

#include "casimir/core.hpp"
#include "casimir/quadrature.hpp"

namespace casimir::green {

using cplx = std::complex<double>;
using Vec3c = Eigen::Matrix<cplx, 3, 1>;
using Mat3c = Eigen::Matrix<cplx, 3, 3>;

/// Euclidean (imaginary-frequency) wave vector: k = i s, k_z = i kappa.
struct EuclideanWaveVector {
    double s = 0.0;
    double kx = 0.0;
    double ky = 0.0;

    double k_rho() const;
    double kappa() const;
};

/// A wave vector with possibly complex components.  All products below are
/// bilinear (no conjugation), so the {e, h, k/k} frame stays orthonormal
/// after continuation to imaginary frequency.
struct WaveVector {
    cplx kx, ky, kz, k;

    static WaveVector real(double kx, double ky, double kz);
    static WaveVector euclidean(const EuclideanWaveVector& q);

    double k_rho() const;
};

/// e = k x z / |k x z| has no meaning on the z axis.
class OnAxisSingularity : public DomainError {
public:
    using DomainError::DomainError;
};

struct UnitVectors {
    Vec3c e_hat;
    Vec3c h_hat;
};

UnitVectors unit_vectors(const WaveVector& k);

struct ProjectorPair {
    Mat3c A_e;  // e e^T
    Mat3c A_h;  // h h^T
};

ProjectorPair projectors(const WaveVector& k);

enum class Pol { e, h };
enum class PairTrace { ee, hh, he, eh };

/// Tr(A_a(k) A_b(k')^T) from the component closed forms.
double pair_trace(const WaveVector& k, const WaveVector& kp, PairTrace which);

/// Same quantity by explicit 3x3 matrix products.
cplx pair_trace_direct(const ProjectorPair& a, const ProjectorPair& b, PairTrace which);

/// Tr(A_a(k) A_b(k') A_c(k'')) from the component closed forms.
double triple_trace(const WaveVector& k, const WaveVector& kp, const WaveVector& kpp,
                    std::array<Pol, 3> which);

cplx triple_trace_direct(const ProjectorPair& a, const ProjectorPair& b, const ProjectorPair& c,
                         std::array<Pol, 3> which);

/// Pair trace integrated over both azimuths at common s.
double angular_pair_trace(PairTrace which, double s, double k_rho, double kp_rho);

/// Triple trace integrated over all three azimuths at common s.
double angular_triple_trace(std::array<Pol, 3> which, double s, double k_rho, double kp_rho,
                            double kpp_rho);

// ============================================================================
// Plane-wave coefficients (on-axis)
// ============================================================================

/// Three axes: s, then k_rho and k_rho' (the k axes share axes[1]).
QuadratureSpec default_two_body_spec();

/// Four axes: s, then the three k_rho axes (they share axes[1]).
QuadratureSpec default_three_body_spec();

/// Two atoms at unit separation on the z axis.  Mode::cross_TE_TM is the
/// sum of both mixed terms.
CoefficientResult two_body_coefficient(Mode mode, const QuadratureSpec& spec = default_two_body_spec());

enum class ThreeBodyTerm { eee, hhh, mix1, mix2, mix3, mix4, mix5, mix6, half_sum, total };

/// TE/TM polarization of each propagator for a single-trace term.
/// mix1..mix3 carry one h (on G12, G23, G31 in turn); mix4..mix6 carry two
/// (G12+G23, G12+G31, G23+G31).
std::array<Pol, 3> term_polarizations(ThreeBodyTerm term);

std::string_view to_string(ThreeBodyTerm term);

/// Three collinear atoms on the z axis.  lengths = (|z12|, |z23|, |z31|),
/// default the equally spaced chain of length 1.  half_sum is one trace
/// term of the three-body energy; total doubles it.
CoefficientResult three_body_collinear_coefficient(ThreeBodyTerm term,
                                                   const QuadratureSpec& spec = default_three_body_spec(),
                                                   std::array<double, 3> lengths = {0.5, 0.5, 1.0});

// ============================================================================
// Position-space oracle
// ============================================================================

/// Free-space dyadic Green tensor at imaginary frequency s.
Mat3 position_space_green(const Vec3& r1, const Vec3& r2, double s);

QuadratureSpec default_oracle_spec();

/// Two-body total from -1/(2 pi) int ds Tr[G12 G21], scaled by r^7.
CoefficientResult two_body_total_oracle(const Vec3& r1, const Vec3& r2,
                                        const QuadratureSpec& spec = default_oracle_spec());

/// Three-body total in the positions' own length unit (R = 1).
CoefficientResult three_body_total_general(const AtomSystem& system,
                                           const QuadratureSpec& spec = default_oracle_spec());

}  // namespace casimir::green
