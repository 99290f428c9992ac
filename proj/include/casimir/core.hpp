#pragma once
/**
 * core.hpp - shared domain types for the Casimir-Polder calculators.
 *
 * Everything downstream works in natural units (hbar = c = 4*pi*eps0 = 1)
 * with a unit reference length, so every result is a pure number that
 * multiplies one of two fixed unit combinations:
 *
 *   two_body:    V = value * hbar c a1 a2 / ((4 pi eps0)^2 r^7)
 *   three_body:  V = value * hbar c a1 a2 a3 / (pi (4 pi eps0)^3 R^10)
 */

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace casimir {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// ============================================================================
// Errors
// ============================================================================

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Coincident atoms, zero reference length, wrong atom count.
class InvalidGeometry : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

// ============================================================================
// Domain types
// ============================================================================

struct AtomSystem {
    std::vector<Vec3> positions;
    std::vector<double> polarizabilities;
    double scale = 1.0;          // physical length of one unit
    bool nondimensional = false;

    std::size_t size() const { return positions.size(); }

    /// Throws InvalidGeometry when the invariants do not hold.
    void validate() const;

    double min_separation() const;
    double max_separation() const;

    /// Unit polarizabilities, scale 1.
    static AtomSystem from_positions(std::vector<Vec3> positions);
};

enum class Method { worldline, green_tensor_planewave, green_tensor_oracle, monte_carlo };
enum class Mode { TE, TM, cross_TE_TM, total };
enum class Convention { two_body, three_body };

struct CoefficientResult {
    double value = 0.0;
    double error_estimate = 0.0;
    Method method = Method::worldline;
    Mode mode = Mode::total;
    int order = 2;
    Convention convention = Convention::two_body;
};

struct DimensionConfig {
    int spacetime = 4;

    int spatial() const { return spacetime - 1; }
    void validate() const;
};

std::string_view to_string(Method m);
std::string_view to_string(Mode m);
std::string_view to_string(Convention c);

/// Rescales positions so the largest pairwise separation is 1.
/// A single atom is returned unchanged with scale 1.
AtomSystem nondimensionalize(const AtomSystem& system);

/// Applies x -> Q x + t to every position.
AtomSystem rigid_motion(const AtomSystem& system, const Mat3& rotation, const Vec3& translation);

/// (2n-1)!! for n >= 0, with (-1)!! = 1.
double double_factorial_odd(int n);

}  // namespace casimir
