#include "casimir/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace casimir {

void AtomSystem::validate() const {
    if (positions.empty())
        throw InvalidGeometry("atom system must contain at least one atom");
    if (polarizabilities.size() != positions.size())
        throw InvalidGeometry("polarizability count does not match atom count");
    for (double a : polarizabilities) {
        if (!std::isfinite(a) || a < 0.0)
            throw InvalidGeometry("polarizabilities must be finite and non-negative");
    }
    for (const auto& p : positions) {
        if (!p.allFinite())
            throw InvalidGeometry("atom positions must be finite");
    }
    if (positions.size() > 1 && !(min_separation() > 0.0))
        throw InvalidGeometry("atom positions must be pairwise distinct");
}

double AtomSystem::min_separation() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            best = std::min(best, (positions[i] - positions[j]).norm());
    return best;
}

double AtomSystem::max_separation() const {
    double best = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            best = std::max(best, (positions[i] - positions[j]).norm());
    return best;
}

AtomSystem AtomSystem::from_positions(std::vector<Vec3> positions) {
    AtomSystem s;
    s.polarizabilities.assign(positions.size(), 1.0);
    s.positions = std::move(positions);
    return s;
}

void DimensionConfig::validate() const {
    if (spacetime < 2)
        throw DomainError("spacetime dimension must be at least 2");
}

std::string_view to_string(Method m) {
    switch (m) {
    case Method::worldline: return "worldline";
    case Method::green_tensor_planewave: return "green-tensor-planewave";
    case Method::green_tensor_oracle: return "green-tensor";
    case Method::monte_carlo: return "monte-carlo";
    }
    return "?";
}

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::TE: return "te";
    case Mode::TM: return "tm";
    case Mode::cross_TE_TM: return "cross";
    case Mode::total: return "total";
    }
    return "?";
}

std::string_view to_string(Convention c) {
    return c == Convention::two_body ? "two_body" : "three_body";
}

AtomSystem nondimensionalize(const AtomSystem& system) {
    system.validate();
    AtomSystem out = system;
    out.nondimensional = true;
    if (system.size() == 1) {
        out.scale = 1.0;
        return out;
    }
    const double ref = system.max_separation();
    if (!(ref > 0.0))
        throw InvalidGeometry("zero reference separation");
    for (auto& p : out.positions) p /= ref;
    out.scale = system.scale * ref;
    return out;
}

AtomSystem rigid_motion(const AtomSystem& system, const Mat3& rotation, const Vec3& translation) {
    AtomSystem out = system;
    for (auto& p : out.positions) p = rotation * p + translation;
    return out;
}

double double_factorial_odd(int n) {
    double r = 1.0;
    for (int j = 2 * n - 1; j > 1; j -= 2) r *= j;
    return r;
}

}  // namespace casimir
