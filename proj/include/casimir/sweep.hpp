#pragma once
// Planar three-atom sweeps: A at the origin, B at (b, 0, 0) and C at
// (c cos(theta), c sin(theta), 0) with c = 1 as the length unit.  Each grid
// point is evaluated with the worldline scalar sum and/or the Green-tensor
// position-space total, both in the three-body convention.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "casimir/core.hpp"
#include "casimir/quadrature.hpp"

namespace casimir::sweep {

enum class SweepMethod { worldline_sum, green_tensor };

std::string_view to_string(SweepMethod m);

struct SweepConfig {
    double b_over_c = 1.0;
    std::vector<double> cos_theta = default_grid();
    std::vector<SweepMethod> methods = {SweepMethod::worldline_sum, SweepMethod::green_tensor};
    QuadratureSpec worldline_spec;  // empty axes: module default
    QuadratureSpec green_spec;      // empty axes: module default
    // grid points whose closest atom pair is nearer than this are skipped
    double exclusion_radius = 1e-3;

    void validate() const;

    /// n uniform points from -1 to 1.
    static std::vector<double> default_grid(int n = 41);
};

struct SweepRow {
    double cos_theta = 0.0;
    double b_over_c = 0.0;
    SweepMethod method = SweepMethod::green_tensor;
    double value = 0.0;  // quiet NaN when the point failed
    double error_estimate = 0.0;
    bool ok = true;
    std::string message;
    std::optional<double> partial;  // best estimate reached before a failure
};

AtomSystem build_geometry(double b_over_c, double cos_theta);

/// worldline_sum is TE + TM with one fixed base atom; green_tensor is the
/// position-space total.  Rows follow grid order, methods in config order.
/// Numerical failures are recorded in their row and the sweep continues.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

/// Indices i (into rows of one method, grid order) where the value changes
/// sign between i - 1 and i by more than the neighbouring slopes allow.
/// Flags only; zero crossings of a smooth curve are expected.
std::vector<std::size_t> continuity_flags(const std::vector<SweepRow>& rows, SweepMethod method);

}  // namespace casimir::sweep
