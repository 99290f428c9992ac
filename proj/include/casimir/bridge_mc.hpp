#pragma once
// Monte Carlo side of the worldline route: exact Brownian-bridge paths with
// pinned intermediate points, path-line averages, and a sampled estimate of
// the two-body TE coefficient.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "casimir/worldline.hpp"

namespace casimir::bridge_mc {

using worldline::BridgePinning;

/// Pinned times that cannot be placed on the grid.
class ResolutionError : public Error {
public:
    using Error::Error;
};

struct PathSample {
    // column j is x(j T / n_steps), j = 0..n_steps; rows are components
    Eigen::MatrixXd points;
    BridgePinning pinning;
    std::vector<int> pin_nodes;  // grid node of each pin
    double snap_error = 0.0;     // largest |tau_pin - tau_node|
    std::uint64_t seed = 0;
    std::uint64_t index = 0;

    int n_steps() const { return static_cast<int>(points.cols()) - 1; }
    double time(int node) const { return pinning.total_time * node / n_steps(); }
};

struct McEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t n_paths = 0;
    std::uint64_t seed = 0;
    double snap_error = 0.0;
};

/// Pins are snapped to the nearest grid node.  Every segment between
/// consecutive pinned nodes needs at least two steps.  index selects the
/// random stream, so path i of a batch is sample_bridge(..., seed, i).
PathSample sample_bridge(const BridgePinning& pinning, int n_steps, std::uint64_t seed,
                         std::uint64_t index = 0);

using Field = std::function<double(const Eigen::VectorXd&)>;

/// Trapezoidal average of field along the closed path.
double path_average(const Field& field, const PathSample& path);

/// <eps_r>^{-5/2} along the path, the medium factor of the TE integrand.
double dielectric_factor(const Field& eps_r, const PathSample& path);

/// Importance-sampled two-body TE coefficient (two-body convention).  Each
/// sample draws t = tau'/T uniformly and u = T/r^2 from the proposal
/// proportional to the Gaussian pinning factor, u = a / Y with
/// a = 1 / (2 t (1 - t)) and Y ~ Gamma(7/2).  A constant relative
/// permittivity eps_r multiplies every sample by eps_r^{-5/2}.
McEstimate mc_te_two_body(double separation, std::int64_t n_paths, std::uint64_t seed, double eps_r = 1.0);

}  // namespace casimir::bridge_mc
