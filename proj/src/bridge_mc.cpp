#include "casimir/bridge_mc.hpp"

#include <cmath>
#include <sstream>

#include "casimir/quadrature.hpp"
#include "casimir/rng.hpp"

namespace casimir::bridge_mc {

namespace {

// Fills nodes (a, b) of a bridge from points.col(a) to points.col(b), both
// already set, by sequential conditioning on the right endpoint.
void fill_segment(Eigen::MatrixXd& points, int a, int b, double dt, Engine& rng) {
    std::normal_distribution<double> normal;
    const int d = static_cast<int>(points.rows());
    for (int j = a + 1; j < b; ++j) {
        const double left = (b - j + 1) * dt;  // time from x_{j-1} to the endpoint
        const double f = dt / left;
        const double sd = std::sqrt(dt * (1.0 - f));
        for (int c = 0; c < d; ++c)
            points(c, j) = points(c, j - 1) + f * (points(c, b) - points(c, j - 1)) + sd * normal(rng);
    }
}

}  // namespace

PathSample sample_bridge(const BridgePinning& pinning, int n_steps, std::uint64_t seed, std::uint64_t index) {
    pinning.validate();
    if (pinning.dim > 3) throw DomainError("bridge sampling supports at most three components");
    if (n_steps < 2) throw ResolutionError("need at least two steps");

    PathSample path;
    path.pinning = pinning;
    path.seed = seed;
    path.index = index;
    const double T = pinning.total_time;
    const double dt = T / n_steps;

    int prev = 0;
    for (const auto& pin : pinning.pins) {
        const int node = static_cast<int>(std::lround(pin.tau / dt));
        if (node - prev < 2 || n_steps - node < 2) {
            std::ostringstream msg;
            msg << "pin at tau = " << pin.tau << " lands on node " << node
                << ", within two steps of the previous pinned node " << prev << " (n_steps = " << n_steps << ")";
            throw ResolutionError(msg.str());
        }
        path.pin_nodes.push_back(node);
        path.snap_error = std::max(path.snap_error, std::abs(pin.tau - node * dt));
        prev = node;
    }

    const int d = pinning.dim;
    path.points.resize(d, n_steps + 1);
    path.points.col(0) = pinning.base.head(d);
    path.points.col(n_steps) = pinning.base.head(d);
    for (std::size_t p = 0; p < pinning.pins.size(); ++p)
        path.points.col(path.pin_nodes[p]) = pinning.pins[p].position.head(d);

    Engine rng = stream(seed, index);
    int a = 0;
    for (int node : path.pin_nodes) {
        fill_segment(path.points, a, node, dt, rng);
        a = node;
    }
    fill_segment(path.points, a, n_steps, dt, rng);
    return path;
}

double path_average(const Field& field, const PathSample& path) {
    const int n = path.n_steps();
    if (n < 1) throw DomainError("empty path");
    // deviations from the first node keep a constant field exact
    std::vector<double> dev(n + 1);
    double f0 = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double f = field(path.points.col(j));
        if (std::isnan(f)) {
            std::ostringstream msg;
            msg << "field is NaN at node " << j << " (tau = " << path.time(j) << ")";
            throw DomainError(msg.str());
        }
        if (j == 0) f0 = f;
        dev[j] = (j == 0 || j == n) ? 0.5 * (f - f0) : f - f0;
    }
    return f0 + pairwise_sum(dev) / n;
}

double dielectric_factor(const Field& eps_r, const PathSample& path) {
    const double avg = path_average(eps_r, path);
    if (!(avg > 0.0)) throw DomainError("path-averaged permittivity must be positive");
    return avg == 1.0 ? 1.0 : std::pow(avg, -2.5);
}

McEstimate mc_te_two_body(double separation, std::int64_t n_paths, std::uint64_t seed, double eps_r) {
    if (n_paths <= 0) throw DomainError("n_paths must be positive");
    if (!(separation > 0.0)) throw DomainError("separation must be positive");
    if (!(eps_r > 0.0)) throw DomainError("relative permittivity must be positive");

    const double shape = 3.5;
    const double log_gamma = std::lgamma(shape);
    const double medium = eps_r == 1.0 ? 1.0 : std::pow(eps_r, -2.5);

    std::vector<double> samples(static_cast<std::size_t>(n_paths));
    for (std::int64_t i = 0; i < n_paths; ++i) {
        Engine rng = stream(seed, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::gamma_distribution<double> gamma(shape, 1.0);
        double t = uniform(rng);
        while (t <= 0.0) t = uniform(rng);
        const double a = 1.0 / (2.0 * t * (1.0 - t));
        const double y = gamma(rng);
        const double u = a / y;
        // proposal density of u given t
        const double log_pdf = shape * std::log(a) - (shape + 1.0) * std::log(u) - a / u - log_gamma;
        samples[i] = medium * worldline::two_body_te_integrand(u, t, separation) / std::exp(log_pdf);
    }

    McEstimate est;
    est.n_paths = n_paths;
    est.seed = seed;
    est.mean = pairwise_sum(samples) / static_cast<double>(n_paths);
    for (auto& s : samples) s = (s - est.mean) * (s - est.mean);
    const double var = n_paths > 1 ? pairwise_sum(samples) / static_cast<double>(n_paths - 1) : 0.0;
    est.standard_error = std::sqrt(var / static_cast<double>(n_paths));
    return est;
}

}  // namespace casimir::bridge_mc
