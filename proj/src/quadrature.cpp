#include "casimir/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace casimir {

namespace {

constexpr double pi = std::numbers::pi;

// Half-widths of the DE parameter range.  Beyond these the weights fall
// below double precision relative to the bulk of the integral.
constexpr double tanh_sinh_tmax = 3.5;
constexpr double exp_sinh_tmax = 4.5;

// Gauss-Legendre nodes and weights on [-1, 1], cached per node count.
const detail::Rule1D& legendre_rule(int n) {
    static std::mutex mutex;
    static std::map<int, detail::Rule1D> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;

    detail::Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    return cache.emplace(n, std::move(r)).first->second;
}

// tanh-sinh nodes on (0, 1) written as (position, distance to nearer end).
struct UnitNode {
    double s;       // position in (0, 1)
    double comp;    // 1 - s, accurate near 1
    double weight;  // ds weight
};

std::vector<UnitNode> tanh_sinh_unit(int nodes, int level) {
    const int m = std::max(1, (nodes - 1) / 2);
    const double h = tanh_sinh_tmax / m / std::ldexp(1.0, level);
    const int M = m << level;
    std::vector<UnitNode> out;
    out.reserve(2 * M + 1);
    for (int j = -M; j <= M; ++j) {
        const double t = j * h;
        const double y = 0.5 * pi * std::sinh(t);
        const double e = std::exp(-2.0 * std::abs(y));
        const double edge = e / (1.0 + e);  // distance from the nearer end
        const double w = h * 0.5 * pi * std::cosh(t) * 2.0 * e / ((1.0 + e) * (1.0 + e));
        if (edge <= 0.0 || w <= 0.0) continue;
        if (t < 0.0)
            out.push_back({edge, 1.0 - edge, w});
        else
            out.push_back({1.0 - edge, edge, w});
    }
    return out;
}

// Keeps only nodes strictly inside (a, b); the weights at rounded-away nodes
// are below working precision.
void push_inside(detail::Rule1D& r, double x, double w, double a, double b) {
    if (x > a && x < b && w > 0.0 && std::isfinite(x) && std::isfinite(w)) {
        r.x.push_back(x);
        r.w.push_back(w);
    }
}

struct Axis {
    double lower;
    double upper;
    AxisSpec spec;
};

class TensorEvaluator {
public:
    TensorEvaluator(const Integrand& f, std::vector<detail::Rule1D> rules)
        : f_(f), rules_(std::move(rules)), point_(rules_.size()), scratch_(rules_.size()) {
        for (std::size_t a = 0; a < rules_.size(); ++a) scratch_[a].resize(rules_[a].x.size());
    }

    double run() { return rules_.empty() ? call() : axis(0); }
    std::int64_t evaluations() const { return evaluations_; }

private:
    double call() {
        ++evaluations_;
        const double v = f_(point_);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "integrand returned " << v << " at (";
            for (std::size_t i = 0; i < point_.size(); ++i) os << (i ? ", " : "") << point_[i];
            os << ")";
            throw IntegrandError(os.str(), point_);
        }
        return v;
    }

    double axis(std::size_t a) {
        const auto& r = rules_[a];
        // The scratch buffer for this depth is only reused after the
        // recursion below has returned.
        auto& terms = scratch_[a];
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            point_[a] = r.x[i];
            terms[i] = r.w[i] * (a + 1 == rules_.size() ? call() : axis(a + 1));
        }
        return pairwise_sum(terms);
    }

    const Integrand& f_;
    std::vector<detail::Rule1D> rules_;
    std::vector<double> point_;
    std::vector<std::vector<double>> scratch_;
    std::int64_t evaluations_ = 0;
};

IntegralEstimate integrate_axes(const Integrand& f, const std::vector<Axis>& axes,
                                const QuadratureSpec& spec) {
    spec.validate(axes.size());
    IntegralEstimate est;
    double previous = 0.0;
    for (int level = 0; level <= spec.max_levels; ++level) {
        std::vector<detail::Rule1D> rules;
        rules.reserve(axes.size());
        for (const auto& ax : axes)
            rules.push_back(detail::make_rule(ax.spec.rule, ax.spec.nodes, level, ax.lower, ax.upper));
        TensorEvaluator ev(f, std::move(rules));
        const double value = ev.run();
        est.evaluations += ev.evaluations();
        est.value = value;
        if (level > 0) {
            est.error_estimate = std::abs(value - previous);
            if (est.error_estimate <= std::max(spec.rel_tol * std::abs(value), spec.abs_tol))
                return est;
        } else {
            est.error_estimate = std::abs(value);
        }
        previous = value;
    }
    std::ostringstream os;
    os << "quadrature did not reach relative tolerance " << spec.rel_tol << " after "
       << spec.max_levels << " refinements (best " << est.value << " +/- " << est.error_estimate
       << ")";
    throw ConvergenceError(os.str(), est);
}

}  // namespace

namespace detail {

Rule1D make_rule(AxisRule rule, int nodes, int level, double a, double b) {
    Rule1D r;
    const bool infinite = std::isinf(b);
    if (!infinite) {
        const double len = b - a;
        if (rule == AxisRule::gauss_legendre_mapped) {
            const auto& gl = legendre_rule(nodes << level);
            for (std::size_t i = 0; i < gl.x.size(); ++i)
                push_inside(r, a + 0.5 * len * (1.0 + gl.x[i]), 0.5 * len * gl.w[i], a, b);
        } else {
            for (const auto& n : tanh_sinh_unit(nodes, level)) {
                const double x = n.s <= 0.5 ? a + len * n.s : b - len * n.comp;
                push_inside(r, x, len * n.weight, a, b);
            }
        }
        return r;
    }

    switch (rule) {
    case AxisRule::double_exponential: {
        const int m = std::max(1, (nodes - 1) / 2);
        const double h = exp_sinh_tmax / m / std::ldexp(1.0, level);
        const int M = m << level;
        for (int j = -M; j <= M; ++j) {
            const double t = j * h;
            const double g = std::exp(0.5 * pi * std::sinh(t));
            push_inside(r, a + g, h * 0.5 * pi * std::cosh(t) * g, a, b);
        }
        break;
    }
    case AxisRule::exp_transform: {
        for (const auto& n : tanh_sinh_unit(nodes, level)) {
            // x = -ln(1 - s), dx = ds / (1 - s)
            const double x = n.s <= 0.5 ? -std::log1p(-n.s) : -std::log(n.comp);
            push_inside(r, a + x, n.weight / n.comp, a, b);
        }
        break;
    }
    case AxisRule::gauss_legendre_mapped: {
        const auto& gl = legendre_rule(nodes << level);
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double s = 0.5 * (1.0 + gl.x[i]);
            const double c = std::cos(0.5 * pi * s);
            const double x = std::tan(0.5 * pi * s);
            push_inside(r, a + x, 0.5 * gl.w[i] * 0.5 * pi / (c * c), a, b);
        }
        break;
    }
    }
    return r;
}

}  // namespace detail

void QuadratureSpec::validate(std::size_t dims) const {
    if (axes.size() != dims) {
        std::ostringstream os;
        os << "quadrature spec has " << axes.size() << " axes, integrand needs " << dims;
        throw DomainError(os.str());
    }
    for (const auto& a : axes)
        if (a.nodes < 2) throw DomainError("quadrature node counts must be at least 2");
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw DomainError("relative tolerance must lie in (0, 1)");
    if (max_levels < 1) throw DomainError("max refinement levels must be positive");
}

QuadratureSpec QuadratureSpec::uniform(std::size_t dims, AxisRule rule, int nodes, double rel_tol,
                                       int max_levels) {
    QuadratureSpec s;
    s.axes.assign(dims, AxisSpec{rule, nodes});
    s.rel_tol = rel_tol;
    s.max_levels = max_levels;
    return s;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

IntegralEstimate integrate_semi_infinite(const Integrand& f, const QuadratureSpec& spec) {
    std::vector<Axis> axes;
    for (const auto& a : spec.axes)
        axes.push_back({0.0, std::numeric_limits<double>::infinity(), a});
    return integrate_axes(f, axes, spec);
}

IntegralEstimate integrate_box(const Integrand& f, std::span<const double> lower,
                               std::span<const double> upper, const QuadratureSpec& spec) {
    if (lower.size() != upper.size() || lower.size() != spec.axes.size())
        throw DomainError("box bounds do not match quadrature spec dimension");
    std::vector<Axis> axes;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(upper[i] > lower[i]) || std::isinf(lower[i]))
            throw DomainError("box bounds must satisfy lower < upper with finite lower");
        axes.push_back({lower[i], upper[i], spec.axes[i]});
    }
    return integrate_axes(f, axes, spec);
}

double map_ordered_simplex(std::span<const double> unit, double T, std::span<double> times) {
    double prev = 0.0;
    double jac = 1.0;
    for (std::size_t j = 0; j < unit.size(); ++j) {
        const double span = T - prev;
        times[j] = prev + span * unit[j];
        jac *= span;
        prev = times[j];
    }
    return jac;
}

IntegralEstimate integrate_ordered_simplex(const Integrand& f, int k, double T,
                                           const QuadratureSpec& spec) {
    if (k < 2) throw DomainError("ordered simplex needs k >= 2");
    if (!(T > 0.0)) throw DomainError("simplex length must be positive");
    const std::size_t dims = static_cast<std::size_t>(k - 1);
    std::vector<double> lo(dims, 0.0), hi(dims, 1.0);
    std::vector<double> times(dims);
    auto mapped = [&](std::span<const double> v) {
        const double jac = map_ordered_simplex(v, T, times);
        return jac * f(times);
    };
    return integrate_box(mapped, lo, hi, spec);
}

IntegralEstimate integrate_1d(const std::function<double(double)>& f, double a, double b,
                              AxisSpec axis, double rel_tol, int max_levels) {
    QuadratureSpec spec;
    spec.axes = {axis};
    spec.rel_tol = rel_tol;
    spec.max_levels = max_levels;
    const double lo[1] = {a};
    const double hi[1] = {b};
    return integrate_box([&](std::span<const double> x) { return f(x[0]); }, lo, hi, spec);
}

}  // namespace casimir
