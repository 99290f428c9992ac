#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"

#include "casimir/worldline.hpp"

using namespace casimir;
using namespace casimir::worldline;

namespace {

constexpr double pi = std::numbers::pi;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Vec3 random_point(std::mt19937_64& rng, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    return {u(rng), u(rng), u(rng)};
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

AtomSystem collinear() { return AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(0, 0, 0.5), Vec3(0, 0, 1)}); }

AtomSystem triangle() {
    return AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)});
}

// Integral over R^3 split into the eight octants around c.
template <class F>
double integrate_r3(F f, const Vec3& c) {
    auto spec = QuadratureSpec::uniform(3, AxisRule::double_exponential, 12, 1e-8, 4);
    double total = 0.0;
    for (int oct = 0; oct < 8; ++oct) {
        const Vec3 sign((oct & 1) ? -1 : 1, (oct & 2) ? -1 : 1, (oct & 4) ? -1 : 1);
        total += integrate_semi_infinite(
                     [&](std::span<const double> y) {
                         return f(Vec3(c.x() + sign.x() * y[0], c.y() + sign.y() * y[1], c.z() + sign.z() * y[2]));
                     },
                     spec)
                     .value;
    }
    return total;
}

// Laplacian in atom i by central differences at h and h/2, Richardson-combined.
template <class F>
double fd_laplacian(F f, std::vector<Vec3> x, int i, double h) {
    auto central = [&](double step) {
        const double f0 = f(x);
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            auto xp = x, xm = x;
            xp[i][c] += step;
            xm[i][c] -= step;
            sum += f(xp) - 2 * f0 + f(xm);
        }
        return sum / (step * step);
    };
    return (4 * central(h / 2) - central(h)) / 3;
}

}  // namespace

TEST_CASE("bridge density values and errors") {
    const double T = 2.6;
    const Vec3 r(0.3, -0.2, 1.0);
    CHECK(rel(bridge_density(T / 2, T, r, r), std::pow(pi * T / 2, -1.5)) < 1e-14);
    CHECK(bridge_density(1e-12, T, r, Vec3(1, 1, 1)) == 0.0);
    CHECK_THROWS_AS(bridge_density(0.0, T, r, r), DomainError);
    CHECK_THROWS_AS(bridge_density(T, T, r, r), DomainError);
    CHECK_THROWS_AS(bridge_density(3.0, T, r, r), DomainError);

    // normalization over the target
    const double norm = integrate_r3([&](const Vec3& y) { return bridge_density(0.7, T, r, y); }, r);
    CHECK(std::abs(norm - 1.0) < 1e-8);

    // other dimensions follow the vector length
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1), b = Eigen::VectorXd::Zero(1);
    CHECK(rel(bridge_density(T / 2, T, a, b), std::pow(pi * T / 2, -0.5)) < 1e-14);
}

TEST_CASE("conditional density: reordering identity for 100 random configurations") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double T = 0.2 + 3 * u01(rng);
        double t2 = T * u01(rng), t3 = T * u01(rng);
        if (t2 > t3) std::swap(t2, t3);
        if (t3 - t2 < 1e-3 * T || t2 < 1e-3 * T || T - t3 < 1e-3 * T) continue;
        const Vec3 base = random_point(rng), r2 = random_point(rng, 0.6), r3 = random_point(rng, 0.6);
        const double forward = bridge_density(t2, T, base, r2) * conditional_density(t3, r3, t2, r2, T, base);
        const double backward = bridge_density(t3, T, base, r3) * conditional_density(t2, r2, t3, r3, T, base);
        CHECK(rel(forward, backward) < 1e-12);
    }
}

TEST_CASE("variance identity for random times") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double T = 0.1 + 5 * u01(rng);
        double t2 = T * u01(rng), t3 = T * u01(rng);
        if (t2 > t3) std::swap(t2, t3);
        const double tm = t3 - t2, T2 = T - t2;
        const double lhs = t2 * (1 - t2 / T) * tm * (1 - tm / T2);
        const double rhs = t3 * (1 - t3 / T) * t2 * (1 - t2 / t3);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
    }
}

TEST_CASE("conditional density limits and normalization") {
    const double T = 1.5;
    const Vec3 base(0, 0, 0), r2(0.2, 0.1, -0.3);
    const double pinned = conditional_density(0.5 + 1e-15, r2, 0.5, r2, T, base);
    CHECK(!std::isnan(pinned));
    CHECK(pinned > 1e20);
    CHECK_THROWS_AS(conditional_density(0.5, r2, 0.5, r2, T, base), DomainError);

    for (double t3 : {0.9, 0.2}) {
        const double mass =
            integrate_r3([&](const Vec3& y) { return conditional_density(t3, y, 0.5, r2, T, base); }, r2);
        CHECK(std::abs(mass - 1.0) < 1e-8);
    }
}

TEST_CASE("chain density does not depend on the conditioning order") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const int k = 2 + i % 3;  // 2..4 atoms
        const double T = 0.3 + 3 * u01(rng);
        std::vector<double> times(k - 1);
        for (auto& t : times) t = T * (0.02 + 0.96 * u01(rng));
        std::sort(times.begin(), times.end());
        bool distinct = true;
        for (int j = 1; j < k - 1; ++j) distinct &= times[j] - times[j - 1] > 1e-3;
        if (!distinct) continue;
        std::vector<Vec3> x(k);
        for (auto& p : x) p = random_point(rng, 0.7);

        const auto forward = GaussianChainDensity::conditioned(times, T);
        std::vector<int> order(k - 1);
        std::iota(order.rbegin(), order.rend(), 0);
        const auto backward = GaussianChainDensity::conditioned(times, T, 3, order);
        std::shuffle(order.begin(), order.end(), rng);
        const auto shuffled = GaussianChainDensity::conditioned(times, T, 3, order);
        const double v = forward.value(x);
        CHECK(rel(backward.value(x), v) < 1e-12);
        CHECK(rel(shuffled.value(x), v) < 1e-12);

        // the forward chain is the product of the paper's conditional densities
        double product = bridge_density(times[0], T, x[0], x[1]);
        for (int j = 2; j < k; ++j)
            product *= conditional_density(times[j - 1], x[j], times[j - 2], x[j - 1], T, x[0]);
        CHECK(rel(product, v) < 1e-12);
    }
    const double bad[2] = {0.5, 0.4};
    CHECK_THROWS_AS(GaussianChainDensity::conditioned(bad, 1.0), DomainError);
}

TEST_CASE("Laplacian expansion weights") {
    const double T = 1.7;
    auto one = laplacian_expansion(1, T);
    REQUIRE(one.size() == 2);
    CHECK(one[0].weight == 1.0);
    CHECK(one[1].weight == doctest::Approx(-T / 2));

    auto two = laplacian_expansion(2, T);
    REQUIRE(two.size() == 4);
    CHECK(two[0].weight == 3.0);
    CHECK(two[1].weight == doctest::Approx(-T / 2));
    CHECK(two[2].weight == doctest::Approx(-T / 2));
    CHECK(two[3].weight == doctest::Approx(T * T / 4));

    auto three = laplacian_expansion(3, T);
    REQUIRE(three.size() == 8);
    for (const auto& t : three) {
        switch (t.subset.size()) {
        case 0: CHECK(t.weight == 15.0); break;
        case 1: CHECK(t.weight == doctest::Approx(-3 * T / 2)); break;
        case 2: CHECK(t.weight == doctest::Approx(T * T / 4)); break;
        case 3: CHECK(t.weight == doctest::Approx(-T * T * T / 8)); break;
        }
    }
    CHECK_THROWS_AS(laplacian_expansion(0, T), DomainError);
}

TEST_CASE("Laplacian of a single Gaussian at its peak") {
    const double T = 2.0, tau = 0.6;
    const double times[1] = {tau};
    const auto chain = GaussianChainDensity::conditioned(times, T);
    const double v = tau * (1 - tau / T);
    const std::vector<Vec3> x = {Vec3(0.1, 0.2, 0.3), Vec3(0.1, 0.2, 0.3)};
    const int s[1] = {1};
    CHECK(rel(gaussian_laplacian(chain, x, s), -3.0 / v * std::pow(2 * pi * v, -1.5)) < 1e-13);
}

TEST_CASE("gaussian_laplacian matches finite differences") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double h = 1e-3;
    for (int trial = 0; trial < 6; ++trial) {
        const int k = 2 + trial % 2;
        const double T = 3.0 + 2 * u01(rng);
        std::vector<double> times(k - 1);
        for (int j = 0; j < k - 1; ++j) times[j] = T * (j + 0.3 + 0.4 * u01(rng)) / k;
        const auto chain = GaussianChainDensity::conditioned(times, T);
        std::vector<Vec3> x(k);
        for (auto& p : x) p = random_point(rng, 0.8);

        for (unsigned mask = 1; mask < (1u << k); ++mask) {
            std::vector<int> subset;
            for (int i = 0; i < k; ++i)
                if (mask & (1u << i)) subset.push_back(i);
            const double exact = gaussian_laplacian(chain, x, subset);
            // scale: density times (largest precision entry)^|S|
            const double scale = chain.value(x) * std::pow(chain.precision().cwiseAbs().maxCoeff(), subset.size());
            for (int i : subset) {
                std::vector<int> rest;
                for (int j : subset)
                    if (j != i) rest.push_back(j);
                const double fd = fd_laplacian(
                    [&](const std::vector<Vec3>& y) { return gaussian_laplacian(chain, y, rest); }, x, i, h);
                CAPTURE(mask);
                CAPTURE(i);
                CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-2 * scale));
            }
        }
        // commutativity
        const int a[2] = {0, 1}, b[2] = {1, 0};
        CHECK(rel(gaussian_laplacian(chain, x, a), gaussian_laplacian(chain, x, b)) < 1e-12);
    }
}

TEST_CASE("n-body integrands") {
    // k = 2 reproduces the two-body integrand built from bridge_density
    const double u = 0.8, t = 0.5, r = 1.0;
    const double T = u * r * r;
    const double manual = std::pow(4 * pi, 2) * 2 * (-3.0 / (16 * std::pow(2 * pi, 2))) * std::pow(T, -4) *
                          bridge_density(t * T, T, Vec3::Zero(), Vec3(0, 0, r)) * T;
    CHECK(rel(two_body_te_integrand(u, t, r), manual) < 1e-13);

    // the zero-Laplacian TM term carries (2k-1)!!, which the TE prefactor holds
    const auto sys = triangle();
    const int order[3] = {0, 1, 2};
    const double times[2] = {0.4, 1.1};
    CHECK(rel(n_body_tm_integrand(sys, 3, order, times, 1.6, {}, 0u), n_body_te_integrand(sys, 3, order, times, 1.6)) <
          1e-14);
    const double unordered[2] = {1.1, 0.4};
    CHECK_THROWS_AS(n_body_te_integrand(sys, 3, order, unordered, 1.6), DomainError);
    const int short_order[2] = {0, 1};
    CHECK_THROWS_AS(n_body_te_integrand(sys, 3, short_order, times, 1.6), DomainError);
}

TEST_CASE("time simplex quadrature against a dense Riemann sum") {
    const auto sys = collinear();
    const int order[3] = {0, 1, 2};
    const double T = 1.0;
    auto f = [&](std::span<const double> tau) {
        if (!(tau[0] > 0.0 && tau[1] > tau[0] && tau[1] < T)) return 0.0;
        return n_body_te_integrand(sys, 3, order, tau, T);
    };
    auto spec = QuadratureSpec::uniform(2, AxisRule::double_exponential, 16, 1e-9, 6);
    const double quad = integrate_ordered_simplex(f, 3, T, spec).value;

    // midpoint rule on the square, keeping cells inside the simplex
    const int n = 1000;
    const double h = T / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double tau[2] = {(i + 0.5) * h, (j + 0.5) * h};
            sum += f(tau);
        }
    // diagonal cells contribute half their area; the integrand vanishes there
    sum *= h * h;
    CHECK(rel(sum, quad) < 1e-4);
}

TEST_CASE("two-body worldline coefficients") {
    auto te = te_two_body_coefficient();
    auto tm = tm_two_body_coefficient();
    CHECK(rel(te.value, -3.0 / (8 * pi)) < 1e-9);
    CHECK(rel(tm.value, -43.0 / (8 * pi)) < 1e-9);
    CHECK(rel(te.value + tm.value, -23.0 / (4 * pi)) < 1e-9);
    CHECK(te.method == Method::worldline);
    CHECK(te.convention == Convention::two_body);

    // scale-free: separation 2 before scaling gives the same coefficient
    CHECK(rel(te_two_body_coefficient(default_two_body_spec(), 2.0).value, te.value) < 1e-9);
    CHECK(rel(tm_two_body_coefficient(default_two_body_spec(), 2.0).value, tm.value) < 1e-9);

    const auto pair = AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(0, 0, 1)});
    CHECK(n_body_coefficient(pair, 2, Mode::cross_TE_TM, AssignmentSum::all, default_two_body_spec()).value == 0.0);
    auto total = n_body_coefficient(pair, 2, Mode::total, AssignmentSum::all, default_two_body_spec());
    CHECK(rel(total.value, -23.0 / (4 * pi)) < 1e-9);
}

TEST_CASE("three-body worldline coefficients: collinear") {
    const auto sys = collinear();
    auto te = te_three_body_coefficient(sys);
    auto tm = tm_three_body_coefficient(sys);
    CHECK(rel(te.value, 22.5) < 1e-6);
    CHECK(rel(tm.value, 1051.5) < 1e-6);

    // one fixed base atom is a third of the full assignment sum
    auto te_fixed = te_three_body_coefficient(sys, AssignmentSum::fixed_base);
    auto tm_fixed = tm_three_body_coefficient(sys, AssignmentSum::fixed_base);
    CHECK(rel(te.value, 3 * te_fixed.value) < 1e-12);
    CHECK(rel(te_fixed.value + tm_fixed.value, 358.0) < 1e-6);
}

TEST_CASE("three-body worldline coefficients: equilateral triangle") {
    const auto sys = triangle();
    auto te = te_three_body_coefficient(sys);
    auto tm = tm_three_body_coefficient(sys);
    // frozen converged values, 80/243 and -2951/486
    CHECK(rel(te.value, 80.0 / 243) < 1e-7);
    CHECK(rel(tm.value, -2951.0 / 486) < 1e-7);
    const double fixed_sum = (te.value + tm.value) / 3;
    CHECK(rel(fixed_sum, -2791.0 / 1458) < 1e-7);
}

TEST_CASE("analytic proper-time integration as an oracle") {
    // int dT T^{-1-nu} e^{-Q/T} = Gamma(nu) Q^{-nu}; the remaining simplex
    // integral is done directly on the loop form of the chain.
    const auto sys = AtomSystem::from_positions({Vec3(0.1, 0, 0), Vec3(0.9, 0.3, 0), Vec3(0.2, 0.8, 0.4)});
    const int d = 3, D = 4, k = 3;
    const double nu = D / 2.0 + (k - 1) * d / 2.0;
    double total = 0.0, base_zero = 0.0;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
        auto f = [&](std::span<const double> tau) {
            const double s[3] = {tau[0], tau[1] - tau[0], 1.0 - tau[1]};
            if (!(s[0] > 0 && s[1] > 0 && s[2] > 0)) return 0.0;
            double Q = 0.0, log_norm = -(k - 1) * d / 2.0 * std::log(2 * pi);
            for (int j = 0; j < 3; ++j) {
                Q += (sys.positions[p[(j + 1) % 3]] - sys.positions[p[j]]).squaredNorm() / (2 * s[j]);
                log_norm -= d / 2.0 * std::log(s[j]);
            }
            return std::exp(log_norm + std::lgamma(nu) - nu * std::log(Q));
        };
        const double part =
            integrate_ordered_simplex(f, 3, 1.0, QuadratureSpec::uniform(2, AxisRule::double_exponential, 16, 1e-10, 7))
                .value;
        total += part;
        if (p[0] == 0) base_zero += part;
    }
    // a closed loop does not care which atom hosts x(0)
    CHECK(rel(3 * base_zero, total) < 1e-8);
    const double fixed = te_three_body_coefficient(sys, AssignmentSum::fixed_base).value;
    const double prefactor = 15.0 / (48 * std::pow(2 * pi, 2)) * std::pow(4 * pi, 3) * pi;
    CHECK(rel(te_three_body_coefficient(sys).value, prefactor * total) < 1e-7);
    CHECK(rel(fixed, prefactor * base_zero) < 1e-7);
}

TEST_CASE("three-body worldline invariances") {
    std::mt19937_64 rng(5);
    const auto sys = AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(0.8, 0.1, 0), Vec3(0.3, 0.7, 0.2)});
    const double te = te_three_body_coefficient(sys).value;
    const double tm = tm_three_body_coefficient(sys).value;

    auto relabeled = AtomSystem::from_positions({sys.positions[2], sys.positions[0], sys.positions[1]});
    CHECK(rel(te_three_body_coefficient(relabeled).value, te) < 1e-10);
    CHECK(rel(tm_three_body_coefficient(relabeled).value, tm) < 1e-10);

    auto moved = rigid_motion(sys, random_rotation(rng), random_point(rng, 3.0));
    CHECK(rel(te_three_body_coefficient(moved).value, te) < 1e-7);
    CHECK(rel(tm_three_body_coefficient(moved).value, tm) < 1e-6);

    auto scaled = sys;
    for (auto& p : scaled.positions) p *= 2.0;
    CHECK(rel(te_three_body_coefficient(scaled).value * 1024.0, te) < 1e-7);

    CHECK_THROWS_AS(te_three_body_coefficient(AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(1, 0, 0)})),
                    InvalidGeometry);
    CHECK_THROWS_AS(
        te_three_body_coefficient(AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)})),
        InvalidGeometry);
}
