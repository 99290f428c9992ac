#include "casimir/green_tensor.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <vector>

namespace casimir::green {

namespace {

constexpr double pi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Closed-form dot products between frame vectors.  k_rho > 0 is checked by
// the callers through unit_vectors-compatible validation.
// ---------------------------------------------------------------------------

void require_off_axis(const WaveVector& k) {
    if (!(k.k_rho() > 0.0))
        throw OnAxisSingularity("TE unit vector is undefined for k_rho = 0");
    if (std::abs(k.k) == 0.0) throw DomainError("TM unit vector is undefined for k = 0");
}

cplx dot_ee(const WaveVector& a, const WaveVector& b) {
    return (a.kx * b.kx + a.ky * b.ky) / (a.k_rho() * b.k_rho());
}

// e(a) . h(b)
cplx dot_eh(const WaveVector& a, const WaveVector& b) {
    return -b.kz / (b.k * a.k_rho() * b.k_rho()) * (a.ky * b.kx - a.kx * b.ky);
}

cplx dot_hh(const WaveVector& a, const WaveVector& b) {
    const double ra = a.k_rho(), rb = b.k_rho();
    return (a.kz * b.kz * (a.kx * b.kx + a.ky * b.ky) + ra * ra * rb * rb) / (a.k * b.k * ra * rb);
}

cplx dot(const WaveVector& a, Pol pa, const WaveVector& b, Pol pb) {
    if (pa == Pol::e && pb == Pol::e) return dot_ee(a, b);
    if (pa == Pol::h && pb == Pol::h) return dot_hh(a, b);
    if (pa == Pol::e) return dot_eh(a, b);
    return dot_eh(b, a);
}

std::pair<Pol, Pol> split(PairTrace which) {
    switch (which) {
    case PairTrace::ee: return {Pol::e, Pol::e};
    case PairTrace::hh: return {Pol::h, Pol::h};
    case PairTrace::he: return {Pol::h, Pol::e};
    case PairTrace::eh: return {Pol::e, Pol::h};
    }
    return {Pol::e, Pol::e};
}

const Mat3c& pick(const ProjectorPair& p, Pol pol) { return pol == Pol::e ? p.A_e : p.A_h; }

// ---------------------------------------------------------------------------
// Azimuthally integrated traces as sums of separable products
//   coef * s^s_power * prod_j factor_j(k_rho_j)
// ---------------------------------------------------------------------------

enum class Factor { one, kappa2, krho2 };

template <std::size_t N>
struct SeparableTerm {
    double coef;
    int s_power;
    std::array<Factor, N> factors;
};

std::vector<SeparableTerm<2>> pair_expansion(PairTrace which) {
    using F = Factor;
    switch (which) {
    case PairTrace::ee: return {{2 * pi * pi, 0, {F::one, F::one}}};
    case PairTrace::hh:
        return {{4 * pi * pi, -4, {F::krho2, F::krho2}}, {2 * pi * pi, -4, {F::kappa2, F::kappa2}}};
    case PairTrace::he: return {{2 * pi * pi, -2, {F::kappa2, F::one}}};
    case PairTrace::eh: return {{2 * pi * pi, -2, {F::one, F::kappa2}}};
    }
    return {};
}

std::vector<SeparableTerm<3>> triple_expansion(std::array<Pol, 3> which) {
    using F = Factor;
    const double c = 2 * pi * pi * pi;
    const int nh = static_cast<int>(std::count(which.begin(), which.end(), Pol::h));
    if (nh == 3)
        return {{-8 * pi * pi * pi, -6, {F::krho2, F::krho2, F::krho2}},
                {c, -6, {F::kappa2, F::kappa2, F::kappa2}}};
    SeparableTerm<3> t{c, -2 * nh, {F::one, F::one, F::one}};
    for (std::size_t j = 0; j < 3; ++j)
        if (which[j] == Pol::h) t.factors[j] = F::kappa2;
    return {t};
}

double factor_value(Factor f, double s, double k_rho) {
    switch (f) {
    case Factor::one: return 1.0;
    case Factor::kappa2: return s * s + k_rho * k_rho;
    case Factor::krho2: return k_rho * k_rho;
    }
    return 0.0;
}

template <std::size_t N>
double eval_expansion(const std::vector<SeparableTerm<N>>& terms, double s,
                      const std::array<double, N>& k_rho) {
    double total = 0.0;
    for (const auto& t : terms) {
        double v = t.coef * std::pow(s, t.s_power);
        for (std::size_t j = 0; j < N; ++j) v *= factor_value(t.factors[j], s, k_rho[j]);
        total += v;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Plane-wave s integral.  Each propagator of length z contributes
//   e^{-s z} * int_0^inf dk (k / kappa) factor(k) e^{-(kappa - s) z}
// and the outer integrand is C s^{2n} sum_terms coef s^p prod_j inner_j.
// ---------------------------------------------------------------------------

template <std::size_t N>
struct PlaneWaveProblem {
    std::vector<SeparableTerm<N>> terms;
    std::array<double, N> lengths;
    double prefactor;
};

template <std::size_t N>
IntegralEstimate integrate_plane_wave(const PlaneWaveProblem<N>& prob, const QuadratureSpec& spec) {
    spec.validate(N + 1);
    const AxisSpec k_axis = spec.axes[1];
    const double inner_tol = std::max(spec.rel_tol * 1e-2, 1e-13);
    const int inner_levels = spec.max_levels + 2;
    double worst_inner = 0.0;

    // With q = kappa - s the measure dk k / kappa becomes dq, which removes
    // the kink of k / kappa at k ~ s for small s.  x = q z puts the decay
    // rate at 1 for every propagator length.
    auto inner = [&](Factor f, double s, double z) {
        auto est = integrate_1d(
            [&](double x) {
                const double q = x / z;
                const double kappa = s + q;
                const double phi = f == Factor::one ? 1.0 : f == Factor::kappa2 ? kappa * kappa : q * (q + 2 * s);
                return phi * std::exp(-x) / z;
            },
            0.0, std::numeric_limits<double>::infinity(), k_axis, inner_tol, inner_levels);
        if (est.value != 0.0) worst_inner = std::max(worst_inner, est.error_estimate / std::abs(est.value));
        return est.value;
    };

    QuadratureSpec outer;
    outer.axes = {spec.axes[0]};
    outer.rel_tol = spec.rel_tol;
    outer.abs_tol = spec.abs_tol;
    outer.max_levels = spec.max_levels;

    double zsum = 0.0;
    for (double z : prob.lengths) zsum += z;

    auto integrand = [&](std::span<const double> x) {
        const double s = x[0];
        // inner integrals per (factor, propagator), computed on demand
        std::array<std::array<double, 3>, N> cache;
        std::array<std::array<bool, 3>, N> have{};
        double total = 0.0;
        for (const auto& t : prob.terms) {
            double v = t.coef * std::pow(s, 2 * static_cast<int>(N) + t.s_power);
            for (std::size_t j = 0; j < N; ++j) {
                const auto fi = static_cast<std::size_t>(t.factors[j]);
                if (!have[j][fi]) {
                    cache[j][fi] = inner(t.factors[j], s, prob.lengths[j]);
                    have[j][fi] = true;
                }
                v *= cache[j][fi];
            }
            total += v;
        }
        return prob.prefactor * total * std::exp(-s * zsum);
    };

    auto est = integrate_semi_infinite(integrand, outer);
    est.error_estimate += std::abs(est.value) * N * worst_inner;
    return est;
}

}  // namespace

// ============================================================================
// Wave vectors and projectors
// ============================================================================

double EuclideanWaveVector::k_rho() const { return std::hypot(kx, ky); }
double EuclideanWaveVector::kappa() const { return std::sqrt(s * s + kx * kx + ky * ky); }

WaveVector WaveVector::real(double kx, double ky, double kz) {
    return {kx, ky, kz, std::sqrt(kx * kx + ky * ky + kz * kz)};
}

WaveVector WaveVector::euclidean(const EuclideanWaveVector& q) {
    if (q.s < 0.0) throw DomainError("imaginary frequency s must be non-negative");
    return {q.kx, q.ky, cplx(0.0, q.kappa()), cplx(0.0, q.s)};
}

double WaveVector::k_rho() const { return std::hypot(kx.real(), ky.real()); }

UnitVectors unit_vectors(const WaveVector& k) {
    require_off_axis(k);
    const double kr = k.k_rho();
    UnitVectors u;
    u.e_hat << k.ky / kr, -k.kx / kr, 0.0;
    u.h_hat << -k.kz * k.kx / (k.k * kr), -k.kz * k.ky / (k.k * kr), kr / k.k;
    return u;
}

ProjectorPair projectors(const WaveVector& k) {
    const auto u = unit_vectors(k);
    return {u.e_hat * u.e_hat.transpose(), u.h_hat * u.h_hat.transpose()};
}

double pair_trace(const WaveVector& k, const WaveVector& kp, PairTrace which) {
    require_off_axis(k);
    require_off_axis(kp);
    const auto [a, b] = split(which);
    const cplx d = dot(k, a, kp, b);
    return (d * d).real();
}

cplx pair_trace_direct(const ProjectorPair& a, const ProjectorPair& b, PairTrace which) {
    const auto [pa, pb] = split(which);
    return (pick(a, pa) * pick(b, pb).transpose()).trace();
}

double triple_trace(const WaveVector& k, const WaveVector& kp, const WaveVector& kpp,
                    std::array<Pol, 3> which) {
    require_off_axis(k);
    require_off_axis(kp);
    require_off_axis(kpp);
    const cplx t = dot(k, which[0], kp, which[1]) * dot(kp, which[1], kpp, which[2]) *
                   dot(kpp, which[2], k, which[0]);
    return t.real();
}

cplx triple_trace_direct(const ProjectorPair& a, const ProjectorPair& b, const ProjectorPair& c,
                         std::array<Pol, 3> which) {
    return (pick(a, which[0]) * pick(b, which[1]) * pick(c, which[2])).trace();
}

double angular_pair_trace(PairTrace which, double s, double k_rho, double kp_rho) {
    if (!(s > 0.0)) throw DomainError("angular traces need s > 0");
    return eval_expansion(pair_expansion(which), s, std::array<double, 2>{k_rho, kp_rho});
}

double angular_triple_trace(std::array<Pol, 3> which, double s, double k_rho, double kp_rho,
                            double kpp_rho) {
    if (!(s > 0.0)) throw DomainError("angular traces need s > 0");
    return eval_expansion(triple_expansion(which), s, std::array<double, 3>{k_rho, kp_rho, kpp_rho});
}

// ============================================================================
// Plane-wave coefficients
// ============================================================================

QuadratureSpec default_two_body_spec() {
    return QuadratureSpec::uniform(3, AxisRule::exp_transform, 32, 1e-10, 5);
}

QuadratureSpec default_three_body_spec() {
    return QuadratureSpec::uniform(4, AxisRule::exp_transform, 32, 1e-10, 5);
}

CoefficientResult two_body_coefficient(Mode mode, const QuadratureSpec& spec) {
    PlaneWaveProblem<2> prob;
    prob.lengths = {1.0, 1.0};
    // V = -1/(2 pi) int ds Tr[G12 G21], G = -1/(2 pi) int d^2k (s^2/kappa) P e^{-kappa z}
    prob.prefactor = -1.0 / (8 * pi * pi * pi);
    auto add = [&](PairTrace w) {
        for (const auto& t : pair_expansion(w)) prob.terms.push_back(t);
    };
    switch (mode) {
    case Mode::TE: add(PairTrace::ee); break;
    case Mode::TM: add(PairTrace::hh); break;
    case Mode::cross_TE_TM:
        add(PairTrace::he);
        add(PairTrace::eh);
        break;
    case Mode::total:
        for (auto w : {PairTrace::ee, PairTrace::hh, PairTrace::he, PairTrace::eh}) add(w);
        break;
    }
    const auto est = integrate_plane_wave(prob, spec);
    return {est.value, est.error_estimate, Method::green_tensor_planewave, mode, 2, Convention::two_body};
}

std::array<Pol, 3> term_polarizations(ThreeBodyTerm term) {
    using P = Pol;
    switch (term) {
    case ThreeBodyTerm::eee: return {P::e, P::e, P::e};
    case ThreeBodyTerm::hhh: return {P::h, P::h, P::h};
    case ThreeBodyTerm::mix1: return {P::h, P::e, P::e};
    case ThreeBodyTerm::mix2: return {P::e, P::h, P::e};
    case ThreeBodyTerm::mix3: return {P::e, P::e, P::h};
    case ThreeBodyTerm::mix4: return {P::h, P::h, P::e};
    case ThreeBodyTerm::mix5: return {P::h, P::e, P::h};
    case ThreeBodyTerm::mix6: return {P::e, P::h, P::h};
    default: throw DomainError("half_sum and total are not single-trace terms");
    }
}

std::string_view to_string(ThreeBodyTerm term) {
    switch (term) {
    case ThreeBodyTerm::eee: return "eee";
    case ThreeBodyTerm::hhh: return "hhh";
    case ThreeBodyTerm::mix1: return "mix1";
    case ThreeBodyTerm::mix2: return "mix2";
    case ThreeBodyTerm::mix3: return "mix3";
    case ThreeBodyTerm::mix4: return "mix4";
    case ThreeBodyTerm::mix5: return "mix5";
    case ThreeBodyTerm::mix6: return "mix6";
    case ThreeBodyTerm::half_sum: return "half_sum";
    case ThreeBodyTerm::total: return "total";
    }
    return "?";
}

CoefficientResult three_body_collinear_coefficient(ThreeBodyTerm term, const QuadratureSpec& spec,
                                                   std::array<double, 3> lengths) {
    for (double z : lengths)
        if (!(z > 0.0)) throw InvalidGeometry("collinear propagation lengths must be positive");

    PlaneWaveProblem<3> prob;
    prob.lengths = lengths;
    // value = -(1/2) int ds Tr[G12 G23 G31] in units hbar c a^3 / (pi R^10)
    prob.prefactor = 1.0 / (16 * pi * pi * pi);

    Mode mode = Mode::total;
    double multiplier = 1.0;
    if (term == ThreeBodyTerm::half_sum || term == ThreeBodyTerm::total) {
        for (auto t : {ThreeBodyTerm::eee, ThreeBodyTerm::hhh, ThreeBodyTerm::mix1, ThreeBodyTerm::mix2,
                       ThreeBodyTerm::mix3, ThreeBodyTerm::mix4, ThreeBodyTerm::mix5, ThreeBodyTerm::mix6})
            for (const auto& st : triple_expansion(term_polarizations(t))) prob.terms.push_back(st);
        if (term == ThreeBodyTerm::total) multiplier = 2.0;
    } else {
        prob.terms = triple_expansion(term_polarizations(term));
        mode = term == ThreeBodyTerm::eee   ? Mode::TE
               : term == ThreeBodyTerm::hhh ? Mode::TM
                                            : Mode::cross_TE_TM;
    }
    const auto est = integrate_plane_wave(prob, spec);
    return {multiplier * est.value, multiplier * est.error_estimate, Method::green_tensor_planewave,
            mode, 3, Convention::three_body};
}

// ============================================================================
// Position-space oracle
// ============================================================================

Mat3 position_space_green(const Vec3& r1, const Vec3& r2, double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("imaginary frequency s must be non-negative");
    const Vec3 d = r1 - r2;
    const double r = d.norm();
    if (!(r > 0.0)) throw InvalidGeometry("Green tensor is singular at coincident points");
    const Vec3 n = d / r;
    const double u = s * r;
    const double decay = std::exp(-u) / (r * r * r);
    return decay * ((3.0 + 3.0 * u + u * u) * (n * n.transpose()) - (1.0 + u + u * u) * Mat3::Identity());
}

QuadratureSpec default_oracle_spec() {
    return QuadratureSpec::uniform(1, AxisRule::double_exponential, 32, 1e-12, 6);
}

CoefficientResult two_body_total_oracle(const Vec3& r1, const Vec3& r2, const QuadratureSpec& spec) {
    const double r = (r1 - r2).norm();
    if (!(r > 0.0)) throw InvalidGeometry("two-body oracle needs distinct atoms");
    auto est = integrate_semi_infinite(
        [&](std::span<const double> x) {
            const Mat3 g12 = position_space_green(r1, r2, x[0]);
            const Mat3 g21 = position_space_green(r2, r1, x[0]);
            return (g12 * g21).trace();
        },
        spec);
    const double scale = -std::pow(r, 7) / (2 * pi);
    return {scale * est.value, std::abs(scale) * est.error_estimate, Method::green_tensor_oracle,
            Mode::total, 2, Convention::two_body};
}

CoefficientResult three_body_total_general(const AtomSystem& system, const QuadratureSpec& spec) {
    system.validate();
    if (system.size() != 3) throw InvalidGeometry("three-body total needs exactly three atoms");
    const Vec3& a = system.positions[0];
    const Vec3& b = system.positions[1];
    const Vec3& c = system.positions[2];
    auto est = integrate_semi_infinite(
        [&](std::span<const double> x) {
            const double s = x[0];
            const Mat3 g12 = position_space_green(a, b, s), g21 = position_space_green(b, a, s);
            const Mat3 g23 = position_space_green(b, c, s), g32 = position_space_green(c, b, s);
            const Mat3 g31 = position_space_green(c, a, s), g13 = position_space_green(a, c, s);
            const double t1 = (g12 * g23 * g31).trace();
            const double t2 = (g13 * g21 * g32).trace();
            const double scale = std::max({std::abs(t1), std::abs(t2), 1e-300});
            if (std::abs(t1 - t2) > 1e-9 * scale)
                throw Error("three-body trace terms disagree; Green tensor lost its symmetry");
            return t1;
        },
        spec);
    // -(1/2) int ds (T1 + T2) with T1 = T2, in units hbar c a^3 / (pi R^10)
    return {-est.value, est.error_estimate, Method::green_tensor_oracle, Mode::total, 3,
            Convention::three_body};
}

}  // namespace casimir::green
