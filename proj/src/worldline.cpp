#include "casimir/worldline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

namespace casimir::worldline {

namespace {

constexpr double pi = std::numbers::pi;

double gaussian_log_density(double variance, double dist2, int d) {
    return -0.5 * d * std::log(2 * pi * variance) - dist2 / (2 * variance);
}

void require_open(double tau, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("total proper time must be positive");
    if (!(tau > 0.0 && tau < T)) throw DomainError("pinning time must lie strictly inside (0, T)");
}

// ---------------------------------------------------------------------------
// Wick expansion of prod_{i in S} Laplacian_i exp(-q).
//
// Each Laplacian contributes two derivative slots that share a spatial
// index.  A term is a partial pairing of the 2|S| slots: paired slots give
// -L_ab, unpaired ones a gradient component g.  Following sibling and
// partner links splits the slots into open strings, which end on two
// gradients (g_a . g_b), and closed loops, which trace to d.
// ---------------------------------------------------------------------------

struct WickPattern {
    int pairs = 0;
    std::vector<std::pair<int, int>> pair_slots;  // subset positions
    std::vector<std::pair<int, int>> string_ends;
    int loops = 0;
};

void enumerate_matchings(std::vector<int>& free_slots, std::vector<int>& partner,
                         std::vector<std::vector<int>>& out) {
    if (free_slots.empty()) {
        out.push_back(partner);
        return;
    }
    const int a = free_slots.back();
    free_slots.pop_back();
    // a stays unpaired
    enumerate_matchings(free_slots, partner, out);
    for (std::size_t i = 0; i < free_slots.size(); ++i) {
        const int b = free_slots[i];
        free_slots.erase(free_slots.begin() + static_cast<std::ptrdiff_t>(i));
        partner[a] = b;
        partner[b] = a;
        enumerate_matchings(free_slots, partner, out);
        partner[a] = partner[b] = -1;
        free_slots.insert(free_slots.begin() + static_cast<std::ptrdiff_t>(i), b);
    }
    free_slots.push_back(a);
}

std::vector<WickPattern> build_patterns(int n) {
    const int slots = 2 * n;
    std::vector<int> free_slots(slots);
    std::iota(free_slots.begin(), free_slots.end(), 0);
    std::vector<int> partner(slots, -1);
    std::vector<std::vector<int>> matchings;
    enumerate_matchings(free_slots, partner, matchings);

    auto atom = [](int slot) { return slot / 2; };
    auto sibling = [](int slot) { return slot ^ 1; };

    std::vector<WickPattern> out;
    out.reserve(matchings.size());
    for (const auto& m : matchings) {
        WickPattern p;
        for (int s = 0; s < slots; ++s)
            if (m[s] > s) p.pair_slots.emplace_back(atom(s), atom(m[s]));
        p.pairs = static_cast<int>(p.pair_slots.size());
        std::vector<bool> seen(slots, false);
        for (int s = 0; s < slots; ++s) {
            if (seen[s] || m[s] >= 0) continue;
            int cur = s;
            seen[cur] = true;
            while (true) {
                const int nx = sibling(cur);
                seen[nx] = true;
                if (m[nx] < 0) {
                    p.string_ends.emplace_back(atom(s), atom(nx));
                    break;
                }
                cur = m[nx];
                seen[cur] = true;
            }
        }
        for (int s = 0; s < slots; ++s) {
            if (seen[s]) continue;
            int cur = s;
            do {
                seen[cur] = true;
                const int nx = sibling(cur);
                seen[nx] = true;
                cur = m[nx];
            } while (cur != s);
            ++p.loops;
        }
        out.push_back(std::move(p));
    }
    return out;
}

const std::vector<WickPattern>& wick_patterns(int n) {
    static std::mutex mutex;
    static std::map<int, std::vector<WickPattern>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_patterns(n)).first;
    return it->second;
}

// Sums of the Wick terms grouped by the number of pairs p (index 0..|S|),
// written to out.  G is the Gram matrix of the gradients.  The density
// factor itself is not included.
void wick_sums(const MatX& L, const MatX& G, std::span<const int> subset, int d, double* out) {
    const int n = static_cast<int>(subset.size());
    std::fill(out, out + n + 1, 0.0);
    for (const auto& p : wick_patterns(n)) {
        double v = (p.pairs % 2) ? -1.0 : 1.0;
        for (auto [a, b] : p.pair_slots) v *= L(subset[a], subset[b]);
        for (auto [a, b] : p.string_ends) v *= G(subset[a], subset[b]);
        for (int l = 0; l < p.loops; ++l) v *= d;
        out[p.pairs] += v;
    }
}

MatX gram(std::span<const Vec3> g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    MatX G(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) G(a, b) = G(b, a) = g[a].dot(g[b]);
    return G;
}

std::vector<Vec3> gradients(const MatX& L, std::span<const Vec3> x) {
    std::vector<Vec3> g(x.size(), Vec3::Zero());
    for (std::size_t a = 0; a < x.size(); ++a)
        for (std::size_t b = 0; b < x.size(); ++b) g[a] += L(a, b) * x[b];
    return g;
}

std::vector<int> bits_to_subset(unsigned mask, int k) {
    std::vector<int> s;
    for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) s.push_back(i);
    return s;
}

double expansion_weight(int k, int size, double T) {
    return double_factorial_odd(k - size) * std::pow(-0.5 * T, size);
}

double order_prefactor(int k, int D) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;  // (-1)^{k+1}
    return sign / (std::ldexp(1.0, k + 1) * k * std::pow(2 * pi, 0.5 * D));
}

std::vector<Vec3> path_positions(const AtomSystem& system, std::span<const int> assignment) {
    std::vector<Vec3> x;
    x.reserve(assignment.size());
    for (int a : assignment) {
        if (a < 0 || static_cast<std::size_t>(a) >= system.size())
            throw DomainError("assignment refers to a missing atom");
        x.push_back(system.positions[a]);
    }
    return x;
}

void check_times(std::span<const double> times, int k, double T) {
    if (static_cast<int>(times.size()) != k - 1) throw DomainError("order k needs k - 1 pinning times");
    double prev = 0.0;
    for (double t : times) {
        require_open(t, T);
        if (!(t > prev)) throw DomainError("pinning times must be strictly increasing");
        prev = t;
    }
}

std::vector<std::vector<int>> assignments(std::size_t n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::vector<bool> used(n, false);
    auto rec = [&](auto&& self) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = true;
            cur.push_back(static_cast<int>(i));
            self(self);
            cur.pop_back();
            used[i] = false;
        }
    };
    rec(rec);
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature engine.  For fixed time fractions sigma the integrand in T is
// sum_m A_m T^{-1-nu_m} exp(-Q / T) with nu_m = D/2 + (k-1) d/2 + m.  Each
// assignment is integrated with its own substitution T = Q w, which turns
// the T integrand into the same bump w^{-1-nu_m} exp(-1/w) at every simplex
// node.  The tensor rule over (w, simplex) therefore factorizes into a 1D
// rule in w times a rule over the simplex.
// ---------------------------------------------------------------------------

class SimplexSlice {
public:
    SimplexSlice(const AtomSystem& system, int k, Mode mode, int D)
        : k_(k), d_(D - 1), tm_(mode == Mode::TM), orders_(assignments(system.size(), k)) {
        for (const auto& a : orders_) paths_.push_back(path_positions(system, a));
        nu0_ = 0.5 * D + 0.5 * (k_ - 1) * d_;
        times_.resize(k_ - 1);
        for (unsigned mask = 0; mask < (1u << k_); ++mask) {
            subsets_.push_back(bits_to_subset(mask, k_));
            weights_.push_back(expansion_weight(k_, static_cast<int>(subsets_.back().size()), 1.0));
        }
    }

    double nu(int m) const { return nu0_ + m; }

    /// A_m Q^{-nu_m} summed over assignments, times the simplex Jacobian.
    /// Returns false on the simplex boundary, where the integrand vanishes.
    bool amplitudes(std::span<const double> v, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double jac = map_ordered_simplex(v, 1.0, times_);
        double prev = 0.0;
        for (double t : times_) {
            if (!(t > prev) || !(t < 1.0)) return false;
            prev = t;
        }
        const auto chain = GaussianChainDensity::conditioned(times_, 1.0, d_);
        const MatX L = chain.precision();
        const double log_norm = chain.log_normalization();
        std::vector<double> coeff(k_ + 1), sums(k_ + 1);
        for (const auto& x : paths_) {
            const double Q = chain.quadratic_form(x);
            std::fill(coeff.begin(), coeff.end(), 0.0);
            if (!tm_) {
                coeff[0] = double_factorial_odd(k_);
            } else {
                const MatX G = gram(gradients(L, x));
                for (std::size_t s = 0; s < subsets_.size(); ++s) {
                    const int size = static_cast<int>(subsets_[s].size());
                    wick_sums(L, G, subsets_[s], d_, sums.data());
                    for (int p = 0; p <= size; ++p) coeff[size - p] += weights_[s] * sums[p];
                }
            }
            const double lq = std::log(Q);
            for (int m = 0; m <= k_; ++m)
                if (coeff[m] != 0.0) out[m] += jac * coeff[m] * std::exp(log_norm - nu(m) * lq);
        }
        return true;
    }

private:
    int k_, d_;
    bool tm_;
    std::vector<std::vector<int>> orders_;
    std::vector<std::vector<Vec3>> paths_;
    std::vector<std::vector<int>> subsets_;
    std::vector<double> weights_;
    double nu0_ = 0.0;
    std::vector<double> times_;
};

double convention_factor(int k) {
    // two_body: value = V (4 pi eps0)^2 r^7 / (hbar c a1 a2), taken at r = 1
    // three_body: value = pi V (4 pi eps0)^3 R^10 / (hbar c a1 a2 a3)
    const double eps = std::pow(4 * pi, k);  // 1/eps0^k = (4 pi)^k / (4 pi eps0)^k
    return k == 3 ? pi * eps : eps;
}

}  // namespace

// ============================================================================
// Bridge densities
// ============================================================================

void BridgePinning::validate() const {
    if (!(total_time > 0.0) || !std::isfinite(total_time))
        throw DomainError("total proper time must be positive");
    if (dim < 1) throw DomainError("spatial dimension must be positive");
    double prev = 0.0;
    for (const auto& p : pins) {
        if (!(p.tau > prev && p.tau < total_time))
            throw DomainError("pinning times must increase strictly inside (0, T)");
        prev = p.tau;
    }
}

double bridge_log_density(double tau, double T, const VecRef& start, const VecRef& target) {
    require_open(tau, T);
    if (start.size() != target.size()) throw DomainError("dimension mismatch");
    const double var = tau * (1.0 - tau / T);
    return gaussian_log_density(var, (target - start).squaredNorm(), static_cast<int>(start.size()));
}

double bridge_density(double tau, double T, const VecRef& start, const VecRef& target) {
    return std::exp(bridge_log_density(tau, T, start, target));
}

double conditional_density(double tau_new, const VecRef& r_new, double tau_prev, const VecRef& r_prev,
                           double T, const VecRef& base) {
    require_open(tau_new, T);
    require_open(tau_prev, T);
    if (tau_new == tau_prev) throw DomainError("conditioning times coincide");
    double var;
    VecX mean;
    if (tau_new > tau_prev) {
        const double tm = tau_new - tau_prev;
        const double T2 = T - tau_prev;
        var = tm * (1.0 - tm / T2);
        mean = r_prev * (1.0 - tm / T2) + base * (tm / T2);
    } else {
        // bridge from base at 0 to r_prev at tau_prev
        const double f = tau_new / tau_prev;
        var = tau_new * (1.0 - f);
        mean = base * (1.0 - f) + r_prev * f;
    }
    return std::exp(gaussian_log_density(var, (r_new - mean).squaredNorm(), static_cast<int>(r_new.size())));
}

// ============================================================================
// Gaussian chains
// ============================================================================

GaussianChainDensity GaussianChainDensity::conditioned(std::span<const double> times, double T, int dim,
                                                       std::span<const int> order) {
    const int pins = static_cast<int>(times.size());
    check_times(times, pins + 1, T);
    std::vector<int> seq(order.begin(), order.end());
    if (seq.empty()) {
        seq.resize(pins);
        std::iota(seq.begin(), seq.end(), 0);
    }
    {
        auto sorted = seq;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < pins; ++i)
            if (static_cast<int>(sorted.size()) != pins || sorted[i] != i)
                throw DomainError("conditioning order must be a permutation of the pins");
    }

    GaussianChainDensity c;
    c.atoms = pins + 1;
    c.dim = dim;
    std::vector<bool> known(pins, false);
    for (int p : seq) {
        const double tau = times[p];
        // nearest conditioned neighbours; the base sits at both ends
        double a = 0.0, b = T;
        int ia = 0, ib = 0;
        for (int q = p - 1; q >= 0; --q)
            if (known[q]) {
                a = times[q];
                ia = q + 1;
                break;
            }
        for (int q = p + 1; q < pins; ++q)
            if (known[q]) {
                b = times[q];
                ib = q + 1;
                break;
            }
        ChainFactor f;
        f.variance = (tau - a) * (b - tau) / (b - a);
        f.coeffs = VecX::Zero(c.atoms);
        f.coeffs[p + 1] = 1.0;
        f.coeffs[ia] -= (b - tau) / (b - a);
        f.coeffs[ib] -= (tau - a) / (b - a);
        c.factors.push_back(std::move(f));
        known[p] = true;
    }
    return c;
}

MatX GaussianChainDensity::precision() const {
    MatX L = MatX::Zero(atoms, atoms);
    for (const auto& f : factors) L += f.coeffs * f.coeffs.transpose() / f.variance;
    return L;
}

double GaussianChainDensity::log_normalization() const {
    double s = 0.0;
    for (const auto& f : factors) s -= 0.5 * dim * std::log(2 * pi * f.variance);
    return s;
}

double GaussianChainDensity::quadratic_form(std::span<const Vec3> x) const {
    if (static_cast<int>(x.size()) != atoms) throw DomainError("position count does not match chain");
    double q = 0.0;
    for (const auto& f : factors) {
        Vec3 r = Vec3::Zero();
        for (int i = 0; i < atoms; ++i) r += f.coeffs[i] * x[i];
        q += r.squaredNorm() / (2 * f.variance);
    }
    return q;
}

double GaussianChainDensity::log_value(std::span<const Vec3> x) const {
    return log_normalization() - quadratic_form(x);
}

double GaussianChainDensity::value(std::span<const Vec3> x) const { return std::exp(log_value(x)); }

double gaussian_laplacian(const GaussianChainDensity& chain, std::span<const Vec3> x,
                          std::span<const int> subset) {
    for (int i : subset)
        if (i < 0 || i >= chain.atoms) throw DomainError("Laplacian index outside the chain");
    const MatX L = chain.precision();
    const MatX G = gram(gradients(L, x));
    std::vector<double> sums(subset.size() + 1);
    wick_sums(L, G, subset, chain.dim, sums.data());
    double poly = 0.0;
    for (double s : sums) poly += s;
    return poly * chain.value(x);
}

std::vector<LaplacianTerm> laplacian_expansion(int k, double T) {
    if (k < 1) throw DomainError("expansion order must be at least 1");
    std::vector<LaplacianTerm> out;
    out.reserve(std::size_t{1} << k);
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
        auto subset = bits_to_subset(mask, k);
        const double w = expansion_weight(k, static_cast<int>(subset.size()), T);
        out.push_back({std::move(subset), w});
    }
    return out;
}

// ============================================================================
// Integrands
// ============================================================================

double n_body_te_integrand(const AtomSystem& system, int k, std::span<const int> assignment,
                           std::span<const double> times, double T, DimensionConfig dims) {
    dims.validate();
    if (static_cast<int>(assignment.size()) != k) throw DomainError("assignment length must equal k");
    check_times(times, k, T);
    const auto x = path_positions(system, assignment);
    const auto chain = GaussianChainDensity::conditioned(times, T, dims.spatial());
    return order_prefactor(k, dims.spacetime) * double_factorial_odd(k) *
           std::pow(T, -k - 0.5 * dims.spacetime) * chain.value(x);
}

double n_body_tm_integrand(const AtomSystem& system, int k, std::span<const int> assignment,
                           std::span<const double> times, double T, DimensionConfig dims,
                           std::optional<unsigned> only_subset) {
    dims.validate();
    if (static_cast<int>(assignment.size()) != k) throw DomainError("assignment length must equal k");
    check_times(times, k, T);
    const auto x = path_positions(system, assignment);
    const auto chain = GaussianChainDensity::conditioned(times, T, dims.spatial());
    double bracket = 0.0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
        if (only_subset && *only_subset != mask) continue;
        const auto subset = bits_to_subset(mask, k);
        bracket += expansion_weight(k, static_cast<int>(subset.size()), T) * gaussian_laplacian(chain, x, subset);
    }
    return order_prefactor(k, dims.spacetime) * std::pow(T, -k - 0.5 * dims.spacetime) * bracket;
}

double two_body_te_integrand(double u, double t, double separation) {
    if (!(separation > 0.0)) throw InvalidGeometry("separation must be positive");
    if (!(u > 0.0) || !(t > 0.0 && t < 1.0)) throw DomainError("need u > 0 and 0 < t < 1");
    const auto system = AtomSystem::from_positions({Vec3::Zero(), Vec3(0, 0, separation)});
    const double T = separation * separation * u;
    const double tau[1] = {t * T};
    double sum = 0.0;
    for (auto order : {std::array<int, 2>{0, 1}, std::array<int, 2>{1, 0}})
        sum += n_body_te_integrand(system, 2, order, tau, T);
    // dT dtau = r^2 T du dt
    return convention_factor(2) * std::pow(separation, 7) * separation * separation * T * sum;
}

// ============================================================================
// Coefficients
// ============================================================================

QuadratureSpec default_two_body_spec() {
    return QuadratureSpec::uniform(2, AxisRule::double_exponential, 16, 1e-9, 7);
}

QuadratureSpec default_three_body_spec() {
    return QuadratureSpec::uniform(3, AxisRule::double_exponential, 16, 1e-7, 6);
}

CoefficientResult n_body_coefficient(const AtomSystem& system, int k, Mode mode, AssignmentSum sum,
                                     const QuadratureSpec& spec) {
    system.validate();
    if (k != 2 && k != 3) throw DomainError("worldline coefficients are provided for k = 2 and k = 3");
    if (static_cast<int>(system.size()) != k)
        throw InvalidGeometry("the atom count must equal the interaction order");
    spec.validate(static_cast<std::size_t>(k));
    const Convention conv = k == 2 ? Convention::two_body : Convention::three_body;

    if (mode == Mode::cross_TE_TM) return {0.0, 0.0, Method::worldline, mode, k, conv};
    if (mode == Mode::total) {
        auto te = n_body_coefficient(system, k, Mode::TE, sum, spec);
        auto tm = n_body_coefficient(system, k, Mode::TM, sum, spec);
        return {te.value + tm.value, te.error_estimate + tm.error_estimate, Method::worldline, mode, k, conv};
    }

    const DimensionConfig dims;
    SimplexSlice slice(system, k, mode, dims.spacetime);

    // u axis: int_0^inf dw w^{-1-nu} e^{-1/w}, converged well below the
    // target so that its error does not feed the simplex refinement.
    std::vector<double> w_int(k + 1);
    double w_rel = 0.0;
    const double w_tol = std::max(spec.rel_tol * 1e-2, 1e-14);
    for (int m = 0; m <= k; ++m) {
        const double nu = slice.nu(m);
        const auto e = integrate_1d([nu](double w) { return std::exp(-(1.0 + nu) * std::log(w) - 1.0 / w); },
                                    0.0, std::numeric_limits<double>::infinity(), spec.axes[0], w_tol,
                                    spec.max_levels + 4);
        w_int[m] = e.value;
        w_rel = std::max(w_rel, e.error_estimate / std::abs(e.value));
    }

    QuadratureSpec simplex = spec;
    simplex.axes.erase(simplex.axes.begin());
    std::vector<double> lo(k - 1, 0.0), hi(k - 1, 1.0);
    std::vector<double> amp(k + 1);
    auto est = integrate_box(
        [&](std::span<const double> v) {
            if (!slice.amplitudes(v, amp)) return 0.0;
            double total = 0.0;
            for (int m = 0; m <= k; ++m) total += amp[m] * w_int[m];
            return total;
        },
        lo, hi, simplex);
    est.error_estimate += std::abs(est.value) * w_rel;

    double scale = order_prefactor(k, dims.spacetime) * convention_factor(k);
    if (sum == AssignmentSum::fixed_base) scale /= k;
    return {scale * est.value, std::abs(scale) * est.error_estimate, Method::worldline, mode, k, conv};
}

namespace {

CoefficientResult two_body(Mode mode, const QuadratureSpec& spec, double separation) {
    if (!(separation > 0.0) || !std::isfinite(separation))
        throw InvalidGeometry("separation must be positive");
    const auto system = AtomSystem::from_positions({Vec3::Zero(), Vec3(0, 0, separation)});
    auto r = n_body_coefficient(system, 2, mode, AssignmentSum::all, spec);
    const double s7 = std::pow(separation, 7);
    r.value *= s7;
    r.error_estimate *= s7;
    return r;
}

}  // namespace

CoefficientResult te_two_body_coefficient(const QuadratureSpec& spec, double separation) {
    return two_body(Mode::TE, spec, separation);
}

CoefficientResult tm_two_body_coefficient(const QuadratureSpec& spec, double separation) {
    return two_body(Mode::TM, spec, separation);
}

CoefficientResult te_three_body_coefficient(const AtomSystem& system, AssignmentSum sum,
                                            const QuadratureSpec& spec) {
    return n_body_coefficient(system, 3, Mode::TE, sum, spec);
}

CoefficientResult tm_three_body_coefficient(const AtomSystem& system, AssignmentSum sum,
                                            const QuadratureSpec& spec) {
    return n_body_coefficient(system, 3, Mode::TM, sum, spec);
}

}  // namespace casimir::worldline
