#include "casimir/sweep.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "casimir/green_tensor.hpp"
#include "casimir/worldline.hpp"

namespace casimir::sweep {

std::string_view to_string(SweepMethod m) {
    switch (m) {
    case SweepMethod::worldline_sum: return "worldline";
    case SweepMethod::green_tensor: return "green-tensor";
    }
    return "?";
}

std::vector<double> SweepConfig::default_grid(int n) {
    if (n < 2) throw DomainError("sweep grid needs at least two points");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = -1.0 + 2.0 * i / (n - 1);
    g.back() = 1.0;
    return g;
}

void SweepConfig::validate() const {
    if (!(b_over_c > 0.0) || !std::isfinite(b_over_c)) throw DomainError("b_over_c must be positive");
    if (cos_theta.empty()) throw DomainError("empty cos_theta grid");
    for (double c : cos_theta)
        if (!(c >= -1.0 && c <= 1.0)) throw DomainError("cos_theta outside [-1, 1]");
    if (methods.empty()) throw DomainError("sweep needs at least one method");
    if (!(exclusion_radius >= 0.0)) throw DomainError("negative exclusion radius");
}

AtomSystem build_geometry(double b_over_c, double cos_theta) {
    if (!(b_over_c > 0.0) || !std::isfinite(b_over_c)) throw DomainError("b_over_c must be positive");
    if (!(std::abs(cos_theta) <= 1.0)) throw DomainError("|cos_theta| must not exceed 1");
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    auto sys = AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(b_over_c, 0, 0), Vec3(cos_theta, sin_theta, 0)});
    sys.validate();
    return sys;
}

namespace {

SweepRow evaluate(const SweepConfig& config, SweepMethod method, double cos_theta) {
    SweepRow row;
    row.cos_theta = cos_theta;
    row.b_over_c = config.b_over_c;
    row.method = method;
    try {
        const auto sys = build_geometry(config.b_over_c, cos_theta);
        if (method == SweepMethod::green_tensor) {
            const auto spec = config.green_spec.axes.empty() ? green::default_oracle_spec() : config.green_spec;
            const auto r = green::three_body_total_general(sys, spec);
            row.value = r.value;
            row.error_estimate = r.error_estimate;
        } else {
            const auto spec =
                config.worldline_spec.axes.empty() ? worldline::default_three_body_spec() : config.worldline_spec;
            const auto te = worldline::te_three_body_coefficient(sys, worldline::AssignmentSum::fixed_base, spec);
            double partial_te = te.value;
            try {
                const auto tm = worldline::tm_three_body_coefficient(sys, worldline::AssignmentSum::fixed_base, spec);
                row.value = te.value + tm.value;
                row.error_estimate = te.error_estimate + tm.error_estimate;
            } catch (const ConvergenceError& e) {
                throw ConvergenceError(e.what(), {partial_te + e.best().value, e.best().error_estimate, 0});
            }
        }
    } catch (const ConvergenceError& e) {
        row.ok = false;
        row.message = e.what();
        row.partial = e.best().value;
    } catch (const std::exception& e) {
        row.ok = false;
        row.message = e.what();
    }
    if (row.ok && !std::isfinite(row.value)) {
        row.ok = false;
        row.message = "non-finite coefficient";
    }
    if (!row.ok) {
        row.value = std::numeric_limits<double>::quiet_NaN();
        row.error_estimate = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

double min_separation(double b_over_c, double cos_theta) {
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double bc = std::hypot(cos_theta - b_over_c, sin_theta);
    return std::min({b_over_c, 1.0, bc});
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
    config.validate();
    std::vector<SweepRow> rows;
    for (double c : config.cos_theta) {
        if (min_separation(config.b_over_c, c) < config.exclusion_radius) continue;
        for (auto m : config.methods) rows.push_back(evaluate(config, m, c));
    }
    return rows;
}

std::vector<std::size_t> continuity_flags(const std::vector<SweepRow>& rows, SweepMethod method) {
    std::vector<const SweepRow*> curve;
    for (const auto& r : rows)
        if (r.method == method && r.ok) curve.push_back(&r);
    std::vector<std::size_t> flags;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double a = curve[i - 1]->value, b = curve[i]->value;
        if (a * b >= 0.0) continue;
        const double h = curve[i]->cos_theta - curve[i - 1]->cos_theta;
        // largest slope seen on either side
        double slope = 0.0;
        if (i >= 2) slope = std::max(slope, std::abs(a - curve[i - 2]->value) /
                                                (curve[i - 1]->cos_theta - curve[i - 2]->cos_theta));
        if (i + 1 < curve.size())
            slope = std::max(slope, std::abs(curve[i + 1]->value - b) / (curve[i + 1]->cos_theta - curve[i]->cos_theta));
        if (std::abs(b - a) > 2.0 * slope * std::abs(h)) flags.push_back(i);
    }
    return flags;
}

}  // namespace casimir::sweep
