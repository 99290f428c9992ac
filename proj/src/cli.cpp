#include "casimir/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Geometry>

#include "CLI11.hpp"
#include "json.hpp"

#include "casimir/bridge_mc.hpp"
#include "casimir/green_tensor.hpp"
#include "casimir/sweep.hpp"
#include "casimir/worldline.hpp"

namespace casimir::cli {

namespace {

class HelpRequested : public Error {
public:
    using Error::Error;
};

const std::map<std::string, Command> command_names = {{"two-body", Command::two_body},
                                                      {"three-body", Command::three_body},
                                                      {"sweep", Command::sweep},
                                                      {"mc-validate", Command::mc_validate}};
const std::map<std::string, MethodChoice> method_names = {
    {"worldline", MethodChoice::worldline}, {"green-tensor", MethodChoice::green_tensor}, {"both", MethodChoice::both}};
const std::map<std::string, ModeChoice> mode_names = {{"te", ModeChoice::te},
                                                      {"tm", ModeChoice::tm},
                                                      {"cross", ModeChoice::cross},
                                                      {"total", ModeChoice::total},
                                                      {"all", ModeChoice::all}};
const std::map<std::string, Format> format_names = {{"csv", Format::csv}, {"json", Format::json}};
const std::map<std::string, Assignments> assignment_names = {{"fixed-base", Assignments::fixed_base},
                                                             {"all", Assignments::all}};

// Raw option values, filled by CLI11.
struct Raw {
    std::string method = "both", mode = "total", format = "csv", assignments = "fixed-base";
    std::string positions, output, config;
    std::optional<double> b_over_c, cos_theta, quad_tol;
    std::optional<int> quad_levels;
    int grid = 41;
    std::uint64_t seed = 42;
    std::int64_t paths = 100000;
};

template <class Map>
std::vector<std::string> keys(const Map& m) {
    std::vector<std::string> k;
    for (const auto& [name, _] : m) k.push_back(name);
    return k;
}

void build(CLI::App& app, Raw& raw) {
    app.require_subcommand(1);
    auto common = [&](CLI::App* sub) {
        sub->add_option("--method", raw.method, "worldline, green-tensor or both")
            ->check(CLI::IsMember(keys(method_names)));
        sub->add_option("--mode", raw.mode, "te, tm, cross, total or all")->check(CLI::IsMember(keys(mode_names)));
        sub->add_option("--format", raw.format, "csv or json")->check(CLI::IsMember(keys(format_names)));
        sub->add_option("--output", raw.output, "output file (default: standard output)");
        sub->add_option("--quad-tol", raw.quad_tol, "relative quadrature tolerance");
        sub->add_option("--quad-levels", raw.quad_levels, "maximum refinement levels");
        sub->add_option("--config", raw.config, "flat key = value file");
    };
    auto* two = app.add_subcommand("two-body", "two atoms at unit separation");
    common(two);
    auto* three = app.add_subcommand("three-body", "three atoms");
    common(three);
    three->add_option("--positions", raw.positions, "\"x,y,z;x,y,z;x,y,z\"");
    three->add_option("--b-over-c", raw.b_over_c, "planar geometry: B at (b, 0, 0)");
    three->add_option("--cos-theta", raw.cos_theta, "planar geometry: C at (cos, sin, 0)");
    three->add_option("--assignments", raw.assignments, "worldline base convention: fixed-base or all")
        ->check(CLI::IsMember(keys(assignment_names)));
    auto* sw = app.add_subcommand("sweep", "planar sweep over cos(theta)");
    common(sw);
    sw->add_option("--b-over-c", raw.b_over_c, "B at (b, 0, 0), C on the unit circle")->required();
    sw->add_option("--grid", raw.grid, "number of cos(theta) points");
    auto* mc = app.add_subcommand("mc-validate", "Monte Carlo two-body TE check");
    common(mc);
    mc->add_option("--seed", raw.seed, "random seed");
    mc->add_option("--paths", raw.paths, "number of samples");
}

// Token layout: argv[1] is the subcommand, the rest are its options.
void parse_tokens(CLI::App& app, const std::vector<std::string>& tokens) {
    std::vector<std::string> reversed(tokens.rbegin(), tokens.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested(app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

double parse_double(const std::string& token, const std::string& what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != token.size()) throw UsageError("malformed number '" + token + "' in " + what);
    return v;
}

std::vector<Vec3> parse_positions(const std::string& text) {
    std::vector<Vec3> out;
    std::stringstream atoms(text);
    std::string atom;
    while (std::getline(atoms, atom, ';')) {
        std::stringstream coords(atom);
        std::string c;
        std::vector<double> v;
        while (std::getline(coords, c, ',')) v.push_back(parse_double(trim(c), "--positions"));
        if (v.size() != 3) throw UsageError("--positions: atom '" + trim(atom) + "' needs three coordinates");
        out.emplace_back(v[0], v[1], v[2]);
    }
    return out;
}

QuadratureSpec tuned(QuadratureSpec spec, const RunConfig& config) {
    if (config.quad_tol) spec.rel_tol = *config.quad_tol;
    if (config.quad_levels) spec.max_levels = *config.quad_levels;
    return spec;
}

std::vector<Mode> modes_of(ModeChoice m) {
    switch (m) {
    case ModeChoice::te: return {Mode::TE};
    case ModeChoice::tm: return {Mode::TM};
    case ModeChoice::cross: return {Mode::cross_TE_TM};
    case ModeChoice::total: return {Mode::total};
    case ModeChoice::all: return {Mode::TE, Mode::TM, Mode::cross_TE_TM, Mode::total};
    }
    return {};
}

std::vector<MethodChoice> methods_of(MethodChoice m) {
    if (m == MethodChoice::both) return {MethodChoice::worldline, MethodChoice::green_tensor};
    return {m};
}

std::string method_label(MethodChoice m) { return m == MethodChoice::worldline ? "worldline" : "green-tensor"; }

std::string command_label(Command c) {
    for (const auto& [name, value] : command_names)
        if (value == c) return name;
    return "?";
}

ResultRow make_row(const std::string& cmd, const std::string& method, const std::string& mode, int order,
                   std::optional<double> b_over_c = std::nullopt, std::optional<double> cos_theta = std::nullopt) {
    ResultRow r;
    r.command = cmd;
    r.method = method;
    r.mode = mode;
    r.order = order;
    r.b_over_c = b_over_c;
    r.cos_theta = cos_theta;
    return r;
}

std::string mode_label(Mode m) { return m == Mode::cross_TE_TM ? "cross" : std::string(to_string(m)); }

// Runs f and turns numerical failures into a failed row.
template <class F>
ResultRow guarded(ResultRow row, F f) {
    try {
        const CoefficientResult r = f();
        row.coefficient = r.value;
        row.error_estimate = r.error_estimate;
        if (!std::isfinite(r.value)) {
            row.ok = false;
            row.message = "non-finite coefficient";
        }
    } catch (const ConvergenceError& e) {
        row.ok = false;
        row.message = e.what();
        row.partial = e.best().value;
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        row.ok = false;
        row.message = e.what();
    }
    if (!row.ok) row.coefficient = row.error_estimate = std::numeric_limits<double>::quiet_NaN();
    return row;
}

bool collinear(const AtomSystem& sys) {
    const Vec3 d1 = sys.positions[1] - sys.positions[0], d2 = sys.positions[2] - sys.positions[0];
    return d1.cross(d2).norm() <= 1e-12 * d1.norm() * d2.norm();
}

CoefficientResult green_three_body(const AtomSystem& sys, Mode mode, const RunConfig& config) {
    if (mode == Mode::total) return green::three_body_total_general(sys, tuned(green::default_oracle_spec(), config));
    if (!collinear(sys))
        throw UsageError("green-tensor mode " + mode_label(mode) + " needs collinear atoms (use --mode total)");
    const std::array<double, 3> lengths = {(sys.positions[1] - sys.positions[0]).norm(),
                                           (sys.positions[2] - sys.positions[1]).norm(),
                                           (sys.positions[0] - sys.positions[2]).norm()};
    using green::ThreeBodyTerm;
    std::vector<ThreeBodyTerm> terms;
    if (mode == Mode::TE) terms = {ThreeBodyTerm::eee};
    if (mode == Mode::TM) terms = {ThreeBodyTerm::hhh};
    if (mode == Mode::cross_TE_TM)
        terms = {ThreeBodyTerm::mix1, ThreeBodyTerm::mix2, ThreeBodyTerm::mix3,
                 ThreeBodyTerm::mix4, ThreeBodyTerm::mix5, ThreeBodyTerm::mix6};
    const auto spec = tuned(green::default_three_body_spec(), config);
    CoefficientResult sum;
    for (auto t : terms) {
        const auto r = green::three_body_collinear_coefficient(t, spec, lengths);
        sum.value += 2.0 * r.value;
        sum.error_estimate += 2.0 * r.error_estimate;
        sum.method = r.method;
    }
    sum.mode = mode;
    sum.order = 3;
    sum.convention = Convention::three_body;
    return sum;
}

}  // namespace

int RunConfig::cell_count() const {
    return static_cast<int>(methods_of(method).size() * modes_of(mode).size());
}

RunConfig parse_config(const std::vector<std::string>& argv) {
    std::vector<std::string> tokens(argv.begin() + (argv.empty() ? 0 : 1), argv.end());

    Raw raw;
    {
        CLI::App app("casimir");
        build(app, raw);
        parse_tokens(app, tokens);
    }
    if (!raw.config.empty()) {
        // flags on the command line win over the file
        CLI::App probe("casimir");
        Raw unused;
        build(probe, unused);
        parse_tokens(probe, tokens);
        CLI::App* sub = probe.get_subcommands().front();
        std::vector<std::string> merged = {tokens.front()};
        for (const auto& [key, value] : read_config_file(raw.config)) {
            const CLI::Option* opt = sub->get_option_no_throw("--" + key);
            if (opt == nullptr || key == "config")
                throw UsageError("unknown config key '" + key + "' for " + tokens.front());
            if (opt->count() == 0) {
                merged.push_back("--" + key);
                merged.push_back(value);
            }
        }
        merged.insert(merged.end(), tokens.begin() + 1, tokens.end());
        raw = Raw{};
        CLI::App app("casimir");
        build(app, raw);
        parse_tokens(app, merged);
    }

    RunConfig c;
    c.command = command_names.at(tokens.front());
    c.method = method_names.at(raw.method);
    c.mode = mode_names.at(raw.mode);
    c.format = format_names.at(raw.format);
    c.assignments = assignment_names.at(raw.assignments);
    c.output = raw.output;
    c.b_over_c = raw.b_over_c;
    c.cos_theta = raw.cos_theta;
    c.grid = raw.grid;
    c.seed = raw.seed;
    c.n_paths = raw.paths;
    c.quad_levels = raw.quad_levels;
    c.quad_tol = raw.quad_tol;
    if (!c.quad_tol) {
        if (const char* env = std::getenv("CASIMIR_QUAD_TOL"); env != nullptr && *env != '\0')
            c.quad_tol = parse_double(env, "CASIMIR_QUAD_TOL");
    }
    if (c.quad_tol && !(*c.quad_tol > 0.0 && *c.quad_tol < 1.0))
        throw UsageError("quadrature tolerance must lie in (0, 1)");
    if (c.quad_levels && *c.quad_levels < 1) throw UsageError("--quad-levels must be at least 1");

    switch (c.command) {
    case Command::three_body:
        if (!raw.positions.empty()) {
            if (c.b_over_c || c.cos_theta) throw UsageError("give either --positions or --b-over-c/--cos-theta");
            c.positions = parse_positions(raw.positions);
            if (c.positions.size() != 3) throw UsageError("--positions needs exactly three atoms");
        } else if (!c.b_over_c || !c.cos_theta) {
            throw UsageError("three-body needs --positions or both --b-over-c and --cos-theta");
        }
        break;
    case Command::sweep:
        if (c.grid < 2) throw UsageError("--grid must be at least 2");
        if (c.mode != ModeChoice::total) throw UsageError("sweep computes --mode total only, got '" + raw.mode + "'");
        break;
    case Command::mc_validate:
        if (c.n_paths <= 0) throw UsageError("--paths must be positive");
        break;
    case Command::two_body: break;
    }
    return c;
}

std::vector<ResultRow> execute(const RunConfig& config) {
    std::vector<ResultRow> rows;
    const std::string cmd = command_label(config.command);

    switch (config.command) {
    case Command::two_body: {
        const auto pair = AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(0, 0, 1)});
        for (auto m : methods_of(config.method))
            for (auto mode : modes_of(config.mode)) {
                const auto row = make_row(cmd, method_label(m), mode_label(mode), 2);
                rows.push_back(guarded(row, [&] {
                    if (m == MethodChoice::worldline)
                        return worldline::n_body_coefficient(pair, 2, mode, worldline::AssignmentSum::all,
                                                             tuned(worldline::default_two_body_spec(), config));
                    return green::two_body_coefficient(mode, tuned(green::default_two_body_spec(), config));
                }));
            }
        break;
    }
    case Command::three_body: {
        AtomSystem sys;
        try {
            sys = config.positions.empty() ? sweep::build_geometry(*config.b_over_c, *config.cos_theta)
                                           : AtomSystem::from_positions(config.positions);
            sys.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        const auto sum = config.assignments == Assignments::all ? worldline::AssignmentSum::all
                                                                : worldline::AssignmentSum::fixed_base;
        for (auto m : methods_of(config.method))
            for (auto mode : modes_of(config.mode)) {
                const auto row = make_row(cmd, method_label(m), mode_label(mode), 3, config.b_over_c, config.cos_theta);
                rows.push_back(guarded(row, [&] {
                    if (m == MethodChoice::worldline)
                        return worldline::n_body_coefficient(sys, 3, mode, sum,
                                                             tuned(worldline::default_three_body_spec(), config));
                    return green_three_body(sys, mode, config);
                }));
            }
        break;
    }
    case Command::sweep: {
        sweep::SweepConfig sc;
        sc.b_over_c = *config.b_over_c;
        sc.cos_theta = sweep::SweepConfig::default_grid(config.grid);
        sc.methods.clear();
        for (auto m : methods_of(config.method))
            sc.methods.push_back(m == MethodChoice::worldline ? sweep::SweepMethod::worldline_sum
                                                              : sweep::SweepMethod::green_tensor);
        sc.worldline_spec = tuned(worldline::default_three_body_spec(), config);
        sc.green_spec = tuned(green::default_oracle_spec(), config);
        try {
            sc.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        for (const auto& r : sweep::run_sweep(sc)) {
            auto row = make_row(cmd, std::string(sweep::to_string(r.method)), "total", 3, r.b_over_c, r.cos_theta);
            row.coefficient = r.value;
            row.error_estimate = r.error_estimate;
            row.ok = r.ok;
            row.message = r.message;
            row.partial = r.partial;
            rows.push_back(row);
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const ResultRow& a, const ResultRow& b) { return *a.cos_theta < *b.cos_theta; });
        break;
    }
    case Command::mc_validate: {
        auto mc_row = make_row(cmd, "monte-carlo", "te", 2);
        try {
            const auto est = bridge_mc::mc_te_two_body(1.0, config.n_paths, config.seed);
            mc_row.coefficient = est.mean;
            mc_row.error_estimate = est.standard_error;
        } catch (const Error& e) {
            mc_row.ok = false;
            mc_row.message = e.what();
            mc_row.coefficient = mc_row.error_estimate = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(mc_row);
        const auto pair = AtomSystem::from_positions({Vec3(0, 0, 0), Vec3(0, 0, 1)});
        rows.push_back(guarded(make_row(cmd, "worldline", "te", 2), [&] {
            return worldline::n_body_coefficient(pair, 2, Mode::TE, worldline::AssignmentSum::all,
                                                 tuned(worldline::default_two_body_spec(), config));
        }));
        break;
    }
    }
    return rows;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    std::string s(buf);
    const auto e = s.find('e');
    const int exponent = std::atoi(s.c_str() + e + 1);
    return s.substr(0, e) + "e" + std::to_string(exponent);
}

std::string to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "command,method,mode,order,b_over_c,cos_theta,coefficient,error_estimate\n";
    for (const auto& r : rows) {
        out << r.command << ',' << r.method << ',' << r.mode << ',' << r.order << ','
            << (r.b_over_c ? format_number(*r.b_over_c) : "") << ','
            << (r.cos_theta ? format_number(*r.cos_theta) : "") << ',' << format_number(r.coefficient) << ','
            << format_number(r.error_estimate) << '\n';
    }
    return out.str();
}

std::string to_json(const std::vector<ResultRow>& rows) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j;
        j["command"] = r.command;
        j["method"] = r.method;
        j["mode"] = r.mode;
        j["order"] = r.order;
        j["b_over_c"] = r.b_over_c ? nlohmann::json(*r.b_over_c) : nlohmann::json(nullptr);
        j["cos_theta"] = r.cos_theta ? nlohmann::json(*r.cos_theta) : nlohmann::json(nullptr);
        if (r.ok) {
            j["coefficient"] = r.coefficient;
            j["error_estimate"] = r.error_estimate;
            j["status"] = "ok";
        } else {
            j["coefficient"] = nullptr;
            j["error_estimate"] = nullptr;
            j["status"] = "failed";
            j["error"] = {{"message", r.message},
                          {"partial_estimate", r.partial ? nlohmann::json(*r.partial) : nlohmann::json(nullptr)}};
        }
        results.push_back(j);
    }
    return nlohmann::json{{"results", results}}.dump(2) + "\n";
}

int emit(const std::vector<ResultRow>& rows, Format format, const std::string& path, std::ostream& out,
         std::ostream& err) {
    if (rows.empty()) {
        err << "error: no results to write\n";
        return 2;
    }
    const std::string text = format == Format::csv ? to_csv(rows) : to_json(rows);
    if (path.empty()) {
        out << text;
        out.flush();
    } else {
        std::ofstream file(path, std::ios::binary);
        file << text;
        file.close();
        if (!file) {
            err << "error: cannot write " << path << "\n";
            return 2;
        }
    }
    int status = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            err << "error: " << r.command << ' ' << r.method << ' ' << r.mode;
            if (r.cos_theta) err << " cos_theta=" << format_number(*r.cos_theta);
            err << ": " << r.message << "\n";
            status = 2;
        }
    return status;
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = parse_config(argv);
    } catch (const HelpRequested& h) {
        out << h.what();
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }
    std::vector<ResultRow> rows;
    try {
        rows = execute(config);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    if (config.command == Command::mc_validate && rows.size() == 2 && rows[0].ok && rows[1].ok) {
        const double z = (rows[0].coefficient - rows[1].coefficient) / rows[0].error_estimate;
        err << "monte carlo vs quadrature: " << z << " standard errors\n";
    }
    return emit(rows, config.format, config.output, out, err);
}

}  // namespace casimir::cli
