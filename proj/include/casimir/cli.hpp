#pragma once
// Command-line front end: parses a RunConfig, runs the requested
// calculations and writes CSV or JSON rows.
//
//   casimir two-body    [--method M] [--mode X]
//   casimir three-body  (--positions "x,y,z;x,y,z;x,y,z" | --b-over-c B --cos-theta C)
//   casimir sweep       --b-over-c B [--grid N]
//   casimir mc-validate [--paths N] [--seed S]
//
// Exit status: 0 success, 1 usage error, 2 numerical or I/O failure.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "casimir/core.hpp"

namespace casimir::cli {

class UsageError : public Error {
public:
    using Error::Error;
};

enum class Command { two_body, three_body, sweep, mc_validate };
enum class MethodChoice { worldline, green_tensor, both };
enum class ModeChoice { te, tm, cross, total, all };
enum class Format { csv, json };
enum class Assignments { fixed_base, all };

struct RunConfig {
    Command command = Command::two_body;
    MethodChoice method = MethodChoice::both;
    ModeChoice mode = ModeChoice::total;
    std::vector<Vec3> positions;
    std::optional<double> b_over_c;
    std::optional<double> cos_theta;
    int grid = 41;
    Assignments assignments = Assignments::fixed_base;
    std::optional<double> quad_tol;
    std::optional<int> quad_levels;
    Format format = Format::csv;
    std::string output;  // empty: standard output
    std::uint64_t seed = 42;
    std::int64_t n_paths = 100000;

    /// Number of (method, mode) cells a two-body or three-body run produces.
    int cell_count() const;
};

/// argv[0] is the program name.  A `--config FILE` option reads flat
/// `key = value` lines whose keys are long option names; flags given on the
/// command line win.  CASIMIR_QUAD_TOL sets the tolerance when neither
/// supplies one.  Throws UsageError naming the offending token.
RunConfig parse_config(const std::vector<std::string>& argv);

struct ResultRow {
    std::string command;
    std::string method;
    std::string mode;
    int order = 2;
    std::optional<double> b_over_c;
    std::optional<double> cos_theta;
    double coefficient = 0.0;
    double error_estimate = 0.0;
    bool ok = true;
    std::string message;
    std::optional<double> partial;
};

/// Runs the configured calculations.  Numerical failures become rows with
/// ok = false; usage problems discovered late throw UsageError.
std::vector<ResultRow> execute(const RunConfig& config);

/// 17 significant digits, exponent without padding: -1.1936620731892151e-1.
std::string format_number(double x);

std::string to_csv(const std::vector<ResultRow>& rows);
std::string to_json(const std::vector<ResultRow>& rows);

/// Writes rows to path (or out when path is empty) and returns the exit status.
int emit(const std::vector<ResultRow>& rows, Format format, const std::string& path, std::ostream& out,
         std::ostream& err);

/// Whole program.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace casimir::cli
