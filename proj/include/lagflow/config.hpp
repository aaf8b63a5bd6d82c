#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lagflow/analysis.hpp"
#include "lagflow/jko.hpp"

namespace lagflow {

/// Config-file problem, carrying the 1-based line number (0 = file level).
struct ConfigError : std::runtime_error {
    int line;
    ConfigError(int line_no, const std::string& what)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what
                                         : what),
          line(line_no) {}
};

enum class InitKind { Uniform, Csv };

/// One fully validated run description.
struct RunConfig {
    double a = -4.0, b = 4.0;
    std::size_t k = 0;
    CostModel cost;
    double m = 1.0;
    // potential
    std::string potential_kind = "constant";  // constant | quadratic
    double potential_weight = 0.0;
    double potential_center = 0.0;
    // initial density
    InitKind init_kind = InitKind::Uniform;
    double init_lo = 0.0, init_hi = 0.0;  // uniform support
    std::string init_file;                // csv samples
    double floor = 1e-3;
    // time stepping + solver knobs
    JkoConfig solver;
    std::string out_dir = "out";
    std::vector<double> snapshot_times;  // resolved: sorted, on the step grid

    EnergyModel make_energy() const;
    DensitySpec make_init() const;
    ConvergenceScenario make_scenario() const;
    /// Canonical re-parseable echo of every resolved key.
    std::string echo() const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown or duplicate
/// keys are rejected with their line number; missing required keys and
/// semantic violations (e.g. "k must be >= 2") raise ConfigError too.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& file);

}  // namespace lagflow
