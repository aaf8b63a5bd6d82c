#pragma once

#include <filesystem>
#include <ostream>
#include <span>

#include "lagflow/config.hpp"

namespace lagflow {

/// Runs the configured evolution and writes into the output directory
/// (config's out_dir unless the LAGFLOW_OUT environment variable overrides):
///   run.cfg             resolved, re-parseable configuration echo
///   diagnostics.csv     n,t,energy,transport,min_dx,max_dx,min_d2x,max_d2x,
///                       max_speed,newton_iters (one row per step)
///   characteristics.csv t,i,x (one row per step and grid index, step 0 first)
///   density_%04u.csv    x_left,x_right,u snapshot per snapshot time
///   idf_%04u.csv        xi,x snapshot per snapshot time
///   snapshots.csv       j,n,t,density_file,idf_file manifest
///   audit.txt           name,worst,step,pass per audited invariant
///   plot.py             companion plotting script (external tool)
/// Deterministic: identical configs produce byte-identical CSVs.
/// Returns 0 exactly when the audit passes.
int run_solve(const RunConfig& cfg, std::ostream& log);

/// Runs a convergence study on the config's scenario, writes convergence.csv
/// (axis,level,err_idf,err_density) into the output directory and prints the
/// fitted slopes. Returns 0 exactly when the IDF slope lies in [0.7, 1.3].
int run_convergence(const RunConfig& cfg, ConvergenceAxis axis, std::span<const double> levels,
                    double reference, std::ostream& log);

/// Rebuilds the trajectory of a previous run from <dir>/run.cfg and
/// <dir>/characteristics.csv, re-audits it, rewrites <dir>/audit.txt.
/// Returns 0 exactly when the audit passes.
int run_audit(const std::filesystem::path& dir, std::ostream& log);

}  // namespace lagflow
