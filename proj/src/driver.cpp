#include "lagflow/driver.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "lagflow/csv.hpp"

namespace lagflow {

namespace {

namespace fs = std::filesystem;

fs::path resolve_out_dir(const RunConfig& cfg) {
    if (const char* env = std::getenv("LAGFLOW_OUT")) {
        if (*env) return fs::path(env);
    }
    return fs::path(cfg.out_dir);
}

std::string snapshot_name(const char* stem, std::size_t j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04zu.csv", stem, j);
    return buf;
}

void write_density_csv(const fs::path& file, const IdfVector& x) {
    const PiecewiseDensity d = to_density(x);
    std::string s = "x_left,x_right,u\n";
    for (std::size_t i = 0; i < d.cell_values.size(); ++i) {
        s += format_double(d.breakpoints[i]);
        s += ',';
        s += format_double(d.breakpoints[i + 1]);
        s += ',';
        s += format_double(d.cell_values[i]);
        s += '\n';
    }
    write_text_file(file, s);
}

void write_idf_csv(const fs::path& file, const IdfVector& x) {
    const double kd = static_cast<double>(x.k());
    std::string s = "xi,x\n";
    for (std::size_t i = 0; i <= x.k(); ++i) {
        s += format_double(static_cast<double>(i) / kd);
        s += ',';
        s += format_double(x[i]);
        s += '\n';
    }
    write_text_file(file, s);
}

constexpr const char* kPlotScript = R"(#!/usr/bin/env python3
"""Plots for one solver run: densities, characteristics, diagnostics."""
import csv
import os
import sys

import matplotlib.pyplot as plt

out = sys.argv[1] if len(sys.argv) > 1 else "."

with open(os.path.join(out, "snapshots.csv")) as f:
    snaps = list(csv.DictReader(f))
fig, ax = plt.subplots()
for row in snaps:
    with open(os.path.join(out, row["density_file"])) as f:
        cells = list(csv.DictReader(f))
    xs, us = [], []
    for c in cells:
        xs += [float(c["x_left"]), float(c["x_right"])]
        us += [float(c["u"]), float(c["u"])]
    ax.plot(xs, us, label=f"t={float(row['t']):g}")
ax.set_xlabel("x")
ax.set_ylabel("u")
ax.legend(fontsize=6)
fig.savefig(os.path.join(out, "densities.png"), dpi=150)

with open(os.path.join(out, "characteristics.csv")) as f:
    rows = list(csv.DictReader(f))
paths = {}
for r in rows:
    paths.setdefault(int(r["i"]), []).append((float(r["t"]), float(r["x"])))
fig, ax = plt.subplots()
stride = max(1, len(paths) // 100)
for i in sorted(paths)[::stride]:
    ts, xs = zip(*paths[i])
    ax.plot(xs, ts, lw=0.5, color="tab:blue")
ax.set_xlabel("x")
ax.set_ylabel("t")
fig.savefig(os.path.join(out, "characteristics.png"), dpi=150)

with open(os.path.join(out, "diagnostics.csv")) as f:
    diag = list(csv.DictReader(f))
fig, ax = plt.subplots()
ax.plot([float(r["t"]) for r in diag], [float(r["energy"]) for r in diag])
ax.set_xlabel("t")
ax.set_ylabel("energy")
fig.savefig(os.path.join(out, "energy.png"), dpi=150)
print("wrote densities.png, characteristics.png, energy.png")
)";

}  // namespace

int run_solve(const RunConfig& cfg, std::ostream& log) {
    const fs::path out = resolve_out_dir(cfg);
    fs::create_directories(out);

    const EnergyModel energy = cfg.make_energy();
    const DensitySpec init = cfg.make_init();
    const IdfVector x0 = from_density(init, cfg.k, cfg.a, cfg.b, cfg.floor);

    std::string diag =
        "n,t,energy,transport,min_dx,max_dx,min_d2x,max_d2x,max_speed,newton_iters\n";
    const StepObserver observer = [&](const StepReport& r) {
        diag += std::to_string(r.n);
        diag += ',';
        diag += format_double(r.t);
        diag += ',';
        diag += format_double(r.energy);
        diag += ',';
        diag += format_double(r.transport);
        diag += ',';
        diag += format_double(r.min_dx);
        diag += ',';
        diag += format_double(r.max_dx);
        diag += ',';
        diag += format_double(r.min_d2x);
        diag += ',';
        diag += format_double(r.max_d2x);
        diag += ',';
        diag += format_double(r.max_speed);
        diag += ',';
        diag += std::to_string(r.newton_iters);
        diag += '\n';
    };

    const Trajectory traj = evolve(cfg.cost, energy, cfg.solver, x0, observer);

    {
        RunConfig resolved = cfg;  // record where the outputs actually went
        resolved.out_dir = out.string();
        write_text_file(out / "run.cfg", resolved.echo());
    }
    write_text_file(out / "diagnostics.csv", diag);

    {
        std::string s = "t,i,x";
        s.reserve(32 * traj.states.size() * (cfg.k + 1));
        for (std::size_t n = 0; n < traj.states.size(); ++n) {
            const std::string t = format_double(static_cast<double>(n) * cfg.solver.tau);
            for (std::size_t i = 0; i <= cfg.k; ++i) {
                s += '\n';
                s += t;
                s += ',';
                s += std::to_string(i);
                s += ',';
                s += format_double(traj.states[n][i]);
            }
        }
        s += '\n';
        write_text_file(out / "characteristics.csv", s);
    }

    {
        std::string manifest = "j,n,t,density_file,idf_file\n";
        for (std::size_t j = 0; j < cfg.snapshot_times.size(); ++j) {
            const double t = cfg.snapshot_times[j];
            const std::size_t n =
                static_cast<std::size_t>(std::llround(t / cfg.solver.tau));
            const std::string dname = snapshot_name("density", j);
            const std::string iname = snapshot_name("idf", j);
            write_density_csv(out / dname, traj.states[n]);
            write_idf_csv(out / iname, traj.states[n]);
            manifest += std::to_string(j) + "," + std::to_string(n) + "," + format_double(t) +
                        "," + dname + "," + iname + "\n";
        }
        write_text_file(out / "snapshots.csv", manifest);
    }

    write_text_file(out / "plot.py", kPlotScript);

    const AuditReport rep = audit(traj, cfg.cost, energy, cfg.solver);
    write_text_file(out / "audit.txt", rep.to_csv());

    log << "run: k=" << cfg.k << " tau=" << format_double(cfg.solver.tau)
        << " steps=" << traj.reports.size() << " -> " << out.string() << "\n";
    log << rep.to_csv();
    log << (rep.pass() ? "audit: PASS\n" : "audit: FAIL\n");
    return rep.pass() ? 0 : 1;
}

int run_convergence(const RunConfig& cfg, ConvergenceAxis axis, std::span<const double> levels,
                    double reference, std::ostream& log) {
    const fs::path out = resolve_out_dir(cfg);
    fs::create_directories(out);

    const ConvergenceScenario sc = cfg.make_scenario();
    const ConvergenceResult res = convergence_study(axis, sc, levels, reference);

    const char* axis_name = axis == ConvergenceAxis::Grid ? "grid" : "timestep";
    std::string s = "axis,level,err_idf,err_density\n";
    for (const auto& L : res.levels) {
        s += axis_name;
        s += ',';
        s += format_double(L.level);
        s += ',';
        s += format_double(L.err_idf);
        s += ',';
        s += format_double(L.err_density);
        s += '\n';
        log << axis_name << " level " << format_double(L.level)
            << ": err_idf = " << format_double(L.err_idf)
            << ", err_density = " << format_double(L.err_density) << "\n";
    }
    write_text_file(out / "convergence.csv", s);
    for (const auto& w : res.warnings) log << "warning: " << w << "\n";
    log << "fitted slopes: idf = " << format_double(res.slope_idf)
        << ", density = " << format_double(res.slope_density) << "\n";

    const bool ok = res.slope_idf >= 0.7 && res.slope_idf <= 1.3;
    log << (ok ? "convergence: PASS\n" : "convergence: FAIL (idf slope outside [0.7, 1.3])\n");
    return ok ? 0 : 1;
}

int run_audit(const std::filesystem::path& dir, std::ostream& log) {
    const RunConfig cfg = parse_config_file(dir / "run.cfg");
    const CsvTable table = read_csv(dir / "characteristics.csv");
    const std::size_t ci = table.column("i"), cx = table.column("x");

    const std::size_t stride = cfg.k + 1;
    if (table.rows.empty() || table.rows.size() % stride != 0)
        throw std::runtime_error("audit: characteristics.csv row count does not match k");
    const std::size_t n_states = table.rows.size() / stride;

    Trajectory traj;
    traj.states.reserve(n_states);
    for (std::size_t n = 0; n < n_states; ++n) {
        std::vector<double> vals(stride);
        for (std::size_t i = 0; i < stride; ++i) {
            const auto& row = table.rows[n * stride + i];
            if (parse_double(row[ci]) != static_cast<double>(i))
                throw std::runtime_error("audit: characteristics.csv rows out of order");
            vals[i] = parse_double(row[cx]);
        }
        traj.states.emplace_back(cfg.a, cfg.b, std::move(vals));
    }

    const EnergyModel energy = cfg.make_energy();
    const AuditReport rep = audit(traj, cfg.cost, energy, cfg.solver);
    write_text_file(dir / "audit.txt", rep.to_csv());
    log << rep.to_csv();
    log << (rep.pass() ? "audit: PASS\n" : "audit: FAIL\n");
    return rep.pass() ? 0 : 1;
}

}  // namespace lagflow
