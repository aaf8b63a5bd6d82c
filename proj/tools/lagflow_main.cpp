// Command-line front end: solve / converge / audit.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lagflow/driver.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Lagrangian solver for 1D nonlinear drift-diffusion flows"};
    app.require_subcommand(1);

    std::string cfg_file;
    auto* solve = app.add_subcommand("solve", "run the configured evolution and write outputs");
    solve->add_option("config", cfg_file, "configuration file")->required();

    std::string conv_cfg, axis_name;
    std::vector<double> levels;
    double reference = 0.0;
    auto* converge =
        app.add_subcommand("converge", "refinement study against a reference resolution");
    converge->add_option("config", conv_cfg, "configuration file")->required();
    converge->add_option("--axis", axis_name, "refinement axis: grid | timestep")
        ->required()
        ->check(CLI::IsMember({"grid", "timestep"}));
    converge->add_option("--levels", levels, "comma-separated levels (point counts or steps)")
        ->required()
        ->delimiter(',');
    converge->add_option("--reference", reference, "reference resolution")->required();

    std::string audit_dir;
    auto* audit = app.add_subcommand("audit", "re-verify the invariants of a finished run");
    audit->add_option("dir", audit_dir, "output directory of a previous solve")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const lagflow::RunConfig cfg = lagflow::parse_config_file(cfg_file);
            return lagflow::run_solve(cfg, std::cout);
        }
        if (converge->parsed()) {
            const lagflow::RunConfig cfg = lagflow::parse_config_file(conv_cfg);
            const auto axis = axis_name == "grid" ? lagflow::ConvergenceAxis::Grid
                                                  : lagflow::ConvergenceAxis::Timestep;
            return lagflow::run_convergence(cfg, axis, levels, reference, std::cout);
        }
        return lagflow::run_audit(audit_dir, std::cout);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
