#include <CLI11.hpp>

#include "fracholtz/cli.hpp"

int main(int argc, char** argv) {
    namespace cli = fracholtz::cli;
    CLI::App app{"Fractional Helmholtz forward solver, low-frequency asymptotics and inverse reconstructions"};
    cli::Options o;
    std::uint64_t seed = 0;
    int points = 0;
    double reg_min = 0.0, reg_max = 0.0;

    app.add_option("command", o.command, "command to run")
        ->required()
        ->check(CLI::IsMember(cli::commands()));
    app.add_option("--config", o.config_path, "JSON run config")->required();
    auto* out = app.add_option("--out", "output directory (overrides output_dir)");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");
    auto* points_opt = app.add_option("--omega-points", points, "points in the frequency grids");
    auto* rmin = app.add_option("--reg-min", reg_min, "smallest regularization in sweeps");
    auto* rmax = app.add_option("--reg-max", reg_max, "largest regularization in sweeps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kValidation;
    }
    if (*out) o.out_dir = out->as<std::string>();
    if (*seed_opt) o.seed = seed;
    if (*points_opt) o.omega_points = points;
    if (*rmin) o.reg_min = reg_min;
    if (*rmax) o.reg_max = reg_max;
    return cli::run_command(o);
}
