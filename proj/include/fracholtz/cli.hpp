#pragma once

// Command implementations behind the fracholtz executable. Kept in a header so
// tests can drive them without spawning processes.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fracholtz/acceptance.hpp"
#include "fracholtz/asymptotics.hpp"
#include "fracholtz/errors.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/inverse.hpp"
#include "fracholtz/io.hpp"
#include "fracholtz/scenarios.hpp"

namespace fracholtz::cli {

enum ExitCode : int { kOk = 0, kCriteriaFailed = 1, kValidation = 2, kNumerical = 3 };

struct Options {
    std::string command;
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> omega_points;
    std::optional<double> reg_min;
    std::optional<double> reg_max;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"forward", "dtn",   "sweep",    "asym",
                                                "invert-source", "invert-potential", "runge", "selftest"};
    return names;
}

/// Config file plus command-line overrides.
inline RunConfig resolve_config(const Options& o) {
    RunConfig c = load_config(o.config_path);
    if (o.out_dir) c.output_dir = *o.out_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.omega_points) {
        if (*o.omega_points < 2) throw ConfigError("--omega-points must be at least 2");
        c.frequencies.points = *o.omega_points;
        c.asymptotics.points = *o.omega_points;
    }
    if (o.reg_min) c.reg.min = *o.reg_min;
    if (o.reg_max) c.reg.max = *o.reg_max;
    if (!(c.reg.min > 0.0 && c.reg.max >= c.reg.min)) throw ConfigError("reg range needs 0 < min <= max");
    return c;
}

namespace detail {

struct Run {
    RunConfig config;
    std::string fingerprint;
    std::filesystem::path out;
    std::ostream& log;
};

inline int probe_excitation(const ConfiguredProblem& p) { return p.excitations.size() > 1 ? 1 : 0; }

inline std::vector<DtnRecord> sweep_all(const ConfiguredProblem& p) {
    std::vector<DtnRecord> out;
    const auto omegas = p.frequencies();
    for (std::size_t id = 0; id < p.excitations.size(); ++id) {
        auto recs = sweep(p.scenario, p.excitations[id], omegas, static_cast<int>(id));
        out.insert(out.end(), recs.begin(), recs.end());
    }
    if (p.config.noise > 0.0) add_noise(out, p.config.noise, p.config.seed);
    return out;
}

inline int cmd_forward(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const int id = probe_excitation(p);
    const double omega = p.frequencies().back();
    const GridFunction& psi = p.excitations[static_cast<std::size_t>(id)];
    const Eigen::VectorXcd src = eval_source(p.scenario.source, omega);
    const GridFunction u = solve_exterior_dirichlet(p.scenario, omega, psi, src);
    const Grid& g = p.grid();

    std::string csv = g.dim() == 1 ? "node,x,region,re,im\n" : "node,x,y,region,re,im\n";
    for (Index i = 0; i < g.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const Point x = g.node(i);
        csv += std::to_string(i) + "," + fmt17(x[0]) + ",";
        if (g.dim() == 2) csv += fmt17(x[1]) + ",";
        csv += g.omega_mask()[k] ? "omega" : (g.o1_mask()[k] ? "o1" : (g.o2_mask()[k] ? "o2" : "exterior"));
        csv += "," + fmt17(u.values()(i).real()) + "," + fmt17(u.values()(i).imag()) + "\n";
    }
    const InteriorSolver solver(*p.scenario.system, p.scenario.q, omega);
    const json summary = {{"schema_version", kSchemaVersion},
                          {"kind", "forward"},
                          {"fingerprint", run.fingerprint},
                          {"omega", omega},
                          {"excitation_id", id},
                          {"residual", solve_residual(p.scenario, omega, u, src)},
                          {"min_eigen_modulus", solver.min_eigen_modulus()},
                          {"grid", grid_to_json(g)}};
    write_text(run.out / "forward.csv", csv);
    write_text(run.out / "forward.json", summary.dump(1) + "\n");
    run.log << "forward: omega=" << omega << " excitation=" << id << " residual=" << summary["residual"].get<double>()
            << " -> " << (run.out / "forward.csv").string() << "\n";
    return kOk;
}

inline int cmd_dtn(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const int id = probe_excitation(p);
    const double omega = p.frequencies().back();
    const DtnRecord rec = dtn(p.scenario, omega, p.excitations[static_cast<std::size_t>(id)], id);
    write_dataset(run.out, "dtn_record", make_dataset(p.grid(), run.fingerprint, {rec}));
    run.log << "dtn: omega=" << omega << " excitation=" << id << " |Λψ|=" << rec.measurement.norm() << "\n";
    return kOk;
}

inline int cmd_sweep(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const DtnDataset ds = make_dataset(p.grid(), run.fingerprint, sweep_all(p));
    write_dataset(run.out, "dtn_dataset", ds);
    run.log << "sweep: " << ds.records.size() << " records (" << p.excitations.size() << " excitations x "
            << p.frequencies().size() << " frequencies) -> " << (run.out / "dtn_dataset.json").string() << "\n";
    return kOk;
}

inline int cmd_asym(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const auto& a = run.config.asymptotics;
    const auto omegas = geometric_grid(a.min, a.max, a.points);
    const EstimateConstants constants = estimate_constants(p.scenario);
    std::string csv = report_csv_header();
    json reports = json::array();
    bool holds = true;
    for (std::size_t id = 0; id < p.excitations.size(); ++id) {
        const AsymptoticsReport rep = low_freq_report(p.scenario, p.excitations[id], omegas, constants);
        csv += report_csv_rows(rep, static_cast<int>(id));
        reports.push_back(report_header(rep, static_cast<int>(id)));
        holds = holds && rep.bound_holds();
        run.log << "asym: excitation " << id << " slope=" << rep.slope << " usable=" << rep.usable_count() << "/"
                << omegas.size() << " bound " << (rep.bound_holds() ? "holds" : "VIOLATED") << "\n";
    }
    const json doc = {{"schema_version", kSchemaVersion},
                      {"kind", "asymptotics_report"},
                      {"fingerprint", run.fingerprint},
                      {"bound_holds", holds},
                      {"reports", std::move(reports)}};
    write_text(run.out / "asymptotics.csv", csv);
    write_text(run.out / "asymptotics.json", doc.dump(1) + "\n");
    return kOk;
}

/// Reads <stem>.json from the output directory when present, otherwise
/// generates it. A dataset from a different config is a validation error.
template <typename Generate>
DtnDataset dataset_or_generate(Run& run, const Grid& g, const std::string& stem, Generate generate) {
    const auto path = run.out / (stem + ".json");
    if (std::filesystem::exists(path)) {
        DtnDataset ds = read_dataset(path, &g);
        if (ds.fingerprint != run.fingerprint)
            throw ConfigError(path.string() + " was produced by a different config (fingerprint " + ds.fingerprint +
                              ", expected " + run.fingerprint + ")");
        run.log << "using " << path.string() << "\n";
        return ds;
    }
    DtnDataset ds = make_dataset(g, run.fingerprint, generate());
    write_dataset(run.out, stem, ds);
    run.log << "generated " << path.string() << "\n";
    return ds;
}

inline int cmd_invert_source(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const DtnDataset ds = dataset_or_generate(run, p.grid(), "dtn_dataset", [&] { return sweep_all(p); });
    const auto regs = reg_sweep(run.config.reg.min, run.config.reg.max, run.config.reg.points);
    const SourceTruth truth{p.scenario.source.p0, p.scenario.source.p1};
    const bool by_error = run.config.reg.select == "error";

    json results = json::array();
    std::string csv = reg_sweep_csv_header();
    for (std::size_t id = 0; id < p.excitations.size(); ++id) {
        const auto records = records_for(ds, static_cast<int>(id));
        if (records.empty()) continue;
        const SourceForwardMap map = build_source_map(p.scenario, p.excitations[id], static_cast<int>(id));
        SourceRecovery rec = by_error ? recover_source(records, map, regs, run.config.fit_degree, truth)
                                      : recover_source(records, map, regs, run.config.fit_degree);
        if (!by_error) rec.truth = truth;  // reported, not used for selection
        results.push_back(source_recovery_json(rec));
        csv += reg_sweep_csv_rows(rec);
        run.log << "invert-source: excitation " << id << " reg0=" << rec.reg0 << " reg1=" << rec.reg1
                << " err(p0)=" << rec.error0() << " err(p1)=" << rec.error1() << " (" << rec.selection << ")\n";
    }
    if (results.empty()) throw ConfigError("dataset holds no records for the configured excitations");
    const json doc = {{"schema_version", kSchemaVersion},
                      {"kind", "source_recovery"},
                      {"fingerprint", run.fingerprint},
                      {"results", std::move(results)}};
    write_text(run.out / "recovery_source.json", doc.dump(1) + "\n");
    write_text(run.out / "reg_sweep_source.csv", csv);
    return kOk;
}

inline int cmd_invert_potential(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const auto& pot = run.config.potential;
    auto psis = make_excitations(p.scenario.grid_ptr(), pot.excitations, pot.width);
    psis.erase(psis.begin());
    std::vector<int> ids;
    for (std::size_t j = 0; j < psis.size(); ++j) ids.push_back(static_cast<int>(j) + 1);

    const DtnDataset ds = dataset_or_generate(run, p.grid(), "potential_dataset", [&] {
        std::vector<DtnRecord> out;
        for (std::size_t j = 0; j < psis.size(); ++j) {
            auto recs = sweep(p.scenario, psis[j], pot.frequencies, ids[j]);
            out.insert(out.end(), recs.begin(), recs.end());
        }
        if (run.config.noise > 0.0) add_noise(out, run.config.noise, run.config.seed);
        return out;
    });

    const PotentialModel model(p.scenario.system, p.scenario.source, pot.frequencies, psis);
    PotentialOptions opts;
    opts.regs = pot.regs;
    const PotentialRecovery rec =
        recover_potential(model, arrange_records(ds.records, ids, pot.frequencies), opts, p.scenario.q);
    json doc = potential_recovery_json(rec);
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "potential_recovery";
    doc["fingerprint"] = run.fingerprint;
    write_text(run.out / "recovery_potential.json", doc.dump(1) + "\n");
    write_text(run.out / "potential_stages.csv", potential_stages_csv(rec));
    run.log << "invert-potential: " << rec.stages.size() << " stages, error=" << rec.error()
            << (rec.aborted ? " ABORTED: " + rec.diagnostics : std::string()) << "\n";
    return rec.aborted ? kNumerical : kOk;
}

inline int cmd_runge(Run& run) {
    const ConfiguredProblem p = build_problem(run.config);
    const RungeOperator op = build_runge_operator(p.scenario);
    const Eigen::VectorXcd target = run.config.runge_target.on_omega(p.grid());
    const auto sweep = runge_sweep(op, target, reg_sweep(run.config.reg.min, run.config.reg.max, run.config.reg.points));
    const RungeResult& last = sweep.back();
    const json doc = {{"schema_version", kSchemaVersion},
                      {"kind", "runge"},
                      {"fingerprint", run.fingerprint},
                      {"reg", last.reg},
                      {"residual", last.residual},
                      {"relative", last.relative},
                      {"target", complex_vector_json(target)},
                      {"psi_o1", complex_vector_json(last.psi.restrict_to(p.grid().o1_nodes()))},
                      {"u_omega", complex_vector_json(last.u_eps)}};
    write_text(run.out / "runge.csv", runge_csv(sweep));
    write_text(run.out / "runge.json", doc.dump(1) + "\n");
    run.log << "runge: reg=" << last.reg << " relative residual=" << last.relative << "\n";
    return kOk;
}

inline int cmd_selftest(Run& run) {
    auto results = acceptance::run_criteria(run.config, &run.log);
    acceptance::write_artifacts(run.out, results);
    results.push_back(acceptance::criterion_12(run.config, run.out, run.out / "rerun"));
    run.log << results.back().line() << "\n";
    acceptance::write_artifacts(run.out, results);
    std::size_t passed = 0;
    for (const auto& r : results) passed += r.pass() ? 1 : 0;
    run.log << "selftest: " << passed << "/" << results.size() << " criteria pass\n";
    return passed == results.size() ? kOk : kCriteriaFailed;
}

}  // namespace detail

/// Runs one command; never throws. Returns the process exit code.
inline int run_command(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        const RunConfig cfg = resolve_config(o);
        detail::Run run{cfg, config_fingerprint(cfg), std::filesystem::path(cfg.output_dir), log};
        ensure_dir(run.out);
        if (o.command == "forward") return detail::cmd_forward(run);
        if (o.command == "dtn") return detail::cmd_dtn(run);
        if (o.command == "sweep") return detail::cmd_sweep(run);
        if (o.command == "asym") return detail::cmd_asym(run);
        if (o.command == "invert-source") return detail::cmd_invert_source(run);
        if (o.command == "invert-potential") return detail::cmd_invert_potential(run);
        if (o.command == "runge") return detail::cmd_runge(run);
        if (o.command == "selftest") return detail::cmd_selftest(run);
        throw ConfigError("unknown command '" + o.command + "'");
    } catch (const std::invalid_argument& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const AssemblyError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const ResonanceError& e) {
        err << "numerical failure (resonance): " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace fracholtz::cli
