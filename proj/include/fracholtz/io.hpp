#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fracholtz/asymptotics.hpp"
#include "fracholtz/errors.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/inverse.hpp"
#include "fracholtz/scenarios.hpp"

namespace fracholtz {

// ---------------------------------------------------------------------------
// Low-level helpers
// ---------------------------------------------------------------------------

/// %.17g: enough digits to reproduce every double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("cannot create output directory '" + dir.string() + "'");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline json complex_vector_json(const Eigen::VectorXcd& v) {
    std::vector<double> re(static_cast<std::size_t>(v.size())), im(re.size());
    for (Index k = 0; k < v.size(); ++k) {
        re[static_cast<std::size_t>(k)] = v(k).real();
        im[static_cast<std::size_t>(k)] = v(k).imag();
    }
    return {{"re", re}, {"im", im}};
}

inline Eigen::VectorXcd complex_vector_from(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("re") || !j.contains("im"))
        throw ConfigError(where + ": expected {\"re\": [...], \"im\": [...]}");
    const auto re = j["re"].get<std::vector<double>>();
    const auto im = j["im"].get<std::vector<double>>();
    if (re.size() != im.size()) throw ConfigError(where + ": re and im differ in length");
    Eigen::VectorXcd v(static_cast<Index>(re.size()));
    for (std::size_t k = 0; k < re.size(); ++k) v(static_cast<Index>(k)) = Complex(re[k], im[k]);
    return v;
}

inline json real_vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

inline json grid_to_json(const Grid& g) {
    json nodes = json::array();
    for (Index i = 0; i < g.size(); ++i) {
        const auto& x = g.node(i);
        const auto k = static_cast<std::size_t>(i);
        json n = {{"index", i},
                  {"x", g.dim() == 1 ? json::array({x[0]}) : json::array({x[0], x[1]})},
                  {"omega", static_cast<bool>(g.omega_mask()[k])},
                  {"o1", static_cast<bool>(g.o1_mask()[k])},
                  {"o2", static_cast<bool>(g.o2_mask()[k])}};
        nodes.push_back(std::move(n));
    }
    return {{"dim", g.dim()}, {"box_halfwidth", g.box_halfwidth()}, {"h", g.spacing()}, {"nodes", std::move(nodes)}};
}

// ---------------------------------------------------------------------------
// DtN datasets
// ---------------------------------------------------------------------------

/// Records plus the fingerprint of the config that produced them. Measurements
/// are raw nodal values of (A^s u) on the O2 nodes listed in `o2_nodes`.
struct DtnDataset {
    std::string fingerprint;
    int dim = 1;
    std::vector<Index> o2_nodes;
    std::vector<Point> o2_coords;
    std::vector<DtnRecord> records;
};

inline DtnDataset make_dataset(const Grid& g, std::string fingerprint, std::vector<DtnRecord> records) {
    DtnDataset ds;
    ds.fingerprint = std::move(fingerprint);
    ds.dim = g.dim();
    ds.o2_nodes = g.o2_nodes();
    for (Index i : ds.o2_nodes) ds.o2_coords.push_back(g.node(i));
    ds.records = std::move(records);
    return ds;
}

inline json dataset_to_json(const DtnDataset& ds) {
    json recs = json::array();
    for (const auto& r : ds.records) {
        json v = complex_vector_json(r.measurement);
        recs.push_back({{"excitation_id", r.excitation_id}, {"omega", r.omega}, {"re", v["re"]}, {"im", v["im"]}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "dtn_dataset"},
            {"fingerprint", ds.fingerprint},
            {"measurement", "raw nodal values of (A^s u) on O2, no quadrature weight"},
            {"dim", ds.dim},
            {"o2_nodes", ds.o2_nodes},
            {"records", std::move(recs)}};
}

inline DtnDataset dataset_from_json(const json& j, const Grid* grid = nullptr) {
    try {
        if (j.at("kind").get<std::string>() != "dtn_dataset") throw ConfigError("not a dtn_dataset document");
        if (j.at("schema_version").get<int>() != kSchemaVersion) throw ConfigError("unsupported dataset schema version");
        DtnDataset ds;
        ds.fingerprint = j.at("fingerprint").get<std::string>();
        ds.dim = j.at("dim").get<int>();
        ds.o2_nodes = j.at("o2_nodes").get<std::vector<Index>>();
        if (grid) {
            if (ds.o2_nodes != grid->o2_nodes()) throw ConfigError("dataset O2 nodes do not match the grid");
            for (Index i : ds.o2_nodes) ds.o2_coords.push_back(grid->node(i));
        }
        std::size_t k = 0;
        for (const auto& r : j.at("records")) {
            DtnRecord rec;
            rec.excitation_id = r.at("excitation_id").get<int>();
            rec.omega = r.at("omega").get<double>();
            rec.measurement = complex_vector_from(r, "records/" + std::to_string(k));
            if (rec.measurement.size() != static_cast<Index>(ds.o2_nodes.size()))
                throw ConfigError("records/" + std::to_string(k) + ": length differs from o2_nodes");
            ds.records.push_back(std::move(rec));
            ++k;
        }
        return ds;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed dataset: ") + e.what());
    }
}

/// One row per (excitation, omega, o2 node).
inline std::string dataset_csv(const DtnDataset& ds) {
    std::string out = ds.dim == 1 ? "excitation_id,omega,node,x,re,im\n" : "excitation_id,omega,node,x,y,re,im\n";
    for (const auto& r : ds.records) {
        for (std::size_t k = 0; k < ds.o2_nodes.size(); ++k) {
            out += std::to_string(r.excitation_id) + "," + fmt17(r.omega) + "," + std::to_string(ds.o2_nodes[k]) + ",";
            if (k < ds.o2_coords.size()) {
                out += fmt17(ds.o2_coords[k][0]) + ",";
                if (ds.dim == 2) out += fmt17(ds.o2_coords[k][1]) + ",";
            } else {
                out += ds.dim == 2 ? ",," : ",";
            }
            const Complex v = r.measurement(static_cast<Index>(k));
            out += fmt17(v.real()) + "," + fmt17(v.imag()) + "\n";
        }
    }
    return out;
}

/// Writes <stem>.json and <stem>.csv into dir.
inline void write_dataset(const std::filesystem::path& dir, const std::string& stem, const DtnDataset& ds) {
    write_text(dir / (stem + ".json"), dataset_to_json(ds).dump(1) + "\n");
    write_text(dir / (stem + ".csv"), dataset_csv(ds));
}

inline DtnDataset read_dataset(const std::filesystem::path& path, const Grid* grid = nullptr) {
    return dataset_from_json(read_json(path), grid);
}

inline std::vector<DtnRecord> records_for(const DtnDataset& ds, int excitation_id) {
    std::vector<DtnRecord> out;
    for (const auto& r : ds.records)
        if (r.excitation_id == excitation_id) out.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Asymptotics reports
// ---------------------------------------------------------------------------

inline json report_header(const AsymptoticsReport& r, int excitation_id) {
    const auto& c = r.constants;
    return {{"excitation_id", excitation_id},
            {"c0", c.c0},
            {"c1", c.c1},
            {"alpha0", c.alpha0},
            {"alpha_upper", c.alpha_upper},
            {"margin", c.margin},
            {"chain_valid", c.chain_valid},
            {"q_sup", r.q_sup},
            {"slope", std::isfinite(r.slope) ? json(r.slope) : json(nullptr)},
            {"decay_ratio", std::isfinite(r.decay_ratio) ? json(r.decay_ratio) : json(nullptr)},
            {"bound_holds", r.bound_holds()}};
}

inline std::string report_csv_header() { return "excitation_id,omega,gap,bound,radicand,usable\n"; }

inline std::string report_csv_rows(const AsymptoticsReport& r, int excitation_id) {
    std::string out;
    for (std::size_t k = 0; k < r.omegas.size(); ++k)
        out += std::to_string(excitation_id) + "," + fmt17(r.omegas[k]) + "," + fmt17(r.gap[k]) + "," +
               fmt17(r.bound[k]) + "," + fmt17(r.radicand[k]) + "," + (r.usable[k] ? "1" : "0") + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Recovery results
// ---------------------------------------------------------------------------

inline json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json source_recovery_json(const SourceRecovery& r) {
    json j = {{"excitation_id", r.excitation_id},
              {"fit_degree", r.fit_degree},
              {"fit_residual", r.fit_residual},
              {"selection", r.selection},
              {"reg0", r.reg0},
              {"reg1", r.reg1},
              {"residual0", r.residual0},
              {"residual1", r.residual1},
              {"sigma_max", r.sigma_max},
              {"sigma_min", r.sigma_min},
              {"rank_deficient", r.rank_deficient},
              {"p0_hat", complex_vector_json(r.p0_hat)},
              {"p1_hat", complex_vector_json(r.p1_hat)},
              {"d2", complex_vector_json(r.d2)}};
    if (r.truth) {
        j["p0_truth"] = complex_vector_json(r.truth->p0);
        j["p1_truth"] = complex_vector_json(r.truth->p1);
        j["error0"] = nan_safe(r.error0());
        j["error1"] = nan_safe(r.error1());
    }
    return j;
}

inline std::string reg_sweep_csv_header() { return "excitation_id,reg,residual0,residual1,error0,error1,gcv0,gcv1\n"; }

inline std::string reg_sweep_csv_rows(const SourceRecovery& r) {
    std::string out;
    for (const auto& row : r.sweep)
        out += std::to_string(r.excitation_id) + "," + fmt17(row.reg) + "," + fmt17(row.residual0) + "," +
               fmt17(row.residual1) + "," + fmt17(row.error0) + "," + fmt17(row.error1) + "," + fmt17(row.gcv0) + "," +
               fmt17(row.gcv1) + "\n";
    return out;
}

inline json potential_recovery_json(const PotentialRecovery& r) {
    json stages = json::array();
    for (const auto& s : r.stages)
        stages.push_back({{"reg", s.reg},
                          {"iterations", s.iterations},
                          {"objective", s.objective},
                          {"misfit", s.misfit},
                          {"last_step", s.last_step},
                          {"rejected_resonant", s.rejected_resonant},
                          {"status", s.status},
                          {"error", nan_safe(s.error)}});
    json j = {{"q_hat", real_vector_json(r.q_hat)},
              {"aborted", r.aborted},
              {"diagnostics", r.diagnostics},
              {"stages", std::move(stages)}};
    if (r.truth) {
        j["q_truth"] = real_vector_json(*r.truth);
        j["error"] = nan_safe(r.error());
    }
    return j;
}

inline std::string potential_stages_csv(const PotentialRecovery& r) {
    std::string out = "reg,iterations,objective,misfit,last_step,rejected_resonant,status,error\n";
    for (const auto& s : r.stages)
        out += fmt17(s.reg) + "," + std::to_string(s.iterations) + "," + fmt17(s.objective) + "," + fmt17(s.misfit) +
               "," + fmt17(s.last_step) + "," + std::to_string(s.rejected_resonant) + "," + s.status + "," +
               fmt17(s.error) + "\n";
    return out;
}

inline std::string runge_csv(const std::vector<RungeResult>& sweep) {
    std::string out = "reg,residual,relative\n";
    for (const auto& r : sweep) out += fmt17(r.reg) + "," + fmt17(r.residual) + "," + fmt17(r.relative) + "\n";
    return out;
}

}  // namespace fracholtz
