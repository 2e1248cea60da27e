#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fracholtz/asymptotics.hpp"
#include "fracholtz/errors.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/fracop.hpp"
#include "fracholtz/grid.hpp"
#include "fracholtz/source.hpp"

namespace fracholtz {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Field presets on Ω
// ---------------------------------------------------------------------------

/// One term of a field: constant, Gaussian a·exp(−|x−c|²/w²) or cosine a·cos(k·x + φ).
struct FieldTerm {
    enum class Kind { Constant, Gaussian, Cosine };
    Kind kind = Kind::Constant;
    Complex amplitude = 0.0;
    std::vector<double> center;
    double width = 1.0;
    std::vector<double> wavevector;
    double phase = 0.0;

    [[nodiscard]] Complex at(const Point& x, int dim) const {
        switch (kind) {
            case Kind::Constant: return amplitude;
            case Kind::Gaussian: {
                double r2 = 0.0;
                for (int k = 0; k < dim; ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
                return amplitude * std::exp(-r2 / (width * width));
            }
            case Kind::Cosine: {
                double arg = phase;
                for (int k = 0; k < dim; ++k) arg += wavevector[k] * x[k];
                return amplitude * std::cos(arg);
            }
        }
        return 0.0;
    }
};

/// Sum of terms.
struct FieldSpec {
    std::vector<FieldTerm> terms;

    static FieldSpec constant(Complex v) {
        FieldTerm t;
        t.amplitude = v;
        return FieldSpec{{t}};
    }
    static FieldSpec gaussian(Complex a, std::vector<double> center, double width) {
        FieldTerm t;
        t.kind = FieldTerm::Kind::Gaussian;
        t.amplitude = a;
        t.center = std::move(center);
        t.width = width;
        return FieldSpec{{t}};
    }
    static FieldSpec cosine(Complex a, std::vector<double> wavevector, double phase) {
        FieldTerm t;
        t.kind = FieldTerm::Kind::Cosine;
        t.amplitude = a;
        t.wavevector = std::move(wavevector);
        t.phase = phase;
        return FieldSpec{{t}};
    }
    FieldSpec operator+(const FieldSpec& o) const {
        FieldSpec out = *this;
        out.terms.insert(out.terms.end(), o.terms.begin(), o.terms.end());
        return out;
    }

    [[nodiscard]] Complex at(const Point& x, int dim) const {
        Complex v = 0.0;
        for (const auto& t : terms) v += t.at(x, dim);
        return v;
    }

    /// Values on the omega nodes.
    [[nodiscard]] Eigen::VectorXcd on_omega(const Grid& g) const {
        const auto& in = g.omega_nodes();
        Eigen::VectorXcd v(static_cast<Index>(in.size()));
        for (std::size_t k = 0; k < in.size(); ++k) v(static_cast<Index>(k)) = at(g.node(in[k]), g.dim());
        return v;
    }

    [[nodiscard]] bool is_real() const {
        for (const auto& t : terms)
            if (t.amplitude.imag() != 0.0) return false;
        return true;
    }

    [[nodiscard]] Eigen::VectorXd real_on_omega(const Grid& g) const {
        if (!is_real()) throw ConfigError("field must be real-valued here");
        return on_omega(g).real();
    }
};

// ---------------------------------------------------------------------------
// Frequency-domain bridge from the wave equation
// ---------------------------------------------------------------------------

/// Wave speed c, initial data f, g and the Taylor data of the transformed source ĥ.
struct WaveInputs {
    Eigen::VectorXd c;
    Eigen::VectorXd f;
    Eigen::VectorXd g;
    FreqSource h_hat;
};

/// q = −1/c², p0 = g/c² + ĥ(·,0), p1 = i f/c² + ∂ωĥ|₀, p2 = ½∂²ωĥ|₀, remainder from ĥ.
inline std::pair<Eigen::VectorXd, FreqSource> wave_bridge(const WaveInputs& in) {
    const Index n = in.c.size();
    if (in.f.size() != n || in.g.size() != n || in.h_hat.size() != n)
        throw ContractError("wave_bridge: inputs differ in length");
    in.h_hat.validate();
    if (!(in.c.minCoeff() >= 1e-6)) throw ContractError("wave speed must stay at least 1e-6");
    const Eigen::ArrayXd inv_c2 = in.c.array().square().inverse();
    Eigen::VectorXd q = -inv_c2.matrix();
    FreqSource src = in.h_hat;
    src.name = "wave-bridge";
    src.p0 = in.h_hat.p0 + (in.g.array() * inv_c2).matrix().cast<Complex>();
    src.p1 = in.h_hat.p1 + (Complex(0.0, 1.0) * (in.f.array() * inv_c2).cast<Complex>()).matrix();
    return {std::move(q), std::move(src)};
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct GridSpec {
    int dim = 1;
    double box_halfwidth = 4.025;
    double h = 0.05;
    Region omega;
    Region o1;
    Region o2;
};

struct WaveSpec {
    FieldSpec c, f, g, rho;
    std::array<double, 4> kappa{1.0, 0.0, 0.0, 0.0};  // κ(ω) = κ0 + κ1ω + κ2ω² + κ3ω³
};

struct SourceSpec {
    std::string preset = "taylor";  // constant | corollary | taylor | wave-bridge
    FieldSpec p0, p1, p2;           // taylor (p0 also for constant)
    double r3 = 0.0;
    FieldSpec zeta, eta;            // corollary
};

struct FreqGridSpec {
    double min = 1e-3;
    double max = 1e-1;
    int points = 8;
};

struct RegSpec {
    double min = 1e-12;
    double max = 1e-4;
    int points = 9;
    std::string select = "error";  // error (needs truth) | gcv
};

struct PotentialSpec {
    std::vector<double> frequencies{0.2, 0.4, 0.6, 0.8, 1.0};
    int excitations = 8;
    double width = 0.3;
    std::vector<double> regs{1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-10, 1e-12};
};

struct RunConfig {
    int schema_version = 1;
    GridSpec grid;
    std::string sigma = "identity";
    double s = 0.5;
    double omega0 = 1.0;
    std::string q_kind = "field";  // field | wave-speed
    FieldSpec q;
    std::optional<WaveSpec> wave;
    SourceSpec source;
    FreqGridSpec frequencies{1e-4, 1e-2, 8};
    FreqGridSpec asymptotics{1e-3, 1e-1, 8};
    int excitation_count = 2;
    double excitation_width = 0.5;
    int fit_degree = 3;
    RegSpec reg;
    PotentialSpec potential;
    FieldSpec runge_target;
    double noise = 0.0;
    std::uint64_t seed = 20240611;
    std::string output_dir = "out";
};

inline constexpr int kSchemaVersion = 1;

/// The shipped 1D default.
inline RunConfig default_config() {
    RunConfig c;
    c.grid.omega = Region{Rect{{-1.0}, {1.0}}};
    c.grid.o1 = Region{Rect{{-2.5}, {-1.0}}, Rect{{1.0}, {2.5}}};
    c.grid.o2 = c.grid.o1;
    c.q = FieldSpec::constant(0.3) + FieldSpec::gaussian(0.2, {0.0}, 0.5);
    const double half_pi = 0.5 * std::numbers::pi;
    c.source.preset = "taylor";
    c.source.p0 = FieldSpec::gaussian(1.0, {0.0}, 1.0) + FieldSpec::cosine(0.5, {1.0}, -half_pi);
    c.source.p1 = FieldSpec::cosine(0.8, {half_pi}, 0.0) + FieldSpec::constant(0.2);
    c.source.p2 = FieldSpec::cosine(0.3, {1.0}, -half_pi);
    c.source.r3 = 0.1;
    c.runge_target = FieldSpec::gaussian(1.0, {0.0}, 0.5);
    return c;
}

// ---- JSON encoding ---------------------------------------------------------

namespace detail {

inline json complex_json(Complex v) {
    if (v.imag() == 0.0) return v.real();
    return json::array({v.real(), v.imag()});
}

inline json region_json(const Region& r) {
    json out = json::array();
    for (const auto& shape : r.shapes) {
        if (const auto* rect = std::get_if<Rect>(&shape))
            out.push_back({{"rect", {{"lo", rect->lo}, {"hi", rect->hi}}}});
        else {
            const auto& d = std::get<Disc>(shape);
            out.push_back({{"disc", {{"center", d.center}, {"radius", d.radius}}}});
        }
    }
    return out;
}

inline json field_json(const FieldSpec& f) {
    json out = json::array();
    for (const auto& t : f.terms) {
        switch (t.kind) {
            case FieldTerm::Kind::Constant: out.push_back({{"type", "constant"}, {"value", complex_json(t.amplitude)}}); break;
            case FieldTerm::Kind::Gaussian:
                out.push_back({{"type", "gaussian"}, {"amplitude", complex_json(t.amplitude)}, {"center", t.center},
                               {"width", t.width}});
                break;
            case FieldTerm::Kind::Cosine:
                out.push_back({{"type", "cosine"}, {"amplitude", complex_json(t.amplitude)},
                               {"wavevector", t.wavevector}, {"phase", t.phase}});
                break;
        }
    }
    return out;
}

inline json freq_json(const FreqGridSpec& f) { return {{"min", f.min}, {"max", f.max}, {"points", f.points}}; }

}  // namespace detail

/// Canonical JSON form (every field present, keys sorted by the json type).
inline json config_to_json(const RunConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["grid"] = {{"dim", c.grid.dim},
                 {"box_halfwidth", c.grid.box_halfwidth},
                 {"h", c.grid.h},
                 {"omega", detail::region_json(c.grid.omega)},
                 {"o1", detail::region_json(c.grid.o1)},
                 {"o2", detail::region_json(c.grid.o2)}};
    j["sigma"] = c.sigma;
    j["s"] = c.s;
    j["omega0"] = c.omega0;
    if (c.q_kind == "wave-speed") j["q"] = {{"kind", "wave-speed"}};
    else j["q"] = {{"kind", "field"}, {"field", detail::field_json(c.q)}};
    if (c.wave) {
        j["wave"] = {{"c", detail::field_json(c.wave->c)},
                     {"f", detail::field_json(c.wave->f)},
                     {"g", detail::field_json(c.wave->g)},
                     {"rho", detail::field_json(c.wave->rho)},
                     {"kappa", c.wave->kappa}};
    }
    json src = {{"preset", c.source.preset}};
    if (c.source.preset == "constant") src["p0"] = detail::field_json(c.source.p0);
    if (c.source.preset == "taylor") {
        src["p0"] = detail::field_json(c.source.p0);
        src["p1"] = detail::field_json(c.source.p1);
        src["p2"] = detail::field_json(c.source.p2);
        src["r3"] = c.source.r3;
    }
    if (c.source.preset == "corollary") {
        src["zeta"] = detail::field_json(c.source.zeta);
        src["eta"] = detail::field_json(c.source.eta);
    }
    j["source"] = src;
    j["frequencies"] = detail::freq_json(c.frequencies);
    j["asymptotics"] = detail::freq_json(c.asymptotics);
    j["excitations"] = {{"count", c.excitation_count}, {"width", c.excitation_width}};
    j["fit_degree"] = c.fit_degree;
    j["reg"] = {{"min", c.reg.min}, {"max", c.reg.max}, {"points", c.reg.points}, {"select", c.reg.select}};
    j["potential"] = {{"frequencies", c.potential.frequencies},
                      {"excitations", c.potential.excitations},
                      {"width", c.potential.width},
                      {"regs", c.potential.regs}};
    j["runge"] = {{"target", detail::field_json(c.runge_target)}};
    j["noise"] = c.noise;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

// ---- JSON decoding with field-path diagnostics ------------------------------

namespace detail {

/// Read-only cursor into the config tree that remembers its JSON-pointer path.
class Cursor {
public:
    Cursor(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const json& raw() const { return *j_; }
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config field " + (path_.empty() ? std::string("/") : path_) + ": " + what);
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    [[nodiscard]] Cursor at(const std::string& key) const {
        if (!j_->is_object()) fail("expected an object");
        if (!j_->contains(key)) Cursor(*j_, path_ + "/" + key).fail("missing required field");
        return Cursor((*j_)[key], path_ + "/" + key);
    }
    [[nodiscard]] Cursor at(std::size_t k) const { return Cursor((*j_)[k], path_ + "/" + std::to_string(k)); }

    void allow_only(std::initializer_list<const char*> keys) const {
        if (!j_->is_object()) fail("expected an object");
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) Cursor(it.value(), path_ + "/" + it.key()).fail("unknown field");
        }
    }

    [[nodiscard]] double number() const {
        if (!j_->is_number()) fail("expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    [[nodiscard]] double positive() const {
        const double v = number();
        if (!(v > 0.0)) fail("must be positive");
        return v;
    }
    [[nodiscard]] long long integer() const {
        if (!j_->is_number_integer()) fail("expected an integer");
        return j_->get<long long>();
    }
    [[nodiscard]] std::uint64_t unsigned64() const {
        if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0))
            fail("expected a nonnegative integer");
        return j_->get<std::uint64_t>();
    }
    [[nodiscard]] std::string string() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }
    [[nodiscard]] std::size_t array_size() const {
        if (!j_->is_array()) fail("expected an array");
        return j_->size();
    }
    [[nodiscard]] std::vector<double> numbers(std::size_t expected = 0) const {
        const std::size_t n = array_size();
        if (expected && n != expected) fail("expected " + std::to_string(expected) + " entries");
        std::vector<double> out;
        for (std::size_t k = 0; k < n; ++k) out.push_back(at(k).number());
        return out;
    }
    [[nodiscard]] Complex complex() const {
        if (j_->is_number()) return number();
        if (j_->is_array() && j_->size() == 2) return {at(0).number(), at(1).number()};
        fail("expected a number or a [re, im] pair");
    }

private:
    const json* j_;
    std::string path_;
};

inline Region parse_region(const Cursor& c, int dim) {
    Region r;
    const std::size_t n = c.array_size();
    if (n == 0) c.fail("region needs at least one shape");
    for (std::size_t k = 0; k < n; ++k) {
        const Cursor s = c.at(k);
        if (s.has("rect")) {
            s.allow_only({"rect"});
            const Cursor b = s.at("rect");
            b.allow_only({"lo", "hi"});
            Rect rect{b.at("lo").numbers(static_cast<std::size_t>(dim)), b.at("hi").numbers(static_cast<std::size_t>(dim))};
            for (int d = 0; d < dim; ++d)
                if (!(rect.lo[static_cast<std::size_t>(d)] < rect.hi[static_cast<std::size_t>(d)])) b.fail("lo must be below hi");
            r.shapes.emplace_back(std::move(rect));
        } else if (s.has("disc")) {
            s.allow_only({"disc"});
            const Cursor b = s.at("disc");
            b.allow_only({"center", "radius"});
            r.shapes.emplace_back(Disc{b.at("center").numbers(static_cast<std::size_t>(dim)), b.at("radius").positive()});
        } else {
            s.fail("expected {\"rect\": ...} or {\"disc\": ...}");
        }
    }
    return r;
}

inline FieldTerm parse_term(const Cursor& c, int dim) {
    FieldTerm t;
    const std::string type = c.at("type").string();
    const auto d = static_cast<std::size_t>(dim);
    if (type == "constant") {
        c.allow_only({"type", "value"});
        t.kind = FieldTerm::Kind::Constant;
        t.amplitude = c.at("value").complex();
    } else if (type == "gaussian") {
        c.allow_only({"type", "amplitude", "center", "width"});
        t.kind = FieldTerm::Kind::Gaussian;
        t.amplitude = c.at("amplitude").complex();
        t.center = c.at("center").numbers(d);
        t.width = c.at("width").positive();
    } else if (type == "cosine") {
        c.allow_only({"type", "amplitude", "wavevector", "phase"});
        t.kind = FieldTerm::Kind::Cosine;
        t.amplitude = c.at("amplitude").complex();
        t.wavevector = c.at("wavevector").numbers(d);
        t.phase = c.has("phase") ? c.at("phase").number() : 0.0;
    } else {
        c.at("type").fail("unknown field type '" + type + "' (constant, gaussian, cosine)");
    }
    return t;
}

/// A field is a single term object or an array of terms.
inline FieldSpec parse_field(const Cursor& c, int dim) {
    FieldSpec f;
    if (c.raw().is_object()) {
        f.terms.push_back(parse_term(c, dim));
        return f;
    }
    const std::size_t n = c.array_size();
    if (n == 0) c.fail("field needs at least one term");
    for (std::size_t k = 0; k < n; ++k) f.terms.push_back(parse_term(c.at(k), dim));
    return f;
}

inline FreqGridSpec parse_freq(const Cursor& c) {
    c.allow_only({"min", "max", "points"});
    FreqGridSpec f{c.at("min").positive(), c.at("max").positive(), static_cast<int>(c.at("points").integer())};
    if (f.max < f.min) c.at("max").fail("must not be below min");
    if (f.points < 1) c.at("points").fail("must be at least 1");
    return f;
}

inline void require_real(const Cursor& c, const FieldSpec& f) {
    if (!f.is_real()) c.fail("field must be real-valued");
}

}  // namespace detail

/// Parses and validates a configuration tree. Missing optional sections take
/// their defaults; unknown keys are rejected.
inline RunConfig config_from_json(const json& j) {
    const detail::Cursor root(j, "");
    if (!j.is_object()) root.fail("config must be a JSON object");
    root.allow_only({"schema_version", "grid", "sigma", "s", "omega0", "q", "wave", "source", "frequencies",
                     "asymptotics", "excitations", "fit_degree", "reg", "potential", "runge", "noise", "seed",
                     "output_dir"});
    RunConfig c;
    c.schema_version = static_cast<int>(root.at("schema_version").integer());
    if (c.schema_version != kSchemaVersion)
        root.at("schema_version").fail("unsupported schema version " + std::to_string(c.schema_version) +
                                       " (expected " + std::to_string(kSchemaVersion) + ")");

    const auto g = root.at("grid");
    g.allow_only({"dim", "box_halfwidth", "h", "omega", "o1", "o2"});
    c.grid.dim = static_cast<int>(g.at("dim").integer());
    if (c.grid.dim != 1 && c.grid.dim != 2) g.at("dim").fail("must be 1 or 2");
    const int dim = c.grid.dim;
    c.grid.box_halfwidth = g.at("box_halfwidth").positive();
    c.grid.h = g.at("h").positive();
    c.grid.omega = detail::parse_region(g.at("omega"), dim);
    c.grid.o1 = detail::parse_region(g.at("o1"), dim);
    c.grid.o2 = detail::parse_region(g.at("o2"), dim);

    if (root.has("sigma")) {
        c.sigma = root.at("sigma").string();
        try {
            (void)EllipticTensor::parse(c.sigma, dim);
        } catch (const AssemblyError& e) {
            root.at("sigma").fail(e.what());
        }
    }
    if (root.has("s")) c.s = root.at("s").number();
    if (!(c.s > 0.0 && c.s < 1.0)) root.at("s").fail("must lie in (0, 1)");
    if (root.has("omega0")) c.omega0 = root.at("omega0").positive();

    if (root.has("wave")) {
        const auto w = root.at("wave");
        w.allow_only({"c", "f", "g", "rho", "kappa"});
        WaveSpec ws;
        ws.c = detail::parse_field(w.at("c"), dim);
        detail::require_real(w.at("c"), ws.c);
        ws.f = detail::parse_field(w.at("f"), dim);
        detail::require_real(w.at("f"), ws.f);
        ws.g = detail::parse_field(w.at("g"), dim);
        detail::require_real(w.at("g"), ws.g);
        ws.rho = detail::parse_field(w.at("rho"), dim);
        const auto k = w.at("kappa").numbers(4);
        std::copy(k.begin(), k.end(), ws.kappa.begin());
        c.wave = ws;
    }

    const auto q = root.at("q");
    c.q_kind = q.at("kind").string();
    if (c.q_kind == "field") {
        q.allow_only({"kind", "field"});
        c.q = detail::parse_field(q.at("field"), dim);
        detail::require_real(q.at("field"), c.q);
    } else if (c.q_kind == "wave-speed") {
        q.allow_only({"kind"});
        if (!c.wave) q.at("kind").fail("wave-speed q needs a \"wave\" section");
    } else {
        q.at("kind").fail("unknown q kind '" + c.q_kind + "' (field, wave-speed)");
    }

    const auto s = root.at("source");
    c.source.preset = s.at("preset").string();
    if (c.source.preset == "constant") {
        s.allow_only({"preset", "p0"});
        c.source.p0 = detail::parse_field(s.at("p0"), dim);
    } else if (c.source.preset == "taylor") {
        s.allow_only({"preset", "p0", "p1", "p2", "r3"});
        c.source.p0 = detail::parse_field(s.at("p0"), dim);
        c.source.p1 = detail::parse_field(s.at("p1"), dim);
        c.source.p2 = detail::parse_field(s.at("p2"), dim);
        c.source.r3 = s.has("r3") ? s.at("r3").number() : 0.0;
        if (c.source.r3 < 0.0) s.at("r3").fail("must be nonnegative");
    } else if (c.source.preset == "corollary") {
        s.allow_only({"preset", "zeta", "eta"});
        c.source.zeta = detail::parse_field(s.at("zeta"), dim);
        c.source.eta = detail::parse_field(s.at("eta"), dim);
    } else if (c.source.preset == "wave-bridge") {
        s.allow_only({"preset"});
        if (!c.wave) s.at("preset").fail("wave-bridge needs a \"wave\" section");
        if (c.q_kind != "wave-speed") s.at("preset").fail("wave-bridge requires q.kind = wave-speed (q = -1/c^2)");
    } else {
        s.at("preset").fail("unknown source preset '" + c.source.preset + "' (constant, corollary, taylor, wave-bridge)");
    }

    if (root.has("frequencies")) c.frequencies = detail::parse_freq(root.at("frequencies"));
    if (c.frequencies.max > c.omega0) root.at("frequencies").at("max").fail("must not exceed omega0");
    if (root.has("asymptotics")) c.asymptotics = detail::parse_freq(root.at("asymptotics"));
    if (c.asymptotics.max > c.omega0) root.at("asymptotics").at("max").fail("must not exceed omega0");
    if (root.has("excitations")) {
        const auto e = root.at("excitations");
        e.allow_only({"count", "width"});
        c.excitation_count = static_cast<int>(e.at("count").integer());
        if (c.excitation_count < 0) e.at("count").fail("must be nonnegative");
        c.excitation_width = e.at("width").positive();
    }
    if (root.has("fit_degree")) {
        c.fit_degree = static_cast<int>(root.at("fit_degree").integer());
        if (c.fit_degree < 1) root.at("fit_degree").fail("must be at least 1");
    }
    if (c.frequencies.points < c.fit_degree + 2)
        root.at("frequencies").at("points").fail("needs at least fit_degree + 2 points");
    if (root.has("reg")) {
        const auto r = root.at("reg");
        r.allow_only({"min", "max", "points", "select"});
        c.reg.min = r.at("min").positive();
        c.reg.max = r.at("max").positive();
        c.reg.points = static_cast<int>(r.at("points").integer());
        if (c.reg.max < c.reg.min) r.at("max").fail("must not be below min");
        if (c.reg.points < 1) r.at("points").fail("must be at least 1");
        if (r.has("select")) c.reg.select = r.at("select").string();
        if (c.reg.select != "error" && c.reg.select != "gcv") r.at("select").fail("must be \"error\" or \"gcv\"");
    }
    if (root.has("potential")) {
        const auto p = root.at("potential");
        p.allow_only({"frequencies", "excitations", "width", "regs"});
        c.potential.frequencies = p.at("frequencies").numbers();
        if (c.potential.frequencies.empty()) p.at("frequencies").fail("needs at least one frequency");
        for (std::size_t k = 0; k < c.potential.frequencies.size(); ++k) {
            const double w = c.potential.frequencies[k];
            if (!(w > 0.0 && w <= c.omega0)) p.at("frequencies").at(k).fail("must lie in (0, omega0]");
        }
        c.potential.excitations = static_cast<int>(p.at("excitations").integer());
        if (c.potential.excitations < 1) p.at("excitations").fail("must be at least 1");
        c.potential.width = p.at("width").positive();
        c.potential.regs = p.at("regs").numbers();
        if (c.potential.regs.empty()) p.at("regs").fail("needs at least one value");
        for (std::size_t k = 0; k < c.potential.regs.size(); ++k)
            if (!(c.potential.regs[k] > 0.0)) p.at("regs").at(k).fail("must be positive");
    }
    if (root.has("runge")) {
        const auto r = root.at("runge");
        r.allow_only({"target"});
        c.runge_target = detail::parse_field(r.at("target"), dim);
    } else {
        c.runge_target = FieldSpec::gaussian(1.0, std::vector<double>(static_cast<std::size_t>(dim), 0.0), 0.5);
    }
    if (root.has("noise")) {
        c.noise = root.at("noise").number();
        if (c.noise < 0.0) root.at("noise").fail("must be nonnegative");
    }
    if (root.has("seed")) c.seed = root.at("seed").unsigned64();
    if (root.has("output_dir")) c.output_dir = root.at("output_dir").string();
    return c;
}

/// Parses config text; syntax errors report line and column.
inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::string canonical_config(const RunConfig& c) { return config_to_json(c).dump(); }

/// FNV-1a 64-bit hash of the data-generating part of the canonical config
/// (output_dir and reconstruction settings excluded).
inline std::string config_fingerprint(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("output_dir");
    j.erase("reg");
    j.erase("runge");
    j["potential"].erase("regs");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Building scenarios from a config
// ---------------------------------------------------------------------------

inline GridPtr build_config_grid(const GridSpec& g) {
    return make_grid(g.dim, g.box_halfwidth, g.h, g.omega, g.o1, g.o2);
}

/// Fixed smooth profile sin(3·Σx + 0.5), normalized to unit L²(Ω).
inline Eigen::VectorXcd remainder_profile(const Grid& g) {
    const auto& in = g.omega_nodes();
    Eigen::VectorXcd v(static_cast<Index>(in.size()));
    for (std::size_t k = 0; k < in.size(); ++k) {
        double s = 0.5;
        for (int d = 0; d < g.dim(); ++d) s += 3.0 * g.node(in[k])[d];
        v(static_cast<Index>(k)) = std::sin(s);
    }
    const double norm = v.norm() * std::sqrt(g.cell_volume());
    if (norm == 0.0) throw ContractError("remainder profile vanishes on omega");
    return v / norm;
}

/// Taylor source with remainder r(ω) = R₃ ω³ · profile, so ‖r‖_{L²} = R₃ω³ exactly.
inline FreqSource taylor_source(const Grid& g, Eigen::VectorXcd p0, Eigen::VectorXcd p1, Eigen::VectorXcd p2,
                                double r3, double omega0) {
    FreqSource src;
    src.name = "taylor";
    src.p0 = std::move(p0);
    src.p1 = std::move(p1);
    src.p2 = std::move(p2);
    src.omega0 = omega0;
    src.remainder_bound = r3;
    if (r3 > 0.0) {
        Eigen::VectorXcd profile = remainder_profile(g);
        src.remainder = [profile, r3](double w) -> Eigen::VectorXcd { return (r3 * w * w * w) * profile; };
    }
    return src;
}

inline WaveInputs wave_inputs(const Grid& g, const WaveSpec& w, double omega0) {
    WaveInputs in;
    in.c = w.c.real_on_omega(g);
    in.f = w.f.real_on_omega(g);
    in.g = w.g.real_on_omega(g);
    const Eigen::VectorXcd rho = w.rho.on_omega(g);
    FreqSource h;
    h.name = "h_hat";
    h.p0 = w.kappa[0] * rho;
    h.p1 = w.kappa[1] * rho;
    h.p2 = w.kappa[2] * rho;
    h.omega0 = omega0;
    h.remainder_bound = std::abs(w.kappa[3]) * rho.norm() * std::sqrt(g.cell_volume());
    if (w.kappa[3] != 0.0) {
        const double k3 = w.kappa[3];
        h.remainder = [rho, k3](double om) -> Eigen::VectorXcd { return (k3 * om * om * om) * rho; };
    }
    in.h_hat = std::move(h);
    return in;
}

inline Eigen::VectorXd config_q(const RunConfig& c, const Grid& g) {
    if (c.q_kind == "wave-speed") return wave_bridge(wave_inputs(g, *c.wave, c.omega0)).first;
    return c.q.real_on_omega(g);
}

inline FreqSource config_source(const RunConfig& c, const Grid& g) {
    const auto& s = c.source;
    if (s.preset == "constant") return FreqSource::constant(s.p0.on_omega(g), c.omega0);
    if (s.preset == "corollary")
        return FreqSource::affine(s.zeta.on_omega(g), s.eta.on_omega(g), c.omega0, "corollary");
    if (s.preset == "taylor")
        return taylor_source(g, s.p0.on_omega(g), s.p1.on_omega(g), s.p2.on_omega(g), s.r3, c.omega0);
    if (s.preset == "wave-bridge") return wave_bridge(wave_inputs(g, *c.wave, c.omega0)).second;
    throw ConfigError("unknown source preset '" + s.preset + "'");
}

/// Excitation family: id 0 is ψ ≡ 0, ids 1..count are smooth bumps of radius
/// `width` centered on a deterministic lattice of O1 nodes and cut to O1.
inline std::vector<GridFunction> make_excitations(const GridPtr& grid, int count, double width) {
    std::vector<GridFunction> out{GridFunction::zeros(grid)};
    const auto& o1 = grid->o1_nodes();
    const auto m = static_cast<double>(o1.size());
    for (int j = 0; j < count; ++j) {
        const auto pick = static_cast<std::size_t>(std::floor((j + 0.5) * m / count));
        out.push_back(bump_on(grid, grid->node(o1[std::min(pick, o1.size() - 1)]), width, grid->o1_mask()));
    }
    return out;
}

struct ConfiguredProblem {
    RunConfig config;
    Scenario scenario;
    std::vector<GridFunction> excitations;

    [[nodiscard]] const Grid& grid() const { return scenario.grid(); }
    [[nodiscard]] std::vector<double> frequencies() const {
        return geometric_grid(config.frequencies.min, config.frequencies.max, config.frequencies.points);
    }
};

/// Assembles grid, operator, q and source for a config. Pass `system` to reuse
/// an operator already built for the same grid, σ and s.
inline ConfiguredProblem build_problem(const RunConfig& c, SystemPtr system = nullptr) {
    if (!system) {
        const GridPtr grid = build_config_grid(c.grid);
        system = make_system(grid, EllipticTensor::parse(c.sigma, c.grid.dim), c.s);
    }
    const Grid& g = *system->grid;
    Scenario sc = make_scenario(system, config_q(c, g), config_source(c, g), c.omega0, "config");
    auto exc = make_excitations(system->grid, c.excitation_count, c.excitation_width);
    return ConfiguredProblem{c, std::move(sc), std::move(exc)};
}

}  // namespace fracholtz
