#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fracholtz/cli.hpp"
#include "fracholtz/io.hpp"
#include "fracholtz/scenarios.hpp"

using namespace fracholtz;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fracholtz_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    write_text(p, j.dump(2));
    return p;
}

int run(const std::string& command, const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed = {}) {
    cli::Options o;
    o.command = command;
    o.config_path = config.string();
    o.out_dir = out.string();
    o.seed = seed;
    std::ostringstream log, err;
    return cli::run_command(o, log, err);
}

}  // namespace

TEST(Config, RoundTripIsCanonical) {
    const RunConfig c = default_config();
    const RunConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(canonical_config(back), canonical_config(c));
    EXPECT_EQ(config_fingerprint(back), config_fingerprint(c));
}

TEST(Config, ShippedFileMatchesDefault) {
    const RunConfig c = load_config(FRACHOLTZ_SOURCE_DIR "/configs/default.json");
    EXPECT_EQ(canonical_config(c), canonical_config(default_config()));
}

TEST(Config, ErrorsNameTheField) {
    json j = config_to_json(default_config());
    j["grid"]["bogus"] = 1;
    try {
        config_from_json(j);
        FAIL() << "unknown key accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/grid"), std::string::npos) << e.what();
    }
    json v = config_to_json(default_config());
    v["schema_version"] = 99;
    EXPECT_THROW(config_from_json(v), ConfigError);
    json w = config_to_json(default_config());
    w["grid"]["h"] = "small";
    EXPECT_THROW(config_from_json(w), ConfigError);
    EXPECT_THROW(parse_config("{\"schema_version\": 1,"), ConfigError);
}

TEST(Config, FingerprintIgnoresOutputAndReconstructionSettings) {
    RunConfig a = default_config();
    RunConfig b = a;
    b.output_dir = "elsewhere";
    b.reg.min = 1e-9;
    b.potential.regs = {1e-3};
    EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
    b.grid.h = 0.025;
    EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
    RunConfig c = a;
    c.seed += 1;
    EXPECT_NE(config_fingerprint(a), config_fingerprint(c));
}

TEST(WaveBridge, PotentialIsMinusInverseSquareSpeed) {
    WaveInputs in;
    in.c = Eigen::VectorXd::Constant(3, 2.0);
    in.f = Eigen::VectorXd::Constant(3, 1.0);
    in.g = Eigen::VectorXd::Constant(3, 0.5);
    in.h_hat = FreqSource::constant(Eigen::VectorXcd::Zero(3), 1.0);
    const auto [q, src] = wave_bridge(in);
    EXPECT_DOUBLE_EQ(q(0), -0.25);
    EXPECT_EQ(src.size(), 3);
    in.c(1) = 0.0;
    EXPECT_THROW(wave_bridge(in), ContractError);
}

TEST(Excitations, FirstIsZeroRestSupportedOnO1) {
    const ConfiguredProblem p = build_problem(default_config());
    ASSERT_EQ(p.excitations.size(), 3u);
    EXPECT_EQ(p.excitations[0].values().norm(), 0.0);
    for (std::size_t j = 1; j < p.excitations.size(); ++j) {
        EXPECT_GT(p.excitations[j].values().norm(), 0.0);
        for (Index i = 0; i < p.grid().size(); ++i)
            if (!p.grid().o1_mask()[static_cast<std::size_t>(i)]) { EXPECT_EQ(p.excitations[j](i), Complex(0.0)); }
    }
}

TEST(Dataset, JsonRoundTripIsExact) {
    const ConfiguredProblem p = build_problem(default_config());
    const auto recs = sweep(p.scenario, p.excitations[1], p.frequencies(), 1);
    const DtnDataset ds = make_dataset(p.grid(), config_fingerprint(p.config), recs);
    const DtnDataset back = dataset_from_json(json::parse(dataset_to_json(ds).dump()), &p.grid());
    ASSERT_EQ(back.records.size(), recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) {
        EXPECT_EQ(back.records[k].omega, recs[k].omega);
        EXPECT_EQ((back.records[k].measurement - recs[k].measurement).norm(), 0.0);
    }
    EXPECT_EQ(dataset_csv(back), dataset_csv(ds));
    const std::string csv = dataset_csv(ds);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')),
              1 + recs.size() * p.grid().o2_nodes().size());
}

TEST(Dataset, RejectsForeignDocuments) {
    EXPECT_THROW(dataset_from_json(json{{"kind", "other"}}), ConfigError);
    json j = dataset_to_json(DtnDataset{});
    j["records"] = json::array({json{{"excitation_id", 0}, {"omega", 0.1}, {"re", {1.0}}, {"im", {0.0}}}});
    EXPECT_THROW(dataset_from_json(j), ConfigError);
}

TEST(Format, SeventeenDigitsRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) EXPECT_EQ(std::stod(fmt17(v)), v);
}

TEST(Cli, SweepIsDeterministicAndInvertSourceUsesIt) {
    const fs::path dir = scratch("cli_sweep");
    const fs::path cfg = write_config(dir, config_to_json(default_config()));
    ASSERT_EQ(run("sweep", cfg, dir / "a"), cli::kOk);
    ASSERT_EQ(run("sweep", cfg, dir / "b"), cli::kOk);
    EXPECT_EQ(read_text(dir / "a" / "dtn_dataset.csv"), read_text(dir / "b" / "dtn_dataset.csv"));
    EXPECT_EQ(read_text(dir / "a" / "dtn_dataset.json"), read_text(dir / "b" / "dtn_dataset.json"));

    ASSERT_EQ(run("invert-source", cfg, dir / "a"), cli::kOk);
    const json rec = read_json(dir / "a" / "recovery_source.json");
    ASSERT_EQ(rec["results"].size(), 3u);
    for (const auto& r : rec["results"]) EXPECT_LT(r["error0"].get<double>(), 1e-2);
    // data produced under another seed does not belong to this config
    EXPECT_EQ(run("invert-source", cfg, dir / "a", 7), cli::kValidation);
}

TEST(Cli, ValidationAndNumericalExitCodes) {
    const fs::path dir = scratch("cli_codes");
    json bad = config_to_json(default_config());
    bad["s"] = 1.5;
    EXPECT_EQ(run("forward", write_config(dir, bad), dir / "o"), cli::kValidation);
    EXPECT_EQ(run("forward", dir / "missing.json", dir / "o"), cli::kValidation);
    EXPECT_EQ(run("nonsense", write_config(dir, config_to_json(default_config())), dir / "o"), cli::kValidation);

    // the far field at 10h from the box edge is empty: the embedding constant degenerates
    json tight = config_to_json(default_config());
    tight["grid"]["box_halfwidth"] = 1.45;
    tight["grid"]["h"] = 0.1;
    tight["grid"]["o1"] = json::array({json{{"rect", {{"lo", {-1.4}}, {"hi", {-1.0}}}}},
                                      json{{"rect", {{"lo", {1.0}}, {"hi", {1.4}}}}}});
    tight["grid"]["o2"] = tight["grid"]["o1"];
    EXPECT_EQ(run("asym", write_config(dir, tight), dir / "o"), cli::kNumerical);
}

TEST(Cli, ForwardRungeAndAsymWriteTheirArtifacts) {
    const fs::path dir = scratch("cli_misc");
    const fs::path cfg = write_config(dir, config_to_json(default_config()));
    EXPECT_EQ(run("forward", cfg, dir), cli::kOk);
    EXPECT_EQ(run("dtn", cfg, dir), cli::kOk);
    EXPECT_EQ(run("asym", cfg, dir), cli::kOk);
    EXPECT_EQ(run("runge", cfg, dir), cli::kOk);
    for (const char* f : {"forward.csv", "forward.json", "dtn_record.json", "asymptotics.csv", "asymptotics.json",
                          "runge.csv", "runge.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const json asym = read_json(dir / "asymptotics.json");
    EXPECT_TRUE(asym["bound_holds"].get<bool>());
    EXPECT_LT(read_json(dir / "runge.json")["relative"].get<double>(), 0.1);
}
