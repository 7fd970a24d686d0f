#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "nlbsm/cli/config.hpp"
#include "nlbsm/cli/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kTool = NLBSM_TOOL_PATH;
const fs::path kSource = NLBSM_SOURCE_DIR;

struct Outcome {
    int status = -1;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("nlbsm_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }

    Outcome tool(const std::string& args) const {
        const fs::path err = dir / "stderr.txt";
        const std::string cmd = "\"" + kTool.string() + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                                "\" 2> \"" + err.string() + "\"";
        const int raw = std::system(cmd.c_str());
        Outcome o;
        o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        o.err = read(err);
        return o;
    }

    Outcome run(const std::string& command, const fs::path& config, const fs::path& out,
                const std::string& extra = "") const {
        return tool(command + " --config \"" + config.string() + "\" --out \"" + out.string() + "\" " + extra);
    }

    static std::string read(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    double at(std::size_t row, const std::string& col) const {
        const auto it = std::find(header.begin(), header.end(), col);
        if (it == header.end()) throw std::runtime_error("no column " + col);
        return rows.at(row).at(static_cast<std::size_t>(it - header.begin()));
    }
};

Csv read_csv(const fs::path& p) {
    std::ifstream in(p);
    Csv c;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            c.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        for (const auto& s : cells) row.push_back(std::stod(s));
        c.rows.push_back(row);
    }
    return c;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

} // namespace

TEST_F(CliTest, VersionHelpAndUsageErrors) {
    EXPECT_EQ(tool("--version").status, 0);
    EXPECT_EQ(tool("--help").status, 0);
    EXPECT_EQ(tool("").status, 2);
    EXPECT_EQ(tool("nonsense").status, 2);
    EXPECT_EQ(tool("rates --config \"" + (dir / "missing.toml").string() + "\"").status, 2);
    const fs::path cfg = write("r.toml", "[rates]\np_b_si = 0.01\n");
    EXPECT_EQ(run("rates", cfg, dir / "o", "--format xml").status, 2);
}

TEST_F(CliTest, ConfigErrorsExitWithTwoAndNameTheLine) {
    const fs::path bad = write("bad.toml", "[PairSource]\np_si = 0.3\n");
    Outcome o = run("teleport-curve", bad, dir / "o1");
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.err.find("bad.toml:2"), std::string::npos) << o.err;
    EXPECT_NE(o.err.find("PairSource.p_si"), std::string::npos) << o.err;

    const fs::path unknown = write("unknown.toml", "[rates]\np_b_si = 0.01\nclock = 1e9\n");
    o = run("rates", unknown, dir / "o2");
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.err.find("unknown.toml:3"), std::string::npos) << o.err;
    EXPECT_NE(o.err.find("rates.clock"), std::string::npos) << o.err;

    const fs::path section = write("section.toml", "[ratez]\np_b_si = 0.01\n");
    o = run("rates", section, dir / "o3");
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.err.find("ratez"), std::string::npos) << o.err;

    const fs::path syntax = write("syntax.toml", "[rates\n");
    EXPECT_EQ(run("rates", syntax, dir / "o4").status, 2);

    const fs::path csv = write("c.csv", "phase_setting,detector,bin,counts\n0,7,e,1\n");
    const fs::path tomo = write("t.toml", "[tomography]\ncounts_csv = \"c.csv\"\ntarget = \"e\"\n");
    o = run("tomo", tomo, dir / "o5");
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.err.find("c.csv:2"), std::string::npos) << o.err;
}

TEST_F(CliTest, NumericalFailuresExitWithThree) {
    std::string counts = "phase_setting,detector,bin,counts\n";
    for (const char* phase : {"0", "pi/2"})
        for (const char* det : {"1", "2"})
            for (const char* bin : {"e", "l", "ll"}) {
                const bool time_basis = std::string(phase) == "0" && std::string(bin) != "l";
                counts += std::string(phase) + "," + det + "," + bin + "," + (time_basis ? "0" : "40") + "\n";
            }
    write("zero.csv", counts);
    const fs::path cfg = write("t.toml", "[tomography]\ncounts_csv = \"zero.csv\"\ntarget = \"+\"\n");
    const Outcome o = run("tomo", cfg, dir / "o");
    EXPECT_EQ(o.status, 3);
    EXPECT_NE(o.err.find("degenerate"), std::string::npos) << o.err;
}

TEST_F(CliTest, SimulationArtifactsAreReproducible) {
    const fs::path cfg = kSource / "configs" / "full_experiment.toml";
    ASSERT_EQ(run("simulate", cfg, dir / "a", "--shots 20000 --threads 1").status, 0);
    ASSERT_EQ(run("simulate", cfg, dir / "b", "--shots 20000 --threads 3").status, 0);
    const json manifest = read_json(dir / "a" / "manifest.json");
    ASSERT_FALSE(manifest["artifacts"].empty());
    for (const auto& a : manifest["artifacts"]) {
        const std::string file = a["file"];
        EXPECT_EQ(read(dir / "a" / file), read(dir / "b" / file)) << file;
    }
    json other = read_json(dir / "b" / "manifest.json");
    json mine = manifest;
    mine.erase("timestamp");
    other.erase("timestamp");
    EXPECT_EQ(mine, other);

    const json sim = read_json(dir / "a" / "simulate.json");
    EXPECT_EQ(sim["states"].size(), 6u);
    EXPECT_GT(sim["average_fidelity"].get<double>(), 0.93);
    EXPECT_LT(sim["average_fidelity"].get<double>(), 0.97);
}

TEST_F(CliTest, ManifestRecordsDigestSeedAndColumns) {
    const fs::path cfg = kSource / "configs" / "swap.toml";
    ASSERT_EQ(run("simulate", cfg, dir / "o", "--shots 50000 --seed 99").status, 0);
    const json m = read_json(dir / "o" / "manifest.json");
    const auto config = nlbsm::cli::Config::parse_file(cfg);
    EXPECT_EQ(m["config_digest"], "sha256:" + nlbsm::cli::sha256_hex(config.canonical()));
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["seed"], 99);
    EXPECT_EQ(m["shots"], 50000);
    EXPECT_EQ(m["tool_version"], std::string(nlbsm::cli::kToolVersion));
    EXPECT_FALSE(m["timestamp"].get<std::string>().empty());

    const json sim = read_json(dir / "o" / "simulate.json");
    const double f = sim["monte_carlo"]["f_hat"];
    const double se = sim["monte_carlo"]["std_error"];
    EXPECT_LT(std::abs(f - sim["brute_force"]["fidelity"].get<double>()), 4.0 * se);
    EXPECT_NEAR(sim["closed_form"]["fidelity"].get<double>(), sim["brute_force"]["fidelity"].get<double>(), 1e-10);

    ASSERT_EQ(run("swap-curves", cfg, dir / "c").status, 0);
    const json mc = read_json(dir / "c" / "manifest.json");
    EXPECT_TRUE(mc["seed"].is_null());
    const Csv csv = read_csv(dir / "c" / "swap_curves.csv");
    EXPECT_EQ(mc["artifacts"][0]["columns"].get<std::vector<std::string>>(), csv.header);
}

TEST_F(CliTest, SwapCurvesReachTheirLimits) {
    ASSERT_EQ(run("swap-curves", kSource / "configs" / "swap.toml", dir / "o").status, 0);
    const Csv c = read_csv(dir / "o" / "swap_curves.csv");
    ASSERT_EQ(c.rows.size(), 41u);
    EXPECT_NEAR(c.at(0, "p_si"), 1e-4, 1e-18);
    EXPECT_NEAR(c.at(40, "p_si"), 0.2, 1e-15);
    EXPECT_GT(c.at(0, "nlo"), 0.999);
    EXPECT_NEAR(c.at(0, "lo_balanced"), 1.0 / 3.0, 1e-3);
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
        EXPECT_LE(c.at(r, "lo_balanced"), 1.0 / 3.0 + 1e-12);
        EXPECT_LE(c.at(r, "lo_unbalanced"), 1.0 / 3.0 + 1e-12);
        EXPECT_EQ(c.at(r, "classical_bound"), 1.0 / 3.0);
        if (r > 0) {
            EXPECT_LT(c.at(r, "nlo"), c.at(r - 1, "nlo"));
        }
    }
}

TEST_F(CliTest, TeleportCurveIsFlatInPhotonNumber) {
    const fs::path cfg = kSource / "configs" / "table_s1.toml";
    ASSERT_EQ(run("teleport-curve", cfg, dir / "o").status, 0);
    const Csv photons = read_csv(dir / "o" / "teleport_vs_photon_number.csv");
    ASSERT_EQ(photons.rows.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_NEAR(photons.at(r, "fidelity_visibility"), 0.9525, 1e-12);
        EXPECT_GT(photons.at(r, "fidelity_estimated_superposition"), 0.99);
    }
    const Csv curve = read_csv(dir / "o" / "teleport_curve.csv");
    for (std::size_t r = 0; r < curve.rows.size(); ++r) {
        EXPECT_NEAR(curve.at(r, "fidelity_brute_force"), curve.at(r, "fidelity_closed_form"),
                    curve.at(r, "brute_force_tail_bound") + 1e-14);
    }

    ASSERT_EQ(run("teleport-curve", cfg, dir / "j", "--format json").status, 0);
    const json j = read_json(dir / "j" / "teleport_curve.json");
    EXPECT_EQ(j.size(), curve.rows.size());
}

TEST_F(CliTest, TomographyOfBundledCounts) {
    ASSERT_EQ(run("tomo", kSource / "configs" / "tomo_example.toml", dir / "o").status, 0);
    const json t = read_json(dir / "o" / "tomo.json");
    EXPECT_NEAR(t["fidelity"].get<double>(), 0.955, 0.016);
    EXPECT_NEAR(t["purity"].get<double>(), 0.91, 0.03);
    EXPECT_GT(t["uncertainty"]["fidelity_std"].get<double>(), 0.005);
    EXPECT_LT(t["uncertainty"]["fidelity_std"].get<double>(), 0.03);
    EXPECT_EQ(t["mle"]["rho"]["real"].size(), 2u);
}

TEST_F(CliTest, CavityAndRatesReports) {
    ASSERT_EQ(run("cavity", kSource / "configs" / "device.toml", dir / "d").status, 0);
    const json d = read_json(dir / "d" / "cavity.json");
    EXPECT_GE(d["p_sfg"].get<double>(), 3.5e-5);
    EXPECT_LE(d["p_sfg"].get<double>(), 5.5e-5);
    EXPECT_TRUE(d["wavelength_conditions"]["all_passed"].get<bool>());

    ASSERT_EQ(run("cavity", kSource / "configs" / "optimized.toml", dir / "p").status, 0);
    const double opt = read_json(dir / "p" / "cavity.json")["p_sfg"];
    EXPECT_GE(opt, 0.8e-3);
    EXPECT_LE(opt, 2.5e-3);

    ASSERT_EQ(run("rates", kSource / "configs" / "rates.toml", dir / "r").status, 0);
    const Csv r = read_csv(dir / "r" / "rates.csv");
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        EXPECT_EQ(r.at(i, "nlo_faster"), r.at(i, "eta") < r.at(i, "p_sfg") ? 1.0 : 0.0);
        EXPECT_NEAR(r.at(i, "nlo_over_lo") * r.at(i, "eta") / r.at(i, "p_sfg"), 1.0, 1e-9);
    }
}
