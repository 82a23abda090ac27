#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "floquet/cli.hpp"

using namespace floquet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("floquet_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

int run_quiet(const RunConfig& c) {
    std::ostringstream log;
    return run(c, log);
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(FLOQUET_LAB_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, BandsReproduceHillEdges) {
    RunConfig c;
    c.subcommand = "bands";
    c.potential = "mathieu:1";
    c.output_dir = scratch("bands").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    const auto s = read_json(fs::path(c.output_dir) / "bands_summary.json");
    const auto hill = bands_1d(mathieu(1), 160);
    ASSERT_EQ(s["bands"].size(), 4u);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(s["bands"][j][0].get<double>(), hill[j].lo, 1e-6);
        EXPECT_NEAR(s["bands"][j][1].get<double>(), hill[j].hi, 1e-6);
    }
    EXPECT_EQ(s["continuity_violations"].get<int>(), 0);
    const auto csv = slurp(fs::path(c.output_dir) / "bands.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k1,lambda_1,lambda_2,lambda_3,lambda_4");
    const auto m = read_json(fs::path(c.output_dir) / "manifest.json");
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["config"]["potential"], "mathieu:1");
}

TEST(Cli, OutputsAreDeterministic) {
    RunConfig c;
    c.subcommand = "bands";
    c.potential = "mathieu2d:1,0.5";
    c.grid = 11;
    c.cutoff = 3;
    c.output_dir = scratch("det_a").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    RunConfig d = c;
    d.output_dir = scratch("det_b").string();
    ASSERT_EQ(run_quiet(d), exit_ok);
    for (const char* f : {"bands.csv", "bands_summary.json"})
        EXPECT_EQ(slurp(fs::path(c.output_dir) / f), slurp(fs::path(d.output_dir) / f)) << f;
}

TEST(Cli, ConfigJsonRoundTrip) {
    RunConfig c;
    c.subcommand = "scan";
    c.window = {-3, 2};
    c.ladder = {5, 10, 20};
    c.impurity = "gaussian:-1,0.5,0.25";
    c.seed = 99;
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_TRUE(std::isnan(back.lambda_min));
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"subcommand": "bands", "grid": "x"})")), InputError);
}

TEST(Cli, FermiFreeSingleComponentAndProbe) {
    RunConfig c;
    c.subcommand = "fermi";
    c.potential = "free";
    c.lambda = 1;
    c.grid = 31;
    c.cutoff = 2;
    c.probes = {"0,-2,2,-0.5,0.5"};
    c.output_dir = scratch("fermi").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    const auto r = read_json(fs::path(c.output_dir) / "fermi_report.json");
    EXPECT_EQ(r["dim"].get<int>(), 2);
    EXPECT_EQ(r["n_components"].get<int>(), 1);
    EXPECT_LT(r["max_vertex_residual"].get<double>(), 1e-9);
    ASSERT_EQ(r["probes"].size(), 1u);
    EXPECT_EQ(r["probes"][0]["zero_count"].get<int>(), 2);
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "fermi_trace.csv"));
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "fermi_segments.csv"));
}

TEST(Cli, HillTableAndBands) {
    RunConfig c;
    c.subcommand = "hill";
    c.potential = "mathieu:1";
    c.lambda_max = 40;
    c.output_dir = scratch("hill").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    const auto s = read_json(fs::path(c.output_dir) / "hill_summary.json");
    ASSERT_GE(s["bands"].size(), 2u);
    EXPECT_NEAR(s["bands"][0][0].get<double>(), -0.050603841998, 1e-9);
    EXPECT_TRUE(s["even_potential"].get<bool>());
    std::istringstream table(slurp(fs::path(c.output_dir) / "hill_discriminant.csv"));
    std::string line;
    std::getline(table, line);
    int rows = 0;
    while (std::getline(table, line)) {
        const double lam = std::stod(line.substr(0, line.find(',')));
        const double d = std::stod(line.substr(line.find(',') + 1));
        if (rows % 97 == 0) EXPECT_NEAR(d, discriminant(mathieu(1), lam).real(), 1e-9 * (1 + std::abs(d)));
        ++rows;
    }
    EXPECT_GT(rows, 100);
}

TEST(Cli, ScanFindsBoundState) {
    RunConfig c;
    c.subcommand = "scan";
    c.background = "mathieu:1";
    c.impurity = "gaussian:-2,1";
    c.window = {-3, -0.2};
    c.ladder = {10, 20, 40};
    c.dump_vectors = true;
    c.output_dir = scratch("scan").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    const auto r = read_json(fs::path(c.output_dir) / "eig_report.json");
    EXPECT_EQ(r["n_eigenvalue"].get<int>(), 1);
    EXPECT_EQ(r["candidates"][0]["classification"], "eigenvalue");
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "eigenvectors.csv"));
}

TEST(Cli, FloquetCheckPasses) {
    RunConfig c;
    c.subcommand = "floquet-check";
    c.output_dir = scratch("check").string();
    ASSERT_EQ(run_quiet(c), exit_ok);
    const auto csv = slurp(fs::path(c.output_dir) / "floquet_check.csv");
    EXPECT_EQ(csv.find(",fail"), std::string::npos) << csv;
}

TEST(Cli, ConfigurationErrors) {
    RunConfig c;
    c.output_dir = scratch("errors").string();
    c.subcommand = "bogus";
    EXPECT_EQ(run_quiet(c), exit_config_error);
    c.subcommand = "bands";
    c.potential = "mathieu:abc";
    EXPECT_EQ(run_quiet(c), exit_config_error);
    c.potential = "mathieu:1";
    c.nbands = 40;
    EXPECT_EQ(run_quiet(c), exit_config_error);
    c = RunConfig{};
    c.output_dir = scratch("errors").string();
    c.subcommand = "scan";
    c.ladder = {40, 20, 10};
    EXPECT_EQ(run_quiet(c), exit_config_error);
    c.ladder = {10, 20, 40};
    c.impurity = "wobbly:1";
    EXPECT_EQ(run_quiet(c), exit_config_error);
}

TEST(CliBinary, ExitCodesAndReplay) {
    const auto out = scratch("bin");
    EXPECT_EQ(run_binary("bands --potential mathieu:1 --grid 41 --nbands 2 --out " + out.string()), 0);
    EXPECT_EQ(run_binary("bands --potential nonsense --out " + out.string()), 2);
    EXPECT_EQ(run_binary("bands --grid notanumber"), 2);
    EXPECT_EQ(run_binary("frobnicate"), 2);
    EXPECT_EQ(run_binary("scan --window 1"), 2);
    EXPECT_EQ(run_binary("--help"), 0);

    const auto again = scratch("bin_replay");
    EXPECT_EQ(run_binary("replay " + (out / "manifest.json").string() + " --out " + again.string()), 0);
    EXPECT_EQ(slurp(out / "bands.csv"), slurp(again / "bands.csv"));
    EXPECT_EQ(run_binary("replay /nonexistent/manifest.json"), 2);
}
