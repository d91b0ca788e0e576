#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qlink/sweep/config.hpp"
#include "qlink/sweep/run.hpp"

using namespace qlink;
using namespace qlink::sweep;
namespace fs = std::filesystem;

namespace {

const char* const thermal_doc = R"(mode = "thermal"

[model]
n_sites = 6
s_bulk = 0.5
s_link = 1

[grid]
lambda = [0.05, 0.1, 0.3]
beta = [100.0, 1000.0]

[solver]
seed = 7
)";

const char* const dynamics_doc = R"(mode = "dynamics"

[model]
n_sites = 5
s_bulk = "1/2"
s_link = "1/2"

[grid]
lambda = [0.3, 0.6]
omega_count = 3
horizon = 6.0
time_step = 0.5

[solver]
seed = 3
)";

/// Expects a ConfigError whose message carries `line` and `fragment`.
void expect_error(const std::string& doc, std::size_t line, const std::string& fragment) {
    try {
        SweepConfig c = parse_config(doc, "cfg.toml");
        resolve(c, std::nullopt, std::nullopt);
        FAIL() << "accepted: " << doc;
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        if (line > 0) {
            EXPECT_NE(std::string(e.what()).find("cfg.toml:" + std::to_string(line) + ":"), std::string::npos);
        }
    }
}

std::string replace(std::string doc, const std::string& from, const std::string& to) {
    const auto pos = doc.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return doc.replace(pos, from.size(), to);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class TempDir {
  public:
    explicit TempDir(const std::string& name)
        : path_(fs::temp_directory_path() / ("qlink_test_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

  private:
    fs::path path_;
};

int run_tool(const std::string& args) {
    const std::string cmd = std::string(QLINK_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesThermalDocument) {
    SweepConfig c = parse_config(thermal_doc, "t.toml");
    resolve(c, Mode::thermal, std::nullopt);
    EXPECT_EQ(c.model.n_sites, 6);
    EXPECT_EQ(c.model.s_bulk.twice(), 1);
    EXPECT_EQ(c.model.s_link.twice(), 2);
    EXPECT_EQ(c.lambdas, (std::vector<double>{0.05, 0.1, 0.3}));
    EXPECT_EQ(c.betas, (std::vector<double>{100.0, 1000.0}));
    EXPECT_EQ(*c.seed, 7u);
}

TEST(Config, DefaultThermalGridAndSeedOverride) {
    SweepConfig c = parse_config(replace(thermal_doc, "lambda = [0.05, 0.1, 0.3]\n", ""), "t.toml");
    resolve(c, std::nullopt, 99);
    EXPECT_EQ(c.lambdas.size(), 48u);
    EXPECT_EQ(c.lambdas.front(), 1e-3);
    EXPECT_EQ(c.lambdas.back(), 1.0);
    EXPECT_EQ(*c.seed, 99u);
}

TEST(Config, LogGridTable) {
    SweepConfig c = parse_config(
        replace(thermal_doc, "lambda = [0.05, 0.1, 0.3]", "lambda_log = { min = 0.01, max = 1.0, count = 3 }"), "t");
    EXPECT_EQ(c.lambdas.size(), 3u);
    EXPECT_NEAR(c.lambdas[1], 0.1, 1e-15);
}

TEST(Config, SyntaxErrorCarriesLine) { expect_error(replace(thermal_doc, "beta = [", "beta = [[,"), 10, ""); }

TEST(Config, UnknownKeysAreFatal) {
    expect_error(replace(thermal_doc, "n_sites = 6", "n_sites = 6\nspin = 1"), 5, "spin");
    expect_error(std::string(thermal_doc) + "[plots]\nx = 1\n", 14, "plots");
    expect_error(replace(thermal_doc, "seed = 7", "seed = 7\nthreads = 2"), 14, "threads");
}

TEST(Config, RejectsInvalidSpin) {
    expect_error(replace(thermal_doc, "s_bulk = 0.5", "s_bulk = 0.3"), 5, "s_bulk");
    expect_error(replace(thermal_doc, "s_link = 1", "s_link = \"2/3\""), 6, "s_link");
    expect_error(replace(thermal_doc, "s_link = 1", "s_link = 0"), 6, "s_link");
}

TEST(Config, RejectsShortChain) {
    expect_error(replace(thermal_doc, "n_sites = 6", "n_sites = 3"), 4, "n_sites");
}

TEST(Config, RejectsBadGrids) {
    expect_error(replace(thermal_doc, "[0.05, 0.1, 0.3]", "[]"), 9, "empty");
    expect_error(replace(thermal_doc, "[0.05, 0.1, 0.3]", "[0.3, 0.1]"), 9, "ascending");
    expect_error(replace(thermal_doc, "[0.05, 0.1, 0.3]", "[-0.1, 0.1]"), 9, "non-negative");
    expect_error(replace(thermal_doc, "beta = [100.0, 1000.0]", "beta = [0.0]"), 10, "beta");
    expect_error(replace(thermal_doc, "beta = [100.0, 1000.0]\n", ""), 0, "beta");
    expect_error(replace(thermal_doc, "seed = 7", "seed = \"7\""), 13, "seed");
}

TEST(Config, SeedIsMandatory) {
    expect_error(replace(thermal_doc, "seed = 7", ""), 0, "seed");
    SweepConfig c = parse_config(replace(thermal_doc, "seed = 7", ""), "t");
    EXPECT_NO_THROW(resolve(c, std::nullopt, 5));
}

TEST(Config, ModeConflict) {
    SweepConfig c = parse_config(thermal_doc, "t");
    EXPECT_THROW(resolve(c, Mode::dynamics, std::nullopt), ConfigError);
}

TEST(Config, DynamicsChecks) {
    expect_error(replace(replace(dynamics_doc, "[0.3, 0.6]", "[0.0, 0.6]"), "horizon = 6.0\n", ""), 0, "horizon");
    expect_error(replace(dynamics_doc, "omega_count = 3", "omega_count = 0"), 10, "omega_count");
    expect_error(replace(dynamics_doc, "time_step = 0.5", "time_step = 0.5\nphi = 7.0"), 13, "phi");
    expect_error(replace(dynamics_doc, "omega_count = 3", "omega_count = 3\nlink_state = \"two\""), 11, "link state");
    expect_error(replace(dynamics_doc, "horizon = 6.0", "horizon = 6.0\nhorizon_factor = 4"), 12, "either");
}

TEST(Config, DimensionBudget) {
    expect_error(replace(thermal_doc, "n_sites = 6", "n_sites = 30"), 0, "max_dim");
    expect_error(replace(thermal_doc, "n_sites = 6", "n_sites = 60"), 0, "too large");
    expect_error(replace(thermal_doc, "mode = \"thermal\"", "mode = \"oracle-check\"") + "oracle_cap = 10\n", 0,
                 "oracle_cap");
}

TEST(Config, ShippedConfigsValidate) {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(QLINK_CONFIG_DIR)) {
        if (entry.path().extension() != ".toml") {
            continue;
        }
        SCOPED_TRACE(entry.path().string());
        SweepConfig c = parse_config(slurp(entry.path()), entry.path().string());
        EXPECT_NO_THROW(resolve(c, std::nullopt, std::nullopt));
        EXPECT_TRUE(c.mode.has_value());
        ++count;
    }
    EXPECT_GE(count, 10u);
}

TEST(Csv, NumberFormattingRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0, 5e-324}) {
        EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
    }
    EXPECT_EQ(format_number(0.25), "0.25");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    CsvTable t({"a", "b"});
    t.cell(1.5).cell("");
    t.end_row();
    EXPECT_EQ(t.text(), "a,b\n1.5,\n");
    t.cell(1.0);
    EXPECT_THROW(t.end_row(), std::logic_error);
}

TEST(Run, ThermalTableIsReproducible) {
    TempDir dir("thermal");
    SweepConfig c = parse_config(thermal_doc, "t.toml");
    resolve(c, std::nullopt, std::nullopt);
    RunOptions opts;
    opts.out_dir = (dir.path() / "a").string();
    opts.timestamp = "20260101T000000Z";
    std::ostringstream sink;
    const RunResult a = run(c, opts, sink);
    opts.threads = 3;
    const RunResult b = run(c, opts, sink);
    EXPECT_EQ(a.exit_code, exit_ok);
    EXPECT_EQ(a.points, 6u);
    EXPECT_EQ(a.failed, 0u);
    EXPECT_EQ(a.table.filename(), "thermal_20260101T000000Z.csv");
    EXPECT_EQ(b.table.filename(), "thermal_20260101T000000Z_1.csv");
    EXPECT_EQ(slurp(a.table), slurp(b.table));

    const std::string text = slurp(a.table);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "beta,lambda,entanglement,purity,k_used,truncation_margin,ground_energy,max_residual,status,error");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);

    const nlohmann::json m = nlohmann::json::parse(slurp(a.manifest.parent_path() / "manifest.json"));
    EXPECT_EQ(m["mode"], "thermal");
    EXPECT_EQ(m["seed"], 7);
    EXPECT_EQ(m["config"]["model"]["dim"], 144);
    EXPECT_EQ(m["summary"].size(), 2u);
}

TEST(Run, DynamicsTablesAreReproducible) {
    TempDir dir("dynamics");
    SweepConfig c = parse_config(dynamics_doc, "d.toml");
    resolve(c, Mode::dynamics, std::nullopt);
    RunOptions opts;
    opts.out_dir = dir.path().string();
    opts.timestamp = "X";
    std::ostringstream sink;
    const RunResult a = run(c, opts, sink);
    opts.threads = 2;
    const RunResult b = run(c, opts, sink);
    EXPECT_EQ(a.exit_code, exit_ok);
    EXPECT_EQ(a.points, 6u);
    EXPECT_EQ(slurp(a.table), slurp(b.table));
    EXPECT_EQ(slurp(dir.path() / "dynamics_X_series.csv"), slurp(dir.path() / "dynamics_X_1_series.csv"));
    const std::string series = slurp(dir.path() / "dynamics_X_series.csv");
    EXPECT_EQ(std::count(series.begin(), series.end(), '\n'), 1 + 6 * 13);
}

TEST(Run, OracleCheckPasses) {
    TempDir dir("oracle");
    const std::string doc = replace(
        replace(thermal_doc, "mode = \"thermal\"", "mode = \"oracle-check\""), "beta = [100.0, 1000.0]\n", "");
    SweepConfig c = parse_config(replace(doc, "s_link = 1", "s_link = 0.5"), "o.toml");
    resolve(c, std::nullopt, std::nullopt);
    RunOptions opts;
    opts.out_dir = dir.path().string();
    std::ostringstream report;
    const RunResult r = run(c, opts, report);
    EXPECT_EQ(r.exit_code, exit_ok) << report.str();
    EXPECT_NE(report.str().find("oracle-check PASS"), std::string::npos);
}

TEST(Run, UnwritableDirectoryIsIoError) {
    SweepConfig c = parse_config(replace(thermal_doc, "[0.05, 0.1, 0.3]", "[0.1]"), "t");
    resolve(c, std::nullopt, std::nullopt);
    RunOptions opts;
    opts.out_dir = "/proc/qlink_cannot_write_here";
    std::ostringstream sink;
    EXPECT_THROW(run(c, opts, sink), IoError);
}

TEST(Cli, ExitCodes) {
    TempDir dir("cli");
    const fs::path good = dir.path() / "good.toml";
    const fs::path bad = dir.path() / "bad.toml";
    {
        std::ofstream(good) << replace(thermal_doc, "[0.05, 0.1, 0.3]", "[0.1]");
        std::ofstream(bad) << replace(thermal_doc, "n_sites = 6", "n_sites = 6\ncolour = 1");
    }
    const std::string out = " --out " + (dir.path() / "out").string();
    EXPECT_EQ(run_tool("validate --config " + good.string()), 0);
    EXPECT_EQ(run_tool("validate --config " + bad.string()), 2);
    EXPECT_EQ(run_tool("validate --config " + (dir.path() / "missing.toml").string()), 2);
    EXPECT_EQ(run_tool("thermal --config " + good.string() + out + " --seed 4 --threads 2"), 0);
    EXPECT_EQ(run_tool("dynamics --config " + good.string() + out), 2);
    EXPECT_EQ(run_tool("thermal --config " + good.string() + " --out /proc/qlink_nope"), 4);
    EXPECT_EQ(run_tool("frobnicate"), 2);
    EXPECT_TRUE(fs::exists(dir.path() / "out" / "manifest.json"));
    const nlohmann::json m = nlohmann::json::parse(slurp(dir.path() / "out" / "manifest.json"));
    EXPECT_EQ(m["seed"], 4);
    EXPECT_EQ(m["threads"], 2);
}
