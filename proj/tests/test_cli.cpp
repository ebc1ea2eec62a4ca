#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mlqmc/cli.h"

using namespace mlqmc;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = MLQMC_CONFIG_DIR;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mlqmc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return (path / name).string();
    }
};

std::string put_portfolio() { return kConfigDir + "/single_put.portfolio"; }

cli::ExperimentConfig parse(const std::string& text, const std::string& base = kConfigDir) {
    std::istringstream in(text);
    return cli::parse_config(in, base);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_tool(const std::string& args, std::string* output = nullptr) {
    const std::string log = (fs::temp_directory_path() / ("mlqmc_cli_out_" + std::to_string(::getpid()))).string();
    const int raw = std::system((std::string(MLQMC_TOOL) + " " + args + " > " + log + " 2>&1").c_str());
    if (output) *output = slurp(log);
    fs::remove(log);
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char ch : s) n += ch == '\n';
    return n;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse(
        "portfolio.file = single_put.portfolio\n"
        "coupling.b.kind = smoothed\ncoupling.b.r = 1.5\n"
        "coupling.a.kind = crude\ncoupling.a.inner = mc\ncoupling.a.m0 = 16\n"
        "run.eps = 0.02, 0.01\nrun.seed = 0x10\nrun.threads = 3\n");
    CHECK(cfg.portfolio.dim() == 1);
    REQUIRE(cfg.couplings.size() == 2);
    CHECK(cfg.couplings[0].name == "a");
    CHECK(cfg.couplings[0].config.inner == coupling::InnerSampling::mc);
    CHECK(cfg.couplings[0].config.schedule.m0 == 16);
    CHECK(cfg.couplings[1].config.smoothing->k0 == 8.0);
    CHECK(cfg.couplings[1].config.smoothing->r == 1.5);
    CHECK(cfg.eps == std::vector<double>{0.02, 0.01});
    CHECK(cfg.seed == 16);
    CHECK(cfg.threads == 3);
    CHECK(cfg.eta_m.size() == 8);
    CHECK(cfg.eta_m.front() == 32);
    CHECK(cfg.eta_m.back() == 4096);

    for (const auto& cfg_file : {"single_put.cfg", "basket_exp16.cfg", "basket_tri32.cfg"}) {
        CHECK_NOTHROW(cli::load_config(kConfigDir + "/" + cfg_file));
    }
}

TEST_CASE("config errors") {
    const std::string head = "portfolio.file = single_put.portfolio\n";
    CHECK_THROWS_AS(parse(head + "run.bogus = 1\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "mystery = 1\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "coupling.a.kind = wobbly\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "coupling.a.kind = crude\ncoupling.a.k0 = 4\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "coupling.a.kind = crude\ncoupling.a.m0 = 24\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "coupling.a.kind = smoothed\ncoupling.a.r = 1\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "run.eps = 0.01, -1\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "run.target_prob = 1.5\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "run.seed = abc\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse("run.eps = 0.01\n"), coupling::ConfigurationError);
    CHECK_THROWS_AS(parse(head + "run.seed = 1\nrun.seed = 2\n"), coupling::ConfigurationError);
    try {
        parse("portfolio.file = nowhere/missing.portfolio\n", "/tmp");
        FAIL("expected ConfigurationError");
    } catch (const coupling::ConfigurationError& e) {
        CHECK(std::string(e.what()).find("/tmp/nowhere/missing.portfolio") != std::string::npos);
    }
}

TEST_CASE("calibrate prints the threshold") {
    TempDir dir;
    const auto cfg_path = dir.write("c.cfg", "portfolio.file = " + put_portfolio() + "\nrun.target_prob = 0.3\n");
    std::string out;
    REQUIRE(run_tool("calibrate --config " + cfg_path, &out) == 0);
    CHECK(out.find("c = 0.47688") != std::string::npos);
    CHECK(out.find("v0 = 1.66911974") != std::string::npos);
    CHECK(out.find("theta = 0.29999999") != std::string::npos);

    const auto p4 = dir.write("b4.portfolio",
                              "d = 4\ns0 = 100\nstrikes = 95\noption_kind = call\nmu = 0.08\nmu0 = 0.05\n"
                              "maturity = 0.1\ntau = 0.02\ncovariance = exponential\n");
    const auto cfg4 = cli::load_config(dir.write("b4.cfg", "portfolio.file = b4.portfolio\n"));
    CHECK(cli::resolve_threshold(cfg4) == doctest::Approx(0.2 * market::initial_value(cfg4.portfolio)).epsilon(1e-14));
    CHECK(run_tool("calibrate --config " + dir.path.string() + "/b4.cfg", &out) == 0);
    CHECK(out.find("theta") == std::string::npos);
    (void)p4;
}

TEST_CASE("exit codes") {
    TempDir dir;
    std::string out;
    CHECK(run_tool("calibrate --config " + dir.write("bad.cfg", "portfolio.file = nope.portfolio\n"), &out) == 2);
    CHECK(out.find("nope.portfolio") != std::string::npos);
    CHECK(run_tool("calibrate --config " + dir.write("k.cfg", "portfolio.file = " + put_portfolio() + "\nfoo = 1\n")) ==
          2);
    CHECK(run_tool("frobnicate --config x") == 2);
    CHECK(run_tool("calibrate") == 2);
    const auto nocoup = dir.write("n.cfg", "portfolio.file = " + put_portfolio() + "\nrun.out_dir = " +
                                               dir.path.string() + "\n");
    CHECK(run_tool("convergence --config " + nocoup) == 2);
    const auto fail = dir.write("f.cfg", "portfolio.file = " + put_portfolio() +
                                             "\ncoupling.mc.kind = crude\ncoupling.mc.inner = mc\n"
                                             "run.eps = 0.005\nrun.max_level = 2\nrun.warmup = 500\nrun.out_dir = " +
                                             dir.path.string() + "\n");
    CHECK(run_tool("estimate --config " + fail) == 1);
}

TEST_CASE("convergence output is deterministic") {
    TempDir dir;
    const std::string body = "portfolio.file = " + put_portfolio() +
                             "\ncoupling.smoothed.kind = smoothed\ncoupling.rqmc.kind = crude\n"
                             "run.l_max = 7\nrun.n_per_level = 1000\nrun.batches = 4\nrun.seed = 5\n";
    const auto cfg = dir.write("conv.cfg", body);
    REQUIRE(run_tool("convergence --config " + cfg + " --out " + (dir.path / "a").string()) == 0);
    REQUIRE(run_tool("convergence --config " + cfg + " --out " + (dir.path / "b").string() + " --threads 3") == 0);
    for (const auto& name : {"convergence_smoothed.csv", "convergence_rqmc.csv", "rates.csv"}) {
        const auto a = slurp(dir.path / "a" / name);
        CHECK(a == slurp(dir.path / "b" / name));
        CHECK_FALSE(a.empty());
    }
    const auto conv = slurp(dir.path / "a" / "convergence_smoothed.csv");
    CHECK(conv.rfind("level,m_ell,abs_mean,variance,kurtosis,kvf,cost,n_samples\n", 0) == 0);
    CHECK(count_lines(conv) == 9);
    CHECK(conv.find("\n7,4096,") != std::string::npos);
    CHECK(count_lines(slurp(dir.path / "a" / "rates.csv")) == 3);
    const auto small = body.substr(0, body.find("run.n_per_level")) + "run.n_per_level = 10\n";
    CHECK(run_tool("convergence --config " + dir.write("small.cfg", small)) == 2);
}

TEST_CASE("complexity, estimate and eta commands") {
    TempDir dir;
    const std::string base = "portfolio.file = " + put_portfolio() +
                             "\ncoupling.smoothed.kind = smoothed\n"
                             "run.eps = 0.04, 0.02\nrun.repeats = 2\nrun.warmup = 300\nrun.eta_scenarios = 3\n"
                             "run.out_dir = " +
                             dir.path.string() + "\n";
    const auto cfg = dir.write("x.cfg", base + "run.eta_m = 32, 64, 128\nrun.eta_replicates = 16\n");
    REQUIRE(run_tool("complexity --config " + cfg) == 0);
    const auto cx = slurp(dir.path / "complexity.csv");
    CHECK(cx.rfind("eps,coupling,mean_cost,rmse,eps2_cost\n", 0) == 0);
    CHECK(count_lines(cx) == 3);

    REQUIRE(run_tool("estimate --config " + cfg) == 0);
    const auto est = slurp(dir.path / "estimate_smoothed.csv");
    CHECK(count_lines(est) == 2);
    const double theta = std::stod(est.substr(est.find('\n') + 1));
    CHECK(std::abs(theta - 0.3) < 0.1);

    REQUIRE(run_tool("eta --config " + cfg) == 0);
    const auto eta = slurp(dir.path / "eta.csv");
    CHECK(eta.rfind("scenario_id,eta_hat,stderr\n", 0) == 0);
    CHECK(count_lines(eta) == 5);
    CHECK(eta.find("\npooled,") != std::string::npos);

    CHECK(run_tool("eta --config " + dir.write("e.cfg", base + "run.eta_m = 32, 48\n")) == 2);
    CHECK(run_tool("eta --config " + dir.write("r.cfg", base + "run.eta_replicates = 8\n")) == 2);
}
