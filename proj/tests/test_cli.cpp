#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgdyn/cli.hpp"
#include "cgdyn/run_config.hpp"

using namespace cgdyn;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(model = doublewell
rc = xi2
beta = 3   # inverse temperature
epsilon = 0.01

[table]
z_min = -2
z_max = 2
dz = 0.25
)";

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("cgdyn_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path_ / name) << text;
        return (path_ / name).string();
    }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& command, const std::string& cfg, const fs::path& out, std::uint64_t seed = 1) {
    cli::Arguments a;
    a.command = command;
    a.config_path = cfg;
    a.out = out.string();
    a.seed = seed;
    a.workers = 1;
    return cli::run(a);
}

}  // namespace

TEST(RunConfig, ParsesSectionsAndComments) {
    const auto c = RunConfig::parse_string(kBase, "estimate-coefficients");
    EXPECT_EQ(c.str("", "model"), "doublewell");
    EXPECT_DOUBLE_EQ(c.num("", "beta"), 3.0);
    EXPECT_DOUBLE_EQ(c.num("table", "dz"), 0.25);
    EXPECT_FALSE(c.has("table", "engine"));
}

TEST(RunConfig, RoundTripsThroughSerialize) {
    auto c = RunConfig::parse_string(kBase, "simulate");
    c.set_default("simulate", "x0", "1, 0");
    const auto back = RunConfig::parse_string(c.serialize(), "simulate");
    EXPECT_EQ(back, c);
    EXPECT_EQ(back.serialize(), c.serialize());
}

TEST(RunConfig, UnknownKeysAreAllListed) {
    try {
        RunConfig::parse_string(std::string(kBase) + "colour = red\n[simulate]\nspeed = 3\n[bogus]\n", "simulate");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("table.colour"), std::string::npos) << msg;
        EXPECT_NE(msg.find("simulate.speed"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[bogus]"), std::string::npos) << msg;
    }
}

TEST(RunConfig, RejectsMalformedInput) {
    EXPECT_THROW(RunConfig::parse_string("model = doublewell\nrc = xi2\n", "check"), Error);
    EXPECT_THROW(RunConfig::parse_string(std::string(kBase) + "dz = 0.1\n", "check"), Error);
    EXPECT_THROW(RunConfig::parse_string("model doublewell\n", "check"), Error);
    EXPECT_THROW(RunConfig::parse_string(kBase, "fly"), Error);
    const auto c = RunConfig::parse_string(std::string(kBase) + "[residence]\nn = 2.5\nthreshold = abc\n", "residence");
    EXPECT_THROW(c.count("residence", "n"), Error);
    EXPECT_THROW(c.num("residence", "threshold"), Error);
    EXPECT_THROW(c.positive("table", "z_min"), Error);
}

TEST(RunConfig, ListsAndWords) {
    const auto c = RunConfig::parse_string("model=a\nrc=b\nbeta=1\n[pathwise]\nepsilons = 0.01, 1e-3\n", "pathwise");
    EXPECT_EQ(c.list("pathwise", "epsilons"), (std::vector<double>{0.01, 1e-3}));
    EXPECT_EQ(c.words("pathwise", "epsilons").size(), 2u);
}

TEST(Cli, EstimateCoefficientsWritesResolvedHeader) {
    TempDir d;
    const auto cfg = d.write("c.cfg", kBase);
    ASSERT_EQ(run("estimate-coefficients", cfg, d.path() / "out"), 0);
    const std::string text = slurp(d.path() / "out" / "coefficients.csv");
    EXPECT_NE(text.find("# cgdyn estimate-coefficients"), std::string::npos);
    EXPECT_NE(text.find("# engine = quadrature"), std::string::npos);
    EXPECT_NE(text.find("# seed = 1"), std::string::npos);
    EXPECT_NE(text.find("z,b,sigma,aprime"), std::string::npos);
    std::ifstream in(d.path() / "out" / "coefficients.csv");
    const auto t = read_table_csv(in);
    EXPECT_EQ(t.size(), 17u);
}

TEST(Cli, TableFileIsReused) {
    TempDir d;
    ASSERT_EQ(run("estimate-coefficients", d.write("c.cfg", kBase), d.path()), 0);
    const std::string sim = std::string("model = doublewell\nrc = xi2\nbeta = 3\n[table]\nfile = ") +
                            (d.path() / "coefficients.csv").string() +
                            "\n[simulate]\ndynamics = effective\nT = 0.05\nstride = 10\n";
    ASSERT_EQ(run("simulate", d.write("s.cfg", sim), d.path()), 0);
    EXPECT_NE(slurp(d.path() / "trajectory.csv").find("t,value"), std::string::npos);
}

TEST(Cli, SimulateIsReproducible) {
    TempDir d;
    const auto cfg = d.write("c.cfg", std::string(kBase) + "[simulate]\nT = 0.2\nstride = 50\n");
    ASSERT_EQ(run("simulate", cfg, d.path() / "a", 5), 0);
    ASSERT_EQ(run("simulate", cfg, d.path() / "b", 5), 0);
    ASSERT_EQ(run("simulate", cfg, d.path() / "c", 6), 0);
    const auto a = slurp(d.path() / "a" / "trajectory.csv"), b = slurp(d.path() / "b" / "trajectory.csv");
    const auto c = slurp(d.path() / "c" / "trajectory.csv");
    // Headers differ only in the output directory.
    auto body = [](const std::string& s) { return s.substr(s.find("t,xi,y")); };
    EXPECT_EQ(body(a), body(b));
    EXPECT_NE(body(a), body(c));
}

TEST(Cli, FullAndFreeEnergySimulations) {
    TempDir d;
    for (const char* dyn : {"full", "free_energy"}) {
        const auto cfg = d.write("c.cfg", std::string(kBase) + "[simulate]\ndynamics = " + dyn + "\nT = 0.01\n");
        EXPECT_EQ(run("simulate", cfg, d.path()), 0) << dyn;
    }
}

TEST(Cli, ExitCodes) {
    TempDir d;
    EXPECT_EQ(run("simulate", (d.path() / "missing.cfg").string(), d.path()), 2);
    EXPECT_EQ(run("simulate", d.write("a.cfg", std::string(kBase) + "typo = 1\n"), d.path()), 2);
    EXPECT_EQ(run("simulate", d.write("b.cfg", "model = doublewell\nrc = xi9\nbeta = 3\n"), d.path()), 2);
    EXPECT_EQ(run("simulate", d.write("c.cfg", std::string(kBase) + "[simulate]\ndynamics = sideways\n"), d.path()), 2);
    // A step size far beyond the stiffness limit diverges.
    EXPECT_EQ(run("simulate", d.write("d.cfg", std::string("dt = 0.5\n") + kBase + "[simulate]\ndynamics = full\nT = 100\n"),
                  d.path()),
              3);
    EXPECT_EQ(run("residence",
                  d.write("e.cfg", std::string(kBase) +
                                       "[residence]\nthreshold = 0.5\nn = 100\nsample_stride = 10\nsample_cap = 100\n"),
                  d.path()),
              4);
}

TEST(Cli, ResidenceWritesOneRowPerDynamics) {
    TempDir d;
    const auto cfg = d.write("r.cfg", std::string("model = doublewell\nrc = xi1\nbeta = 3\ndt = 0.001\n") +
                                          "[table]\nz_min = -4\nz_max = 4\ndz = 0.05\n"
                                          "[residence]\nthreshold = 0.5\nn = 20\nsample_stride = 500\n"
                                          "dynamics = effective, free_energy\n");
    ASSERT_EQ(run("residence", cfg, d.path()), 0);
    const auto text = slurp(d.path() / "residence.csv");
    EXPECT_NE(text.find("\neffective,0.5,20,"), std::string::npos) << text;
    EXPECT_NE(text.find("\nfree_energy,0.5,20,"), std::string::npos) << text;
}

TEST(Cli, CheckSuitePasses) {
    TempDir d;
    const auto cfg = d.write("k.cfg", "model = doublewell\nrc = xi2\nbeta = 3\n[check]\npoints = 200\n");
    EXPECT_EQ(run("check", cfg, d.path()), 0);
    EXPECT_NE(slurp(d.path() / "check.csv").find("check,value,threshold,pass"), std::string::npos);
}
