#include <sparserl/serialization.hpp>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run(const std::string& args, const fs::path& dir) {
    fs::path capture = dir / "stdout.txt";
    std::string cmd = std::string(SPARSERL_CLI) + " " + args + " > " + capture.string() + " 2> " + (dir / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = fs::exists(capture) ? sparserl::read_file(capture) : "";
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("sparserl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, GenerateCollectOpeFqiPipeline) {
    ASSERT_EQ(run("generate --states 5 --actions 2 --d 8 --s 2 --gamma 0.8 --seed 3 -o " + p("m.json"), dir).code, 0);
    ASSERT_EQ(run("collect --mdp " + p("m.json") + " -K 2000 -L 1 --seed 1 -o " + p("d.csv"), dir).code, 0);
    EXPECT_TRUE(fs::exists(p("d.meta.json")));
    CliRun ope = run("ope --mdp " + p("m.json") + " --data " + p("d.csv") + " --algo lasso-fqe --T 20 --lambda1 0.01", dir);
    ASSERT_EQ(ope.code, 0);
    nlohmann::json j = nlohmann::json::parse(ope.out);
    EXPECT_EQ(j.at("iterations").get<int>(), 20);
    EXPECT_LT(j.at("abs_err").get<double>(), 0.5);
    CliRun ps = run("ope --mdp " + p("m.json") + " --data " + p("d.csv") + " --algo post-select --T 30 --lambda2 0.001 --lambda3 0", dir);
    ASSERT_EQ(ps.code, 0);
    EXPECT_FALSE(nlohmann::json::parse(ps.out).at("selected").empty());
    CliRun fqi = run("fqi --mdp " + p("m.json") + " --data " + p("d.csv") + " --T 20 --lambda1 0.001", dir);
    ASSERT_EQ(fqi.code, 0);
    EXPECT_GE(nlohmann::json::parse(fqi.out).at("sup_gap").get<double>(), 0.0);
}

TEST_F(Cli, DiagnoseBehaviorEqualsTarget) {
    ASSERT_EQ(run("generate --states 4 --actions 2 --d 5 --s 2 --seed 1 -o " + p("m.json"), dir).code, 0);
    CliRun r = run("diagnose --mdp " + p("m.json") + " --behavior uniform --target uniform", dir);
    ASSERT_EQ(r.code, 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.contains("chi_square"));
    EXPECT_TRUE(j.contains("c_min"));
}

TEST_F(Cli, HardDefaultsPassAnatomy) {
    CliRun r = run("hard --s 4 --d 7 --gamma 0.9 --N 1e6", dir);
    ASSERT_EQ(r.code, 0) << r.out;
    nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.at("anatomy").at("violations").empty());
}

TEST_F(Cli, MissingFileIsUsageError) {
    EXPECT_EQ(run("collect --mdp " + p("nope.json") + " -o " + p("d.csv"), dir).code, 2);
    EXPECT_EQ(run("sweep --config " + p("nope.json") + " --seed 1 -o " + p("out"), dir).code, 2);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run("", dir).code, 2);
    EXPECT_EQ(run("frobnicate", dir).code, 2);
    EXPECT_EQ(run("sweep --N 100", dir).code, 2);  // --seed and --out required
    EXPECT_EQ(run("generate --s 9 --d 3", dir).code, 2);
}

TEST_F(Cli, SweepExitCodes) {
    std::string base = "sweep --seed 5 --N 200 --d 6 --s 2 --seeds 0,1 --T 5 --lambda1 0.01 -o " + p("out");
    EXPECT_EQ(run(base, dir).code, 0);
    EXPECT_TRUE(fs::exists(p("out/ope.csv")));
    EXPECT_TRUE(fs::exists(p("out/summary.json")));
    // Rerunning appends identical rows apart from wall-clock time.
    EXPECT_EQ(run(base, dir).code, 0);
    std::string csv = sparserl::read_file(p("out/ope.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);

    sparserl::write_file(p("c.json"), R"({"algorithms":["fqi"],"N":[200],"d":[6],"s":[2],"seeds":[0],"T":5,"checks":{"fqi_gap":-1}})");
    EXPECT_EQ(run("sweep --config " + p("c.json") + " --seed 1 -o " + p("o2"), dir).code, 1);
    EXPECT_EQ(run("sweep --config " + p("c.json") + " --seed 1 --T 1000 -o " + p("o3"), dir).code, 3);
}
