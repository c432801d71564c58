#include <sparserl/serialization.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

using namespace sparserl;

TEST(FormatDouble, ShortestRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5, 0.0, 5e-324}) {
        std::string s = format_double(x);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
}

TEST(MdpJson, RoundTripIsByteStable) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SparseLinearMDP mdp = oracle::small_random_mdp(seed, 4, 3, 7, 3, 0.95);
        std::string text = mdp_to_json(mdp);
        SparseLinearMDP back = mdp_from_json(text);
        EXPECT_EQ(back.features(), mdp.features());
        EXPECT_EQ(back.psi(), mdp.psi());
        EXPECT_EQ(back.reward(), mdp.reward());
        EXPECT_EQ(back.support(), mdp.support());
        EXPECT_EQ(back.gamma(), mdp.gamma());
        EXPECT_EQ(mdp_to_json(back), text);
    }
}

TEST(MdpJson, RejectsMalformed) {
    EXPECT_THROW(mdp_from_json("{not json"), std::invalid_argument);
    EXPECT_THROW(mdp_from_json("{}"), std::invalid_argument);
    nlohmann::json j = nlohmann::json::parse(mdp_to_json(oracle::small_random_mdp(1, 3, 2, 4, 2, 0.9)));
    j["features"].erase(0);
    EXPECT_THROW(mdp_from_json(j.dump()), std::invalid_argument);
}

TEST(PolicyJson, RoundTrip) {
    Policy p(Eigen::MatrixXd::Constant(3, 4, 0.25));
    EXPECT_EQ(policy_from_json(policy_to_json(p)).probs(), p.probs());
    InitialDistribution xi(Eigen::Vector3d(0.2, 0.3, 0.5));
    EXPECT_EQ(initial_from_json(initial_to_json(xi)).probs(), xi.probs());
    EXPECT_THROW(policy_from_json(R"({"n_states":1,"n_actions":2,"probs":[[0.9,0.9]]})"), std::invalid_argument);
}

TEST(DatasetCsv, RoundTripThroughFiles) {
    SparseLinearMDP mdp = oracle::small_random_mdp(2, 5, 2, 4, 2, 0.9);
    BatchDataset data = collect(mdp, Policy::uniform(5, 2), InitialDistribution::uniform(5), 7, 3, 21, "uniform");
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "sparserl_serialization_test";
    std::filesystem::create_directories(dir);
    save_dataset(data, dir / "d.csv");
    EXPECT_TRUE(std::filesystem::exists(meta_path_for(dir / "d.csv")));
    BatchDataset back = load_dataset(dir / "d.csv");
    EXPECT_EQ(back.episodes, data.episodes);
    EXPECT_EQ(back.meta.seed, 21u);
    EXPECT_EQ(back.meta.behavior, "uniform");
    std::filesystem::remove_all(dir);
}

TEST(DatasetCsv, RejectsBrokenInput) {
    std::string meta = R"({"seed":1,"K":1,"L":2})";
    EXPECT_THROW(dataset_from_csv("x,y\n", meta), std::invalid_argument);
    EXPECT_THROW(dataset_from_csv("episode,step,x,a,x_next\n0,1,0,0,0\n", meta), std::invalid_argument);
    EXPECT_THROW(dataset_from_csv("episode,step,x,a,x_next\n0,0,0,0\n", meta), std::invalid_argument);
    EXPECT_THROW(dataset_from_csv("episode,step,x,a,x_next\n0,0,0,0,0\n", meta), std::invalid_argument);
    BatchDataset ok = dataset_from_csv("episode,step,x,a,x_next\n0,0,0,1,1\n0,1,1,0,0\n", meta);
    EXPECT_EQ(ok.size(), 2);
    EXPECT_THROW(read_file("/nonexistent/file.json"), std::runtime_error);
}

TEST(MismatchJson, RoundTripIncludingInfiniteThreshold) {
    MismatchReport r;
    r.chi_square = 0.75;
    r.series_value = 1.5;
    r.series_terms = 12;
    r.c_min.lower = 0.1;
    r.c_min.upper = 0.2;
    r.c_min.exact = false;
    r.c_min.argmin_support = {1, 3};
    r.signal.threshold = std::numeric_limits<double>::infinity();
    r.feature_set = {0, 2};
    MismatchReport back = mismatch_report_from_json(mismatch_report_to_json(r));
    EXPECT_EQ(back.chi_square, 0.75);
    EXPECT_EQ(back.c_min.argmin_support, r.c_min.argmin_support);
    EXPECT_FALSE(back.c_min.exact);
    EXPECT_TRUE(std::isinf(back.signal.threshold));
    EXPECT_EQ(back.feature_set, r.feature_set);
}

TEST(HardParamsJson, RoundTrip) {
    HardInstanceParams p;
    p.s = 4;
    p.d = 7;
    p.gamma = 0.8;
    p.model = 2;
    p.delta1 = 0.01;
    HardInstanceParams back = hard_params_from_json(hard_params_to_json(p));
    EXPECT_EQ(back.s, 4);
    EXPECT_EQ(back.d, 7);
    EXPECT_EQ(back.model, 2);
    EXPECT_EQ(back.gamma, 0.8);
    EXPECT_EQ(back.delta1, 0.01);
    EXPECT_EQ(back.varsigma1, p.varsigma1);
}

TEST(ResultJson, OpeAndFqiFieldsPresent) {
    OpeResult r;
    r.value = 1.25;
    r.weights.push_back(Eigen::Vector2d(0.5, 0.0));
    r.reports.push_back(SolverReport{});
    r.iterations = 1;
    nlohmann::json j = nlohmann::json::parse(ope_result_to_json(r));
    EXPECT_EQ(j.at("value").get<double>(), 1.25);
    FqiResult f;
    f.weights.push_back(Eigen::Vector2d(0.5, 0.0));
    f.actions = {1, 0};
    f.iterations = 1;
    nlohmann::json jf = nlohmann::json::parse(fqi_result_to_json(f));
    EXPECT_EQ(jf.at("actions").get<std::vector<int>>(), (std::vector<int>{1, 0}));
}
