#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "liftfit/cli.hpp"

using namespace liftfit;

namespace {

const std::string quad = "a1^2*x1^2 + a1*a2*x1*x2 + 3*a1*x1 + 2*a2*x2 + 2";

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "liftfit");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string temp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("liftfit_cli_" + name)).string();
}

std::string noiseless_quad_csv()
{
    const std::string path = temp_path("quad.csv");
    const CliRun g = cli({"gen", "--model", quad, "--params-names", "a1,a2", "--true", "1.5,-0.7", "--n", "50",
                       "--seed", "42", "--out", path});
    EXPECT_EQ(g.code, 0) << g.err;
    return path;
}

} // namespace

TEST(Cli, LiftPrintsQuadSystem)
{
    const CliRun r = cli({"lift", "--model", quad, "--params-names", "a1,a2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("columns:  4 (2 lifted, 2 linear)"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("n(n+1)/2 = 3"), std::string::npos);
    EXPECT_NE(r.out.find("lifted entries = 2"), std::string::npos);
    EXPECT_NE(r.out.find("b1 = a1^2"), std::string::npos);
    EXPECT_NE(r.out.find("b2 = a1*a2"), std::string::npos);
    EXPECT_NE(r.out.find("offset:   2"), std::string::npos);
}

TEST(Cli, LiftJson)
{
    const CliRun r = cli({"lift", "--model", quad, "--params-names", "a1,a2", "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto brace = r.out.find('{');
    ASSERT_NE(brace, std::string::npos);
    const auto j = nlohmann::json::parse(r.out.substr(brace));
    EXPECT_EQ(j["lifted"]["column_count"], 4);
    EXPECT_EQ(j["lifted"]["lifted_entries"], 2);
    EXPECT_EQ(j["lifted"]["dimension_bound"], 3);
}

TEST(Cli, FitNoiselessWritesReport)
{
    const std::string data = noiseless_quad_csv();
    const std::string json = temp_path("report.json");
    const CliRun r = cli({"fit", "--model", quad, "--params-names", "a1,a2", "--data", data, "--json", json});
    ASSERT_EQ(r.code, 0) << r.err;

    const auto j = nlohmann::ordered_json::parse(read_file(json));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items())
        keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"model", "lifted", "solution", "recovery", "timings", "version",
                                              "inputs"}));
    EXPECT_LE(j["recovery"]["consistency_residual"].get<double>(), 1e-8);
    EXPECT_FALSE(j.contains("baseline"));
    EXPECT_EQ(j["lifted"]["rank"], 4);

    // z read back bit-exactly against an in-process fit.
    const CanonicalModel m = parse_model(quad, {"a1", "a2"});
    const LiftedFit fit = fit_lifted(m, load_dataset_csv(data));
    const auto z = j["solution"]["z"].get<std::vector<double>>();
    EXPECT_EQ(z, fit.solution.z);
    EXPECT_EQ(j["inputs"]["digest"], input_digest(quad, read_file(data)));
    std::filesystem::remove(json);
}

TEST(Cli, FitGaussNewtonReportHasOnlyBaseline)
{
    const std::string data = noiseless_quad_csv();
    const CliRun r = cli({"fit", "--model", quad, "--params-names", "a1,a2", "--data", data, "--method", "gn", "--json",
                       "-"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::ordered_json::parse(r.out.substr(r.out.find('{')));
    EXPECT_TRUE(j.contains("baseline"));
    EXPECT_FALSE(j.contains("lifted"));
    EXPECT_FALSE(j.contains("recovery"));
    EXPECT_TRUE(j["baseline"]["converged"].get<bool>());
    EXPECT_EQ(j["baseline"]["init"], nlohmann::json::array({1.0, 1.0}));
}

TEST(Cli, CompareWithTruth)
{
    const std::string data = noiseless_quad_csv();
    const CliRun r = cli({"compare", "--model", quad, "--params-names", "a1,a2", "--data", data, "--true", "1.5,-0.7",
                       "--json", "-"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::ordered_json::parse(r.out.substr(r.out.find('{')));
    ASSERT_TRUE(j.contains("comparison"));
    EXPECT_LE(j["comparison"]["max_disagreement"].get<double>(), 1e-8);
    EXPECT_TRUE(j["comparison"].contains("lifted_error"));
}

TEST(Cli, UsageErrors)
{
    const CliRun missing = cli({"fit", "--params-names", "a1", "--data", "x.csv"});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("--model"), std::string::npos);
    EXPECT_EQ(cli({"fit", "--model", "a1*x1", "--params-names", "a1", "--data", "x.csv", "--bogus"}).code, 1);
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"fit", "--model", "a1*x1", "--params-names", "a1", "--data", "x.csv", "--method", "newton"}).code,
              1);
    EXPECT_EQ(cli({"gen", "--model", "a1*x1", "--params-names", "a1", "--true", "1", "--out", temp_path("r.csv"),
                   "--range", "x1=oops"})
                  .code,
              1);
}

TEST(Cli, DataAndModelErrors)
{
    EXPECT_EQ(cli({"fit", "--model", "a1*x1", "--params-names", "a1", "--data", temp_path("absent.csv")}).code, 2);
    EXPECT_EQ(cli({"lift", "--model", "a1*(x1", "--params-names", "a1"}).code, 2);
    EXPECT_EQ(cli({"lift", "--model", "sin(a1*x1)", "--params-names", "a1"}).code, 2);

    const std::string bad = temp_path("bad.csv");
    write_file(bad, "x1,y\n1,abc\n");
    const CliRun r = cli({"fit", "--model", "a1*x1", "--params-names", "a1", "--data", bad});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("row 2"), std::string::npos);

    const std::string wrong_vars = temp_path("vars.csv");
    write_file(wrong_vars, "t,y\n1,2\n");
    EXPECT_EQ(cli({"fit", "--model", "a1*x1", "--params-names", "a1", "--data", wrong_vars}).code, 2);
}

TEST(Cli, UnidentifiableParameterIsNumericalFailure)
{
    const std::string path = temp_path("product.csv");
    ASSERT_EQ(cli({"gen", "--model", "a1*a2*x1", "--params-names", "a1,a2", "--true", "2,3", "--out", path}).code, 0);
    EXPECT_EQ(cli({"fit", "--model", "a1*a2*x1", "--params-names", "a1,a2", "--data", path}).code, 3);
}

TEST(Cli, GenIsDeterministic)
{
    const std::string p1 = temp_path("d1.csv"), p2 = temp_path("d2.csv");
    const std::vector<std::string> base = {"gen", "--model", quad, "--params-names", "a1,a2", "--true", "1.5,-0.7",
                                           "--noise", "0.01", "--seed", "7", "--range", "x2=0:2", "--out"};
    auto a1 = base, a2 = base;
    a1.push_back(p1);
    a2.push_back(p2);
    ASSERT_EQ(cli(a1).code, 0);
    ASSERT_EQ(cli(a2).code, 0);
    EXPECT_EQ(read_file(p1), read_file(p2));
    for (const auto& row : load_dataset_csv(p1).rows) {
        EXPECT_GE(row.point[1], 0.0);
        EXPECT_LT(row.point[1], 2.0);
    }
}
