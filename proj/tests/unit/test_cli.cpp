#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "optinput/io.hpp"
#include "oracles.hpp"

using namespace optinput;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
};

Outcome run(const std::string& args)
{
    const std::string cmd = std::string(OPTINPUT_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return {-1, {}};
    }
    std::string out;
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        out.append(buf.data(), got);
    }
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("optinput_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string put(const std::string& name, const json& j)
    {
        write_text(dir / name, j.dump());
        return (dir / name).string();
    }
};

} // namespace

TEST_F(Cli, DesignRidgeGivesImpulse)
{
    const std::string k = put("k.json", json::parse(R"({"family":"Ridge","params":{"c":1}})"));
    const std::string out = (dir / "sol.json").string();
    const Outcome r = run("design --kernel " + k + " --sigma2 1 --n 3 --N 8 --energy 2 --criterion D --out " + out);
    ASSERT_EQ(r.code, 0);
    const DesignSolution s = design_solution_from_json(read_json_file(out));
    EXPECT_NEAR(s.r(0), 2.0, 1e-6);
    EXPECT_NEAR(s.r(1), 0.0, 1e-6);
    EXPECT_NEAR(s.r(2), 0.0, 1e-6);
    EXPECT_TRUE(s.certificate.converged);
}

TEST_F(Cli, DesignMissingFlagIsInputError)
{
    const std::string k = put("k.json", json::parse(R"({"family":"Ridge","params":{"c":1}})"));
    EXPECT_EQ(run("design --kernel " + k + " --n 3 --N 8 --energy 1 --criterion D").code, 1);
    EXPECT_EQ(run("design --kernel " + (dir / "nope.json").string() +
                  " --sigma2 1 --n 3 --N 8 --energy 1 --criterion D")
                  .code,
              1);
    EXPECT_EQ(run("design --kernel " + k + " --sigma2 1 --n 3 --N 8 --energy 1 --criterion Q").code, 1);
    EXPECT_EQ(run("").code, 1);
}

TEST_F(Cli, DesignECriterionReturnsBestIterate)
{
    const std::string k = put("k.json", json::parse(R"({"family":"DC","params":{"c":1,"lambda":0.9,"rho":0.5}})"));
    const std::string out = (dir / "sol.json").string();
    const Outcome r = run("design --kernel " + k + " --sigma2 1 --n 3 --N 8 --energy 1 --criterion E --out " + out);
    EXPECT_TRUE(r.code == 0 || r.code == 2) << r.code;
    const DesignSolution s = design_solution_from_json(read_json_file(out));
    EXPECT_EQ(s.criterion, Criterion::E);
    EXPECT_NEAR(s.u.values.squaredNorm(), 1.0, 1e-9);
}

TEST_F(Cli, DesignBudgetExhaustionExitsTwo)
{
    const std::string k = put("k.json", json::parse(R"({"family":"DC","params":{"c":1,"lambda":0.9,"rho":0.5}})"));
    const Outcome r = run("design --kernel " + k + " --sigma2 1 --n 3 --N 8 --energy 1 --criterion D --max-iter 0");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(json::parse(r.out).at("certificate").at("converged").get<bool>());
}

TEST_F(Cli, EstimateNoiseFreeRecord)
{
    oracle::Gen gen(101);
    const Vector u = gen.gaussian(80);
    Vector g(6);
    g << 1.0, 0.6, 0.36, 0.2, 0.1, 0.05;
    const Vector y = oracle::regressor(u, 6) * g;
    const std::string data = put("rec.json", json{{"u", vector_to_json(u)}, {"y", vector_to_json(y)}, {"sigma2", 1e-8}});
    const Outcome r = run("estimate --data " + data + " --n 6");
    ASSERT_EQ(r.code, 0);
    const json j = json::parse(r.out);
    EXPECT_EQ(j.at("sigma2_hat").get<double>(), 1e-8);
    EXPECT_LE((vector_from_json(j.at("theta_rls")) - g).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_EQ(kernel_from_json(j.at("kernel_spec")).family, KernelFamily::TC);
}

TEST_F(Cli, EstimateMalformedRecord)
{
    const std::string data = put("rec.json", json::parse(R"({"u":[1,2,3],"y":[1,2]})"));
    EXPECT_EQ(run("estimate --data " + data + " --n 2").code, 1);
    const std::string ok = put("ok.json", json::parse(R"({"u":[1,2,3,4],"y":[1,2,3,4]})"));
    EXPECT_EQ(run("estimate --data " + ok + " --n 9").code, 1);
    EXPECT_EQ(run("estimate --data " + ok + " --n 2 --family SS").code, 1);
}

TEST_F(Cli, EstimateRecoversTcDecay)
{
    oracle::Gen gen(102);
    const int n = 30;
    Matrix p(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            p(i, j) = std::pow(0.8, std::max(i, j) + 1);
        }
    }
    const Vector theta = Eigen::LLT<Matrix>(p).matrixL() * gen.gaussian(n);
    const Vector u = gen.gaussian(200);
    const Vector y0 = oracle::regressor(u, n) * theta;
    const double s2 = 1e-3 * y0.squaredNorm() / 200;
    const Vector y = y0 + std::sqrt(s2) * gen.gaussian(200);
    const std::string data = put("rec.json", json{{"u", vector_to_json(u)}, {"y", vector_to_json(y)}, {"sigma2", s2}});
    const Outcome r = run("estimate --data " + data + " --n 30 --family TC");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(json::parse(r.out).at("kernel_spec").at("params").at("lambda").get<double>(), 0.8, 0.15);
}

TEST_F(Cli, VerifySingleAndUnknownClaims)
{
    const Outcome r = run("verify --claims ridge");
    EXPECT_EQ(r.code, 0);
    std::istringstream lines(r.out);
    std::string first;
    std::getline(lines, first);
    EXPECT_EQ(json::parse(first).at("claim_id"), "ridge");
    EXPECT_TRUE(json::parse(first).at("holds").get<bool>());
    EXPECT_EQ(run("verify --claims ridge,bogus").code, 1);
}

TEST_F(Cli, VerifyFullSuite)
{
    const Outcome r = run("verify");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 9);
}

TEST_F(Cli, MonteCarloZeroSystemsAndDeterminism)
{
    const std::string empty = put("mc0.json", json{{"systems", 0}, {"output_dir", (dir / "out0").string()}});
    ASSERT_EQ(run("mc --config " + empty).code, 0);
    EXPECT_EQ(slurp(dir / "out0" / "fits.csv"), "system_id,policy,fit,snr,seed\n");
    EXPECT_EQ(read_json_file(dir / "out0" / "summary.json").at("failures"), 0);

    json cfg{{"systems", 2}, {"n", 8}, {"N", 24}, {"criteria", {"D"}}, {"master_seed", 3}};
    cfg["output_dir"] = (dir / "a").string();
    ASSERT_EQ(run("mc --config " + put("a.json", cfg)).code, 0);
    cfg["output_dir"] = (dir / "b").string();
    ASSERT_EQ(run("mc --config " + put("b.json", cfg)).code, 0);
    EXPECT_EQ(slurp(dir / "a" / "fits.csv"), slurp(dir / "b" / "fits.csv"));
    EXPECT_EQ(slurp(dir / "a" / "summary.json"), slurp(dir / "b" / "summary.json"));
    EXPECT_TRUE(read_json_file(dir / "a" / "summary.json").at("policies").contains("D"));

    EXPECT_EQ(run("mc --config " + put("bad.json", json{{"n", 60}, {"N", 10}})).code, 1);
}

TEST_F(Cli, BasisDump)
{
    const Outcome two = run("basis --N 2 --n 1");
    ASSERT_EQ(two.code, 0);
    const Matrix w = matrix_from_json(json::parse(two.out).at("W"));
    const double h = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(w(0, 0), h, 1e-15);
    EXPECT_NEAR(w(0, 1), h, 1e-15);
    EXPECT_NEAR(w(1, 0), h, 1e-15);
    EXPECT_NEAR(w(1, 1), -h, 1e-15);

    const Outcome four = run("basis --N 4 --n 2 --energy 1");
    ASSERT_EQ(four.code, 0);
    const json j = json::parse(four.out);
    EXPECT_LE(j.at("orthogonality_error").get<double>(), 1e-12);
    const Matrix v = matrix_from_json(j.at("vertices"));
    ASSERT_EQ(v.rows(), 3);
    Matrix expected(3, 2);
    expected << 1, 1, 1, 0, 1, -1;
    EXPECT_LE((v - expected).cwiseAbs().maxCoeff(), 1e-12);

    EXPECT_EQ(run("basis --N 2 --n 3").code, 1);
}
