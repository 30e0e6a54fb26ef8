#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "optinput/analysis.hpp"
#include "optinput/io.hpp"
#include "oracles.hpp"

using namespace optinput;

TEST(KernelJson, RoundTripEveryFamily)
{
    const std::vector<KernelSpec> specs{KernelSpec::ridge(3, 2.0),
                                        KernelSpec::di(4, 1.5, 0.7),
                                        KernelSpec::tc(5, 0.3, 0.9),
                                        KernelSpec::dc(4, 1.0, 0.8, -0.4),
                                        KernelSpec::diag({1.0, 0.5, 0.25}),
                                        KernelSpec::custom_inverse_of(impulse_optimal_inverse())};
    for (const auto& k : specs) {
        const json j = to_json(k);
        const KernelSpec back = kernel_from_json(json::parse(j.dump()));
        EXPECT_EQ(back.family, k.family);
        EXPECT_EQ(back.n, k.n);
        EXPECT_EQ(build_kernel(back).matrix(), build_kernel(k).matrix());
        EXPECT_EQ(to_json(back), j);
    }
}

TEST(KernelJson, Rejections)
{
    EXPECT_THROW(kernel_from_json(json::parse(R"({"family":"TC","n":3,"params":{"c":1}})")), ConfigError);
    EXPECT_THROW(kernel_from_json(json::parse(R"({"family":"TC","n":3,"params":{"c":1,"lambda":2}})")),
                 InvalidHyperparameter);
    EXPECT_THROW(kernel_from_json(json::parse(R"({"family":"SS","n":3,"params":{}})")), InvalidHyperparameter);
    EXPECT_THROW(kernel_from_json(json::parse(R"({"family":"Diagonal","n":2,"params":{"lambdas":[1,2,3]}})")),
                 ConfigError);
    EXPECT_THROW(kernel_from_json(json::parse(R"({"family":"Ridge","n":"x","params":{"c":1}})")), ConfigError);
}

TEST(DataRecordJson, RoundTrip)
{
    oracle::Gen gen(91);
    DataRecord rec{InputSequence::rescaled(gen.gaussian(7), 3.0), gen.gaussian(7), 0.25};
    const DataRecord back = data_record_from_json(json::parse(to_json(rec).dump()));
    EXPECT_EQ(back.input.values, rec.input.values);
    EXPECT_EQ(back.y, rec.y);
    ASSERT_TRUE(back.sigma2.has_value());
    EXPECT_EQ(*back.sigma2, 0.25);

    rec.sigma2.reset();
    const json j = to_json(rec);
    EXPECT_TRUE(j.at("sigma2").is_null());
    EXPECT_FALSE(data_record_from_json(j).sigma2.has_value());
}

TEST(DataRecordJson, Rejections)
{
    EXPECT_THROW(data_record_from_json(json::parse(R"({"u":[1,2],"y":[1]})")), DimensionMismatch);
    EXPECT_THROW(data_record_from_json(json::parse(R"({"u":[1,2]})")), ConfigError);
    EXPECT_THROW(data_record_from_json(json::parse(R"({"u":"abc","y":[1]})")), ConfigError);
}

TEST(DesignSolutionJson, RoundTrip)
{
    const DesignProblem p{KernelSpec::tc(3, 1.0, 0.8), 0.5, 3, 8, 2.0, Criterion::A};
    const DesignSolution s = solve(p);
    const json j = to_json(s);
    for (const char* key : {"r", "a", "u", "value", "criterion", "certificate"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    const DesignSolution back = design_solution_from_json(json::parse(j.dump()));
    EXPECT_EQ(back.r, s.r);
    EXPECT_EQ(back.a, s.a);
    EXPECT_EQ(back.u.values, s.u.values);
    EXPECT_EQ(back.value, s.value);
    EXPECT_EQ(back.criterion, s.criterion);
    EXPECT_EQ(back.certificate.iterations, s.certificate.iterations);
    EXPECT_EQ(back.certificate.converged, s.certificate.converged);
    EXPECT_EQ(to_json(back), j);
}

TEST(MonteCarloConfigJson, ParseAndRoundTrip)
{
    const json j = json::parse(R"({"systems":3,"n":8,"N":24,"energy":5,"snr_range":[2,4],
                                  "kernel_family":"DC","criteria":["D","E"],"master_seed":9,
                                  "output_dir":"out"})");
    const MonteCarloConfig c = monte_carlo_config_from_json(j);
    EXPECT_EQ(c.systems, 3);
    EXPECT_EQ(c.N, 24);
    EXPECT_EQ(c.snr_min, 2.0);
    EXPECT_EQ(c.snr_max, 4.0);
    EXPECT_EQ(c.kernel_family, KernelFamily::DC);
    ASSERT_EQ(c.criteria.size(), 2u);
    EXPECT_EQ(c.criteria[1], Criterion::E);
    EXPECT_EQ(c.master_seed, 9u);
    EXPECT_EQ(to_json(monte_carlo_config_from_json(to_json(c))), to_json(c));
}

TEST(MonteCarloConfigJson, Rejections)
{
    EXPECT_THROW(monte_carlo_config_from_json(json::parse(R"({"snr_range":[1]})")), ConfigError);
    EXPECT_THROW(monte_carlo_config_from_json(json::parse(R"({"criteria":["X"]})")), ConfigError);
    EXPECT_THROW(monte_carlo_config_from_json(json::parse(R"({"n":60,"N":50})")), ConfigError);
    EXPECT_THROW(monte_carlo_config_from_json(json::parse(R"({"systems":"many"})")), ConfigError);
}

TEST(FitsCsv, Format)
{
    const std::vector<FitReport> reps{{0, InputPolicy::WhiteNoise, 61.5, 3.25, 17}, {0, InputPolicy::E, 70.0, 8.0, 18}};
    EXPECT_EQ(fits_csv(reps), "system_id,policy,fit,snr,seed\n0,W,61.5,3.25,17\n0,E,70,8,18\n");
}

TEST(Files, WriteAndReadBack)
{
    const auto dir = std::filesystem::temp_directory_path() / "optinput_io_test";
    std::filesystem::remove_all(dir);
    write_text(dir / "nested" / "k.json", to_json(KernelSpec::ridge(2, 1.0)).dump());
    EXPECT_EQ(kernel_from_json(read_json_file(dir / "nested" / "k.json")).c, 1.0);
    {
        std::ofstream bad(dir / "bad.json");
        bad << "{not json";
    }
    EXPECT_THROW(read_json_file(dir / "bad.json"), ConfigError);
    EXPECT_THROW(read_json_file(dir / "missing.json"), ConfigError);
    std::filesystem::remove_all(dir);
}
