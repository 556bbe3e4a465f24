#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"
#include "zeroclust/cluster.hpp"
#include "zeroclust/embank.hpp"
#include "zeroclust/reduce.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r;
    r.code = zeroclust::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliPipeline : public ::testing::Test {
  protected:
    void SetUp() override {
        dir = testing_support::temp_dir();
        bank = (dir / "bank").string();
        ASSERT_EQ(run({"synth", "--out", bank, "--blobs", "4", "--per-blob", "30", "--dim", "12", "--seed", "3"}).code,
                  0);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
    std::string bank;
};

}  // namespace

TEST(Cli, HelpIsSuccess) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("count-experiment"), std::string::npos);
}

TEST(Cli, SubcommandHelpShowsDefaults) {
    const auto r = run({"cluster", "--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("min-cluster-size"), std::string::npos);
    EXPECT_NE(r.out.find("15"), std::string::npos);
    const auto reduce = run({"reduce", "--help"});
    EXPECT_NE(reduce.out.find("perplexity"), std::string::npos);
    EXPECT_NE(reduce.out.find("30"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"reduce", "--method", "tsne"}).code, 1);
    EXPECT_EQ(run({"cluster", "--input", "x", "--min-samples", "many"}).code, 1);
}

TEST(Cli, MissingBankIsDataError) {
    const auto r = run({"validate", "/nonexistent/bank"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST_F(CliPipeline, ValidateReportsSpecies) {
    const auto r = run({"validate", bank, "--json"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"n_species\": 4"), std::string::npos);
}

TEST_F(CliPipeline, FullPipeline) {
    ASSERT_EQ(run({"sample", "--bank", bank, "--n-species", "3", "--per-species", "25", "--seed", "1", "--out",
                   path("sub.json")})
                  .code,
              0);
    auto r = run({"reduce", "--bank", bank, "--subset", path("sub.json"), "--out", path("red"), "--method", "pca"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "red" / "coords.zseb"));
    EXPECT_TRUE(fs::exists(dir / "red" / "recipe.json"));
    EXPECT_TRUE(fs::exists(dir / "red" / "subset.json"));

    r = run({"cluster", "--input", path("red"), "--method", "hdbscan", "--min-cluster-size", "10", "--min-samples",
             "5", "--out", path("a.json")});
    ASSERT_EQ(r.code, 0) << r.err;

    r = run({"eval", "--assignment", path("a.json"), "--truth", path("sub.json"), "--coords", path("red")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"v_measure\": 1.0"), std::string::npos);
    EXPECT_NE(r.out.find("\"silhouette\""), std::string::npos);

    r = run({"plot", "--coords", path("red"), "--assignment", path("a.json"), "--truth", path("sub.json"), "--out",
             path("p.svg")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "p.svg").rfind("<svg", 0), 0u);
}

TEST_F(CliPipeline, ClusterMatchesLibrary) {
    ASSERT_EQ(run({"reduce", "--bank", bank, "--out", path("red"), "--method", "pca"}).code, 0);
    ASSERT_EQ(run({"cluster", "--input", path("red"), "--method", "ward", "--k", "4", "--out", path("a.json")}).code,
              0);
    const auto space = zeroclust::read_reduced_space(dir / "red");
    const auto direct = zeroclust::ward_hierarchical(space.coords, 4);
    std::string labels = "[";
    for (std::size_t i = 0; i < direct.labels.size(); ++i) {
        labels += (i ? "," : "") + std::to_string(direct.labels[i]);
    }
    labels += "]";
    EXPECT_NE(slurp(dir / "a.json").find("\"labels\":" + labels), std::string::npos);
}

TEST_F(CliPipeline, ClusterOnRawBank) {
    const auto r = run({"cluster", "--input", bank, "--method", "hdbscan", "--min-cluster-size", "150",
                        "--min-samples", "50"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("min_cluster_size"), std::string::npos);
    EXPECT_EQ(run({"cluster", "--input", bank, "--method", "gmm", "--k", "4"}).code, 0);
}

TEST_F(CliPipeline, EvalLengthMismatchExitsTwo) {
    ASSERT_EQ(run({"sample", "--bank", bank, "--n-species", "2", "--per-species", "10", "--out", path("sub.json")}).code,
              0);
    {
        std::ofstream out(dir / "a.json");
        out << R"({"labels": [0, 0, 1], "algorithm": {"method": "ward", "params": {"k": 2}}, "n_clusters": 2})";
    }
    const auto r = run({"eval", "--assignment", path("a.json"), "--truth", path("sub.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("labels"), std::string::npos);
}

TEST_F(CliPipeline, ScenarioErrorsExitTwo) {
    const auto r = run({"sample", "--bank", bank, "--n-species", "9"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("scenario"), std::string::npos);
}

TEST_F(CliPipeline, BadParametersExitOne) {
    ASSERT_EQ(run({"reduce", "--bank", bank, "--out", path("red"), "--method", "pca"}).code, 0);
    auto r = run({"cluster", "--input", path("red"), "--method", "dbscan", "--eps-scale", "-1"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("eps"), std::string::npos);
    r = run({"reduce", "--bank", bank, "--out", path("r2"), "--method", "tsne", "--perplexity", "50"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("perplexity"), std::string::npos);
    EXPECT_EQ(run({"cluster", "--input", path("red"), "--method", "spectral"}).code, 1);
}

TEST_F(CliPipeline, BenchDryRunAndReport) {
    EXPECT_NE(run({"bench", "--default-grid", "--dry-run"}).out.find("13800 reduced + 600 raw = 14400"),
              std::string::npos);
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"banks": ["bank"], "scenario": {"kind": "even", "n_species": 3, "per_species": 20},
                   "n_runs": 2, "reductions": [{"method": "pca"}],
                   "clusterings": [{"method": "hdbscan", "params": {"min_cluster_size": 10, "min_samples": 5}}],
                   "output_dir": "out"})";
    }
    auto r = run({"bench", "--config", path("cfg.json"), "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("executed 4"), std::string::npos);
    r = run({"bench", "--config", path("cfg.json")});
    EXPECT_NE(r.out.find("skipped 4"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));

    r = run({"report", "--log", (dir / "out" / "runs.jsonl").string(), "--group-by", "reduction", "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"group_by\""), std::string::npos);
    r = run({"report", "--log", (dir / "out" / "runs.jsonl").string(), "--group-by", "colour"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(run({"bench"}).code, 1);
}

TEST_F(CliPipeline, CountExperiment) {
    const auto r = run({"count-experiment", "--bank", bank, "--n-values", "2,4", "--runs", "2", "--per-species", "30",
                        "--method", "pca", "--cluster-method", "ward", "--k", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"n_species\": 2"), std::string::npos);
    EXPECT_EQ(run({"count-experiment", "--bank", bank, "--n-values", "2,x"}).code, 1);
}
