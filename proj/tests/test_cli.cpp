#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "recourse/results.hpp"
#include "test_util.hpp"

using namespace recourse;

namespace {

const std::string kCli = RECOURSE_CLI;
const std::string kDemo = RECOURSE_DEMO_DIR;

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::string& args, const std::string& dir) {
    std::string out = dir + "/stdout.txt", err = dir + "/stderr.txt";
    int status = std::system((kCli + " " + args + " > " + out + " 2> " + err).c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(out), read_text_file(err)};
}

std::string demo_args() {
    return "--data " + kDemo + "/credit.csv --schema " + kDemo + "/credit.schema.json --predictor builtin:knn:k=5";
}

std::string slurp(const std::string& path) { return read_text_file(path); }

} // namespace

TEST(Cli, WhatIfOnDemoDataIsReproducible) {
    auto dir = testutil::scratch_dir("cli_whatif");
    std::string args = "generate --method whatif " + demo_args() + " --x-interest 7 --desired-class good --no-svg";
    auto a = run(args + " --out " + dir + "/a", dir);
    auto b = run(args + " --out " + dir + "/b", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir + "/a/counterfactuals.json"), slurp(dir + "/b/counterfactuals.json"));
    EXPECT_EQ(slurp(dir + "/a/evaluation.csv"), slurp(dir + "/b/evaluation.csv"));
    auto manifest = json::parse(slurp(dir + "/a/manifest.json"));
    EXPECT_EQ(manifest["engine"], "recourse");
    EXPECT_EQ(manifest["config"]["method"], "whatif");
    EXPECT_TRUE(manifest.contains("started_at"));
}

TEST(Cli, MissingSchemaPrintsUsageAndFails) {
    auto dir = testutil::scratch_dir("cli_missing");
    auto r = run("generate --method whatif --data " + kDemo + "/credit.csv --predictor builtin:knn --x-interest 0 --out " +
                     dir + "/o",
                 dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--schema"), std::string::npos);
    EXPECT_NE(r.err.find("--x-interest"), std::string::npos); // help text lists the options
}

TEST(Cli, ParseErrorExitsWithUsageCode) {
    auto dir = testutil::scratch_dir("cli_parse");
    EXPECT_EQ(run("generate --bogus-flag", dir).code, 2);
    EXPECT_EQ(run("generate --method dice", dir).code, 2);
    EXPECT_EQ(run("", dir).code, 2);
}

TEST(Cli, MocWithSeedIsReproducible) {
    auto dir = testutil::scratch_dir("cli_moc");
    write_text_file(dir + "/moc.json", R"({"n_generations": 15, "mu": 12})");
    std::string args = "generate --method moc " + demo_args() + " --x-interest 5 --desired-class good --seed 7 --config " +
                       dir + "/moc.json";
    auto a = run(args + " --out " + dir + "/a", dir);
    auto b = run(args + " --out " + dir + "/b", dir);
    ASSERT_NE(a.code, 1) << a.err;
    EXPECT_EQ(a.code, b.code);
    EXPECT_EQ(slurp(dir + "/a/counterfactuals.json"), slurp(dir + "/b/counterfactuals.json"));
    EXPECT_EQ(slurp(dir + "/a/generation_log.csv"), slurp(dir + "/b/generation_log.csv"));
    auto doc = json::parse(slurp(dir + "/a/counterfactuals.json"));
    EXPECT_EQ(doc["provenance"]["seed"], 7);
    EXPECT_TRUE(std::filesystem::exists(dir + "/a/moc_statistics.svg"));
}

TEST(Cli, EvaluateReplaysStoredSet) {
    auto dir = testutil::scratch_dir("cli_eval");
    auto g = run("generate --method whatif " + demo_args() + " --x-interest 7 --desired-class good --no-svg --out " +
                     dir + "/g",
                 dir);
    ASSERT_EQ(g.code, 0) << g.err;
    auto e = run("evaluate --set " + dir + "/g/counterfactuals.json " + demo_args() + " --no-svg --out " + dir + "/e",
                 dir);
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(slurp(dir + "/e/evaluation.csv"), slurp(dir + "/g/evaluation.csv"));

    auto diff = run("evaluate --set " + dir + "/g/counterfactuals.json " + demo_args() + " --show-diff", dir);
    EXPECT_EQ(diff.code, 0);
    EXPECT_NE(diff.out.find("NA"), std::string::npos); // age is fixed, so never differs

    auto doc = json::parse(slurp(dir + "/g/counterfactuals.json"));
    doc["counterfactuals"] = json::array();
    write_text_file(dir + "/empty.json", doc.dump());
    EXPECT_EQ(run("evaluate --set " + dir + "/empty.json " + demo_args(), dir).code, 3);
    EXPECT_EQ(run("evaluate --set " + dir + "/missing.json " + demo_args(), dir).code, 1);
}

TEST(Cli, BenchmarkCellsAndRerunDeterminism) {
    auto dir = testutil::scratch_dir("cli_bench");
    json spec = {{"seed", 5},
                 {"n_query_points", 2},
                 {"datasets", json::array({json{{"name", "credit"},
                                                {"data", kDemo + "/credit.csv"},
                                                {"schema", kDemo + "/credit.schema.json"}}})},
                 {"predictors", json::array({json{{"name", "knn"}, {"spec", "builtin:knn:k=5"}}})},
                 {"configs", {{"moc", {{"max_generations", 30}}}}}};
    write_text_file(dir + "/spec.json", spec.dump());
    auto a = run("benchmark --spec " + dir + "/spec.json --out " + dir + "/a", dir);
    auto b = run("benchmark --spec " + dir + "/spec.json --out " + dir + "/b --jobs 2 --no-svg", dir);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    std::string cells = slurp(dir + "/a/cells.csv");
    EXPECT_EQ(std::count(cells.begin(), cells.end(), '\n'), 1 + 6);
    EXPECT_EQ(cells, slurp(dir + "/b/cells.csv"));
    EXPECT_EQ(slurp(dir + "/a/records.csv"), slurp(dir + "/b/records.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir + "/a/hv.svg"));
    EXPECT_FALSE(std::filesystem::exists(dir + "/b/hv.svg"));

    write_text_file(dir + "/bad.json", R"({"datasets": [], "predictors": []})");
    EXPECT_EQ(run("benchmark --spec " + dir + "/bad.json --out " + dir + "/c", dir).code, 1);
    write_text_file(dir + "/broken.json", "{ not json");
    EXPECT_EQ(run("benchmark --spec " + dir + "/broken.json --out " + dir + "/c", dir).code, 1);
}

TEST(Cli, SelftestPasses) {
    auto dir = testutil::scratch_dir("cli_self");
    auto r = run("selftest", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
