#include <activesplit/cli.hpp>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

#include "support.hpp"

using namespace activesplit;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out, err;
};

CliResult invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "activesplit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_substr(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
    return n;
}

/// Writes datasets and a config with cheap model settings.
class Workspace {
public:
    explicit Workspace(std::vector<std::size_t> sizes, std::vector<std::string> plans = {R"({"bootstrap":{}})",
                                                                                       R"({"quantile":{"q":0.6}})"})
        : dir_("cli") {
        std::string datasets;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const auto name = "set" + std::to_string(i);
            write_dataset(dir_ / (name + ".csv"), testing_support::random_dataset(sizes[i], 100 + i, name));
            datasets += (i ? ",\"" : "\"") + name + ".csv\"";
        }
        std::string plan_list;
        for (std::size_t i = 0; i < plans.size(); ++i) plan_list += (i ? "," : "") + plans[i];
        testing_support::write_text(dir_ / "config.json", R"({
  "datasets": [)" + datasets + R"(],
  "models": [{"ridge": {}}, {"svr": {}}, {"rf": {"n_trees": 5}}, {"mlp": {"hidden_sizes": [16, 4], "epochs": 3}}],
  "split_plans": [)" + plan_list + R"(],
  "iterations": 10,
  "master_seed": 5
})");
    }

    fs::path path(const std::string& name) const { return dir_ / name; }
    std::string str(const std::string& name) const { return (dir_ / name).string(); }

private:
    testing_support::TempDir dir_;
};

}  // namespace

TEST(CliRun, WritesRecordsAndAggregates) {
    Workspace ws({40}, {R"({"bootstrap":{}})"});
    const auto r = invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("out")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = testing_support::read_text(ws.path("out/records.csv"));
    EXPECT_EQ(count_lines(csv), 1u + 10u * 4u * 7u);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,model,split,loss,iteration,value");
    const auto agg = nlohmann::json::parse(testing_support::read_text(ws.path("out/aggregates.json")));
    EXPECT_EQ(agg.at("metadata").at("master_seed"), 5);
    EXPECT_EQ(agg.at("cells").size(), 7u);
}

TEST(CliRun, RerunIsIdenticalApartFromTimestamps) {
    Workspace ws({35, 45});
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("a")}).code, 0);
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("b"), "--parallelism", "4"}).code, 0);
    EXPECT_EQ(testing_support::read_text(ws.path("a/records.csv")), testing_support::read_text(ws.path("b/records.csv")));
    auto a = nlohmann::json::parse(testing_support::read_text(ws.path("a/aggregates.json")));
    auto b = nlohmann::json::parse(testing_support::read_text(ws.path("b/aggregates.json")));
    for (auto* j : {&a, &b}) {
        (*j)["metadata"].erase("started");
        (*j)["metadata"].erase("finished");
        (*j)["metadata"].erase("parallelism");
        (*j)["metadata"]["config"].erase("parallelism");
    }
    EXPECT_EQ(a, b);
}

TEST(CliRun, SeedPrecedence) {
    Workspace ws({30}, {R"({"bootstrap":{}})"});
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("s"), "--seed", "77", "--iterations", "2"}).code, 0);
    const auto agg = nlohmann::json::parse(testing_support::read_text(ws.path("s/aggregates.json")));
    EXPECT_EQ(agg.at("metadata").at("master_seed"), 77);
    EXPECT_EQ(agg.at("metadata").at("iterations"), 2);
}

TEST(CliRun, RefusesToOverwriteWithoutForce) {
    Workspace ws({30}, {R"({"bootstrap":{}})"});
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o"), "--iterations", "2"}).code, 0);
    const auto again = invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o"), "--iterations", "2"});
    EXPECT_EQ(again.code, 1);
    EXPECT_NE(again.err.find("--force"), std::string::npos);
    EXPECT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o"), "--iterations", "2", "--force"}).code, 0);
}

TEST(CliRun, MissingDatasetIsDataError) {
    Workspace ws({30});
    fs::remove(ws.path("set0.csv"));
    const auto r = invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(ws.str("set0.csv")), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(ws.path("o/aggregates.json")));
}

TEST(CliRun, ConfigErrors) {
    Workspace ws({30});
    testing_support::write_text(ws.path("bad.json"), "{\"datasets\": [");
    EXPECT_EQ(invoke({"run", "--config", ws.str("bad.json"), "--out", ws.str("o")}).code, 1);
    EXPECT_EQ(invoke({"run", "--config", ws.str("nope.json"), "--out", ws.str("o")}).code, 1);
    EXPECT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o"), "--datasets", "other"}).code, 1);
    EXPECT_EQ(invoke({"frobnicate"}).code, 1);
}

TEST(CliRun, TooSmallForQuantileIsDataError) {
    Workspace ws({12}, {R"({"quantile":{"q":0.9}})"});
    EXPECT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("o")}).code, 2);
}

TEST(CliReport, TablesAndScores) {
    Workspace ws({30, 40, 50});
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("r")}).code, 0);
    const auto r = invoke({"report", ws.str("r")});
    ASSERT_EQ(r.code, 0) << r.err;
    // 3 datasets x 2 splits x 7 losses tables, each with 4 model rows
    EXPECT_EQ(count_substr(r.out, "\n-- quantile:0.6  "), 3u * 7u);
    EXPECT_EQ(count_substr(r.out, "\nsvr "), 3u * 2u * 7u);
    std::istringstream lines(r.out.substr(r.out.find("== overall scores")));
    std::string line;
    int score_rows = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("bootstrap", 0) != 0 && line.rfind("quantile", 0) != 0) continue;
        ++score_rows;
        std::istringstream fields(line);
        std::string field, last;
        while (fields >> field) last = field;
        EXPECT_EQ(last, "3.000") << line;
    }
    EXPECT_EQ(score_rows, 2 * 7);
    // quantile splits are listed after bootstrap, panels start with lmin@0.9
    const auto scores = r.out.substr(r.out.find("== overall scores"));
    EXPECT_LT(scores.find("-- lmin@0.9\n"), scores.find("-- lsum@0.9\n"));
    EXPECT_LT(scores.find("-- lsum@0.99\n"), scores.find("-- mse\n"));
}

TEST(CliReport, MissingResultsIsDataError) {
    testing_support::TempDir empty("empty");
    const auto r = invoke({"report", empty.path().string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("aggregates.json"), std::string::npos);
}

TEST(CliPlot, OneChartPerSplitAndLossPlusScorePanels) {
    Workspace ws({30, 40, 50}, {R"({"bootstrap":{}})", R"({"quantile":{"q":0.8}})", R"({"quantile":{"q":0.5}})",
                                R"({"kfold":{"k":3}})"});
    ASSERT_EQ(invoke({"run", "--config", ws.str("config.json"), "--out", ws.str("p"), "--iterations", "3"}).code, 0);
    const auto r = invoke({"plot", ws.str("p")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t svgs = 0;
    for (const auto& e : fs::directory_iterator(ws.path("p/plots"))) {
        ++svgs;
        boost::property_tree::ptree tree;
        EXPECT_NO_THROW(boost::property_tree::read_xml(e.path().string(), tree)) << e.path();
        EXPECT_EQ(tree.count("svg"), 1u);
    }
    EXPECT_EQ(svgs, 4u * 7u + 7u);
    const auto loss = testing_support::read_text(ws.path("p/plots/loss_quantile_0.8_lmin_0.99.svg"));
    EXPECT_EQ(count_substr(loss, "class=\"point\""), 3u * 4u);
    EXPECT_EQ(count_substr(loss, "class=\"xtick\""), 3u);
    EXPECT_LT(loss.find("set0 (30)"), loss.find("set2 (50)"));
    const auto score = testing_support::read_text(ws.path("p/plots/scores_lsum_0.95.svg"));
    EXPECT_EQ(count_substr(score, "class=\"xtick\""), 3u);
    EXPECT_EQ(count_substr(score, "class=\"series\""), 4u);
    EXPECT_NE(score.find(">0.5</text>"), std::string::npos);
    EXPECT_NE(score.find(">1</text>"), std::string::npos);
}

TEST(CliValidate, SummariesAndFailures) {
    Workspace ws({30, 40});
    const auto ok = invoke({"validate-data", "--config", ws.str("config.json")});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(count_lines(ok.out), 2u);
    EXPECT_NE(ok.out.find("set1: N=40"), std::string::npos) << ok.out;
    testing_support::write_text(ws.path("broken.csv"), "id,activity,fp\nx,1.0,zz\n");
    const auto bad = invoke({"validate-data", ws.str("set0.csv"), ws.str("broken.csv")});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("broken.csv"), std::string::npos);
    EXPECT_EQ(count_lines(bad.out), 1u);
}

TEST(CliDumpSplit, MatchesLibrarySplit) {
    Workspace ws({50});
    const auto r = invoke({"dump-split", "--data", ws.str("set0.csv"), "--plan", "quantile:0.6", "--seed", "3", "--iteration", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    const auto expect = quantile_bootstrap_split(50, 0.6, derive_seed(3, "set0", 2));
    EXPECT_EQ(j.at("train").get<std::vector<std::size_t>>(), expect.train);
    EXPECT_EQ(j.at("test").get<std::vector<std::size_t>>(), expect.test);
    const auto folds = nlohmann::json::parse(invoke({"dump-split", "--data", ws.str("set0.csv"), "--plan", "kfold:5"}).out);
    EXPECT_EQ(folds.size(), 5u);
    EXPECT_EQ(invoke({"dump-split", "--data", ws.str("set0.csv"), "--plan", "stratified"}).code, 1);
    EXPECT_EQ(invoke({"dump-split", "--data", ws.str("none.csv"), "--plan", "bootstrap"}).code, 2);
}

TEST(CliBinary, ExitCodesFromProcess) {
    Workspace ws({30});
    const std::string exe = ACTIVESPLIT_CLI_PATH;
    EXPECT_EQ(std::system((exe + " validate-data " + ws.str("set0.csv") + " > /dev/null").c_str()), 0);
    const int status = std::system((exe + " report " + ws.str("missing") + " 2> /dev/null").c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 2);
    EXPECT_EQ(std::system((exe + " --help > /dev/null").c_str()), 0);
}
