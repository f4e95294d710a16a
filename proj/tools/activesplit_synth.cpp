// Writes the synthetic benchmark corpus (one CSV per target) plus a sample
// experiment config into a directory.

#include <activesplit/data.hpp>
#include <activesplit/synthetic.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"activesplit-synth: write synthetic stand-ins for the 25 benchmark targets"};
    std::filesystem::path out = "data/synthetic";
    std::uint64_t seed = 0;
    std::vector<std::string> only;
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--targets", only, "comma-separated subset of target names")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(out);
    nlohmann::json datasets = nlohmann::json::array();
    for (const auto& entry : activesplit::kBenchmarkTargets) {
        if (!only.empty() && std::find(only.begin(), only.end(), entry.name) == only.end()) continue;
        const auto ds = activesplit::make_synthetic_dataset(entry, seed);
        const auto file = std::string(entry.name) + ".csv";
        activesplit::write_dataset(out / file, ds);
        datasets.push_back(file);
        std::cout << (out / file).string() << " N=" << ds.size() << '\n';
    }
    const nlohmann::json config{
        {"datasets", datasets},
        {"models", {{{"ridge", nlohmann::json::object()}}, {{"svr", nlohmann::json::object()}}, {{"rf", nlohmann::json::object()}},
                    {{"mlp", nlohmann::json::object()}}}},
        {"split_plans",
         {{{"bootstrap", nlohmann::json::object()}}, {{"quantile", {{"q", 0.9}}}}, {{"quantile", {{"q", 0.8}}}},
          {{"quantile", {{"q", 0.6}}}}, {{"quantile", {{"q", 0.4}}}}}},
        {"gammas", {0.9, 0.95, 0.99}},
        {"iterations", 400},
        {"master_seed", 1},
        {"parallelism", 1}};
    std::ofstream(out / "experiment.json") << config.dump(2) << '\n';
    return 0;
}
