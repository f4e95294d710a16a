#pragma once

// Command-line front end. Exit codes: 0 ok, 1 usage/config error, 2 data or
// results error, 3 model/runtime error.

#include <activesplit/data.hpp>
#include <activesplit/harness.hpp>
#include <activesplit/report.hpp>
#include <activesplit/split.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace activesplit::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

inline constexpr const char* kSeedEnv = "ACTIVESPLIT_SEED";
inline constexpr const char* kRecordsFile = "records.csv";
inline constexpr const char* kAggregatesFile = "aggregates.json";

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    std::vector<std::string> datasets;
    bool force = false;
};

inline std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv(kSeedEnv);
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto s = std::stoull(v, &used);
        if (used != std::string_view(v).size()) throw std::invalid_argument(v);
        return s;
    } catch (const std::exception&) {
        throw ConfigError(std::string(kSeedEnv) + " is not an unsigned integer: '" + v + "'");
    }
}

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    ExperimentConfig config;
    try {
        std::ifstream in(opt.config);
        if (!in) throw ConfigError("cannot open config '" + opt.config.string() + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config '" + opt.config.string() + "' is not valid JSON: " + e.what());
        }
        config = config_from_json(j, opt.config.parent_path());
        // seed precedence: --seed, then the config's master_seed, then the environment
        if (opt.seed) {
            config.master_seed = *opt.seed;
        } else if (!j.contains("master_seed")) {
            config.master_seed = seed_from_env().value_or(0);
        }
        if (opt.iterations) config.iterations = *opt.iterations;
        if (opt.parallelism) config.parallelism = *opt.parallelism;
        if (!opt.datasets.empty()) {
            std::vector<std::filesystem::path> keep;
            for (const auto& want : opt.datasets) {
                const auto it = std::find_if(config.datasets.begin(), config.datasets.end(),
                                             [&](const auto& p) { return p.stem().string() == want || p.string() == want; });
                if (it == config.datasets.end()) throw ConfigError("--datasets: '" + want + "' is not in the config");
                keep.push_back(*it);
            }
            config.datasets = keep;
        }
        config.validate();
        if (config.datasets.empty()) throw ConfigError("config lists no datasets");
        if (std::filesystem::exists(opt.out / kAggregatesFile) && !opt.force)
            throw ConfigError("'" + opt.out.string() + "' already holds a completed run; pass --force to overwrite");
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    std::vector<Dataset> datasets;
    for (const auto& p : config.datasets) {
        try {
            if (!std::filesystem::exists(p)) throw ValidationError("dataset file not found: '" + p.string() + "'");
            datasets.push_back(parse_dataset(p, config.ingest));
        } catch (const Error& e) {
            err << "data error: " << p.string() << ": " << e.what() << '\n';
            return kDataError;
        }
    }

    ResultTable table;
    try {
        table = run_experiment(config, datasets, [&](const std::string& what) { err << "running " << what << '\n'; });
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }

    try {
        std::filesystem::create_directories(opt.out);
        {
            std::ofstream csv(opt.out / kRecordsFile, std::ios::binary);
            write_records_csv(csv, table.records);
            if (!csv) throw Error("failed writing " + (opt.out / kRecordsFile).string());
        }
        std::ofstream agg(opt.out / kAggregatesFile, std::ios::binary);
        agg << aggregates_to_json(table).dump(2) << '\n';
        if (!agg) throw Error("failed writing " + (opt.out / kAggregatesFile).string());
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
    out << "wrote " << table.records.size() << " records for " << datasets.size() << " dataset(s) to " << opt.out.string()
        << '\n';
    return kOk;
}

inline std::optional<ResultTable> load_results(const std::filesystem::path& dir, std::ostream& err) {
    const auto path = dir / kAggregatesFile;
    std::ifstream in(path);
    if (!in) {
        err << "results error: no " << kAggregatesFile << " in '" << dir.string() << "'\n";
        return std::nullopt;
    }
    try {
        return aggregates_from_json(nlohmann::json::parse(in));
    } catch (const std::exception& e) {
        err << "results error: " << path.string() << ": " << e.what() << '\n';
        return std::nullopt;
    }
}

inline int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
    const auto table = load_results(dir, err);
    if (!table) return kDataError;
    write_report(out, *table);
    return kOk;
}

inline int cmd_plot(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
    const auto table = load_results(dir, err);
    if (!table) return kDataError;
    try {
        for (const auto& p : write_plots(*table, dir / "plots")) out << p.string() << '\n';
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

inline int cmd_validate(const std::vector<std::filesystem::path>& paths, const IngestOptions& ingest, std::ostream& out,
                        std::ostream& err) {
    int status = kOk;
    for (const auto& p : paths) {
        try {
            if (!std::filesystem::exists(p)) throw ValidationError("file not found");
            const auto ds = parse_dataset(p, ingest);
            const auto s = summarize(ds);
            out << ds.name() << (ds.target_id().empty() ? "" : " (" + ds.target_id() + ")") << ": N=" << s.n
                << " activity min/median/max=" << format_exact(s.activity_min) << '/' << format_exact(s.activity_median) << '/'
                << format_exact(s.activity_max) << " bits/molecule=" << detail::fixed(s.mean_bits_set, 2)
                << " density=" << detail::fixed(s.bit_density, 3) << " constant_columns=" << s.constant_columns
                << " column_density min/max=" << detail::fixed(s.min_column_density, 3) << '/'
                << detail::fixed(s.max_column_density, 3) << '\n';
        } catch (const Error& e) {
            err << "data error: " << p.string() << ": " << e.what() << '\n';
            status = kDataError;
        }
    }
    return status;
}

/// Prints the split(s) the harness would draw for one dataset, plan and
/// iteration as {"train":[...],"test":[...]}. k-fold prints every fold.
inline int cmd_dump_split(const std::filesystem::path& data, const std::string& plan_label, std::uint64_t seed, int iteration,
                          std::ostream& out, std::ostream& err) {
    SplitKind plan;
    try {
        plan = split_kind_from_label(plan_label);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        if (!std::filesystem::exists(data)) throw ValidationError("file not found");
        const auto ds = parse_dataset(data);
        const auto is_kfold = std::holds_alternative<KFold>(plan);
        const auto s = derive_seed(seed, ds.name(), is_kfold ? 0 : static_cast<std::uint64_t>(iteration));
        const auto splits = make_splits(plan, ds.size(), s);
        if (is_kfold) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& sp : splits) arr.push_back(to_json(sp));
            out << arr.dump() << '\n';
        } else {
            out << to_json(splits.front()).dump() << '\n';
        }
    } catch (const Error& e) {
        err << "data error: " << data.string() << ": " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"activesplit: benchmark regression models under random and activity-quantile resampling"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "run an experiment grid and write records.csv + aggregates.json");
    run_cmd->add_option("--config", run.config, "experiment config (JSON)")->required();
    run_cmd->add_option("--out", run.out, "output directory")->required();
    run_cmd->add_option("--iterations", run.iterations, "bootstrap iterations per cell");
    run_cmd->add_option("--seed", run.seed, "master seed (fallback: config, then $ACTIVESPLIT_SEED)");
    run_cmd->add_option("--parallelism", run.parallelism, "worker threads");
    run_cmd->add_option("--datasets", run.datasets, "comma-separated subset of config datasets")->delimiter(',');
    run_cmd->add_flag("--force", run.force, "overwrite a completed run");

    std::filesystem::path results_dir;
    auto* report_cmd = app.add_subcommand("report", "print loss and overall-score tables");
    report_cmd->add_option("dir,--out", results_dir, "results directory")->required();
    auto* plot_cmd = app.add_subcommand("plot", "write SVG charts under <dir>/plots");
    plot_cmd->add_option("dir,--out", results_dir, "results directory")->required();

    std::vector<std::filesystem::path> data_paths;
    std::filesystem::path validate_config;
    IngestOptions ingest;
    auto* validate_cmd = app.add_subcommand("validate-data", "parse datasets and print summary statistics");
    validate_cmd->add_option("files", data_paths, "dataset CSV files");
    validate_cmd->add_option("--config", validate_config, "validate every dataset listed in a config");
    validate_cmd->add_flag("--dedup-average", ingest.dedup_average, "average duplicate ids instead of rejecting them");

    std::filesystem::path split_data;
    std::string split_plan;
    std::uint64_t split_seed = 0;
    int split_iteration = 0;
    auto* dump_cmd = app.add_subcommand("dump-split", "print one train/test split as JSON");
    dump_cmd->add_option("--data", split_data, "dataset CSV")->required();
    dump_cmd->add_option("--plan", split_plan, "bootstrap | quantile:<q> | kfold:<K>")->required();
    dump_cmd->add_option("--seed", split_seed, "master seed");
    dump_cmd->add_option("--iteration", split_iteration, "iteration index")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run_cmd) return cmd_run(run, out, err);
        if (*report_cmd) return cmd_report(results_dir, out, err);
        if (*plot_cmd) return cmd_plot(results_dir, out, err);
        if (*dump_cmd) return cmd_dump_split(split_data, split_plan, split_seed, split_iteration, out, err);
        if (*validate_cmd) {
            if (!validate_config.empty()) {
                std::ifstream in(validate_config);
                if (!in) throw ConfigError("cannot open config '" + validate_config.string() + "'");
                const auto cfg = config_from_json(nlohmann::json::parse(in), validate_config.parent_path());
                data_paths.insert(data_paths.end(), cfg.datasets.begin(), cfg.datasets.end());
                ingest.dedup_average = ingest.dedup_average || cfg.ingest.dedup_average;
            }
            if (data_paths.empty()) throw ConfigError("validate-data: no files given");
            return cmd_validate(data_paths, ingest, out, err);
        }
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    return kConfigError;
}

}  // namespace activesplit::cli
