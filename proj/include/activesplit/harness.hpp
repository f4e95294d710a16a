#pragma once

// Experiment grid: datasets x split plans x iterations x models, with every
// model in an iteration fitted on the same training multiset and scored on
// the same test set.

#include <activesplit/data.hpp>
#include <activesplit/error.hpp>
#include <activesplit/loss.hpp>
#include <activesplit/model.hpp>
#include <activesplit/rng.hpp>
#include <activesplit/split.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace activesplit {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::vector<std::filesystem::path> datasets;
    std::vector<ModelSpec> models = default_models();
    std::vector<SplitKind> split_plans;
    std::vector<double> gammas{0.9, 0.95, 0.99};
    int iterations = 400;
    std::uint64_t master_seed = 0;
    int parallelism = 1;
    IngestOptions ingest;

    /// Checks everything except the dataset list, which run_experiment
    /// receives already loaded.
    void validate() const {
        if (models.empty()) throw ConfigError("config lists no models");
        if (split_plans.empty()) throw ConfigError("config lists no split plans");
        if (gammas.empty()) throw ConfigError("config lists no gammas");
        if (iterations < 2) throw ConfigError("iterations must be >= 2");
        if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
        for (double g : gammas)
            if (!(g > 0.0 && g < 1.0)) throw ConfigError("gamma " + format_exact(g) + " outside (0,1)");
        std::set<std::string> labels;
        for (const auto& p : split_plans)
            if (!labels.insert(split_label(p)).second) throw ConfigError("duplicate split plan " + split_label(p));
    }
};

/// Unique labels for the configured models: the kind, suffixed "#2", "#3"...
/// when a kind repeats.
inline std::vector<std::string> model_labels(std::span<const ModelSpec> models) {
    std::map<std::string, int> seen;
    std::vector<std::string> out;
    for (const auto& m : models) {
        const auto kind = model_kind(m);
        const int n = ++seen[kind];
        out.push_back(n == 1 ? kind : kind + "#" + std::to_string(n));
    }
    return out;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"datasets", "models",      "split_plans", "gammas",
                                             "iterations", "master_seed", "parallelism", "ingest"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    ExperimentConfig c;
    try {
        for (const auto& d : j.at("datasets")) {
            std::filesystem::path p = d.get<std::string>();
            c.datasets.push_back(p.is_relative() && !base_dir.empty() ? base_dir / p : p);
        }
        if (j.contains("models")) {
            c.models.clear();
            for (const auto& m : j.at("models")) c.models.push_back(model_spec_from_json(m));
        }
        for (const auto& p : j.at("split_plans")) c.split_plans.push_back(split_kind_from_json(p));
        if (j.contains("gammas")) c.gammas = j.at("gammas").get<std::vector<double>>();
        if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
        if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("parallelism")) c.parallelism = j.at("parallelism").get<int>();
        if (j.contains("ingest")) c.ingest.dedup_average = j.at("ingest").value("dedup_average", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["datasets"] = nlohmann::json::array();
    for (const auto& d : c.datasets) j["datasets"].push_back(d.generic_string());
    j["models"] = nlohmann::json::array();
    for (const auto& m : c.models) j["models"].push_back(to_json(m));
    j["split_plans"] = nlohmann::json::array();
    for (const auto& p : c.split_plans) j["split_plans"].push_back(to_json(p));
    j["gammas"] = c.gammas;
    j["iterations"] = c.iterations;
    j["master_seed"] = c.master_seed;
    j["parallelism"] = c.parallelism;
    j["ingest"] = {{"dedup_average", c.ingest.dedup_average}};
    return j;
}

struct LossRecord {
    std::string dataset;
    std::string model;
    std::string split;
    std::string loss;
    int iteration = 0;
    double value = 0.0;
};

/// Runs `task(i)` for i in [0, count) on up to `workers` threads. Every
/// task failure is kept; the one with the lowest index is rethrown.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = count;
    std::exception_ptr failure;
    {
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        task(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (i < failed_at) failed_at = i, failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

struct CellCounters {
    std::size_t svr_fits = 0;
    std::size_t svr_unconverged = 0;
};

/// Per-iteration losses for one (dataset, split plan) cell, ordered by
/// iteration, then model, then loss. For k-fold the iteration index is the
/// fold index.
inline std::vector<LossRecord> run_cell(const Dataset& ds, std::span<const ModelSpec> models, const SplitKind& plan,
                                        std::span<const double> gammas, int iterations, std::uint64_t seed,
                                        int parallelism = 1, CellCounters* counters = nullptr) {
    validate_plan(plan, ds.size());
    if (models.empty()) throw ConfigError("run_cell: no models");

    struct Draw {
        TrainTestSplit split;
        std::uint64_t seed;
    };
    std::vector<Draw> draws;
    if (const auto* kf = std::get_if<KFold>(&plan)) {
        const auto s = derive_seed(seed, ds.name(), 0);
        std::uint64_t f = 0;
        for (auto& split : kfold_splits(ds.size(), kf->k, s)) draws.push_back({std::move(split), mix_seed(s, ++f)});
    } else {
        if (iterations < 1) throw ConfigError("run_cell: iterations must be >= 1");
        for (int a = 0; a < iterations; ++a) {
            const auto s = derive_seed(seed, ds.name(), static_cast<std::uint64_t>(a));
            draws.push_back({make_splits(plan, ds.size(), s).front(), s});
        }
    }

    const auto losses = standard_losses(gammas);
    for (const auto& d : draws)
        for (const auto& l : losses)
            if (l.kind != LossKind::Mse) active_count(d.split.test.size(), l.gamma);
    const auto labels = model_labels(models);
    const auto split_name = split_label(plan);
    const std::size_t n_models = models.size();

    std::vector<LossRecord> records(draws.size() * n_models * losses.size());
    std::vector<char> unconverged(draws.size() * n_models, 0);
    parallel_for(draws.size() * n_models, parallelism, [&](std::size_t task) {
        const std::size_t a = task / n_models;
        const std::size_t m = task % n_models;
        const auto& draw = draws[a];
        const auto spec = reseed(models[m], mix_seed(draw.seed, m));
        std::vector<double> predicted;
        try {
            const auto fitted = fit(spec, ds.features(draw.split.train), ds.activities(draw.split.train));
            const Eigen::VectorXd p = fitted.predict(ds.features(draw.split.test));
            predicted.assign(p.data(), p.data() + p.size());
            unconverged[task] = !fitted.info().converged;
        } catch (const Error& e) {
            throw TrainingError("dataset '" + ds.name() + "', model " + labels[m] + ", split " + split_name +
                                ", iteration " + std::to_string(a) + ": " + e.what());
        }
        for (double p : predicted)
            if (!std::isfinite(p))
                throw TrainingError("dataset '" + ds.name() + "', model " + labels[m] + ", iteration " +
                                    std::to_string(a) + ": non-finite prediction");
        const Eigen::VectorXd truth = ds.activities(draw.split.test);
        const PredictionBatch batch{predicted, std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size()))};
        for (std::size_t l = 0; l < losses.size(); ++l)
            records[task * losses.size() + l] = {ds.name(), labels[m], split_name, losses[l].name(), static_cast<int>(a),
                                                 losses[l].evaluate(batch)};
    });
    if (counters) {
        for (std::size_t t = 0; t < unconverged.size(); ++t) {
            if (std::holds_alternative<SvrSpec>(models[t % n_models])) {
                ++counters->svr_fits;
                counters->svr_unconverged += static_cast<std::size_t>(unconverged[t]);
            }
        }
    }
    return records;
}

/// Delete-one jackknife standard error of the mean.
inline double jackknife_se(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw DomainError("jackknife needs at least 2 values, got " + std::to_string(n));
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    const auto nd = static_cast<double>(n);
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) loo[i] = (total - values[i]) / (nd - 1.0);
    const double loo_mean = std::accumulate(loo.begin(), loo.end(), 0.0) / nd;
    double ss = 0.0;
    for (double m : loo) ss += (m - loo_mean) * (m - loo_mean);
    return std::sqrt((nd - 1.0) / nd * ss);
}

/// Rows are iterations, columns are models. Each row's minimum shares one
/// unit of weight; the result is the per-model average.
inline std::vector<double> probability_optimal(const std::vector<std::vector<double>>& paired) {
    if (paired.empty()) throw DomainError("probability_optimal: no iterations");
    const std::size_t t = paired.front().size();
    std::vector<double> out(t, 0.0);
    for (const auto& row : paired) {
        if (row.size() != t) throw DomainError("probability_optimal: ragged loss matrix");
        const double best = *std::min_element(row.begin(), row.end());
        const auto winners = static_cast<double>(std::count(row.begin(), row.end(), best));
        for (std::size_t m = 0; m < t; ++m)
            if (row[m] == best) out[m] += 1.0 / winners;
    }
    for (auto& p : out) p /= static_cast<double>(paired.size());
    return out;
}

struct ModelAggregate {
    std::string model;
    double mean = 0.0;
    double se = 0.0;
    double probability_optimal = 0.0;
};

struct CellAggregate {
    std::string dataset;
    std::string split;
    std::string loss;
    std::vector<ModelAggregate> models;
};

struct ScoreRow {
    std::string split;
    std::string loss;
    std::vector<std::pair<std::string, double>> scores;  // model -> score
};

struct DatasetInfo {
    std::string name;
    std::string target_id;
    std::size_t n = 0;
};

struct SplitInfo {
    std::string label;
    double fraction = 1.0;  // q; 1 for bootstrap / k-fold
};

struct ResultTable {
    std::vector<DatasetInfo> datasets;
    std::vector<std::string> models;
    std::vector<SplitInfo> splits;
    std::vector<std::string> losses;
    std::vector<LossRecord> records;
    std::vector<CellAggregate> cells;
    std::vector<ScoreRow> scores;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Mean, SE and optimality probability for every (dataset, split, loss).
inline std::vector<CellAggregate> aggregate_cells(std::span<const LossRecord> records) {
    // (dataset, split, loss) -> model -> iteration -> value, keeping first-seen order
    struct Cell {
        std::string dataset, split, loss;
        std::vector<std::string> models;
        std::map<std::string, std::map<int, double>> values;
    };
    std::vector<Cell> cells;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    for (const auto& r : records) {
        auto [it, inserted] = index.try_emplace({r.dataset, r.split, r.loss}, cells.size());
        if (inserted) cells.push_back({r.dataset, r.split, r.loss, {}, {}});
        auto& c = cells[it->second];
        if (!c.values.count(r.model)) c.models.push_back(r.model);
        c.values[r.model][r.iteration] = r.value;
    }
    std::vector<CellAggregate> out;
    for (const auto& c : cells) {
        const auto& first = c.values.at(c.models.front());
        std::vector<std::vector<double>> paired;
        for (const auto& [iter, _] : first) {
            std::vector<double> row;
            for (const auto& m : c.models) {
                const auto& mv = c.values.at(m);
                const auto f = mv.find(iter);
                if (f == mv.end() || mv.size() != first.size())
                    throw AggregationError("cell " + c.dataset + "/" + c.split + "/" + c.loss + ": model " + m +
                                           " is not paired with " + c.models.front());
                row.push_back(f->second);
            }
            paired.push_back(std::move(row));
        }
        const auto probs = probability_optimal(paired);
        CellAggregate agg{c.dataset, c.split, c.loss, {}};
        for (std::size_t m = 0; m < c.models.size(); ++m) {
            std::vector<double> v;
            for (const auto& row : paired) v.push_back(row[m]);
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            agg.models.push_back({c.models[m], mean, jackknife_se(v), probs[m]});
        }
        out.push_back(std::move(agg));
    }
    return out;
}

/// Sum over datasets of the optimality probabilities, per (split, loss).
/// Every (dataset, split, loss) combination must be present.
inline std::vector<ScoreRow> overall_scores(const ResultTable& results) {
    std::map<std::tuple<std::string, std::string, std::string>, const CellAggregate*> by_key;
    for (const auto& c : results.cells) by_key[{c.dataset, c.split, c.loss}] = &c;
    std::vector<std::string> missing;
    std::vector<ScoreRow> out;
    for (const auto& s : results.splits) {
        for (const auto& l : results.losses) {
            ScoreRow row{s.label, l, {}};
            for (const auto& m : results.models) row.scores.emplace_back(m, 0.0);
            for (const auto& d : results.datasets) {
                const auto it = by_key.find({d.name, s.label, l});
                if (it == by_key.end()) {
                    missing.push_back(d.name + "/" + s.label + "/" + l);
                    continue;
                }
                for (const auto& ma : it->second->models) {
                    auto sc = std::find_if(row.scores.begin(), row.scores.end(), [&](const auto& p) { return p.first == ma.model; });
                    if (sc == row.scores.end()) {
                        missing.push_back(d.name + "/" + s.label + "/" + l + " (unexpected model " + ma.model + ")");
                        continue;
                    }
                    sc->second += ma.probability_optimal;
                }
            }
            out.push_back(std::move(row));
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing result cells:";
        for (const auto& m : missing) msg += " " + m;
        throw AggregationError(msg);
    }
    return out;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Full grid over already-loaded datasets (in config order).
inline ResultTable run_experiment(const ExperimentConfig& config, std::span<const Dataset> datasets,
                                  const std::function<void(const std::string&)>& progress = {}) {
    config.validate();
    if (datasets.empty()) throw ConfigError("no datasets to run");
    ResultTable table;
    table.metadata["started"] = utc_timestamp();
    table.models = model_labels(config.models);
    for (const auto& s : config.split_plans) table.splits.push_back({split_label(s), split_fraction(s)});
    for (const auto& l : standard_losses(config.gammas)) table.losses.push_back(l.name());

    CellCounters counters;
    for (const auto& ds : datasets) {
        table.datasets.push_back({ds.name(), ds.target_id(), ds.size()});
        for (const auto& plan : config.split_plans) {
            if (progress) progress(ds.name() + " " + split_label(plan));
            auto recs = run_cell(ds, config.models, plan, config.gammas, config.iterations, config.master_seed,
                                 config.parallelism, &counters);
            table.records.insert(table.records.end(), std::make_move_iterator(recs.begin()),
                                 std::make_move_iterator(recs.end()));
        }
    }
    table.cells = aggregate_cells(table.records);
    table.scores = overall_scores(table);

    const auto mlp = std::find_if(config.models.begin(), config.models.end(),
                                  [](const ModelSpec& m) { return std::holds_alternative<MlpSpec>(m); });
    auto& meta = table.metadata;
    meta["version"] = kVersion;
    meta["master_seed"] = config.master_seed;
    meta["iterations"] = config.iterations;
    meta["parallelism"] = config.parallelism;
    meta["rng"] = "mt19937_64 seeded through splitmix64; sub-seed = hash(master_seed, dataset, iteration)";
    meta["precision"] = {{"numeric", "float64"}, {"network_weights", "float64"}};
    if (mlp != config.models.end()) {
        const auto& s = std::get<MlpSpec>(*mlp);
        meta["mlp_budget"] = {{"optimizer", "adam"}, {"learning_rate", s.learning_rate}, {"epochs", s.epochs},
                              {"batch_size", s.batch_size}};
    }
    meta["svr_fits"] = counters.svr_fits;
    meta["svr_unconverged_fits"] = counters.svr_unconverged;
    meta["config"] = to_json(config);
    meta["finished"] = utc_timestamp();
    return table;
}

// ---- persistence ---------------------------------------------------------

inline void write_records_csv(std::ostream& out, std::span<const LossRecord> records) {
    out << "dataset,model,split,loss,iteration,value\n";
    for (const auto& r : records)
        out << r.dataset << ',' << r.model << ',' << r.split << ',' << r.loss << ',' << r.iteration << ','
            << format_exact(r.value) << '\n';
}

inline nlohmann::json aggregates_to_json(const ResultTable& t) {
    nlohmann::json j;
    j["metadata"] = t.metadata;
    j["datasets"] = nlohmann::json::array();
    for (const auto& d : t.datasets) j["datasets"].push_back({{"name", d.name}, {"target_id", d.target_id}, {"n", d.n}});
    j["models"] = t.models;
    j["splits"] = nlohmann::json::array();
    for (const auto& s : t.splits) j["splits"].push_back({{"label", s.label}, {"fraction", s.fraction}});
    j["losses"] = t.losses;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : t.cells) {
        nlohmann::json cell{{"dataset", c.dataset}, {"split", c.split}, {"loss", c.loss}, {"models", nlohmann::json::array()}};
        for (const auto& m : c.models)
            cell["models"].push_back(
                {{"model", m.model}, {"mean", m.mean}, {"se", m.se}, {"probability_optimal", m.probability_optimal}});
        j["cells"].push_back(std::move(cell));
    }
    j["scores"] = nlohmann::json::array();
    for (const auto& s : t.scores) {
        nlohmann::json row{{"split", s.split}, {"loss", s.loss}, {"scores", nlohmann::json::object()}};
        for (const auto& [m, v] : s.scores) row["scores"][m] = v;
        j["scores"].push_back(std::move(row));
    }
    return j;
}

/// Reads back the aggregates file (records are not part of it).
inline ResultTable aggregates_from_json(const nlohmann::json& j) {
    ResultTable t;
    try {
        t.metadata = j.at("metadata");
        for (const auto& d : j.at("datasets"))
            t.datasets.push_back({d.at("name").get<std::string>(), d.value("target_id", ""), d.at("n").get<std::size_t>()});
        t.models = j.at("models").get<std::vector<std::string>>();
        for (const auto& s : j.at("splits")) t.splits.push_back({s.at("label").get<std::string>(), s.at("fraction").get<double>()});
        t.losses = j.at("losses").get<std::vector<std::string>>();
        for (const auto& c : j.at("cells")) {
            CellAggregate agg{c.at("dataset"), c.at("split"), c.at("loss"), {}};
            for (const auto& m : c.at("models"))
                agg.models.push_back({m.at("model"), m.at("mean"), m.at("se"), m.at("probability_optimal")});
            t.cells.push_back(std::move(agg));
        }
        for (const auto& s : j.at("scores")) {
            ScoreRow row{s.at("split"), s.at("loss"), {}};
            for (const auto& m : t.models) row.scores.emplace_back(m, s.at("scores").at(m).get<double>());
            t.scores.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw AggregationError(std::string("corrupt aggregates: ") + e.what());
    }
    return t;
}

inline const CellAggregate* find_cell(const ResultTable& t, const std::string& dataset, const std::string& split,
                                      const std::string& loss) {
    for (const auto& c : t.cells)
        if (c.dataset == dataset && c.split == split && c.loss == loss) return &c;
    return nullptr;
}

}  // namespace activesplit
