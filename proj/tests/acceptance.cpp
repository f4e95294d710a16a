// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails.
//
// Dataset-backed criteria use $ACTIVESPLIT_DATA_DIR/<target>.csv when every
// benchmark file is present there, otherwise the synthetic corpus.

#include <activesplit/harness.hpp>
#include <activesplit/synthetic.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace activesplit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double gamma_for(std::size_t a, std::size_t n) { return 1.0 - (static_cast<double>(a) + 0.5) / static_cast<double>(n); }

struct Corpus {
    std::string source;
    std::vector<Dataset> datasets;  // in benchmark table order

    const Dataset& get(const std::string& name) const {
        for (const auto& d : datasets)
            if (d.name() == name) return d;
        throw DomainError("corpus lacks " + name);
    }
};

Corpus load_corpus(const testing_support::TempDir& scratch) {
    Corpus c;
    if (const char* dir = std::getenv("ACTIVESPLIT_DATA_DIR"); dir && *dir) {
        bool complete = true;
        for (const auto& e : kBenchmarkTargets) complete = complete && std::filesystem::exists(std::filesystem::path(dir) / (std::string(e.name) + ".csv"));
        if (complete) {
            for (const auto& e : kBenchmarkTargets) {
                IngestOptions opts;
                opts.dedup_average = true;
                c.datasets.push_back(parse_dataset(std::filesystem::path(dir) / (std::string(e.name) + ".csv"), opts));
            }
            c.source = std::string("curated CSVs from ") + dir;
            return c;
        }
        std::printf("note: %s does not hold all 25 benchmark files, falling back to the synthetic corpus\n", dir);
    }
    // round trip through the on-disk format so the parser is on the path
    for (const auto& e : kBenchmarkTargets) {
        const auto path = scratch / (std::string(e.name) + ".csv");
        write_dataset(path, make_synthetic_dataset(e));
        c.datasets.push_back(parse_dataset(path));
    }
    c.source = "synthetic stand-in corpus (seed 0)";
    return c;
}

// ---- 1 -------------------------------------------------------------------

/// Loss values by brute force: order molecules by prediction, read off the
/// positions of the actives.
std::pair<double, double> enumerate_losses(const std::vector<double>& pred, const std::vector<bool>& active) {
    const std::size_t n = pred.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pred[a] > pred[b]; });
    std::size_t a = 0, first = n, rank_sum = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (!active[order[r]]) continue;
        ++a;
        first = std::min(first, r);
        rank_sum += r;
    }
    const double inactive = static_cast<double>(n - a);
    return {static_cast<double>(first) / inactive,
            (static_cast<double>(rank_sum) - static_cast<double>(a * (a - 1)) / 2.0) / (static_cast<double>(a) * inactive)};
}

void criterion1() {
    const auto t0 = Clock::now();
    std::size_t cases = 0;
    double worst = 0.0;
    for (std::size_t n = 2; n <= 7; ++n) {
        for (std::size_t a = 1; a <= 3 && a < n; ++a) {
            const double g = gamma_for(a, n);
            // two truth layouts so the actives sit at different positions
            for (int layout = 0; layout < 2; ++layout) {
                std::vector<double> truth(n);
                for (std::size_t i = 0; i < n; ++i) truth[i] = layout ? static_cast<double>((i * 5 + 3) % n) : static_cast<double>(i);
                const auto active = oracle::actives_by_count(truth, a);
                std::vector<double> pred(n);
                std::iota(pred.begin(), pred.end(), 1.0);
                do {
                    const auto [emin, esum] = enumerate_losses(pred, active);
                    worst = std::max(worst, std::abs(loss_min({pred, truth}, g) - emin));
                    worst = std::max(worst, std::abs(loss_sum({pred, truth}, g) - esum));
                    ++cases;
                } while (std::next_permutation(pred.begin(), pred.end()));
            }
        }
    }
    const double secs = seconds_since(t0);
    report(1, worst <= 1e-12 && secs < 60.0, "loss oracle equivalence",
           std::to_string(cases) + " permutations, max |diff| " + fmt(worst) + ", " + fmt(secs, 3) + " s");
}

// ---- 2 -------------------------------------------------------------------

void criterion2() {
    Rng rng(2024);
    std::size_t cases = 0, bad_bounds = 0, bad_iff = 0, bad_const = 0, bad_a1 = 0;
    for (; cases < 100000; ++cases) {
        const auto n = 2 + static_cast<std::size_t>(rng.uniform_index(60));
        const auto a = 1 + static_cast<std::size_t>(rng.uniform_index(std::min<std::size_t>(n - 1, 10)));
        const double g = gamma_for(a, n);
        std::vector<double> truth(n), pred(n);
        const auto levels = 2 + rng.uniform_index(cases % 2 ? 4 : 1000);
        for (auto& t : truth) t = rng.normal();
        for (auto& p : pred) p = static_cast<double>(rng.uniform_index(levels));
        if (cases % 7 == 0) pred = truth;  // perfect rankings
        const PredictionBatch batch{pred, truth};
        const double lmin = loss_min(batch, g), lsum = loss_sum(batch, g);
        if (!(lmin >= 0 && lmin <= 1 && lsum >= 0 && lsum <= 1)) ++bad_bounds;

        const auto active = oracle::actives_by_count(truth, a);
        double min_active = INFINITY, max_inactive = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i])
                min_active = std::min(min_active, pred[i]);
            else
                max_inactive = std::max(max_inactive, pred[i]);
        }
        const bool top = min_active > max_inactive;
        if ((lsum == 0.0) != top) ++bad_iff;

        const std::vector<double> constant(n, pred[0]);
        if (loss_sum({constant, truth}, g) != 0.5) ++bad_const;
        const double g1 = gamma_for(1, n);
        if (loss_min(batch, g1) != loss_sum(batch, g1)) ++bad_a1;
    }
    const bool ok = bad_bounds + bad_iff + bad_const + bad_a1 == 0;
    report(2, ok, "loss bounds and anchors",
           std::to_string(cases) + " cases; violations: bounds " + std::to_string(bad_bounds) + ", zero-iff-top " +
               std::to_string(bad_iff) + ", constant=0.5 " + std::to_string(bad_const) + ", A=1 equality " +
               std::to_string(bad_a1));
}

// ---- 3 -------------------------------------------------------------------

void criterion3(const Corpus& corpus) {
    const auto t0 = Clock::now();
    std::size_t checks = 0, bad = 0;
    const std::pair<double, int> qs[] = {{0.9, 9}, {0.8, 8}, {0.6, 6}, {0.4, 4}};
    for (const auto& ds : corpus.datasets) {
        for (const auto& [q, tenths] : qs) {
            const std::size_t expect_train = ds.size() * static_cast<std::size_t>(tenths) / 10;  // exact integer floor
            const auto first = quantile_bootstrap_split(ds, q, 0);
            for (std::uint64_t seed = 0; seed < 100; ++seed) {
                const auto s = quantile_bootstrap_split(ds, q, derive_seed(seed, ds.name(), seed));
                double max_train = -INFINITY, min_test = INFINITY;
                for (auto i : s.train) max_train = std::max(max_train, ds[i].activity);
                for (auto i : s.test) min_test = std::min(min_test, ds[i].activity);
                const bool ok = min_test >= max_train && s.train.size() == expect_train && s.test == first.test &&
                                s.test.size() == ds.size() - expect_train;
                bad += !ok;
                ++checks;
            }
        }
    }
    const double secs = seconds_since(t0);
    report(3, bad == 0 && secs < 60.0, "quantile split invariants",
           std::to_string(corpus.datasets.size()) + " datasets x 4 q x 100 seeds = " + std::to_string(checks) +
               " splits, " + std::to_string(bad) + " violations, " + fmt(secs, 3) + " s");
}

// ---- 4 -------------------------------------------------------------------

Eigen::MatrixXd random_bits(Eigen::Index rows, Rng& rng, double density) {
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(kFingerprintBits));
    for (auto& v : x.reshaped()) v = rng.bernoulli(density) ? 1.0 : 0.0;
    return x;
}

void criterion4() {
    Rng rng(4);
    double worst = 0.0;
    for (int p = 0; p < 50; ++p) {
        const Eigen::Index n = 60 + static_cast<Eigen::Index>(rng.uniform_index(300));
        const auto x = random_bits(n, rng, 0.1 + 0.4 * rng.uniform());
        Eigen::VectorXd w(x.cols());
        for (auto& v : w) v = rng.normal() * 0.3;
        Eigen::VectorXd y = x * w;
        for (auto& v : y) v += 6.0 + 0.5 * rng.normal();
        const double alpha = std::pow(10.0, rng.uniform(-2.0, 1.0));
        const auto m = fit_ridge({alpha}, x, y);
        const auto ref = oracle::ridge_by_cg(x, y, alpha);
        worst = std::max(worst, (m.coef - ref.head(x.cols())).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(m.intercept - ref(x.cols())));
    }
    double ols_worst = 0.0;
    for (int p = 0; p < 5; ++p) {
        const auto x = random_bits(400 + 100 * p, rng, 0.3);
        Eigen::VectorXd y = x * Eigen::VectorXd::LinSpaced(x.cols(), -1.0, 1.0);
        for (auto& v : y) v += rng.normal();
        const auto m = fit_ridge({1e-9}, x, y);
        const auto ref = oracle::ols(x, y);
        ols_worst = std::max(ols_worst, (m.coef - ref.head(x.cols())).cwiseAbs().maxCoeff());
        ols_worst = std::max(ols_worst, std::abs(m.intercept - ref(x.cols())));
    }
    report(4, worst <= 1e-6 && ols_worst <= 1e-6, "ridge correctness",
           "50 problems, max |closed form - conjugate gradient| " + fmt(worst) + "; alpha=1e-9 vs least squares on 5 full-rank problems " +
               fmt(ols_worst));
}

// ---- 5 -------------------------------------------------------------------

void criterion5() {
    Rng rng(5);
    DenseNetwork net(128, MlpSpec{}.hidden_sizes, rng);
    for (std::size_t l = 0; l < net.layers(); ++l)
        for (auto& b : net.bias(l)) b = 0.1 * rng.normal();
    Eigen::MatrixXd in(128, 10);
    for (auto& v : in.reshaped()) v = rng.normal();
    Eigen::RowVectorXd target(10);
    for (auto& v : target) v = 6.0 + rng.normal();
    DenseNetwork::Gradient grad, scratch;
    net.loss_and_gradient(in, target, grad);
    const Eigen::VectorXd analytic = DenseNetwork::flatten(grad);
    const Eigen::VectorXd theta = net.flatten();
    Eigen::VectorXd numeric(theta.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd t = theta;
        t(i) += h;
        net.assign(t);
        const double up = net.loss_and_gradient(in, target, scratch);
        t(i) = theta(i) - h;
        net.assign(t);
        const double down = net.loss_and_gradient(in, target, scratch);
        numeric(i) = (up - down) / (2 * h);
    }
    const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
    report(5, rel <= 1e-3, "mlp gradient check",
           std::to_string(theta.size()) + " parameters (128-128-16-1), 10-sample batch, relative error " + fmt(rel));
}

// ---- 6 -------------------------------------------------------------------

void criterion6(const Corpus& corpus) {
    const auto t0 = Clock::now();
    const auto& ds = corpus.get("A2a");
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto x = ds.features(all);
    const auto y = ds.activities(all);
    auto in_sample = [&](const ModelSpec& s) { return (fit(s, x, y).predict(x) - y).squaredNorm() / static_cast<double>(y.size()); };
    const double ridge = in_sample(RidgeSpec{});
    const double rf = in_sample(ForestSpec{});
    const double mlp = in_sample(MlpSpec{});
    const double secs = seconds_since(t0);
    report(6, rf < 0.2 * ridge && mlp < 0.2 * ridge && secs < 300.0, "in-sample memorization on A2a",
           "N=" + std::to_string(ds.size()) + " in-sample MSE ridge " + fmt(ridge) + ", rf " + fmt(rf) + " (" +
               fmt(rf / ridge, 3) + "x), mlp " + fmt(mlp) + " (" + fmt(mlp / ridge, 3) + "x); need < 0.2x; " + fmt(secs, 3) + " s");
}

// ---- 7, 8, 9, 10 ---------------------------------------------------------

std::vector<Dataset> three_smallest(const Corpus& corpus) {
    std::vector<Dataset> ds = corpus.datasets;
    std::stable_sort(ds.begin(), ds.end(), [](const Dataset& a, const Dataset& b) { return a.size() < b.size(); });
    ds.erase(ds.begin() + 3, ds.end());
    return ds;
}

ExperimentConfig desk_config(int parallelism) {
    ExperimentConfig cfg;
    cfg.split_plans = {Bootstrap{}, QuantileBootstrap{0.4}};
    cfg.iterations = 50;
    cfg.master_seed = 1;
    cfg.parallelism = parallelism;
    return cfg;
}

double cell_mean(const ResultTable& t, const std::string& ds, const std::string& split, const std::string& loss,
                 const std::string& model) {
    const auto* c = find_cell(t, ds, split, loss);
    for (const auto& m : c->models)
        if (m.model == model) return m.mean;
    return NAN;
}

double cell_popt(const ResultTable& t, const std::string& ds, const std::string& split, const std::string& loss,
                 const std::string& model) {
    const auto* c = find_cell(t, ds, split, loss);
    for (const auto& m : c->models)
        if (m.model == model) return m.probability_optimal;
    return NAN;
}

void criterion7(const ResultTable& t, double secs) {
    int rf_best = 0, ordered = 0;
    std::string detail;
    for (const auto& d : t.datasets) {
        const double ridge = cell_mean(t, d.name, "bootstrap", "mse", "ridge");
        const double svr = cell_mean(t, d.name, "bootstrap", "mse", "svr");
        const double rf = cell_mean(t, d.name, "bootstrap", "mse", "rf");
        const double mlp = cell_mean(t, d.name, "bootstrap", "mse", "mlp");
        rf_best += rf < std::min({ridge, svr, mlp});
        ordered += ridge > svr && svr > std::max(mlp, rf);
        detail += d.name + " (ridge " + fmt(ridge, 3) + ", svr " + fmt(svr, 3) + ", rf " + fmt(rf, 3) + ", mlp " + fmt(mlp, 3) + "); ";
    }
    report(7, rf_best == 3 && ordered >= 2 && secs < 1800.0, "bootstrap MSE ordering",
           detail + "rf lowest on " + std::to_string(rf_best) + "/3, ridge>svr>{mlp,rf} on " + std::to_string(ordered) +
               "/3; " + fmt(secs, 3) + " s");
}

void criterion8(const ResultTable& t, double secs) {
    const std::string split = "quantile:0.4", loss = "lmin@0.99";
    double linear = 0.0, nonlinear = 0.0;
    for (const auto& d : t.datasets) {
        linear += cell_popt(t, d.name, split, loss, "ridge") + cell_popt(t, d.name, split, loss, "svr");
        nonlinear += cell_popt(t, d.name, split, loss, "rf") + cell_popt(t, d.name, split, loss, "mlp");
    }
    report(8, linear > nonlinear && secs < 1800.0, "optimality reversal under q=0.4",
           "summed probability of optimality for lmin@0.99: ridge+svr " + fmt(linear) + " vs rf+mlp " + fmt(nonlinear) + "; " +
               fmt(secs, 3) + " s");
}

void criterion9(const ResultTable& t) {
    double worst_cell = 0.0, worst_score = 0.0, worst_se = 0.0;
    for (const auto& c : t.cells) {
        double total = 0.0;
        for (const auto& m : c.models) total += m.probability_optimal;
        worst_cell = std::max(worst_cell, std::abs(total - 1.0));
    }
    for (const auto& row : t.scores) {
        double total = 0.0;
        for (const auto& [m, s] : row.scores) total += s;
        worst_score = std::max(worst_score, std::abs(total - static_cast<double>(t.datasets.size())));
    }
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> series;
    for (const auto& r : t.records) series[{r.dataset, r.split, r.loss, r.model}].push_back(r.value);
    for (const auto& [key, v] : series) {
        const double closed = oracle::sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
        worst_se = std::max(worst_se, std::abs(jackknife_se(v) - closed));
    }
    const bool ok = worst_cell <= 1e-12 && worst_score <= 1e-12 && worst_se <= 1e-12 && !t.cells.empty();
    report(9, ok, "aggregation conservation",
           std::to_string(t.cells.size()) + " cells, max |sum p - 1| " + fmt(worst_cell) + ", max |score total - " +
               std::to_string(t.datasets.size()) + "| " + fmt(worst_score) + ", " + std::to_string(series.size()) +
               " series max |jackknife - s/sqrt(A)| " + fmt(worst_se));
}

std::string records_csv(const ResultTable& t) {
    std::ostringstream out;
    write_records_csv(out, t.records);
    return out.str();
}

}  // namespace

int main() {
    std::printf("activesplit acceptance suite %s\n", kVersion);
    criterion1();
    criterion2();

    testing_support::TempDir scratch("acceptance");
    const auto corpus = load_corpus(scratch);
    std::printf("data source: %s\n", corpus.source.c_str());
    criterion3(corpus);
    criterion4();
    criterion5();
    criterion6(corpus);

    const auto small = three_smallest(corpus);
    std::printf("desk-scale runs on:");
    for (const auto& d : small) std::printf(" %s (N=%zu)", d.name().c_str(), d.size());
    std::printf(", 50 iterations, bootstrap + quantile:0.4\n");
    std::fflush(stdout);
    auto t0 = Clock::now();
    const auto serial = run_experiment(desk_config(1), small);
    const double serial_secs = seconds_since(t0);
    criterion7(serial, serial_secs);
    criterion8(serial, serial_secs);
    criterion9(serial);

    t0 = Clock::now();
    const auto threaded = run_experiment(desk_config(8), small);
    const auto a = records_csv(serial), b = records_csv(threaded);
    report(10, a == b && !serial.records.empty(), "determinism across parallelism",
           std::to_string(serial.records.size()) + " records, CSV " + std::to_string(a.size()) + " bytes at parallelism 1 vs 8: " +
               (a == b ? "identical" : "DIFFERENT") + "; second run " + fmt(seconds_since(t0), 3) + " s");

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
