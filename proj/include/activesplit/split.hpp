#pragma once

#include <activesplit/data.hpp>
#include <activesplit/error.hpp>
#include <activesplit/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace activesplit {

struct KFold {
    int k = 5;
    friend bool operator==(const KFold&, const KFold&) = default;
};

/// Standard bootstrap with out-of-bag testing (equivalent to q = 1).
struct Bootstrap {
    friend bool operator==(const Bootstrap&, const Bootstrap&) = default;
};

/// Train on a bootstrap of the floor(N*q) least active molecules, test on
/// the fixed remainder.
struct QuantileBootstrap {
    double q = 0.8;
    friend bool operator==(const QuantileBootstrap&, const QuantileBootstrap&) = default;
};

using SplitKind = std::variant<KFold, Bootstrap, QuantileBootstrap>;

struct SplitPlan {
    SplitKind kind;
    std::uint64_t seed = 0;
};

/// Label used in result files: "kfold:5", "bootstrap", "quantile:0.4".
inline std::string split_label(const SplitKind& kind) {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, KFold>)
                return "kfold:" + std::to_string(k.k);
            else if constexpr (std::is_same_v<T, Bootstrap>)
                return "bootstrap";
            else
                return "quantile:" + format_exact(k.q);
        },
        kind);
}

/// Training fraction on the q axis; 1 for the random-partition plans.
inline double split_fraction(const SplitKind& kind) {
    if (const auto* qb = std::get_if<QuantileBootstrap>(&kind)) return qb->q;
    return 1.0;
}

struct TrainTestSplit {
    std::vector<std::size_t> train;  // multiset, repeats allowed
    std::vector<std::size_t> test;   // ascending, no repeats

    friend bool operator==(const TrainTestSplit&, const TrainTestSplit&) = default;
};

inline std::size_t quantile_train_size(std::size_t n, double q) {
    return static_cast<std::size_t>(std::max(0LL, stable_floor(static_cast<double>(n) * q)));
}

inline void validate_plan(const SplitKind& kind, std::size_t n) {
    if (const auto* kf = std::get_if<KFold>(&kind)) {
        if (kf->k < 2 || static_cast<std::size_t>(kf->k) > n)
            throw DomainError("k-fold requires 2 <= K <= N (K=" + std::to_string(kf->k) + ", N=" + std::to_string(n) + ")");
    } else if (const auto* qb = std::get_if<QuantileBootstrap>(&kind)) {
        if (!(qb->q > 0.0 && qb->q < 1.0)) throw DomainError("quantile q must lie in (0,1), got " + format_exact(qb->q));
        const auto nq = quantile_train_size(n, qb->q);
        if (nq < 5 || n - nq < 5)
            throw DomainError("quantile split q=" + format_exact(qb->q) + " on N=" + std::to_string(n) +
                              " leaves " + std::to_string(nq) + " train / " + std::to_string(n - nq) +
                              " test molecules; both must be >= 5");
    } else if (n < Dataset::kMinSize) {
        throw DomainError("bootstrap requires N >= " + std::to_string(Dataset::kMinSize));
    }
}

/// K folds over a seeded permutation of [0, n). Fold f takes the permuted
/// positions [f*n/K, (f+1)*n/K), so fold sizes differ by at most one.
inline std::vector<TrainTestSplit> kfold_splits(std::size_t n, int k, std::uint64_t seed) {
    validate_plan(KFold{k}, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);

    const auto kk = static_cast<std::size_t>(k);
    std::vector<TrainTestSplit> out(kk);
    for (std::size_t f = 0; f < kk; ++f) {
        const std::size_t lo = f * n / kk;
        const std::size_t hi = (f + 1) * n / kk;
        std::vector<char> in_test(n, 0);
        for (std::size_t p = lo; p < hi; ++p) in_test[perm[p]] = 1;
        for (std::size_t i = 0; i < n; ++i) (in_test[i] ? out[f].test : out[f].train).push_back(i);
    }
    return out;
}

/// Bootstrap of size n with the out-of-bag indices as the test set. If the
/// sample happens to cover every index the draw is repeated with the next
/// sub-seed (at most 100 attempts).
inline TrainTestSplit bootstrap_split(std::size_t n, std::uint64_t seed) {
    validate_plan(Bootstrap{}, n);
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Rng rng(mix_seed(seed, attempt));
        TrainTestSplit s;
        s.train.resize(n);
        std::vector<char> hit(n, 0);
        for (auto& idx : s.train) {
            idx = static_cast<std::size_t>(rng.uniform_index(n));
            hit[idx] = 1;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!hit[i]) s.test.push_back(i);
        if (!s.test.empty()) return s;
    }
    throw DomainError("bootstrap: out-of-bag set empty after 100 attempts (n=" + std::to_string(n) + ")");
}

inline TrainTestSplit quantile_bootstrap_split(std::size_t n, double q, std::uint64_t seed) {
    validate_plan(QuantileBootstrap{q}, n);
    const auto nq = quantile_train_size(n, q);
    Rng rng(seed);
    TrainTestSplit s;
    s.train.resize(nq);
    for (auto& idx : s.train) idx = static_cast<std::size_t>(rng.uniform_index(nq));
    s.test.resize(n - nq);
    std::iota(s.test.begin(), s.test.end(), nq);
    return s;
}

/// Indices refer to the activity-sorted order of `ds`.
inline TrainTestSplit quantile_bootstrap_split(const Dataset& ds, double q, std::uint64_t seed) {
    return quantile_bootstrap_split(ds.size(), q, seed);
}

/// The splits one plan produces for one draw: K folds for k-fold, a single
/// split otherwise.
inline std::vector<TrainTestSplit> make_splits(const SplitKind& kind, std::size_t n, std::uint64_t seed) {
    if (const auto* kf = std::get_if<KFold>(&kind)) return kfold_splits(n, kf->k, seed);
    if (std::holds_alternative<Bootstrap>(kind)) return {bootstrap_split(n, seed)};
    return {quantile_bootstrap_split(n, std::get<QuantileBootstrap>(kind).q, seed)};
}

inline nlohmann::json to_json(const TrainTestSplit& s) {
    return nlohmann::json{{"train", s.train}, {"test", s.test}};
}

// JSON form of a plan: {"kfold":{"k":5}}, {"bootstrap":{}}, {"quantile":{"q":0.4}}.
inline nlohmann::json to_json(const SplitKind& kind) {
    return std::visit(
        [](const auto& k) -> nlohmann::json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, KFold>)
                return {{"kfold", {{"k", k.k}}}};
            else if constexpr (std::is_same_v<T, Bootstrap>)
                return {{"bootstrap", nlohmann::json::object()}};
            else
                return {{"quantile", {{"q", k.q}}}};
        },
        kind);
}

inline SplitKind split_kind_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.size() != 1)
        throw ConfigError("split plan must be an object with one key (kfold, bootstrap, quantile)");
    const std::string key = j.begin().key();
    const auto& body = j.begin().value();
    try {
        if (key == "kfold") return KFold{body.value("k", 5)};
        if (key == "bootstrap") return Bootstrap{};
        if (key == "quantile") return QuantileBootstrap{body.at("q").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("split plan '" + key + "': " + e.what());
    }
    throw ConfigError("unknown split plan '" + key + "'");
}

/// Parses the label form used on the command line and in result files.
inline SplitKind split_kind_from_label(const std::string& label) {
    if (label == "bootstrap") return Bootstrap{};
    const auto colon = label.find(':');
    if (colon != std::string::npos) {
        const auto head = label.substr(0, colon);
        const auto tail = label.substr(colon + 1);
        try {
            if (head == "kfold") return KFold{std::stoi(tail)};
            if (head == "quantile") return QuantileBootstrap{std::stod(tail)};
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("bad split label '" + label + "' (expected kfold:K, bootstrap or quantile:q)");
}

}  // namespace activesplit
