#pragma once

// Out-of-sample losses. The two active-rank losses only look at where the
// truly most active test molecules land in the model's predicted ordering.
//
// Conventions:
//   rank 0 is the highest prediction; tied predictions share their midrank.
//   A = max(1, floor((1 - gamma) * N_test)) actives: the A largest truths,
//   ties broken toward the lower test position.
//   L_min = min active rank / (N_test - A)
//   L_sum = (sum of active ranks - A(A-1)/2) / (A (N_test - A))

#include <activesplit/data.hpp>
#include <activesplit/error.hpp>
#include <activesplit/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace activesplit {

struct PredictionBatch {
    std::span<const double> predicted;
    std::span<const double> truth;
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw DomainError(std::string(what) + " contains a non-finite value");
}

inline void check_batch(const PredictionBatch& b, std::size_t min_size) {
    if (b.predicted.size() != b.truth.size())
        throw DomainError("prediction batch length mismatch: " + std::to_string(b.predicted.size()) + " predictions vs " +
                          std::to_string(b.truth.size()) + " truths");
    if (b.predicted.size() < min_size)
        throw DomainError("prediction batch needs at least " + std::to_string(min_size) + " entries");
    check_finite(b.predicted, "predictions");
    check_finite(b.truth, "truth");
}

}  // namespace detail

inline std::vector<double> midranks_descending(std::span<const double> predicted) {
    if (predicted.empty()) throw DomainError("midranks of an empty sequence");
    detail::check_finite(predicted, "predictions");
    const std::size_t n = predicted.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predicted[a] > predicted[b]; });
    std::vector<double> ranks(n);
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo + 1;
        while (hi < n && predicted[order[hi]] == predicted[order[lo]]) ++hi;
        const double mid = 0.5 * static_cast<double>(lo + hi - 1);
        for (std::size_t r = lo; r < hi; ++r) ranks[order[r]] = mid;
        lo = hi;
    }
    return ranks;
}

inline std::size_t active_count(std::size_t n_test, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1), got " + format_exact(gamma));
    const auto a = std::max<long long>(1, stable_floor((1.0 - gamma) * static_cast<double>(n_test)));
    if (static_cast<std::size_t>(a) >= n_test)
        throw DomainError("gamma=" + format_exact(gamma) + " marks " + std::to_string(a) + " of " + std::to_string(n_test) +
                          " test molecules active; need fewer actives than test molecules");
    return static_cast<std::size_t>(a);
}

/// Positions of the A most active truths, in ascending position order.
inline std::vector<std::size_t> active_set(std::span<const double> truth, double gamma) {
    detail::check_finite(truth, "truth");
    const std::size_t a = active_count(truth.size(), gamma);
    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return truth[x] > truth[y]; });
    order.resize(a);
    std::sort(order.begin(), order.end());
    return order;
}

inline double loss_min(const PredictionBatch& batch, double gamma) {
    detail::check_batch(batch, 2);
    const auto actives = active_set(batch.truth, gamma);
    const auto ranks = midranks_descending(batch.predicted);
    double best = ranks[actives.front()];
    for (auto p : actives) best = std::min(best, ranks[p]);
    // Actives tied with each other at the bottom share a midrank above N-A;
    // that is still the worst case.
    return std::min(1.0, best / static_cast<double>(batch.truth.size() - actives.size()));
}

inline double loss_sum(const PredictionBatch& batch, double gamma) {
    detail::check_batch(batch, 2);
    const auto actives = active_set(batch.truth, gamma);
    const auto ranks = midranks_descending(batch.predicted);
    const auto a = static_cast<double>(actives.size());
    const auto n = static_cast<double>(batch.truth.size());
    double sum = 0.0;
    for (auto p : actives) sum += ranks[p];
    return (sum - a * (a - 1.0) / 2.0) / (a * (n - a));
}

inline double mse(const PredictionBatch& batch) {
    detail::check_batch(batch, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.truth.size(); ++i) {
        const double d = batch.predicted[i] - batch.truth[i];
        acc += d * d;
    }
    return acc / static_cast<double>(batch.truth.size());
}

enum class LossKind { Mse, Min, Sum };

struct LossSpec {
    LossKind kind = LossKind::Mse;
    double gamma = 0.0;  // unused for Mse

    /// "mse", "lmin@0.99", "lsum@0.9"
    std::string name() const {
        switch (kind) {
            case LossKind::Mse: return "mse";
            case LossKind::Min: return "lmin@" + format_exact(gamma);
            case LossKind::Sum: return "lsum@" + format_exact(gamma);
        }
        return {};
    }

    double evaluate(const PredictionBatch& batch) const {
        switch (kind) {
            case LossKind::Mse: return mse(batch);
            case LossKind::Min: return loss_min(batch, gamma);
            case LossKind::Sum: return loss_sum(batch, gamma);
        }
        return 0.0;
    }
};

/// mse followed by lmin and lsum for each gamma in order.
inline std::vector<LossSpec> standard_losses(std::span<const double> gammas) {
    std::vector<LossSpec> out{{LossKind::Mse, 0.0}};
    for (double g : gammas) {
        out.push_back({LossKind::Min, g});
        out.push_back({LossKind::Sum, g});
    }
    return out;
}

}  // namespace activesplit
