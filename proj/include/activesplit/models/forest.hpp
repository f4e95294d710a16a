#pragma once

// Random forest of CART regression trees over binary features. Every split
// tests a single bit (threshold 0.5), so a node's candidate splits are fully
// described by per-feature counts and target sums over the rows whose bit
// is set.

#include <activesplit/data.hpp>
#include <activesplit/error.hpp>
#include <activesplit/rng.hpp>

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <vector>

namespace activesplit {

struct ForestSpec {
    int n_trees = 100;
    int max_depth = 10;
    int min_samples_split = 2;
    std::uint64_t seed = 0;
    /// Each tree sees a bootstrap of the rows. Off only in tests.
    bool bootstrap = true;
    friend bool operator==(const ForestSpec&, const ForestSpec&) = default;
};

namespace detail {

using PackedRow = std::array<std::uint64_t, 2>;

inline std::vector<PackedRow> pack_binary_rows(const Eigen::MatrixXd& x) {
    if (x.cols() != static_cast<Eigen::Index>(kFingerprintBits))
        throw DomainError("random forest expects " + std::to_string(kFingerprintBits) + " columns, got " +
                          std::to_string(x.cols()));
    std::vector<PackedRow> rows(static_cast<std::size_t>(x.rows()), PackedRow{0, 0});
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double v = x(r, c);
            if (v == 1.0)
                rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c) >> 6] |= std::uint64_t{1} << (c & 63);
            else if (v != 0.0)
                throw DomainError("random forest features must be 0/1");
        }
    }
    return rows;
}

inline bool bit_set(const PackedRow& row, int feature) noexcept {
    return (row[static_cast<std::size_t>(feature) >> 6] >> (feature & 63)) & 1U;
}

}  // namespace detail

class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 for a leaf
        int left = -1;     // bit clear
        int right = -1;    // bit set
        double value = 0.0;
    };

    /// `samples` is a multiset of row indices; repeats act as weights.
    RegressionTree(const std::vector<detail::PackedRow>& rows, const Eigen::VectorXd& y, std::vector<std::uint32_t> samples,
                   int max_depth, int min_samples_split)
        : max_depth_(max_depth), min_samples_split_(min_samples_split) {
        build(rows, y, samples, 0, samples.size(), 0);
    }

    double predict(const detail::PackedRow& row) const {
        int n = 0;
        while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
            const auto& node = nodes_[static_cast<std::size_t>(n)];
            n = detail::bit_set(row, node.feature) ? node.right : node.left;
        }
        return nodes_[static_cast<std::size_t>(n)].value;
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    int depth() const {
        std::vector<std::pair<int, int>> stack{{0, 0}};
        int d = 0;
        while (!stack.empty()) {
            auto [n, level] = stack.back();
            stack.pop_back();
            d = std::max(d, level);
            const auto& node = nodes_[static_cast<std::size_t>(n)];
            if (node.feature >= 0) {
                stack.push_back({node.left, level + 1});
                stack.push_back({node.right, level + 1});
            }
        }
        return d;
    }

private:
    int build(const std::vector<detail::PackedRow>& rows, const Eigen::VectorXd& y, std::vector<std::uint32_t>& samples,
              std::size_t lo, std::size_t hi, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const std::size_t n = hi - lo;

        double sum = 0.0;
        double y_min = std::numeric_limits<double>::infinity();
        double y_max = -y_min;
        for (std::size_t k = lo; k < hi; ++k) {
            const double v = y(samples[k]);
            sum += v;
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
        nodes_[static_cast<std::size_t>(id)].value = sum / static_cast<double>(n);
        if (depth >= max_depth_ || n < static_cast<std::size_t>(min_samples_split_) || y_min == y_max) return id;

        std::array<std::size_t, kFingerprintBits> ones{};
        std::array<double, kFingerprintBits> ones_sum{};
        for (std::size_t k = lo; k < hi; ++k) {
            const auto& row = rows[samples[k]];
            const double v = y(samples[k]);
            for (std::size_t w = 0; w < 2; ++w) {
                for (std::uint64_t bits = row[w]; bits; bits &= bits - 1) {
                    const auto f = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
                    ++ones[f];
                    ones_sum[f] += v;
                }
            }
        }
        // maximising S1^2/n1 + S0^2/n0 is maximising the drop in squared deviations
        int best = -1;
        double best_score = -1.0;  // scores are sums of squares, never negative
        for (std::size_t f = 0; f < kFingerprintBits; ++f) {
            const std::size_t n1 = ones[f];
            if (n1 == 0 || n1 == n) continue;
            const double s1 = ones_sum[f];
            const double s0 = sum - s1;
            const double score = s1 * s1 / static_cast<double>(n1) + s0 * s0 / static_cast<double>(n - n1);
            // near-equal scores are ties (mirrored bits give the same partition)
            if (score > best_score + 1e-12 * std::abs(best_score)) {
                best_score = score;
                best = static_cast<int>(f);
            }
        }
        if (best < 0) return id;

        const auto mid = static_cast<std::size_t>(
            std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(lo), samples.begin() + static_cast<std::ptrdiff_t>(hi),
                                  [&](std::uint32_t s) { return !detail::bit_set(rows[s], best); }) -
            samples.begin());
        const int left = build(rows, y, samples, lo, mid, depth + 1);
        const int right = build(rows, y, samples, mid, hi, depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best;
        node.left = left;
        node.right = right;
        return id;
    }

    int max_depth_;
    int min_samples_split_;
    std::vector<Node> nodes_;
};

struct ForestModel {
    std::vector<RegressionTree> trees;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        const auto rows = detail::pack_binary_rows(x);
        Eigen::VectorXd out(x.rows());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double acc = 0.0;
            for (const auto& t : trees) acc += t.predict(rows[r]);
            out(static_cast<Eigen::Index>(r)) = acc / static_cast<double>(trees.size());
        }
        return out;
    }
};

inline ForestModel fit_forest(const ForestSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (spec.n_trees < 1) throw DomainError("forest n_trees must be >= 1");
    if (spec.max_depth < 1) throw DomainError("forest max_depth must be >= 1");
    if (spec.min_samples_split < 2) throw DomainError("forest min_samples_split must be >= 2");
    const auto rows = detail::pack_binary_rows(x);
    const auto n = static_cast<std::uint32_t>(rows.size());

    ForestModel model;
    model.trees.reserve(static_cast<std::size_t>(spec.n_trees));
    for (int t = 0; t < spec.n_trees; ++t) {
        std::vector<std::uint32_t> samples(n);
        if (spec.bootstrap) {
            Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(t)));
            for (auto& s : samples) s = static_cast<std::uint32_t>(rng.uniform_index(n));
        } else {
            for (std::uint32_t i = 0; i < n; ++i) samples[i] = i;
        }
        model.trees.emplace_back(rows, y, std::move(samples), spec.max_depth, spec.min_samples_split);
    }
    return model;
}

}  // namespace activesplit
