#pragma once

#include <activesplit/data.hpp>
#include <activesplit/error.hpp>
#include <activesplit/models/forest.hpp>
#include <activesplit/models/mlp.hpp>
#include <activesplit/models/ridge.hpp>
#include <activesplit/models/svr.hpp>
#include <activesplit/rng.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <variant>

namespace activesplit {

using ModelSpec = std::variant<RidgeSpec, SvrSpec, ForestSpec, MlpSpec>;

/// "ridge", "svr", "rf" or "mlp"; also the JSON key of the spec.
inline std::string model_kind(const ModelSpec& spec) {
    static constexpr const char* names[] = {"ridge", "svr", "rf", "mlp"};
    return names[spec.index()];
}

/// Copy of `spec` whose random seed is combined with `seed`. Deterministic
/// models are returned unchanged.
inline ModelSpec reseed(ModelSpec spec, std::uint64_t seed) {
    if (auto* f = std::get_if<ForestSpec>(&spec)) f->seed = mix_seed(f->seed, seed);
    if (auto* m = std::get_if<MlpSpec>(&spec)) m->seed = mix_seed(m->seed, seed);
    return spec;
}

struct FitInfo {
    long iterations = 0;
    bool converged = true;
};

class FittedModel {
public:
    using Impl = std::variant<RidgeModel, SvrModel, ForestModel, MlpModel>;

    FittedModel(ModelSpec spec, Impl impl, FitInfo info)
        : spec_(std::move(spec)), impl_(std::move(impl)), info_(info) {}

    const ModelSpec& spec() const noexcept { return spec_; }
    const FitInfo& info() const noexcept { return info_; }
    const Impl& impl() const noexcept { return impl_; }
    Eigen::Index feature_count() const noexcept { return static_cast<Eigen::Index>(kFingerprintBits); }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        if (x.cols() != feature_count())
            throw DomainError("predict: expected " + std::to_string(feature_count()) + " columns, got " +
                              std::to_string(x.cols()));
        return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(x); }, impl_);
    }

private:
    ModelSpec spec_;
    Impl impl_;
    FitInfo info_;
};

inline FittedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() < 5) throw DomainError("fit needs at least 5 training rows, got " + std::to_string(x.rows()));
    if (x.cols() != static_cast<Eigen::Index>(kFingerprintBits))
        throw DomainError("fit: expected " + std::to_string(kFingerprintBits) + " columns, got " + std::to_string(x.cols()));
    if (y.size() != x.rows()) throw DomainError("fit: target length does not match row count");
    if (!y.allFinite()) throw DomainError("fit: non-finite target value");

    return std::visit(
        [&](const auto& s) -> FittedModel {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, RidgeSpec>) {
                return {s, fit_ridge(s, x, y), {}};
            } else if constexpr (std::is_same_v<S, SvrSpec>) {
                auto m = fit_svr(s, x, y);
                FitInfo info{m.iterations, m.converged};
                return {s, std::move(m), info};
            } else if constexpr (std::is_same_v<S, ForestSpec>) {
                return {s, fit_forest(s, x, y), {}};
            } else {
                auto m = fit_mlp(s, x, y);
                FitInfo info{m.epochs_run, true};
                return {s, std::move(m), info};
            }
        },
        spec);
}

inline Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& x) { return model.predict(x); }

inline nlohmann::json to_json(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> nlohmann::json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, RidgeSpec>)
                return {{"ridge", {{"alpha", s.alpha}}}};
            else if constexpr (std::is_same_v<S, SvrSpec>)
                return {{"svr", {{"c", s.c}, {"epsilon", s.epsilon}, {"tol", s.tol}, {"max_iter", s.max_iter}}}};
            else if constexpr (std::is_same_v<S, ForestSpec>)
                return {{"rf",
                         {{"n_trees", s.n_trees},
                          {"max_depth", s.max_depth},
                          {"min_samples_split", s.min_samples_split},
                          {"seed", s.seed}}}};
            else
                return {{"mlp",
                         {{"hidden_sizes", s.hidden_sizes},
                          {"activation", s.activation},
                          {"standardize", s.standardize},
                          {"learning_rate", s.learning_rate},
                          {"epochs", s.epochs},
                          {"batch_size", s.batch_size},
                          {"seed", s.seed}}}};
        },
        spec);
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& body, const char* key, T& field) {
    if (body.contains(key)) field = body.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& body, const std::string& kind, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : body.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("model '" + kind + "': unknown field '" + key + "'");
    }
}

}  // namespace detail

/// Missing fields keep their defaults; unknown fields are rejected.
inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.size() != 1) throw ConfigError("model spec must be an object with one key (ridge, svr, rf, mlp)");
    const std::string key = j.begin().key();
    const auto& body = j.begin().value();
    if (!body.is_object()) throw ConfigError("model '" + key + "': hyperparameters must be an object");
    try {
        if (key == "ridge") {
            detail::check_keys(body, key, {"alpha"});
            RidgeSpec s;
            detail::read_field(body, "alpha", s.alpha);
            if (!(s.alpha > 0)) throw ConfigError("ridge alpha must be > 0");
            return s;
        }
        if (key == "svr") {
            detail::check_keys(body, key, {"c", "epsilon", "tol", "max_iter"});
            SvrSpec s;
            detail::read_field(body, "c", s.c);
            detail::read_field(body, "epsilon", s.epsilon);
            detail::read_field(body, "tol", s.tol);
            detail::read_field(body, "max_iter", s.max_iter);
            if (!(s.c > 0) || !(s.epsilon >= 0) || !(s.tol > 0) || s.max_iter < 1)
                throw ConfigError("svr requires c > 0, epsilon >= 0, tol > 0, max_iter >= 1");
            return s;
        }
        if (key == "rf") {
            detail::check_keys(body, key, {"n_trees", "max_depth", "min_samples_split", "seed"});
            ForestSpec s;
            detail::read_field(body, "n_trees", s.n_trees);
            detail::read_field(body, "max_depth", s.max_depth);
            detail::read_field(body, "min_samples_split", s.min_samples_split);
            detail::read_field(body, "seed", s.seed);
            if (s.n_trees < 1 || s.max_depth < 1 || s.min_samples_split < 2)
                throw ConfigError("rf requires n_trees >= 1, max_depth >= 1, min_samples_split >= 2");
            return s;
        }
        if (key == "mlp") {
            detail::check_keys(body, key,
                               {"hidden_sizes", "activation", "standardize", "learning_rate", "epochs", "batch_size", "seed"});
            MlpSpec s;
            detail::read_field(body, "hidden_sizes", s.hidden_sizes);
            detail::read_field(body, "activation", s.activation);
            detail::read_field(body, "standardize", s.standardize);
            detail::read_field(body, "learning_rate", s.learning_rate);
            detail::read_field(body, "epochs", s.epochs);
            detail::read_field(body, "batch_size", s.batch_size);
            detail::read_field(body, "seed", s.seed);
            if (s.activation != "relu") throw ConfigError("mlp activation must be \"relu\"");
            if (s.hidden_sizes.empty() || std::any_of(s.hidden_sizes.begin(), s.hidden_sizes.end(), [](int h) { return h < 1; }))
                throw ConfigError("mlp hidden_sizes must be a nonempty list of positive sizes");
            if (!(s.learning_rate > 0) || s.epochs < 1 || s.batch_size < 1)
                throw ConfigError("mlp requires learning_rate > 0, epochs >= 1, batch_size >= 1");
            return s;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model '" + key + "': " + e.what());
    }
    throw ConfigError("unknown model kind '" + key + "'");
}

/// The four regressors with their default hyperparameters.
inline std::vector<ModelSpec> default_models() { return {RidgeSpec{}, SvrSpec{}, ForestSpec{}, MlpSpec{}}; }

}  // namespace activesplit
