#pragma once

// Linear-kernel epsilon-SVR trained in the dual by sequential minimal
// optimisation with second-order working-set selection. The intercept is
// not regularised; it comes out of the equality constraint of the dual.
//
// Dual over 2l variables (alpha_i, alpha*_i packed as t and t + l):
//   min 1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a_t <= C
//   s_t = +1 / -1, Q_tu = s_t s_u <x_i, x_j>, p_t = eps - y_i / eps + y_i.

#include <activesplit/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace activesplit {

struct SvrSpec {
    double c = 1.0;
    double epsilon = 0.1;
    double tol = 1e-4;
    long max_iter = 10000;
    friend bool operator==(const SvrSpec&, const SvrSpec&) = default;
};

struct SvrModel {
    Eigen::VectorXd coef;  // w = sum_i (alpha_i - alpha*_i) x_i
    double intercept = 0.0;
    Eigen::VectorXd dual_coef;  // alpha_i - alpha*_i per training row
    long iterations = 0;
    bool converged = false;
    double kkt_gap = 0.0;  // max violating pair gap at exit

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return (x * coef).array() + intercept; }
};

namespace detail {

/// Kernel rows of the training set. Keeps the full Gram matrix for small
/// problems and recomputes rows on demand otherwise.
class LinearKernel {
public:
    static constexpr Eigen::Index kFullGramLimit = 3000;

    explicit LinearKernel(const Eigen::MatrixXd& x) : x_(x) {
        if (x.rows() <= kFullGramLimit) gram_ = x * x.transpose();
        diag_ = x.rowwise().squaredNorm();
    }

    Eigen::VectorXd row(Eigen::Index i) const {
        if (gram_.size() > 0) return gram_.col(i);
        return x_ * x_.row(i).transpose();
    }

    double diag(Eigen::Index i) const { return diag_(i); }

private:
    const Eigen::MatrixXd& x_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd diag_;
};

struct SvrDualState {
    std::vector<double> alpha;  // 2l
    std::vector<double> grad;   // 2l
    std::vector<int> sign;      // 2l
    double c = 0.0;

    bool at_upper(std::size_t t) const { return alpha[t] >= c; }
    bool at_lower(std::size_t t) const { return alpha[t] <= 0.0; }
};

/// Maximal violating pair gap m(a) - M(a); zero at an exact optimum.
inline double kkt_violation(const SvrDualState& s) {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < s.alpha.size(); ++t) {
        const double v = -s.sign[t] * s.grad[t];
        const bool in_up = s.sign[t] > 0 ? !s.at_upper(t) : !s.at_lower(t);
        const bool in_low = s.sign[t] > 0 ? !s.at_lower(t) : !s.at_upper(t);
        if (in_up) up = std::max(up, v);
        if (in_low) low = std::min(low, v);
    }
    if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
    return std::max(0.0, up - low);
}

}  // namespace detail

/// Recomputes the dual gradient from scratch for the given dual coefficients
/// (alpha - alpha*) and returns the KKT gap. Used to audit a fitted model.
inline double svr_kkt_violation(const SvrSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha_star) {
    const auto l = static_cast<std::size_t>(x.rows());
    const Eigen::VectorXd k_beta = x * (x.transpose() * (alpha - alpha_star));
    detail::SvrDualState s;
    s.c = spec.c;
    s.alpha.resize(2 * l);
    s.grad.resize(2 * l);
    s.sign.resize(2 * l);
    for (std::size_t i = 0; i < l; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        s.alpha[i] = alpha(ii);
        s.alpha[i + l] = alpha_star(ii);
        s.sign[i] = 1;
        s.sign[i + l] = -1;
        s.grad[i] = k_beta(ii) + spec.epsilon - y(ii);
        s.grad[i + l] = -k_beta(ii) + spec.epsilon + y(ii);
    }
    return detail::kkt_violation(s);
}

struct SvrDual {
    Eigen::VectorXd alpha, alpha_star;
};

inline SvrModel fit_svr(const SvrSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        SvrDual* dual_out = nullptr) {
    if (!(spec.c > 0.0)) throw DomainError("svr C must be > 0");
    if (!(spec.epsilon >= 0.0)) throw DomainError("svr epsilon must be >= 0");
    if (!(spec.tol > 0.0)) throw DomainError("svr tol must be > 0");
    if (spec.max_iter < 1) throw DomainError("svr max_iter must be >= 1");

    constexpr double kTau = 1e-12;
    const auto l = static_cast<std::size_t>(x.rows());
    const std::size_t n2 = 2 * l;
    const detail::LinearKernel kernel(x);

    detail::SvrDualState s;
    s.c = spec.c;
    s.alpha.assign(n2, 0.0);
    s.grad.resize(n2);
    s.sign.resize(n2);
    for (std::size_t i = 0; i < l; ++i) {
        const double yi = y(static_cast<Eigen::Index>(i));
        s.sign[i] = 1;
        s.sign[i + l] = -1;
        s.grad[i] = spec.epsilon - yi;
        s.grad[i + l] = spec.epsilon + yi;
    }
    auto qd = [&](std::size_t t) { return kernel.diag(static_cast<Eigen::Index>(t % l)); };

    SvrModel model;
    long iter = 0;
    bool converged = false;
    while (true) {
        // i: maximal violator in I_up
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t wi = -1;
        for (std::size_t t = 0; t < n2; ++t) {
            if (s.sign[t] > 0) {
                if (!s.at_upper(t) && -s.grad[t] >= gmax) gmax = -s.grad[t], wi = static_cast<std::ptrdiff_t>(t);
            } else if (!s.at_lower(t) && s.grad[t] >= gmax) {
                gmax = s.grad[t], wi = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (wi < 0) {
            converged = true;
            break;
        }
        const auto i = static_cast<std::size_t>(wi);
        const Eigen::VectorXd ki = kernel.row(static_cast<Eigen::Index>(i % l));

        // j: second-order gain among I_low
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        std::ptrdiff_t wj = -1;
        for (std::size_t t = 0; t < n2; ++t) {
            const double qit = s.sign[i] * s.sign[t] * ki(static_cast<Eigen::Index>(t % l));
            if (s.sign[t] > 0) {
                if (s.at_lower(t)) continue;
                const double diff = gmax + s.grad[t];
                gmax2 = std::max(gmax2, s.grad[t]);
                if (diff > 0) {
                    double quad = qd(i) + qd(t) - 2.0 * s.sign[i] * qit;
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best_obj) best_obj = obj, wj = static_cast<std::ptrdiff_t>(t);
                }
            } else {
                if (s.at_upper(t)) continue;
                const double diff = gmax - s.grad[t];
                gmax2 = std::max(gmax2, -s.grad[t]);
                if (diff > 0) {
                    double quad = qd(i) + qd(t) + 2.0 * s.sign[i] * qit;
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best_obj) best_obj = obj, wj = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        model.kkt_gap = gmax + gmax2;
        if (model.kkt_gap < spec.tol || wj < 0) {
            converged = true;
            break;
        }
        if (iter >= spec.max_iter) break;
        ++iter;

        const auto j = static_cast<std::size_t>(wj);
        const Eigen::VectorXd kj = kernel.row(static_cast<Eigen::Index>(j % l));
        const double qij = s.sign[i] * s.sign[j] * ki(static_cast<Eigen::Index>(j % l));
        const double old_i = s.alpha[i];
        const double old_j = s.alpha[j];
        double& ai = s.alpha[i];
        double& aj = s.alpha[j];
        const double c = spec.c;
        if (s.sign[i] != s.sign[j]) {
            double quad = qd(i) + qd(j) + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-s.grad[i] - s.grad[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) aj = 0, ai = diff;
            } else if (ai < 0) {
                ai = 0, aj = -diff;
            }
            if (diff > 0) {
                if (ai > c) ai = c, aj = c - diff;
            } else if (aj > c) {
                aj = c, ai = c + diff;
            }
        } else {
            double quad = qd(i) + qd(j) - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (s.grad[i] - s.grad[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c) {
                if (ai > c) ai = c, aj = sum - c;
            } else if (aj < 0) {
                aj = 0, ai = sum;
            }
            if (sum > c) {
                if (aj > c) aj = c, ai = sum - c;
            } else if (ai < 0) {
                ai = 0, aj = sum;
            }
        }
        const double di = ai - old_i;
        const double dj = aj - old_j;
        for (std::size_t t = 0; t < n2; ++t) {
            const auto r = static_cast<Eigen::Index>(t % l);
            s.grad[t] += s.sign[t] * (s.sign[i] * ki(r) * di + s.sign[j] * kj(r) * dj);
        }
    }

    // intercept from free variables, else midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n2; ++t) {
        const double yg = s.sign[t] * s.grad[t];
        if (s.at_upper(t)) {
            if (s.sign[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (s.at_lower(t)) {
            if (s.sign[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

    model.dual_coef.resize(static_cast<Eigen::Index>(l));
    for (std::size_t i = 0; i < l; ++i) model.dual_coef(static_cast<Eigen::Index>(i)) = s.alpha[i] - s.alpha[i + l];
    model.coef = x.transpose() * model.dual_coef;
    model.intercept = -rho;
    model.iterations = iter;
    model.converged = converged;
    if (dual_out) {
        dual_out->alpha.resize(static_cast<Eigen::Index>(l));
        dual_out->alpha_star.resize(static_cast<Eigen::Index>(l));
        for (std::size_t i = 0; i < l; ++i) {
            dual_out->alpha(static_cast<Eigen::Index>(i)) = s.alpha[i];
            dual_out->alpha_star(static_cast<Eigen::Index>(i)) = s.alpha[i + l];
        }
    }
    return model;
}

}  // namespace activesplit
