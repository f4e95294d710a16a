#pragma once

#include <activesplit/error.hpp>

#include <Eigen/Dense>

#include <cassert>

namespace activesplit {

struct RidgeSpec {
    double alpha = 0.1;
    friend bool operator==(const RidgeSpec&, const RidgeSpec&) = default;
};

/// Linear model y = X w + b with an unpenalised intercept.
struct RidgeModel {
    Eigen::VectorXd coef;
    double intercept = 0.0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        return (x * coef).array() + intercept;
    }
};

/// Exact minimiser of |y - Xw - b|^2 + alpha |w|^2. X and y are centred so
/// the intercept drops out, then (Xc'Xc + alpha I) w = Xc'yc is solved by
/// Cholesky.
inline RidgeModel fit_ridge(const RidgeSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (!(spec.alpha > 0.0)) throw DomainError("ridge alpha must be > 0");
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += spec.alpha;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    // positive definite for any alpha > 0
    assert(llt.info() == Eigen::Success);
    if (llt.info() != Eigen::Success) throw TrainingError("ridge normal equations are not positive definite");

    RidgeModel m;
    m.coef = llt.solve(xc.transpose() * yc);
    m.intercept = y_mean - x_mean.dot(m.coef);
    return m;
}

inline double ridge_objective(const RidgeSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& coef, double intercept) {
    const Eigen::VectorXd r = y - ((x * coef).array() + intercept).matrix();
    return r.squaredNorm() + spec.alpha * coef.squaredNorm();
}

}  // namespace activesplit
