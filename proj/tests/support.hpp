#pragma once

#include "regbias/regbias.hpp"

#include <random>

namespace regbias::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols)
{
    std::normal_distribution<double> n;
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

/// Random orthogonal matrix from the QR of a Gaussian matrix.
inline Eigen::MatrixXd random_rotation(std::mt19937_64& rng, int n)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

/// Symmetric positive definite matrix with log-uniform spectrum in [scale / cond, scale].
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n, double cond = 100.0, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd ev(n);
    for (int i = 0; i < n; ++i) ev(i) = scale * std::pow(cond, -u(rng));
    ev(0) = scale;
    if (n > 1) ev(n - 1) = scale / cond;
    const Eigen::MatrixXd Q = random_rotation(rng, n);
    return symmetrized(Q * ev.asDiagonal() * Q.transpose());
}

/// Matrix with prescribed 2-norm condition number.
inline Eigen::MatrixXd random_with_condition(std::mt19937_64& rng, int rows, int cols, double cond, double scale = 1.0)
{
    const int k = std::min(rows, cols);
    Eigen::VectorXd sv = Eigen::VectorXd::LinSpaced(k, 0.0, 1.0);
    for (int i = 0; i < k; ++i) sv(i) = scale * std::pow(cond, -sv(i));
    const Eigen::MatrixXd U = random_rotation(rng, rows).leftCols(k);
    const Eigen::MatrixXd V = random_rotation(rng, cols).leftCols(k);
    return U * sv.asDiagonal() * V.transpose();
}

template <typename A, typename B>
double rel_err(const Eigen::MatrixBase<A>& got, const Eigen::MatrixBase<B>& want)
{
    const double denom = want.norm();
    return denom > 0.0 ? (got - want).norm() / denom : (got - want).norm();
}

inline GaussianEstimate<double> random_estimate(std::mt19937_64& rng, int frame, double cond = 1e3, double scale = 100.0)
{
    GaussianEstimate<double> g;
    g.mean = 100.0 * random_matrix(rng, 4, 1);
    g.cov = random_spd(rng, 4, cond, scale);
    g.frame = frame;
    return g;
}

} // namespace regbias::testing
