#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace regbias {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat4 = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar> using Mat24 = Eigen::Matrix<Scalar, 2, 4>;
template <typename Scalar> using Mat42 = Eigen::Matrix<Scalar, 4, 2>;
template <typename Scalar> using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar, int N> using Vec = Eigen::Matrix<Scalar, N, 1>;
template <typename Scalar, int N> using Mat = Eigen::Matrix<Scalar, N, N>;

/// Thrown when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a matrix that must be inverted is singular or not positive definite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Position-selection matrix for a state laid out as [x, vx, y, vy, ...].
template <typename Scalar, int N = 4>
Eigen::Matrix<Scalar, 2, N> position_selector()
{
    static_assert(N >= 4, "state must carry at least [x, vx, y, vy]");
    Eigen::Matrix<Scalar, 2, N> H = Eigen::Matrix<Scalar, 2, N>::Zero();
    H(0, 0) = Scalar(1);
    H(1, 2) = Scalar(1);
    return H;
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m)
{
    return (typename Derived::Scalar(0.5) * (m + m.transpose())).eval();
}

/// True if a Cholesky factorization of the symmetric part succeeds.
template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m)
{
    using S = typename Derived::Scalar;
    Eigen::Matrix<S, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime> sym = symmetrized(m);
    Eigen::LLT<decltype(sym)> llt(sym);
    return llt.info() == Eigen::Success;
}

/// 2-norm condition number via singular values; +inf when singular.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& m)
{
    using S = typename Derived::Scalar;
    Eigen::JacobiSVD<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> svd(m.eval());
    const auto& sv = svd.singularValues();
    const S smin = sv(sv.size() - 1);
    if (!(smin > S(0))) return std::numeric_limits<S>::infinity();
    return sv(0) / smin;
}

template <typename Scalar>
Scalar wrap_angle(Scalar a)
{
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    a = std::remainder(a, Scalar(2) * pi);
    if (a <= -pi) a += Scalar(2) * pi;
    return a;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
    return m.allFinite();
}

} // namespace regbias
