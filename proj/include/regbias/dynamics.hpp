#pragma once

#include "regbias/types.hpp"

namespace regbias {

enum class MotionKind { NCV, NCA, ConstantTurn };

/// Discrete-time linear motion model. States are laid out [x, vx, y, vy] and,
/// for the acceleration model, [x, vx, y, vy, ax, ay].
template <typename Scalar, int N = 4>
struct MotionModel {
    MotionKind kind = MotionKind::NCV;
    Scalar T{};
    Scalar q_x{};
    Scalar q_y{};
    Scalar omega{};
    Mat<Scalar, N> F = Mat<Scalar, N>::Identity();
    Mat<Scalar, N> Q = Mat<Scalar, N>::Zero();
};

/// Transition and accumulated process covariance over a run of steps without measurements.
template <typename Scalar, int N = 4>
struct MultiStepModel {
    Mat<Scalar, N> F = Mat<Scalar, N>::Identity();
    Mat<Scalar, N> Q = Mat<Scalar, N>::Zero();
    int steps = 0;
};

namespace detail {
template <typename Scalar>
void check_rate(Scalar T, Scalar qx, Scalar qy)
{
    if (!(T >= Scalar(0))) throw InvalidInput("sampling interval must be non-negative");
    if (!(qx >= Scalar(0)) || !(qy >= Scalar(0))) throw InvalidInput("process noise intensity must be non-negative");
}

template <typename Scalar>
Mat2<Scalar> white_accel_block(Scalar T, Scalar q)
{
    Mat2<Scalar> Q;
    Q << T * T * T / Scalar(3), T * T / Scalar(2),
         T * T / Scalar(2), T;
    return q * Q;
}
} // namespace detail

/// Nearly constant velocity: continuous white-noise acceleration discretized over T.
template <typename Scalar>
MotionModel<Scalar, 4> ncv_model(Scalar T, Scalar q_x, Scalar q_y)
{
    detail::check_rate(T, q_x, q_y);
    MotionModel<Scalar, 4> m;
    m.kind = MotionKind::NCV;
    m.T = T;
    m.q_x = q_x;
    m.q_y = q_y;
    m.F(0, 1) = T;
    m.F(2, 3) = T;
    m.Q.template block<2, 2>(0, 0) = detail::white_accel_block(T, q_x);
    m.Q.template block<2, 2>(2, 2) = detail::white_accel_block(T, q_y);
    return m;
}

/// Nearly constant acceleration (continuous Wiener-process acceleration); state [x, vx, y, vy, ax, ay].
template <typename Scalar>
MotionModel<Scalar, 6> nca_model(Scalar T, Scalar q_x, Scalar q_y)
{
    detail::check_rate(T, q_x, q_y);
    MotionModel<Scalar, 6> m;
    m.kind = MotionKind::NCA;
    m.T = T;
    m.q_x = q_x;
    m.q_y = q_y;

    const Scalar T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    Eigen::Matrix<Scalar, 3, 3> Fa;
    Fa << Scalar(1), T, T2 / Scalar(2),
          Scalar(0), Scalar(1), T,
          Scalar(0), Scalar(0), Scalar(1);
    Eigen::Matrix<Scalar, 3, 3> Qa;
    Qa << T5 / Scalar(20), T4 / Scalar(8), T3 / Scalar(6),
          T4 / Scalar(8), T3 / Scalar(3), T2 / Scalar(2),
          T3 / Scalar(6), T2 / Scalar(2), T;

    // per-axis indices of (position, velocity, acceleration)
    const int axes[2][3] = {{0, 1, 4}, {2, 3, 5}};
    const Scalar q[2] = {q_x, q_y};
    for (int a = 0; a < 2; ++a) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m.F(axes[a][i], axes[a][j]) = Fa(i, j);
                m.Q(axes[a][i], axes[a][j]) = q[a] * Qa(i, j);
            }
        }
    }
    return m;
}

/// Coordinated turn with known rate omega (rad/s). Process noise uses the velocity-model block.
template <typename Scalar>
MotionModel<Scalar, 4> turn_model(Scalar T, Scalar omega, Scalar q_x = Scalar(0), Scalar q_y = Scalar(0))
{
    MotionModel<Scalar, 4> m = ncv_model(T, q_x, q_y);
    m.kind = MotionKind::ConstantTurn;
    m.omega = omega;
    const Scalar wt = omega * T;
    // small-rate series keeps the limit omega -> 0 exact
    const Scalar s_over_w = std::abs(wt) < Scalar(1e-6) ? T * (Scalar(1) - wt * wt / Scalar(6)) : std::sin(wt) / omega;
    const Scalar c_over_w = std::abs(wt) < Scalar(1e-6) ? T * wt / Scalar(2) : (Scalar(1) - std::cos(wt)) / omega;
    const Scalar c = std::cos(wt);
    const Scalar s = std::sin(wt);
    m.F << Scalar(1), s_over_w, Scalar(0), -c_over_w,
           Scalar(0), c, Scalar(0), -s,
           Scalar(0), c_over_w, Scalar(1), s_over_w,
           Scalar(0), s, Scalar(0), c;
    return m;
}

/// Embeds a 4-state model in the 6-state acceleration layout; accelerations are held at zero.
template <typename Scalar>
MotionModel<Scalar, 6> with_zero_acceleration(const MotionModel<Scalar, 4>& m)
{
    MotionModel<Scalar, 6> out;
    out.kind = m.kind;
    out.T = m.T;
    out.q_x = m.q_x;
    out.q_y = m.q_y;
    out.omega = m.omega;
    out.F.setZero();
    out.F.template topLeftCorner<4, 4>() = m.F;
    out.Q.setZero();
    out.Q.template topLeftCorner<4, 4>() = m.Q;
    return out;
}

/// F_L = F^L and Q_L = sum_{i<L} F^i Q F^i^T.
template <typename Scalar, int N>
MultiStepModel<Scalar, N> compose_steps(const MotionModel<Scalar, N>& m, int L)
{
    if (L < 1) throw InvalidInput("step count must be at least 1");
    MultiStepModel<Scalar, N> out;
    out.steps = L;
    Mat<Scalar, N> Fi = Mat<Scalar, N>::Identity();
    for (int i = 0; i < L; ++i) {
        out.Q += Fi * m.Q * Fi.transpose();
        Fi = m.F * Fi;
    }
    out.F = Fi;
    out.Q = symmetrized(out.Q);
    return out;
}

/// Model for running `first` and then `second`.
template <typename Scalar, int N>
MultiStepModel<Scalar, N> then(const MultiStepModel<Scalar, N>& first, const MultiStepModel<Scalar, N>& second)
{
    MultiStepModel<Scalar, N> out;
    out.steps = first.steps + second.steps;
    out.F = second.F * first.F;
    out.Q = symmetrized(second.F * first.Q * second.F.transpose() + second.Q);
    return out;
}

template <typename Scalar, int N>
MultiStepModel<Scalar, N> single_step(const MotionModel<Scalar, N>& m)
{
    return {m.F, m.Q, 1};
}

} // namespace regbias
