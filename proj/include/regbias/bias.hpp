#pragma once

#include "regbias/coords.hpp"
#include "regbias/trackers.hpp"

#include <span>
#include <vector>

namespace regbias {

/// Observation of bias parameters: z = H b + w, cov(w) = R.
template <typename Scalar>
struct PseudoMeasurement {
    VecX<Scalar> z;
    MatX<Scalar> Hmat;
    MatX<Scalar> Rmat;
};

template <typename Scalar>
struct BiasEstimate {
    VecX<Scalar> b_hat;
    MatX<Scalar> Sigma;

    Eigen::Index dim() const { return b_hat.size(); }
};

/// b(k+1) = F_b b(k) + v_b, cov(v_b) = Q_b.
template <typename Scalar>
struct BiasDynamics {
    MatX<Scalar> F_b;
    MatX<Scalar> Q_b;
};

/// Zero bias with diagonal prior variances.
template <typename Scalar>
BiasEstimate<Scalar> bias_prior(const VecX<Scalar>& variances)
{
    return {VecX<Scalar>::Zero(variances.size()), variances.asDiagonal()};
}

/// (W^T W)^-1 W^T; throws on a rank-deficient gain.
template <typename Scalar, int N>
Eigen::Matrix<Scalar, 2, N> left_pseudo_inverse(const Eigen::Matrix<Scalar, N, 2>& W)
{
    const Mat2<Scalar> WtW = W.transpose() * W;
    Eigen::LLT<Mat2<Scalar>> llt(WtW);
    if (llt.info() != Eigen::Success || !(condition_number(WtW) < Scalar(1e14)))
        throw NumericalError("gain does not have full column rank");
    return llt.solve(W.transpose());
}

/// H^T (H H^T)^-1 for a full-row-rank H.
template <typename Scalar, int N>
Eigen::Matrix<Scalar, N, 2> right_pseudo_inverse(const Eigen::Matrix<Scalar, 2, N>& H)
{
    const Mat2<Scalar> HHt = H * H.transpose();
    return H.transpose() * HHt.inverse();
}

/// Gain-deconvolved track update: W^+ [x(k|k) - (I - W H) F_L x(k'|k')].
/// For a Kalman-filter track this recovers the measurement the filter consumed at k.
template <typename Scalar>
Vec2<Scalar> sensor_pseudo_obs(const GaussianEstimate<Scalar>& curr, const GaussianEstimate<Scalar>& prev,
                               const Mat42<Scalar>& gain, const MultiStepModel<Scalar, 4>& model)
{
    const Mat24<Scalar> H = position_selector<Scalar>();
    const Mat4<Scalar> IWH = Mat4<Scalar>::Identity() - gain * H;
    return left_pseudo_inverse(gain) * (curr.mean - IWH * (model.F * prev.mean));
}

/// Pseudo-measurement of the biases of sensor 2 against an unbiased reference (sensor 1):
/// z_b = z1 - H H^+ z2, Hmat = -B2 C2 (restricted to `bias_dim` columns), Rmat = R1 + R2.
template <typename Scalar>
PseudoMeasurement<Scalar> difference_pseudo_measurement(const Vec2<Scalar>& z1, const Vec2<Scalar>& z2,
                                                        const BiasJacobians<Scalar>& jac2, const Mat2<Scalar>& R1,
                                                        const Mat2<Scalar>& R2, int bias_dim = 2)
{
    const Mat24<Scalar> H = position_selector<Scalar>();
    PseudoMeasurement<Scalar> pm;
    pm.z = z1 - H * right_pseudo_inverse(H) * z2;
    pm.Hmat = -jac2.observation(bias_dim);
    pm.Rmat = symmetrized(R1 + R2);
    return pm;
}

/// Stacked pseudo-measurement for all sensors at once: z = [z_1 - z_j]_{j>=2},
/// Hmat rows [K_1, ..., -K_j, ...], Rmat = blocks R_1 + delta_ij R_j.
template <typename Scalar>
PseudoMeasurement<Scalar> stacked_pseudo_measurement(std::span<const Vec2<Scalar>> z,
                                                     std::span<const BiasJacobians<Scalar>> jac,
                                                     std::span<const Mat2<Scalar>> R, int bias_dim = 2)
{
    const auto m = static_cast<Eigen::Index>(z.size());
    if (m < 2 || static_cast<Eigen::Index>(jac.size()) != m || static_cast<Eigen::Index>(R.size()) != m)
        throw InvalidInput("stacked pseudo-measurement needs at least two sensors with matching inputs");
    const Eigen::Index rows = 2 * (m - 1);
    PseudoMeasurement<Scalar> pm;
    pm.z.resize(rows);
    pm.Hmat = MatX<Scalar>::Zero(rows, bias_dim * m);
    pm.Rmat = MatX<Scalar>::Zero(rows, rows);
    const MatX<Scalar> K0 = jac[0].observation(bias_dim);
    for (Eigen::Index j = 1; j < m; ++j) {
        const Eigen::Index r = 2 * (j - 1);
        pm.z.segment(r, 2) = z[0] - z[j];
        pm.Hmat.block(r, 0, 2, bias_dim) = K0;
        pm.Hmat.block(r, bias_dim * j, 2, bias_dim) = -jac[j].observation(bias_dim);
        for (Eigen::Index i = 1; i < m; ++i) pm.Rmat.block(r, 2 * (i - 1), 2, 2) = R[0];
        pm.Rmat.block(r, r, 2, 2) += R[j];
    }
    return pm;
}

namespace detail {
template <typename Scalar>
void check_pm(const BiasEstimate<Scalar>& est, const PseudoMeasurement<Scalar>& pm)
{
    if (pm.Hmat.cols() != est.dim() || pm.Hmat.rows() != pm.z.size() || pm.Rmat.rows() != pm.z.size() ||
        pm.Rmat.cols() != pm.z.size() || est.Sigma.rows() != est.dim() || est.Sigma.cols() != est.dim())
        throw InvalidInput("pseudo-measurement dimensions do not match the bias estimate");
}
} // namespace detail

/// Recursive least-squares bias update with the Joseph-form covariance
/// (I - G H) Sigma (I - G H)^T + G R G^T.
template <typename Scalar>
BiasEstimate<Scalar> rlsb_update(const BiasEstimate<Scalar>& est, const PseudoMeasurement<Scalar>& pm)
{
    detail::check_pm(est, pm);
    const MatX<Scalar> S = symmetrized(pm.Hmat * est.Sigma * pm.Hmat.transpose() + pm.Rmat);
    Eigen::LLT<MatX<Scalar>> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalError("bias innovation covariance is not positive definite");
    const MatX<Scalar> G = llt.solve(pm.Hmat * est.Sigma).transpose();

    BiasEstimate<Scalar> out;
    out.b_hat = est.b_hat + G * (pm.z - pm.Hmat * est.b_hat);
    const MatX<Scalar> IGH = MatX<Scalar>::Identity(est.dim(), est.dim()) - G * pm.Hmat;
    out.Sigma = symmetrized(IGH * est.Sigma * IGH.transpose() + G * pm.Rmat * G.transpose());
    return out;
}

/// Textbook covariance form Sigma - Sigma H^T S^-1 H Sigma. Kept for comparison; loses
/// definiteness under ill-conditioning.
template <typename Scalar>
BiasEstimate<Scalar> rlsb_update_naive(const BiasEstimate<Scalar>& est, const PseudoMeasurement<Scalar>& pm)
{
    detail::check_pm(est, pm);
    const MatX<Scalar> S = pm.Hmat * est.Sigma * pm.Hmat.transpose() + pm.Rmat;
    const MatX<Scalar> Sinv = S.inverse();
    const MatX<Scalar> G = est.Sigma * pm.Hmat.transpose() * Sinv;
    BiasEstimate<Scalar> out;
    out.b_hat = est.b_hat + G * (pm.z - pm.Hmat * est.b_hat);
    out.Sigma = est.Sigma - est.Sigma * pm.Hmat.transpose() * Sinv * pm.Hmat * est.Sigma;
    return out;
}

template <typename Scalar>
BiasEstimate<Scalar> rlsb_sequence(BiasEstimate<Scalar> est, std::span<const PseudoMeasurement<Scalar>> pms)
{
    for (const auto& pm : pms) est = rlsb_update(est, pm);
    return est;
}

/// Time-varying bias: measurement updates for every pseudo-measurement, then b <- F_b b, Sigma <- F_b Sigma F_b^T + Q_b.
template <typename Scalar>
BiasEstimate<Scalar> omb_step(const BiasEstimate<Scalar>& est, std::span<const PseudoMeasurement<Scalar>> pms,
                              const BiasDynamics<Scalar>& dyn)
{
    if (dyn.F_b.rows() != est.dim() || dyn.F_b.cols() != est.dim() || dyn.Q_b.rows() != est.dim() ||
        dyn.Q_b.cols() != est.dim())
        throw InvalidInput("bias dynamics dimensions do not match the bias estimate");
    BiasEstimate<Scalar> out = rlsb_sequence(est, pms);
    out.b_hat = dyn.F_b * out.b_hat;
    out.Sigma = symmetrized(dyn.F_b * out.Sigma * dyn.F_b.transpose() + dyn.Q_b);
    return out;
}

} // namespace regbias
