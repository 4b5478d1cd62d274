#pragma once

#include "regbias/coords.hpp"
#include "regbias/dynamics.hpp"

#include <sstream>
#include <utility>
#include <vector>

namespace regbias {

/// State mean and covariance at a frame.
template <typename Scalar, int N = 4>
struct Gaussian {
    Vec<Scalar, N> mean = Vec<Scalar, N>::Zero();
    Mat<Scalar, N> cov = Mat<Scalar, N>::Identity();
    int frame = 0;
};

template <typename Scalar> using GaussianEstimate = Gaussian<Scalar, 4>;

/// What a Kalman update used and produced; the gain is what gain-reconstruction tries to recover.
template <typename Scalar, int N = 4>
struct KfStepRecord {
    Eigen::Matrix<Scalar, N, 2> gain;
    Vec2<Scalar> innovation;
    Vec2<Scalar> predicted_meas;
    Mat2<Scalar> innovation_cov;
};

template <typename Scalar, int N>
Gaussian<Scalar, N> kf_predict(const Gaussian<Scalar, N>& est, const Mat<Scalar, N>& F, const Mat<Scalar, N>& Q,
                               int steps = 1)
{
    Gaussian<Scalar, N> out;
    out.mean = F * est.mean;
    out.cov = symmetrized(F * est.cov * F.transpose() + Q);
    out.frame = est.frame + steps;
    return out;
}

template <typename Scalar, int N>
Gaussian<Scalar, N> kf_predict(const Gaussian<Scalar, N>& est, const MotionModel<Scalar, N>& model)
{
    return kf_predict(est, model.F, model.Q, 1);
}

template <typename Scalar, int N>
Gaussian<Scalar, N> kf_predict(const Gaussian<Scalar, N>& est, const MultiStepModel<Scalar, N>& model)
{
    return kf_predict(est, model.F, model.Q, model.steps);
}

/// Position-measurement Kalman update. Covariance uses the Joseph form.
template <typename Scalar, int N>
std::pair<Gaussian<Scalar, N>, KfStepRecord<Scalar, N>> kf_update(const Gaussian<Scalar, N>& est,
                                                                   const CartesianMeasurement<Scalar>& z)
{
    const Eigen::Matrix<Scalar, 2, N> H = position_selector<Scalar, N>();
    KfStepRecord<Scalar, N> rec;
    rec.predicted_meas = H * est.mean;
    rec.innovation = z.z - rec.predicted_meas;
    rec.innovation_cov = symmetrized(H * est.cov * H.transpose() + z.R);

    Eigen::LLT<Mat2<Scalar>> llt(rec.innovation_cov);
    if (llt.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "innovation covariance is not positive definite (condition number "
            << condition_number(rec.innovation_cov) << ")";
        throw NumericalError(msg.str());
    }
    // W = P H^T S^-1
    rec.gain = llt.solve(H * est.cov).transpose();

    Gaussian<Scalar, N> out;
    out.frame = est.frame;
    out.mean = est.mean + rec.gain * rec.innovation;
    const Mat<Scalar, N> IKH = Mat<Scalar, N>::Identity() - rec.gain * H;
    out.cov = symmetrized(IKH * est.cov * IKH.transpose() + rec.gain * z.R * rec.gain.transpose());
    return {out, rec};
}

/// Interacting multiple model estimator state. All modes share one state layout.
template <typename Scalar, int N>
struct ImmState {
    std::vector<Gaussian<Scalar, N>> modes;
    std::vector<MotionModel<Scalar, N>> models;
    VecX<Scalar> mode_probs;
    MatX<Scalar> transition;
};

template <typename Scalar, int N>
void validate(const ImmState<Scalar, N>& s)
{
    const auto m = static_cast<Eigen::Index>(s.modes.size());
    if (m < 1 || static_cast<Eigen::Index>(s.models.size()) != m || s.mode_probs.size() != m ||
        s.transition.rows() != m || s.transition.cols() != m)
        throw InvalidInput("IMM state dimensions disagree");
    const Scalar tol = Scalar(1e-9);
    if ((s.mode_probs.array() < Scalar(0)).any() || std::abs(s.mode_probs.sum() - Scalar(1)) > tol)
        throw InvalidInput("IMM mode probabilities must lie on the simplex");
    if ((s.transition.array() < Scalar(0)).any() ||
        ((s.transition.rowwise().sum().array() - Scalar(1)).abs() > tol).any())
        throw InvalidInput("IMM transition matrix must be row-stochastic");
}

/// Moment-matched mixture of the modes, restricted to the leading 4 states.
template <typename Scalar, int N>
Gaussian<Scalar, 4> imm_combined(const ImmState<Scalar, N>& s)
{
    Vec<Scalar, N> mean = Vec<Scalar, N>::Zero();
    for (std::size_t j = 0; j < s.modes.size(); ++j) mean += s.mode_probs(j) * s.modes[j].mean;
    Mat<Scalar, N> cov = Mat<Scalar, N>::Zero();
    for (std::size_t j = 0; j < s.modes.size(); ++j) {
        const Vec<Scalar, N> d = s.modes[j].mean - mean;
        cov += s.mode_probs(j) * (s.modes[j].cov + d * d.transpose());
    }
    Gaussian<Scalar, 4> out;
    out.mean = mean.template head<4>();
    out.cov = symmetrized(cov.template topLeftCorner<4, 4>());
    out.frame = s.modes.front().frame;
    return out;
}

/// One IMM cycle: mixing, mode-matched predict/update, mode probability update, combination.
template <typename Scalar, int N>
std::pair<ImmState<Scalar, N>, Gaussian<Scalar, 4>> imm_step(const ImmState<Scalar, N>& s,
                                                             const CartesianMeasurement<Scalar>& z)
{
    validate(s);
    const auto m = static_cast<Eigen::Index>(s.modes.size());
    const VecX<Scalar> cbar = s.transition.transpose() * s.mode_probs;

    ImmState<Scalar, N> out = s;
    VecX<Scalar> log_like(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Gaussian<Scalar, N> mixed;
        mixed.frame = s.modes[j].frame;
        mixed.mean.setZero();
        mixed.cov.setZero();
        if (cbar(j) > Scalar(0)) {
            for (Eigen::Index i = 0; i < m; ++i)
                mixed.mean += s.transition(i, j) * s.mode_probs(i) / cbar(j) * s.modes[i].mean;
            for (Eigen::Index i = 0; i < m; ++i) {
                const Scalar w = s.transition(i, j) * s.mode_probs(i) / cbar(j);
                const Vec<Scalar, N> d = s.modes[i].mean - mixed.mean;
                mixed.cov += w * (s.modes[i].cov + d * d.transpose());
            }
        } else {
            mixed = s.modes[j];
        }
        const auto predicted = kf_predict(mixed, s.models[j]);
        auto [updated, rec] = kf_update(predicted, z);
        out.modes[j] = updated;

        Eigen::LLT<Mat2<Scalar>> llt(rec.innovation_cov);
        const Vec2<Scalar> white = llt.matrixL().solve(rec.innovation);
        const Scalar log_det = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        log_like(j) = Scalar(-0.5) * (white.squaredNorm() + log_det) - std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    }

    VecX<Scalar> log_post(m);
    for (Eigen::Index j = 0; j < m; ++j)
        log_post(j) = cbar(j) > Scalar(0) ? log_like(j) + std::log(cbar(j)) : -std::numeric_limits<Scalar>::infinity();
    const Scalar peak = log_post.maxCoeff();
    VecX<Scalar> post = (log_post.array() - peak).exp().matrix();
    out.mode_probs = post / post.sum();

    return {out, imm_combined(out)};
}

} // namespace regbias
