#pragma once

#include "regbias/trackers.hpp"

namespace regbias {

enum class TrackletKind { InverseKalman, Decorrelated };

/// Equivalent measurement of the information a track gained between two reports.
template <typename Scalar>
struct Tracklet {
    Vec4<Scalar> u = Vec4<Scalar>::Zero();
    Mat4<Scalar> U = Mat4<Scalar>::Zero();
    /// Weighting P(k|k') D^-1 (inverse-Kalman route) or U P(k|k)^-1 (information route).
    Mat4<Scalar> A = Mat4<Scalar>::Zero();
    /// P(k|k') - P(k|k).
    Mat4<Scalar> D = Mat4<Scalar>::Zero();
    /// U^-1, or its pseudo-inverse when the tracklet only informs a subspace.
    Mat4<Scalar> info = Mat4<Scalar>::Zero();
    /// Local track predicted from the previous report: x(k|k'), P(k|k').
    GaussianEstimate<Scalar> predicted;
    int from_frame = 0;
    int to_frame = 0;
    TrackletKind kind = TrackletKind::InverseKalman;
};

/// D was too ill-conditioned for the inverse-Kalman route.
class SingularTracklet : public NumericalError {
public:
    using NumericalError::NumericalError;
};

template <typename Scalar>
inline constexpr Scalar tracklet_condition_limit = Scalar(1e12);

namespace detail {
template <typename Scalar>
void check_tracklet_inputs(const GaussianEstimate<Scalar>& prev, const GaussianEstimate<Scalar>& curr,
                           const MultiStepModel<Scalar, 4>& model)
{
    if (curr.frame <= prev.frame) throw InvalidInput("tracklet requires the current frame to follow the previous one");
    if (curr.frame - prev.frame != model.steps)
        throw InvalidInput("multi-step model length does not match the report interval");
    if (!is_positive_definite(prev.cov)) throw NumericalError("previous track covariance is not positive definite");
}

/// Pseudo-inverse of a symmetric PSD matrix; throws if it has a materially negative pivot or is zero.
/// With A = L L^T from diagonally pivoted Cholesky (L of full column rank r), A^+ = L (L^T L)^-2 L^T.
template <typename Scalar>
Mat4<Scalar> psd_pseudo_inverse(const Mat4<Scalar>& m, Scalar rel_tol)
{
    const Eigen::LDLT<Mat4<Scalar>> ldlt(symmetrized(m));
    const Vec4<Scalar> d = ldlt.vectorD();
    // pivots come out non-increasing for a PSD matrix
    const Scalar top = d.cwiseAbs().maxCoeff();
    if (!(d(0) > Scalar(0))) throw NumericalError("information difference carries no new information");
    if (d.minCoeff() < -rel_tol * top) throw NumericalError("information difference is not positive semidefinite");

    Vec4<Scalar> root = Vec4<Scalar>::Zero();
    for (int i = 0; i < 4; ++i)
        if (d(i) > rel_tol * top) root(i) = std::sqrt(d(i));
    const Mat4<Scalar> L = ldlt.transpositionsP().transpose() * (Mat4<Scalar>(ldlt.matrixL()) * root.asDiagonal());
    // unit diagonal on the unused columns keeps the Gram matrix invertible without touching the result
    Mat4<Scalar> gram = L.transpose() * L;
    for (int i = 0; i < 4; ++i)
        if (root(i) == Scalar(0)) gram(i, i) = Scalar(1);
    const Mat4<Scalar> gram_inv = gram.inverse();
    return symmetrized(L * (gram_inv * gram_inv) * L.transpose());
}
} // namespace detail

/// Tracklet by inverting the Kalman update between x(k'|k') and x(k|k).
/// Throws SingularTracklet when D = P(k|k') - P(k|k) has condition number above 1e12.
template <typename Scalar>
Tracklet<Scalar> tracklet_inverse_kf(const GaussianEstimate<Scalar>& prev, const GaussianEstimate<Scalar>& curr,
                                     const MultiStepModel<Scalar, 4>& model)
{
    detail::check_tracklet_inputs(prev, curr, model);
    Tracklet<Scalar> t;
    t.kind = TrackletKind::InverseKalman;
    t.from_frame = prev.frame;
    t.to_frame = curr.frame;
    t.predicted = kf_predict(prev, model);
    const Mat4<Scalar>& Ppred = t.predicted.cov;

    t.D = symmetrized(Ppred - curr.cov);
    const Scalar cond = condition_number(t.D);
    if (!(cond <= tracklet_condition_limit<Scalar>)) throw SingularTracklet("tracklet difference matrix is near singular");

    Eigen::PartialPivLU<Mat4<Scalar>> lu(t.D);
    // A = Ppred D^-1, with D symmetric
    t.A = lu.solve(Ppred).transpose();
    t.u = t.predicted.mean + t.A * (curr.mean - t.predicted.mean);
    t.U = symmetrized(t.A * curr.cov);

    Eigen::LLT<Mat4<Scalar>> llt(t.U);
    if (llt.info() == Eigen::Success)
        t.info = symmetrized(llt.solve(Mat4<Scalar>::Identity()));
    else
        t.info = detail::psd_pseudo_inverse(t.U, Scalar(1e-10));
    return t;
}

/// Tracklet in information form: U = (P(k|k)^-1 - P(k|k')^-1)^-1, u = U (P(k|k)^-1 x(k|k) - P(k|k')^-1 x(k|k')).
/// A rank-deficient information difference (one measurement per interval) is inverted on its range.
template <typename Scalar>
Tracklet<Scalar> tracklet_decorrelated(const GaussianEstimate<Scalar>& prev, const GaussianEstimate<Scalar>& curr,
                                       const MultiStepModel<Scalar, 4>& model)
{
    detail::check_tracklet_inputs(prev, curr, model);
    Tracklet<Scalar> t;
    t.kind = TrackletKind::Decorrelated;
    t.from_frame = prev.frame;
    t.to_frame = curr.frame;
    t.predicted = kf_predict(prev, model);

    Eigen::LLT<Mat4<Scalar>> llt_curr(curr.cov);
    Eigen::LLT<Mat4<Scalar>> llt_pred(t.predicted.cov);
    if (llt_curr.info() != Eigen::Success || llt_pred.info() != Eigen::Success)
        throw NumericalError("track covariances must be positive definite for the information-form tracklet");
    // the factorizations only certify definiteness; the closed-form 4x4 inverse is much cheaper than two solves
    const Mat4<Scalar> info_curr = symmetrized(curr.cov.inverse());
    const Mat4<Scalar> info_pred = symmetrized(t.predicted.cov.inverse());

    t.info = symmetrized(info_curr - info_pred);
    const Vec4<Scalar> info_vec = info_curr * curr.mean - info_pred * t.predicted.mean;
    t.U = detail::psd_pseudo_inverse(t.info, Scalar(1e-8));
    t.u = t.U * info_vec;
    t.D = symmetrized(t.predicted.cov - curr.cov);
    t.A = t.U * info_curr;
    return t;
}

/// Inverse-Kalman tracklet, falling back to the information form when D is near singular.
template <typename Scalar>
Tracklet<Scalar> make_tracklet(const GaussianEstimate<Scalar>& prev, const GaussianEstimate<Scalar>& curr,
                               const MultiStepModel<Scalar, 4>& model)
{
    try {
        return tracklet_inverse_kf(prev, curr, model);
    } catch (const SingularTracklet&) {
        return tracklet_decorrelated(prev, curr, model);
    }
}

} // namespace regbias
