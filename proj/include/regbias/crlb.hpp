#pragma once

#include "regbias/types.hpp"

#include <span>
#include <sstream>
#include <vector>

namespace regbias {

/// Fisher information of the bias vector, accumulated one 2-row measurement block at a time.
/// The stacked Jacobian and block-diagonal noise covariance are never formed.
template <typename Scalar>
class FimProblem {
public:
    explicit FimProblem(Eigen::Index dim) : J_(MatX<Scalar>::Zero(dim, dim)) {}

    /// J += g^T R^-1 g for a 2 x d Jacobian block g and its 2 x 2 noise covariance.
    void add_block(const MatX<Scalar>& g, const Mat2<Scalar>& R, int target = -1, int frame = -1)
    {
        if (g.rows() != 2 || g.cols() != J_.cols()) throw InvalidInput("Jacobian block must be 2 x bias dimension");
        Eigen::LLT<Mat2<Scalar>> llt(symmetrized(R));
        if (llt.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "noise block for target " << target << ", frame " << frame << " is not positive definite";
            throw NumericalError(msg.str());
        }
        const MatX<Scalar> white = llt.matrixL().solve(g);
        J_.noalias() += white.transpose() * white;
        ++blocks_;
    }

    /// Merges a partial sum computed over a disjoint set of blocks.
    FimProblem& operator+=(const FimProblem& other)
    {
        if (other.J_.rows() != J_.rows()) throw InvalidInput("cannot merge information of different dimension");
        J_ += other.J_;
        blocks_ += other.blocks_;
        return *this;
    }

    const MatX<Scalar>& J() const { return J_; }
    Eigen::Index dim() const { return J_.rows(); }
    std::size_t blocks() const { return blocks_; }

private:
    MatX<Scalar> J_;
    std::size_t blocks_ = 0;
};

/// Identifies a block in error messages.
struct BlockTag {
    int target = -1;
    int frame = -1;
};

template <typename Scalar>
FimProblem<Scalar> build_fim(std::span<const MatX<Scalar>> jacobians, std::span<const Mat2<Scalar>> noise,
                             std::span<const BlockTag> tags = {})
{
    if (jacobians.empty()) throw InvalidInput("Fisher information needs at least one block");
    if (jacobians.size() != noise.size() || (!tags.empty() && tags.size() != noise.size()))
        throw InvalidInput("Jacobian, noise and tag lists must have equal length");
    FimProblem<Scalar> p(jacobians.front().cols());
    for (std::size_t i = 0; i < jacobians.size(); ++i) {
        const BlockTag tag = tags.empty() ? BlockTag{-1, static_cast<int>(i)} : tags[i];
        p.add_block(jacobians[i], noise[i], tag.target, tag.frame);
    }
    return p;
}

/// Diagonal of J^-1.
template <typename Scalar>
VecX<Scalar> crlb_diag(const FimProblem<Scalar>& p)
{
    const MatX<Scalar> J = symmetrized(p.J());
    Eigen::LLT<MatX<Scalar>> llt(J);
    if (llt.info() != Eigen::Success || !(condition_number(J) < Scalar(1e14)))
        throw NumericalError("Fisher information is singular: a bias component is unobservable");
    return llt.solve(MatX<Scalar>::Identity(J.rows(), J.cols())).diagonal();
}

template <typename Scalar>
struct CombinedSensor {
    Vec2<Scalar> z_comb;
    Mat2<Scalar> R_comb;
};

template <typename Scalar>
struct MeasurementWithNoise {
    Vec2<Scalar> z;
    Mat2<Scalar> R;
};

/// Information-weighted combination of the other sensors' measurements.
/// Returns the combined sensor and the noise of its difference with sensor i, R_comb + R_i.
template <typename Scalar>
std::pair<CombinedSensor<Scalar>, Mat2<Scalar>> combine_sensors(std::span<const MeasurementWithNoise<Scalar>> others,
                                                                const Mat2<Scalar>& R_i)
{
    if (others.empty()) throw InvalidInput("combining sensors needs at least one measurement");
    Mat2<Scalar> info = Mat2<Scalar>::Zero();
    Vec2<Scalar> info_vec = Vec2<Scalar>::Zero();
    for (const auto& m : others) {
        Eigen::LLT<Mat2<Scalar>> llt(symmetrized(m.R));
        if (llt.info() != Eigen::Success) throw NumericalError("sensor noise covariance is not positive definite");
        const Mat2<Scalar> Ri = llt.solve(Mat2<Scalar>::Identity());
        info += Ri;
        info_vec += Ri * m.z;
    }
    CombinedSensor<Scalar> c;
    c.R_comb = symmetrized(info.inverse());
    c.z_comb = c.R_comb * info_vec;
    if (!is_positive_definite(R_i)) throw NumericalError("sensor noise covariance is not positive definite");
    return {c, symmetrized(c.R_comb + R_i)};
}

} // namespace regbias
