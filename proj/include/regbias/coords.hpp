#pragma once

#include "regbias/types.hpp"

namespace regbias {

template <typename Scalar>
struct PolarMeasurement {
    Scalar range{};
    Scalar azimuth{};
    Scalar sigma_r{};
    Scalar sigma_theta{};
};

/// Offset and scale biases of one sensor: [b_r, b_theta, eps_r, eps_theta].
template <typename Scalar>
struct BiasVector {
    Scalar b_r{};
    Scalar b_theta{};
    Scalar eps_r{};
    Scalar eps_theta{};

    Vec4<Scalar> as_vector() const { return {b_r, b_theta, eps_r, eps_theta}; }

    /// Accepts a 2-vector (offsets only) or a 4-vector (offsets and scales).
    template <typename Derived>
    static BiasVector from_vector(const Eigen::MatrixBase<Derived>& v)
    {
        if (v.size() != 2 && v.size() != 4) throw InvalidInput("bias vector must have 2 or 4 entries");
        BiasVector b{v(0), v(1), Scalar(0), Scalar(0)};
        if (v.size() == 4) {
            b.eps_r = v(2);
            b.eps_theta = v(3);
        }
        return b;
    }

    bool valid() const { return Scalar(1) + eps_r > Scalar(0) && Scalar(1) + eps_theta > Scalar(0); }
};

template <typename Scalar>
struct CartesianMeasurement {
    Vec2<Scalar> z;
    Mat2<Scalar> R;
};

/// Differential of the polar-to-Cartesian map (B), the bias selector (C) and their product.
template <typename Scalar>
struct BiasJacobians {
    Mat2<Scalar> B;
    Mat24<Scalar> C;
    Mat24<Scalar> K;

    /// Columns of K matching a bias vector of dimension 2 (offsets) or 4 (offsets and scales).
    MatX<Scalar> observation(int bias_dim) const
    {
        if (bias_dim != 2 && bias_dim != 4) throw InvalidInput("bias dimension must be 2 or 4");
        return K.leftCols(bias_dim);
    }
};

namespace detail {
template <typename Scalar>
void check_polar(const PolarMeasurement<Scalar>& m)
{
    if (!(m.range > Scalar(0))) throw InvalidInput("polar measurement range must be positive");
    if (!(m.sigma_r >= Scalar(0)) || !(m.sigma_theta >= Scalar(0)))
        throw InvalidInput("polar measurement noise standard deviations must be non-negative");
}
} // namespace detail

/// Biased, noisy measurement of a true (range, azimuth): r' = (1+eps_r) r + b_r + w_r, likewise for azimuth.
/// The azimuth is wrapped to (-pi, pi].
template <typename Scalar>
PolarMeasurement<Scalar> apply_bias(const PolarMeasurement<Scalar>& truth, const BiasVector<Scalar>& bias,
                                    const Vec2<Scalar>& noise)
{
    detail::check_polar(truth);
    PolarMeasurement<Scalar> out = truth;
    out.range = (Scalar(1) + bias.eps_r) * truth.range + bias.b_r + noise(0);
    out.azimuth = wrap_angle((Scalar(1) + bias.eps_theta) * truth.azimuth + bias.b_theta + noise(1));
    if (!(out.range > Scalar(0))) throw InvalidInput("biased range is not positive");
    return out;
}

template <typename Scalar>
BiasJacobians<Scalar> bias_jacobians(const PolarMeasurement<Scalar>& m)
{
    detail::check_polar(m);
    const Scalar c = std::cos(m.azimuth);
    const Scalar s = std::sin(m.azimuth);
    BiasJacobians<Scalar> j;
    j.B << c, -m.range * s,
           s, m.range * c;
    j.C << Scalar(1), Scalar(0), m.range, Scalar(0),
           Scalar(0), Scalar(1), Scalar(0), m.azimuth;
    j.K = j.B * j.C;
    return j;
}

/// Covariance of the Cartesian position obtained from a polar measurement.
template <typename Scalar>
Mat2<Scalar> converted_covariance(const PolarMeasurement<Scalar>& m)
{
    detail::check_polar(m);
    const Scalar c = std::cos(m.azimuth);
    const Scalar s = std::sin(m.azimuth);
    const Scalar vr = m.sigma_r * m.sigma_r;
    const Scalar vt = m.range * m.range * m.sigma_theta * m.sigma_theta;
    Mat2<Scalar> R;
    R(0, 0) = vt * s * s + vr * c * c;
    R(1, 1) = vt * c * c + vr * s * s;
    R(0, 1) = R(1, 0) = (vr - vt) * s * c;
    return R;
}

template <typename Scalar>
Scalar azimuth_compensation(Scalar sigma_theta)
{
    return std::exp(-sigma_theta * sigma_theta / Scalar(2));
}

/// r * sigma_theta^2 / sigma_r; the linearized conversion is trusted below 0.4.
template <typename Scalar>
Scalar conversion_validity_ratio(const PolarMeasurement<Scalar>& m)
{
    if (!(m.sigma_r > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
    return m.range * m.sigma_theta * m.sigma_theta / m.sigma_r;
}

template <typename Scalar>
bool conversion_is_valid(const PolarMeasurement<Scalar>& m)
{
    return conversion_validity_ratio(m) < Scalar(0.4);
}

/// Plain conversion used by the local trackers.
template <typename Scalar>
CartesianMeasurement<Scalar> polar_to_cart(const PolarMeasurement<Scalar>& m)
{
    detail::check_polar(m);
    return {Vec2<Scalar>(m.range * std::cos(m.azimuth), m.range * std::sin(m.azimuth)), converted_covariance(m)};
}

/// Conversion with the azimuth-noise compensation factor exp(-sigma_theta^2 / 2) applied to the range.
template <typename Scalar>
CartesianMeasurement<Scalar> polar_to_cart_unbiased(const PolarMeasurement<Scalar>& m)
{
    CartesianMeasurement<Scalar> out = polar_to_cart(m);
    out.z *= azimuth_compensation(m.sigma_theta);
    return out;
}

/// Range and azimuth of a sensor-relative Cartesian point.
template <typename Scalar>
Vec2<Scalar> cart_to_polar(const Vec2<Scalar>& xy)
{
    return {xy.norm(), std::atan2(xy(1), xy(0))};
}

} // namespace regbias
