#include "support.hpp"

#include <doctest.h>

using namespace regbias;
using doctest::Approx;

namespace {
GaussianEstimate<double> estimate(const Vec4<double>& mean, double var, int frame = 0)
{
    GaussianEstimate<double> g;
    g.mean = mean;
    g.cov = var * Mat4<double>::Identity();
    g.frame = frame;
    return g;
}
} // namespace

TEST_CASE("kf_predict")
{
    const auto g = estimate(Vec4<double>(1, 2, 3, 4), 2.0);
    SUBCASE("identity without noise leaves the estimate alone")
    {
        const auto p = kf_predict<double, 4>(g, Mat4<double>::Identity(), Mat4<double>::Zero(), 1);
        CHECK(p.mean == g.mean);
        CHECK(p.cov == g.cov);
        CHECK(p.frame == 1);
    }
    SUBCASE("multi-step model advances the frame")
    {
        const auto m = compose_steps(ncv_model(1.0, 0.1, 0.1), 10);
        const auto p = kf_predict(g, m);
        CHECK(p.frame == 10);
        CHECK(p.mean.isApprox(m.F * g.mean));
        CHECK(p.cov.isApprox(m.F * g.cov * m.F.transpose() + m.Q));
    }
}

TEST_CASE("kf_update")
{
    SUBCASE("scalar reduction along x")
    {
        GaussianEstimate<double> g = estimate(Vec4<double>::Zero(), 1.0);
        CartesianMeasurement<double> z{Vec2<double>(1.0, 0.0), Mat2<double>::Identity()};
        const auto [post, rec] = kf_update(g, z);
        CHECK(post.mean(0) == Approx(0.5));
        CHECK(post.cov(0, 0) == Approx(0.5));
        CHECK(rec.gain(0, 0) == Approx(0.5));
        CHECK(rec.innovation == Vec2<double>(1.0, 0.0));
        CHECK(rec.predicted_meas == Vec2<double>::Zero());
        CHECK(rec.innovation_cov.isApprox(2.0 * Mat2<double>::Identity()));
    }
    SUBCASE("uninformative measurement changes nothing")
    {
        std::mt19937_64 rng(6);
        const auto g = regbias::testing::random_estimate(rng, 3);
        CartesianMeasurement<double> z{Vec2<double>(5.0, -5.0), 1e12 * Mat2<double>::Identity()};
        const auto [post, rec] = kf_update(g, z);
        CHECK(rec.gain.norm() < 1e-8);
        CHECK(regbias::testing::rel_err(post.mean, g.mean) < 1e-8);
        CHECK(regbias::testing::rel_err(post.cov, g.cov) < 1e-8);
    }
    SUBCASE("Joseph form keeps the covariance symmetric positive definite")
    {
        std::mt19937_64 rng(7);
        for (int i = 0; i < 500; ++i) {
            const auto g = regbias::testing::random_estimate(rng, 0, 1e6, 1e4);
            CartesianMeasurement<double> z{Vec2<double>::Zero(), regbias::testing::random_spd(rng, 2, 1e3, 1e-3)};
            const auto post = kf_update(g, z).first;
            CHECK(post.cov == post.cov.transpose());
            CHECK(is_positive_definite(post.cov));
        }
    }
    SUBCASE("singular innovation covariance reports its condition")
    {
        GaussianEstimate<double> g = estimate(Vec4<double>::Zero(), 0.0);
        CartesianMeasurement<double> z{Vec2<double>::Zero(), Mat2<double>::Zero()};
        CHECK_THROWS_AS(kf_update(g, z), NumericalError);
    }
}

TEST_CASE("imm")
{
    const auto ncv = ncv_model(1.0, 0.1, 0.1);
    GaussianEstimate<double> g = estimate(Vec4<double>(100, 10, -50, 5), 25.0);
    CartesianMeasurement<double> z{Vec2<double>(112, -44), 100.0 * Mat2<double>::Identity()};

    SUBCASE("identical modes reproduce the Kalman filter")
    {
        ImmState<double, 4> s{{g, g}, {ncv, ncv}, Eigen::Vector2d(0.3, 0.7), Eigen::Matrix2d::Constant(0.5)};
        s.transition << 0.9, 0.1, 0.1, 0.9;
        const auto [next, combined] = imm_step(s, z);
        const auto kf = kf_update(kf_predict(g, ncv), z).first;
        CHECK(regbias::testing::rel_err(combined.mean, kf.mean) < 1e-12);
        CHECK(regbias::testing::rel_err(combined.cov, kf.cov) < 1e-12);
        // mode probabilities only mix through the transition matrix
        CHECK(next.mode_probs(0) == Approx(0.9 * 0.3 + 0.1 * 0.7));
    }
    SUBCASE("no switching and equal likelihoods keep the probabilities")
    {
        ImmState<double, 4> s{{g, g}, {ncv, ncv}, Eigen::Vector2d(0.25, 0.75), Eigen::Matrix2d::Identity()};
        const auto next = imm_step(s, z).first;
        CHECK(next.mode_probs(0) == Approx(0.25));
        CHECK(next.mode_probs(1) == Approx(0.75));
    }
    SUBCASE("the better model gains probability")
    {
        const auto quiet = ncv_model(1.0, 0.01, 0.01);
        const auto loud = ncv_model(1.0, 100.0, 100.0);
        GaussianEstimate<double> tight = estimate(Vec4<double>(0, 10, 0, 0), 1.0);
        ImmState<double, 4> s{{tight, tight}, {quiet, loud}, Eigen::Vector2d(0.5, 0.5), Eigen::Matrix2d::Identity()};
        // a 200 m jump is far outside the quiet model's prediction
        CartesianMeasurement<double> jump{Vec2<double>(210, 0), Mat2<double>::Identity()};
        CHECK(imm_step(s, jump).first.mode_probs(1) > 0.99);
    }
    SUBCASE("six-state modes report four states")
    {
        const auto nca = nca_model(1.0, 1.0, 1.0);
        const auto ncv6 = with_zero_acceleration(ncv);
        Gaussian<double, 6> g6;
        g6.mean << 100, 10, -50, 5, 0, 0;
        g6.cov = 25.0 * Eigen::Matrix<double, 6, 6>::Identity();
        ImmState<double, 6> s{{g6, g6}, {nca, ncv6}, Eigen::Vector2d(0.5, 0.5), Eigen::Matrix2d::Constant(0.5)};
        const auto combined = imm_step(s, z).second;
        CHECK(combined.mean.size() == 4);
        CHECK(is_positive_definite(combined.cov));
    }
    SUBCASE("validation")
    {
        ImmState<double, 4> s{{g, g}, {ncv, ncv}, Eigen::Vector2d(0.6, 0.6), Eigen::Matrix2d::Identity()};
        CHECK_THROWS_AS(imm_step(s, z), InvalidInput);
        s.mode_probs << 0.5, 0.5;
        s.transition << 0.5, 0.6, 0.5, 0.5;
        CHECK_THROWS_AS(imm_step(s, z), InvalidInput);
    }
}
