#include "support.hpp"

#include <doctest.h>

using namespace regbias;
using doctest::Approx;

TEST_CASE("ncv model")
{
    SUBCASE("zero interval is the identity")
    {
        const auto m = ncv_model(0.0, 1.0, 1.0);
        CHECK(m.F == Mat4<double>::Identity());
        CHECK(m.Q.norm() == 0.0);
    }
    SUBCASE("noise block")
    {
        const auto m = ncv_model(1.0, 0.1, 0.1);
        CHECK(m.Q(0, 0) == Approx(0.1 / 3.0));
        CHECK(m.Q(0, 1) == Approx(0.05));
        CHECK(m.Q(1, 0) == Approx(0.05));
        CHECK(m.Q(1, 1) == Approx(0.1));
        CHECK(m.Q.block<2, 2>(2, 2) == m.Q.block<2, 2>(0, 0));
        CHECK(m.Q.block<2, 2>(0, 2).norm() == 0.0);
        CHECK(m.F(0, 1) == 1.0);
        CHECK(m.F(2, 3) == 1.0);
    }
    SUBCASE("unit velocity advances one metre")
    {
        GaussianEstimate<double> g;
        g.mean << 0, 1, 0, 0;
        g.cov = Mat4<double>::Identity();
        CHECK(kf_predict(g, ncv_model(1.0, 0.0, 0.0)).mean == Vec4<double>(1, 1, 0, 0));
    }
    CHECK_THROWS_AS(ncv_model(-1.0, 1.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(ncv_model(1.0, -1.0, 1.0), InvalidInput);
}

TEST_CASE("nca model")
{
    const auto m = nca_model(2.0, 1.0, 3.0);
    CHECK(m.F(0, 4) == Approx(2.0));
    CHECK(m.F(1, 4) == Approx(2.0));
    CHECK(m.F(2, 5) == Approx(2.0));
    CHECK(m.Q(4, 4) == Approx(2.0));
    CHECK(m.Q(5, 5) == Approx(6.0));
    CHECK(m.Q(0, 0) == Approx(32.0 / 20.0));
    CHECK(m.Q.isApprox(m.Q.transpose()));
    CHECK(is_positive_definite(m.Q));
}

TEST_CASE("turn model")
{
    SUBCASE("vanishing rate gives the velocity model")
    {
        CHECK((turn_model(1.0, 0.0).F - ncv_model(1.0, 0.0, 0.0).F).norm() == 0.0);
        // first-order terms in omega T remain
        CHECK((turn_model(1.0, 1e-9).F - ncv_model(1.0, 0.0, 0.0).F).norm() < 1e-8);
    }
    SUBCASE("speed is preserved and heading turns by omega T")
    {
        const double w = 0.05;
        const auto m = turn_model(2.0, w);
        const Vec4<double> x(0, 30, 0, 0);
        const Vec4<double> y = m.F * x;
        CHECK(std::hypot(y(1), y(3)) == Approx(30.0));
        CHECK(std::atan2(y(3), y(1)) == Approx(0.1));
        // position lies on the circle of radius v / omega
        CHECK(std::hypot(y(0), y(2) - 30.0 / w) == Approx(30.0 / w));
    }
}

TEST_CASE("zero-acceleration embedding")
{
    const auto m4 = ncv_model(1.0, 0.5, 0.5);
    const auto m6 = with_zero_acceleration(m4);
    CHECK(m6.F.topLeftCorner<4, 4>() == m4.F);
    CHECK(m6.F.bottomRows<2>().norm() == 0.0);
    CHECK(m6.Q.topLeftCorner<4, 4>() == m4.Q);
}

TEST_CASE("multi-step composition")
{
    const auto m = ncv_model(1.0, 0.1, 0.3);

    SUBCASE("one and two steps")
    {
        const auto one = compose_steps(m, 1);
        CHECK(one.F == m.F);
        CHECK(one.Q.isApprox(m.Q));
        const auto two = compose_steps(m, 2);
        CHECK(two.F.isApprox(m.F * m.F));
        CHECK(two.Q.isApprox(m.F * m.Q * m.F.transpose() + m.Q));
        CHECK(single_step(m).steps == 1);
    }
    SUBCASE("associativity")
    {
        for (int a = 1; a <= 6; ++a)
            for (int b = 1; b <= 6; ++b) {
                const auto whole = compose_steps(m, a + b);
                const auto parts = then(compose_steps(m, a), compose_steps(m, b));
                CHECK(parts.steps == a + b);
                CHECK(regbias::testing::rel_err(parts.F, whole.F) < 1e-14);
                CHECK(regbias::testing::rel_err(parts.Q, whole.Q) < 1e-13);
            }
    }
    SUBCASE("accumulated noise stays positive definite")
    {
        for (int L = 1; L <= 100; ++L) CHECK(is_positive_definite(compose_steps(m, L).Q));
        CHECK(is_positive_definite(compose_steps(nca_model(1.0, 1.0, 1.0), 100).Q));
    }
    SUBCASE("matches the covariance of a simulated noise rollup")
    {
        const auto base = ncv_model(1.0, 0.1, 0.1);
        const auto ten = compose_steps(base, 10);
        const Eigen::LLT<Mat4<double>> chol(base.Q);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n;
        const int draws = 200000;
        Mat4<double> acc = Mat4<double>::Zero();
        for (int i = 0; i < draws; ++i) {
            Vec4<double> x = Vec4<double>::Zero();
            for (int k = 0; k < 10; ++k) x = base.F * x + chol.matrixL() * Vec4<double>(n(rng), n(rng), n(rng), n(rng));
            acc += x * x.transpose();
        }
        acc /= draws;
        // diagonal entries have sampling error about sqrt(2 / draws) ~ 0.3%
        for (int i = 0; i < 4; ++i) CHECK(acc(i, i) == Approx(ten.Q(i, i)).epsilon(0.02));
        CHECK(acc(0, 1) == Approx(ten.Q(0, 1)).epsilon(0.02));
    }
    CHECK_THROWS_AS(compose_steps(m, 0), InvalidInput);
}
