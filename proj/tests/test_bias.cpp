#include "support.hpp"

#include <doctest.h>

using namespace regbias;
using regbias::testing::random_matrix;
using regbias::testing::random_spd;
using regbias::testing::rel_err;

namespace {
PseudoMeasurement<double> random_pm(std::mt19937_64& rng, int d, double hscale = 1.0)
{
    PseudoMeasurement<double> pm;
    pm.z = random_matrix(rng, 2, 1);
    pm.Hmat = hscale * random_matrix(rng, 2, d);
    pm.Rmat = random_spd(rng, 2, 10.0, 1.0);
    return pm;
}
} // namespace

TEST_CASE("pseudo-inverses")
{
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
        const Mat42<double> W = random_matrix(rng, 4, 2);
        CHECK((left_pseudo_inverse(W) * W - Mat2<double>::Identity()).norm() < 1e-12);
    }
    const Mat24<double> H = position_selector<double>();
    CHECK((H * right_pseudo_inverse(H) - Mat2<double>::Identity()).norm() == 0.0);

    Mat42<double> rank_one = Mat42<double>::Zero();
    rank_one.col(0) << 1, 2, 3, 4;
    rank_one.col(1) = 2.0 * rank_one.col(0);
    CHECK_THROWS_AS(left_pseudo_inverse(rank_one), NumericalError);
}

TEST_CASE("sensor pseudo-observation")
{
    std::mt19937_64 rng(22);
    const auto m = ncv_model(1.0, 0.1, 0.1);

    SUBCASE("a Kalman update gives back its measurement")
    {
        for (int i = 0; i < 100; ++i) {
            const auto prev = regbias::testing::random_estimate(rng, 0);
            const CartesianMeasurement<double> z{100.0 * random_matrix(rng, 2, 1), random_spd(rng, 2, 10.0, 50.0)};
            const auto [curr, rec] = kf_update(kf_predict(prev, m), z);
            CHECK(rel_err(sensor_pseudo_obs(curr, prev, rec.gain, single_step(m)), z.z) < 1e-10);
        }
    }
    SUBCASE("noise-free unbiased track reproduces the predicted position")
    {
        GaussianEstimate<double> prev{Vec4<double>(1000, 10, -500, 3), 100.0 * Mat4<double>::Identity(), 0};
        const auto pred = kf_predict(prev, m);
        const Vec2<double> truth_pos = position_selector<double>() * (m.F * prev.mean);
        const auto [curr, rec] = kf_update(pred, CartesianMeasurement<double>{truth_pos, 100.0 * Mat2<double>::Identity()});
        CHECK(rel_err(sensor_pseudo_obs(curr, prev, rec.gain, single_step(m)), truth_pos) < 1e-12);
    }
    SUBCASE("difference of two sensors has mean K beta when only the second is biased")
    {
        const Vec2<double> sensor2(5000.0, 0.0);
        const Vec2<double> target(2000.0, 12000.0);
        const BiasVector<double> beta{20.0, 1e-3, 0.0, 0.0};
        const Vec2<double> rel2 = target - sensor2;
        const Vec2<double> tp = cart_to_polar(rel2);
        const PolarMeasurement<double> true2{tp(0), tp(1), 10.0, 1e-3};
        std::normal_distribution<double> n;
        GaussianEstimate<double> prev{Vec4<double>(target(0), 0, target(1), 0), 1e4 * Mat4<double>::Identity(), 0};
        const auto still = single_step(ncv_model(1.0, 0.0, 0.0));
        Vec2<double> acc = Vec2<double>::Zero();
        const int draws = 20000;
        for (int i = 0; i < draws; ++i) {
            const Vec2<double> z1 = target + Vec2<double>(10.0 * n(rng), 20.0 * n(rng));
            const auto pm2 = apply_bias(true2, beta, Vec2<double>(10.0 * n(rng), 1e-3 * n(rng)));
            const auto c2 = polar_to_cart(pm2);
            const auto [curr, rec] = kf_update(kf_predict(prev, still), CartesianMeasurement<double>{c2.z + sensor2, c2.R});
            acc += z1 - sensor_pseudo_obs(curr, prev, rec.gain, still);
        }
        acc /= draws;
        const auto jac = bias_jacobians(true2);
        const Vec2<double> expected = -jac.K.leftCols(2) * Vec2<double>(beta.b_r, beta.b_theta);
        // Monte Carlo error about 15 m / sqrt(draws) ~ 0.1 m per axis
        CHECK((acc - expected).norm() < 0.5);
    }
}

TEST_CASE("difference pseudo-measurement")
{
    const auto jac = bias_jacobians(PolarMeasurement<double>{20000.0, 0.4, 10.0, 1e-3});
    const Mat2<double> R1 = Vec2<double>(100.0, 400.0).asDiagonal();
    const auto pm = difference_pseudo_measurement<double>(Vec2<double>(3, 4), Vec2<double>(3, 4), jac, R1, R1);
    CHECK(pm.z.norm() == 0.0);
    CHECK(pm.Rmat == Mat2<double>(Vec2<double>(200.0, 800.0).asDiagonal()));
    CHECK(pm.Hmat == MatX<double>(-jac.K.leftCols(2)));
    CHECK(difference_pseudo_measurement<double>(Vec2<double>(1, 1), Vec2<double>(0, 0), jac, R1, R1, 4).Hmat.cols() == 4);
}

TEST_CASE("stacked pseudo-measurement")
{
    std::vector<Vec2<double>> z{{1, 2}, {3, 5}, {0, -1}};
    std::vector<BiasJacobians<double>> jac;
    std::vector<Mat2<double>> R;
    for (int i = 0; i < 3; ++i) {
        jac.push_back(bias_jacobians(PolarMeasurement<double>{1000.0 * (i + 1), 0.1 * i, 10.0, 1e-3}));
        R.push_back((i + 1) * Mat2<double>::Identity());
    }
    const auto pm = stacked_pseudo_measurement<double>(z, jac, R, 2);
    CHECK(pm.z.size() == 4);
    CHECK(pm.z.segment(2, 2) == Vec2<double>(1, 3));
    CHECK(pm.Hmat.rows() == 4);
    CHECK(pm.Hmat.cols() == 6);
    CHECK(pm.Hmat.block(2, 0, 2, 2) == MatX<double>(jac[0].K.leftCols(2)));
    CHECK(pm.Hmat.block(2, 4, 2, 2) == MatX<double>(-jac[2].K.leftCols(2)));
    CHECK(pm.Hmat.block(2, 2, 2, 2).norm() == 0.0);
    // common reference noise correlates the rows
    CHECK(pm.Rmat.block(0, 2, 2, 2) == MatX<double>(R[0]));
    CHECK(pm.Rmat.block(2, 2, 2, 2) == MatX<double>(R[0] + R[2]));
    CHECK_THROWS_AS(stacked_pseudo_measurement<double>(std::span(z).first(1), std::span(jac).first(1),
                                                       std::span(R).first(1), 2),
                    InvalidInput);
}

TEST_CASE("recursive least-squares bias update")
{
    std::mt19937_64 rng(23);

    SUBCASE("zero observation matrix changes nothing")
    {
        auto est = bias_prior<double>(Vec2<double>(400.0, 1e-6));
        est.b_hat << 1.0, 2e-4;
        auto pm = random_pm(rng, 2);
        pm.Hmat.setZero();
        const auto out = rlsb_update(est, pm);
        CHECK(out.b_hat == est.b_hat);
        CHECK(rel_err(out.Sigma, est.Sigma) < 1e-15);
    }
    SUBCASE("sequence equals batch weighted least squares")
    {
        for (int trial = 0; trial < 50; ++trial) {
            const int d = trial % 2 == 0 ? 2 : 4;
            const auto prior = BiasEstimate<double>{random_matrix(rng, d, 1), random_spd(rng, d, 1e2, 10.0)};
            std::vector<PseudoMeasurement<double>> pms;
            for (int i = 0; i < 20; ++i) pms.push_back(random_pm(rng, d));
            const auto seq = rlsb_sequence<double>(prior, pms);

            MatX<double> info = prior.Sigma.inverse();
            VecX<double> vec = info * prior.b_hat;
            for (const auto& pm : pms) {
                const MatX<double> Ri = pm.Rmat.inverse();
                info += pm.Hmat.transpose() * Ri * pm.Hmat;
                vec += pm.Hmat.transpose() * Ri * pm.z;
            }
            const MatX<double> Sigma = info.inverse();
            CHECK(rel_err(seq.Sigma, Sigma) <= 1e-8);
            CHECK(rel_err(seq.b_hat, VecX<double>(Sigma * vec)) <= 1e-8);
        }
    }
    SUBCASE("unbiased pseudo-measurements shrink the estimate like one over root n")
    {
        std::normal_distribution<double> n;
        const Mat2<double> H = -Mat2<double>::Identity();
        double sq100 = 0, sq1600 = 0;
        const int runs = 400;
        for (int r = 0; r < runs; ++r) {
            auto est = bias_prior<double>(Vec2<double>(400.0, 400.0));
            for (int i = 1; i <= 1600; ++i) {
                PseudoMeasurement<double> pm{Vec2<double>(n(rng), n(rng)), H, Mat2<double>::Identity()};
                est = rlsb_update(est, pm);
                if (i == 100) sq100 += est.b_hat.squaredNorm();
            }
            sq1600 += est.b_hat.squaredNorm();
        }
        // sixteen times the data, a quarter of the RMSE
        CHECK(std::sqrt(sq1600 / sq100) == doctest::Approx(0.25).epsilon(0.15));
    }
    SUBCASE("Joseph form survives conditioning that breaks the textbook form")
    {
        int naive_bad = 0;
        for (int i = 0; i < 200; ++i) {
            BiasEstimate<double> est{VecX<double>::Zero(2), random_spd(rng, 2, 1e6, 1e6)};
            PseudoMeasurement<double> pm{VecX<double>::Zero(2), regbias::testing::random_with_condition(rng, 2, 2, 1e10),
                                         random_spd(rng, 2, 10.0, 1e-8)};
            CHECK(is_positive_definite(rlsb_update(est, pm).Sigma));
            if (!is_positive_definite(rlsb_update_naive(est, pm).Sigma)) ++naive_bad;
        }
        CHECK(naive_bad > 0);
    }
    SUBCASE("dimension mismatch")
    {
        const auto est = bias_prior<double>(Vec2<double>(1.0, 1.0));
        CHECK_THROWS_AS(rlsb_update(est, random_pm(rng, 4)), InvalidInput);
    }
}

TEST_CASE("optimal bias filter step")
{
    std::mt19937_64 rng(24);
    const auto prior = BiasEstimate<double>{random_matrix(rng, 2, 1), random_spd(rng, 2)};
    std::vector<PseudoMeasurement<double>> pms{random_pm(rng, 2), random_pm(rng, 2), random_pm(rng, 2)};

    SUBCASE("static bias is plain recursive least squares")
    {
        const BiasDynamics<double> still{MatX<double>::Identity(2, 2), MatX<double>::Zero(2, 2)};
        const auto a = omb_step<double>(prior, pms, still);
        const auto b = rlsb_sequence<double>(prior, pms);
        CHECK(a.b_hat == b.b_hat);
        CHECK(a.Sigma == b.Sigma);
    }
    SUBCASE("process noise inflates the covariance")
    {
        const BiasDynamics<double> still{MatX<double>::Identity(2, 2), MatX<double>::Zero(2, 2)};
        const BiasDynamics<double> walk{MatX<double>::Identity(2, 2), 1e-3 * MatX<double>::Identity(2, 2)};
        CHECK(omb_step<double>(prior, pms, walk).Sigma.trace() > omb_step<double>(prior, pms, still).Sigma.trace());
    }
    SUBCASE("tracks a random-walk bias")
    {
        std::normal_distribution<double> n;
        const double qb = 0.01;
        const BiasDynamics<double> walk{MatX<double>::Identity(2, 2), qb * MatX<double>::Identity(2, 2)};
        Vec2<double> beta(5.0, -3.0);
        auto est = bias_prior<double>(Vec2<double>(100.0, 100.0));
        const Mat2<double> H = -Mat2<double>::Identity();
        int outside = 0, checked = 0;
        for (int k = 0; k < 2000; ++k) {
            std::vector<PseudoMeasurement<double>> frame;
            for (int j = 0; j < 4; ++j)
                frame.push_back({Vec2<double>(H * beta + Vec2<double>(n(rng), n(rng))), H, Mat2<double>::Identity()});
            est = omb_step<double>(est, frame, walk);
            beta += std::sqrt(qb) * Vec2<double>(n(rng), n(rng));
            if (k >= 100) {
                for (int i = 0; i < 2; ++i) {
                    ++checked;
                    if (std::abs(est.b_hat(i) - beta(i)) > 3.0 * std::sqrt(est.Sigma(i, i))) ++outside;
                }
            }
        }
        // a consistent filter leaves the 3 sigma band about 0.3% of the time
        CHECK(double(outside) / checked < 0.01);
    }
    CHECK_THROWS_AS(omb_step<double>(prior, pms, BiasDynamics<double>{MatX<double>::Identity(4, 4), MatX<double>::Zero(4, 4)}),
                    InvalidInput);
}
