#include "support.hpp"

#include <doctest.h>

using namespace regbias;
using doctest::Approx;
using regbias::testing::random_matrix;
using regbias::testing::random_spd;
using regbias::testing::rel_err;

TEST_CASE("Fisher information")
{
    SUBCASE("single identity block")
    {
        const std::vector<MatX<double>> g{MatX<double>::Identity(2, 2)};
        const std::vector<Mat2<double>> R{4.0 * Mat2<double>::Identity()};
        CHECK(build_fim<double>(g, R).J().isApprox(0.25 * MatX<double>::Identity(2, 2)));
    }
    SUBCASE("additive over identical blocks")
    {
        std::mt19937_64 rng(41);
        const MatX<double> g0 = random_matrix(rng, 2, 4);
        const Mat2<double> R0 = random_spd(rng, 2);
        const MatX<double> J1 = build_fim<double>(std::vector<MatX<double>>{g0}, std::vector<Mat2<double>>{R0}).J();
        for (int K : {2, 5, 17}) {
            const std::vector<MatX<double>> g(K, g0);
            const std::vector<Mat2<double>> R(K, R0);
            CHECK(rel_err(build_fim<double>(g, R).J(), MatX<double>(K * J1)) < 1e-13);
        }
    }
    SUBCASE("partition invariance")
    {
        std::mt19937_64 rng(42);
        FimProblem<double> whole(2), a(2), b(2);
        for (int i = 0; i < 30; ++i) {
            const MatX<double> g = random_matrix(rng, 2, 2);
            const Mat2<double> R = random_spd(rng, 2);
            whole.add_block(g, R);
            (i % 3 == 0 ? a : b).add_block(g, R);
        }
        a += b;
        CHECK(rel_err(a.J(), whole.J()) < 1e-13);
        CHECK(a.blocks() == 30);
    }
    SUBCASE("a bad block is named")
    {
        const std::vector<MatX<double>> g{MatX<double>::Identity(2, 2)};
        const std::vector<Mat2<double>> R{Mat2<double>::Zero()};
        const std::vector<BlockTag> tags{{7, 42}};
        try {
            build_fim<double>(g, R, tags);
            FAIL("expected a numerical error");
        } catch (const NumericalError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("target 7") != std::string::npos);
            CHECK(msg.find("frame 42") != std::string::npos);
        }
        CHECK_THROWS_AS(build_fim<double>(std::vector<MatX<double>>{}, std::vector<Mat2<double>>{}), InvalidInput);
    }
}

TEST_CASE("CRLB diagonal")
{
    FimProblem<double> p(2);
    MatX<double> g(2, 2);
    g << 2, 0, 0, 10;
    p.add_block(g, Mat2<double>::Identity());
    const VecX<double> c = crlb_diag(p);
    CHECK(c(0) == Approx(0.25));
    CHECK(c(1) == Approx(0.01));

    SUBCASE("an unobservable component is reported")
    {
        FimProblem<double> q(2);
        MatX<double> only_range(2, 2);
        only_range << 1, 0, 0, 0;
        q.add_block(only_range, Mat2<double>::Identity());
        CHECK_THROWS_AS(crlb_diag(q), NumericalError);
    }
    SUBCASE("more frames never loosen the bound")
    {
        std::mt19937_64 rng(43);
        FimProblem<double> acc(4);
        VecX<double> last = VecX<double>::Constant(4, std::numeric_limits<double>::infinity());
        std::uniform_real_distribution<double> th(-3.0, 3.0), r(5000.0, 30000.0);
        for (int k = 0; k < 40; ++k) {
            const PolarMeasurement<double> m{r(rng), th(rng), 10.0, 1e-3};
            acc.add_block(bias_jacobians(m).observation(4), converted_covariance(m));
            if (k < 3) continue;
            const VecX<double> c = crlb_diag(acc);
            CHECK((c.array() <= last.array() * (1.0 + 1e-9)).all());
            last = c;
        }
    }
}

TEST_CASE("combined sensor")
{
    std::mt19937_64 rng(44);
    const Mat2<double> Ri = random_spd(rng, 2);

    SUBCASE("single sensor passes through")
    {
        const MeasurementWithNoise<double> m{Vec2<double>(1, 2), random_spd(rng, 2)};
        const auto [c, total] = combine_sensors<double>(std::span(&m, 1), Ri);
        CHECK(rel_err(c.z_comb, m.z) < 1e-14);
        CHECK(rel_err(c.R_comb, m.R) < 1e-13);
        CHECK(rel_err(total, Mat2<double>(m.R + Ri)) < 1e-14);
    }
    SUBCASE("two equal sensors average")
    {
        const Mat2<double> R = random_spd(rng, 2);
        const std::vector<MeasurementWithNoise<double>> m{{Vec2<double>(1, 2), R}, {Vec2<double>(3, -2), R}};
        const auto c = combine_sensors<double>(m, Ri).first;
        CHECK(rel_err(c.z_comb, Vec2<double>(2, 0)) < 1e-14);
        CHECK(rel_err(c.R_comb, Mat2<double>(0.5 * R)) < 1e-13);
    }
    SUBCASE("generalized least squares of a common mean")
    {
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<MeasurementWithNoise<double>> m;
            MatX<double> A(8, 2), W = MatX<double>::Zero(8, 8);
            VecX<double> y(8);
            for (int j = 0; j < 4; ++j) {
                m.push_back({random_matrix(rng, 2, 1), random_spd(rng, 2, 100.0)});
                A.block(2 * j, 0, 2, 2) = Mat2<double>::Identity();
                W.block(2 * j, 2 * j, 2, 2) = m.back().R.inverse();
                y.segment(2 * j, 2) = m.back().z;
            }
            const MatX<double> cov = (A.transpose() * W * A).inverse();
            const VecX<double> est = cov * A.transpose() * W * y;
            const auto c = combine_sensors<double>(m, Ri).first;
            CHECK(rel_err(c.z_comb, est) < 1e-10);
            CHECK(rel_err(c.R_comb, cov) < 1e-10);
        }
    }
    CHECK_THROWS_AS(combine_sensors<double>(std::span<const MeasurementWithNoise<double>>(), Ri), InvalidInput);
}
