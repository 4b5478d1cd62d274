#include "regbias/harness/bounds.hpp"

#include "regbias/crlb.hpp"
#include "regbias/harness/metrics.hpp"
#include "regbias/harness/simulate.hpp"

namespace regbias::harness {

CrlbSeries compute_crlb(const Scenario& s, const CrlbOptions& opt)
{
    validate(s);
    const auto traj = nominal_trajectories(s);
    const int ns = int(s.sensors.size());
    const int nt = int(s.targets.size());
    const int d = s.bias_dim;

    auto polar_of = [&](int i, int t, int k) {
        const auto& x = traj[t][k];
        const auto& sn = s.sensors[i];
        const Eigen::Vector2d p = cart_to_polar(Eigen::Vector2d(x(0) - sn.position(0), x(2) - sn.position(1)));
        return PolarMeasurement<double>{p(0), p(1), sn.sigma_r, sn.sigma_theta};
    };

    std::vector<FimProblem<double>> fim(ns, FimProblem<double>(d));
    CrlbSeries out;
    for (int k = 1; k <= s.frames; ++k) {
        std::vector<int> reporting;
        for (int i = 0; i < ns; ++i)
            if (opt.every_frame || k % s.sensors[i].report_lag == 0) reporting.push_back(i);

        for (int i : reporting) {
            for (int t = 0; t < nt; ++t) {
                std::vector<MeasurementWithNoise<double>> others;
                for (int j : reporting)
                    if (j != i) others.push_back({Eigen::Vector2d::Zero(), converted_covariance(polar_of(j, t, k))});
                if (others.empty()) continue;
                const auto mi = polar_of(i, t, k);
                const auto [comb, total] = combine_sensors<double>(others, converted_covariance(mi));
                fim[i].add_block(bias_jacobians(mi).observation(d), total, t, k);
            }
        }

        bool epoch = false;
        for (int i = 0; i < ns; ++i) epoch = epoch || k % s.sensors[i].report_lag == 0;
        if (!epoch) continue;
        out.frames.push_back(k);
        std::vector<Eigen::VectorXd> row;
        for (int i = 0; i < ns; ++i) {
            try {
                row.push_back(crlb_diag(fim[i]).cwiseSqrt());
            } catch (const NumericalError&) {
                row.emplace_back();
            }
        }
        out.sqrt_crlb.push_back(std::move(row));
    }
    return out;
}

std::vector<MetricRow> crlb_rows(const CrlbSeries& c, int runs)
{
    std::vector<MetricRow> rows;
    for (std::size_t e = 0; e < c.frames.size(); ++e)
        for (std::size_t i = 0; i < c.sqrt_crlb[e].size(); ++i) {
            const Eigen::VectorXd& v = c.sqrt_crlb[e][i];
            for (Eigen::Index j = 0; j < v.size(); ++j) {
                const Interval region = rmse_region(v(j), runs);
                rows.push_back({c.frames[e], int(i) + 1, bias_component_names[j], v(j), region.low, region.high});
            }
        }
    return rows;
}

} // namespace regbias::harness
