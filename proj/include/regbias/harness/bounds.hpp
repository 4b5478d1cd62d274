#pragma once

#include "regbias/harness/monte_carlo.hpp"

namespace regbias::harness {

struct CrlbOptions {
    /// Accumulate one information block per frame instead of one per report of the sensor.
    bool every_frame = false;
};

struct CrlbSeries {
    std::vector<int> frames;
    /// [epoch][sensor] square roots of the CRLB diagonal; empty where the information is still singular.
    std::vector<std::vector<Eigen::VectorXd>> sqrt_crlb;
};

/// Bias CRLB of every sensor along the noise-free trajectories: each sensor is paired with the
/// combination of all other sensors reporting at the same frame.
CrlbSeries compute_crlb(const Scenario& s, const CrlbOptions& opt = {});

/// Metric rows named after the bias components; the interval is the 95% region of an RMSE over `runs` runs.
std::vector<MetricRow> crlb_rows(const CrlbSeries& c, int runs);

} // namespace regbias::harness
