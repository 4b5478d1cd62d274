#pragma once

#include "regbias/harness/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace regbias::harness {

/// fbe: fused bias estimation from track snapshots. ex: stacked estimator fed the true local gains.
/// exl: the same stacked estimator with gains reconstructed from tracklets. baseline: fusion of
/// bias-free local tracks, no bias estimation.
enum class Method { Fbe, Ex, Exl, Baseline };

Method parse_method(const std::string& s);
const char* to_string(Method m);

/// Everything recorded from one Monte Carlo run, indexed by metric epoch.
struct RunRecord {
    std::vector<int> frames;
    /// [epoch][sensor] estimate minus truth, and the estimator's covariance.
    std::vector<std::vector<Eigen::VectorXd>> bias_error;
    std::vector<std::vector<Eigen::MatrixXd>> bias_cov;
    /// [epoch] stacked over all sensors (ex and exl only).
    std::vector<Eigen::VectorXd> stacked_error;
    std::vector<Eigen::MatrixXd> stacked_cov;
    /// [epoch] squared position error averaged over targets; NaN where the track does not exist.
    std::vector<double> local_sq;
    std::vector<double> fused_sq;
    std::vector<double> fused_nobias_sq;
    /// Wall time spent forming pseudo-measurements and updating the bias estimate.
    double bias_seconds = 0.0;
    long bias_iterations = 0;
    long skipped_updates = 0;
};

struct MetricRow {
    int frame = 0;
    /// 1-based sensor index; 0 for quantities not tied to one sensor.
    int sensor = 0;
    std::string metric;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct RunMetrics {
    std::string scenario;
    Method method = Method::Fbe;
    LocalFilterKind local_filter = LocalFilterKind::KfNcv;
    int runs = 0;
    int bias_dim = 2;
    int sensors = 0;
    std::vector<int> frames;
    std::vector<RunRecord> records;

    std::vector<MetricRow> bias_rmse;
    std::vector<MetricRow> bias_sigma;
    std::vector<MetricRow> nees;
    std::vector<MetricRow> track_rmse;

    /// Looks up a row; throws std::out_of_range if absent.
    const MetricRow& row(const std::vector<MetricRow>& family, const std::string& metric, int sensor, int frame) const;
    int final_frame() const { return frames.empty() ? 0 : frames.back(); }
    double mean_bias_iteration_seconds() const;
};

struct McOptions {
    /// Overrides the scenario's run count when positive.
    int runs = 0;
    std::optional<std::uint64_t> seed;
    /// Worker threads; 0 uses the hardware concurrency.
    int threads = 0;
};

RunRecord run_single(const Scenario& s, Method method, int run_index);

/// Runs are distributed over worker threads; the reduction is in run order, so results do not
/// depend on scheduling.
RunMetrics run_monte_carlo(const Scenario& s, Method method, const McOptions& opt = {});

/// Builds the metric rows of `m` from its run records.
void aggregate(RunMetrics& m);

extern const char* const bias_component_names[4];

} // namespace regbias::harness
