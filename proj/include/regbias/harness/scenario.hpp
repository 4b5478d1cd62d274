#pragma once

#include "regbias/coords.hpp"
#include "regbias/dynamics.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace regbias::harness {

/// Raised for scenario files that fail validation; the CLI maps it to exit code 1.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SensorSpec {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double sigma_r = 10.0;
    double sigma_theta = 1e-3;
    BiasVector<double> bias;
    int report_lag = 1;
};

enum class SegmentKind { NCV, Turn };

struct MotionSegment {
    SegmentKind kind = SegmentKind::NCV;
    int frames = 0;
    double omega = 0.0;
};

struct TargetSpec {
    Eigen::Vector4d initial_state = Eigen::Vector4d::Zero();
    std::vector<MotionSegment> segments;
};

enum class LocalFilterKind { KfNcv, ImmNcvNcv, ImmNcaNcv };

struct LocalFilterSpec {
    LocalFilterKind kind = LocalFilterKind::KfNcv;
    /// Process noise intensity per mode (one entry for the Kalman filter), m^2/s^3.
    std::vector<double> q{0.1};
    Eigen::Matrix2d transition = (Eigen::Matrix2d() << 0.95, 0.05, 0.05, 0.95).finished();
    Eigen::Vector2d initial_mode_probs{0.5, 0.5};
    /// Diagonal of the initial covariance of [x, vx, y, vy].
    Eigen::Vector4d initial_cov_diag{200.0 * 200.0, 20.0 * 20.0, 200.0 * 200.0, 20.0 * 20.0};
    double initial_accel_std = 5.0;
};

struct Scenario {
    std::string name = "scenario";
    double T = 1.0;
    /// Frames 0..frames are simulated; local tracks start at frame 0.
    int frames = 100;
    int mc_runs = 100;
    std::uint64_t rng_seed = 1;
    double truth_q = 0.1;
    std::vector<SensorSpec> sensors;
    std::vector<TargetSpec> targets;
    LocalFilterSpec local_filter;
    double fusion_q = 0.1;
    /// 2 for offsets only, 4 for offsets and scales.
    int bias_dim = 2;
    std::vector<double> bias_prior_std{20.0, 1e-3};
};

/// Throws ScenarioError naming the first violated invariant.
void validate(const Scenario& s);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

const char* to_string(LocalFilterKind k);

} // namespace regbias::harness
