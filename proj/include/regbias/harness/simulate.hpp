#pragma once

#include "regbias/harness/scenario.hpp"

#include <cstdint>
#include <random>

namespace regbias::harness {

/// SplitMix64 finalizer; used to derive independent stream seeds from a root seed.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Truth = 1, Measurement = 2 };

/// Seed of the stream for (run, kind, sensor, target). Streams do not depend on evaluation order.
constexpr std::uint64_t stream_seed(std::uint64_t root, int run, Stream kind, int sensor, int target)
{
    std::uint64_t h = splitmix64(root);
    h = splitmix64(h ^ static_cast<std::uint64_t>(run));
    h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
    h = splitmix64(h ^ static_cast<std::uint64_t>(sensor + 1));
    return splitmix64(h ^ static_cast<std::uint64_t>(target + 1));
}

/// Ground truth and measurements of one Monte Carlo run.
struct TruthRun {
    /// states[target][frame]
    std::vector<std::vector<Eigen::Vector4d>> states;
    /// Sensor-relative true polar coordinates: truth_polar[sensor][target][frame] = (r, theta).
    std::vector<std::vector<std::vector<Eigen::Vector2d>>> truth_polar;
    /// Noise draws (w_r, w_theta) shared by the biased and bias-free measurement sets.
    std::vector<std::vector<std::vector<Eigen::Vector2d>>> noise;

    int frames() const { return states.empty() ? 0 : static_cast<int>(states.front().size()) - 1; }

    /// Measurement of sensor s on target t at frame k, with the sensor's true bias or without any.
    PolarMeasurement<double> measurement(const Scenario& sc, int s, int t, int k, bool biased) const;
};

/// Target state sequence over frames 0..frames following the segment schedule. The last segment
/// continues if the schedule is shorter than the run.
std::vector<Eigen::Vector4d> propagate_target(const TargetSpec& target, double T, double q, int frames,
                                              std::mt19937_64& rng);

TruthRun simulate_truth(const Scenario& s, int run_index);

/// Noise-free trajectories, used for bounds evaluated along the nominal geometry.
std::vector<std::vector<Eigen::Vector4d>> nominal_trajectories(const Scenario& s);

} // namespace regbias::harness
