#pragma once

#include "regbias/harness/scenario.hpp"
#include "regbias/trackers.hpp"

#include <optional>
#include <variant>

namespace regbias::harness {

/// Output of one local filter cycle. The gain is only available from the single-model Kalman filter.
struct LocalStep {
    GaussianEstimate<double> est;
    std::optional<KfStepRecord<double, 4>> record;
};

/// One sensor's tracker on one target: a Kalman filter or an IMM, fed with converted position measurements.
class LocalTracker {
public:
    LocalTracker(const LocalFilterSpec& spec, double T, const Eigen::Vector2d& sensor_position);

    /// Starts the track at the converted measurement with zero velocity.
    const GaussianEstimate<double>& initialize(const PolarMeasurement<double>& m, int frame);
    LocalStep step(const PolarMeasurement<double>& m);

    const GaussianEstimate<double>& estimate() const { return est_; }
    /// The motion model of the single-model filter (the first mode of an IMM).
    const MotionModel<double, 4>& primary_model() const { return primary_; }

    CartesianMeasurement<double> convert(const PolarMeasurement<double>& m) const;

private:
    LocalFilterSpec spec_;
    Eigen::Vector2d sensor_position_;
    MotionModel<double, 4> primary_;
    std::variant<GaussianEstimate<double>, ImmState<double, 4>, ImmState<double, 6>> state_;
    GaussianEstimate<double> est_;
};

} // namespace regbias::harness
