#pragma once

#include "regbias/bias.hpp"
#include "regbias/tracklets.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace regbias {

/// Position-level equivalent measurement and the Kalman gain it implies.
template <typename Scalar>
struct ReconstructedGain {
    Mat42<Scalar> W;
    Mat2<Scalar> R_meas;
    Vec2<Scalar> y;
};

template <typename Scalar>
struct CorrectedMeasurement {
    Vec2<Scalar> y_bc;
    Mat2<Scalar> R_bc;
    Scalar lambda_theta{};
};

template <typename Scalar>
struct FusedTrack {
    GaussianEstimate<Scalar> est;
    std::vector<int> sensors;
};

/// One position measurement offered to the sequential fusion.
template <typename Scalar>
struct FusionInput {
    Vec2<Scalar> y;
    Mat2<Scalar> R;
    int sensor = -1;
};

/// Geometry and noise of a sensor as known to the fusion center.
template <typename Scalar>
struct SensorInfo {
    Vec2<Scalar> position = Vec2<Scalar>::Zero();
    Scalar sigma_r{};
    Scalar sigma_theta{};
};

namespace detail {
template <typename Scalar>
Mat42<Scalar> gain_from(const Mat4<Scalar>& pred_cov, const Mat2<Scalar>& R)
{
    const Mat24<Scalar> H = position_selector<Scalar>();
    const Mat2<Scalar> S = symmetrized(H * pred_cov * H.transpose() + R);
    Eigen::LLT<Mat2<Scalar>> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalError("reconstructed innovation covariance is not positive definite");
    return llt.solve(H * pred_cov).transpose();
}
} // namespace detail

/// R = H U H^T, W = P(k|k') H^T (H P(k|k') H^T + R)^-1, y = H u.
template <typename Scalar>
ReconstructedGain<Scalar> reconstruct_local_gain(const Tracklet<Scalar>& t, const Mat4<Scalar>& pred_cov)
{
    const Mat24<Scalar> H = position_selector<Scalar>();
    ReconstructedGain<Scalar> g;
    g.R_meas = symmetrized(H * t.U * H.transpose());
    if (!is_positive_definite(g.R_meas)) throw NumericalError("tracklet position covariance is not positive definite");
    g.W = detail::gain_from(pred_cov, g.R_meas);
    g.y = H * t.u;
    return g;
}

/// Gain of a fused update from several tracklets: R_f = H (sum U_i^-1)^-1 H^T.
template <typename Scalar>
ReconstructedGain<Scalar> reconstruct_fused_gain(std::span<const Tracklet<Scalar>> tracklets,
                                                 const Mat4<Scalar>& fused_pred_cov)
{
    if (tracklets.empty()) throw InvalidInput("fused gain needs at least one tracklet");
    Mat4<Scalar> info = Mat4<Scalar>::Zero();
    Vec4<Scalar> info_vec = Vec4<Scalar>::Zero();
    for (const auto& t : tracklets) {
        info += t.info;
        info_vec += t.info * t.u;
    }
    Mat4<Scalar> cov;
    Eigen::LLT<Mat4<Scalar>> llt(symmetrized(info));
    if (llt.info() == Eigen::Success)
        cov = llt.solve(Mat4<Scalar>::Identity());
    else
        cov = detail::psd_pseudo_inverse(info, Scalar(1e-8));

    const Mat24<Scalar> H = position_selector<Scalar>();
    ReconstructedGain<Scalar> g;
    g.R_meas = symmetrized(H * cov * H.transpose());
    if (!is_positive_definite(g.R_meas)) throw NumericalError("fused information is singular on the position subspace");
    g.W = detail::gain_from(fused_pred_cov, g.R_meas);
    g.y = H * (cov * info_vec);
    return g;
}

/// Same gain from position-level measurements: R_f = (sum R_i^-1)^-1, y_f = R_f sum R_i^-1 y_i.
template <typename Scalar>
ReconstructedGain<Scalar> reconstruct_fused_gain(std::span<const FusionInput<Scalar>> inputs,
                                                 const Mat4<Scalar>& fused_pred_cov)
{
    if (inputs.empty()) throw InvalidInput("fused gain needs at least one measurement");
    Mat2<Scalar> info = Mat2<Scalar>::Zero();
    Vec2<Scalar> info_vec = Vec2<Scalar>::Zero();
    for (const auto& in : inputs) {
        Eigen::LLT<Mat2<Scalar>> llt(in.R);
        if (llt.info() != Eigen::Success) throw NumericalError("fusion input covariance is not positive definite");
        const Mat2<Scalar> Ri = llt.solve(Mat2<Scalar>::Identity());
        info += Ri;
        info_vec += Ri * in.y;
    }
    ReconstructedGain<Scalar> g;
    g.R_meas = symmetrized(info.inverse());
    g.W = detail::gain_from(fused_pred_cov, g.R_meas);
    g.y = g.R_meas * info_vec;
    return g;
}

/// Removes estimated biases from the position of an equivalent measurement in the sensor's polar frame
/// and inflates its covariance by the radar noise and the bias-estimate uncertainty.
template <typename Scalar>
CorrectedMeasurement<Scalar> bias_correct(const Tracklet<Scalar>& t, const BiasEstimate<Scalar>& bias,
                                          const SensorInfo<Scalar>& sensor)
{
    const Mat24<Scalar> H = position_selector<Scalar>();
    const int d = static_cast<int>(bias.dim());
    const BiasVector<Scalar> b = BiasVector<Scalar>::from_vector(bias.b_hat);
    if (!b.valid()) throw InvalidInput("estimated scale bias makes a scale factor non-positive");

    const Vec2<Scalar> rel = H * t.u - sensor.position;
    if (!(rel.norm() > Scalar(0))) throw InvalidInput("equivalent measurement coincides with the sensor position");
    const Vec2<Scalar> polar = cart_to_polar(rel);
    const Scalar theta = (polar(1) - b.b_theta) / (Scalar(1) + b.eps_theta);
    const Scalar range = (polar(0) - b.b_r) / (Scalar(1) + b.eps_r);
    if (!(range > Scalar(0))) throw InvalidInput("bias-corrected range is not positive");

    CorrectedMeasurement<Scalar> out;
    out.lambda_theta = azimuth_compensation(sensor.sigma_theta);
    out.y_bc = sensor.position + out.lambda_theta * range * Vec2<Scalar>(std::cos(theta), std::sin(theta));

    const auto jac = bias_jacobians(PolarMeasurement<Scalar>{range, theta, sensor.sigma_r, sensor.sigma_theta});
    const Vec2<Scalar> noise(sensor.sigma_r * sensor.sigma_r, sensor.sigma_theta * sensor.sigma_theta);
    const MatX<Scalar> K = jac.observation(d);
    out.R_bc = symmetrized(H * t.U * H.transpose() + jac.B * noise.asDiagonal() * jac.B.transpose() +
                           K * bias.Sigma * K.transpose());
    return out;
}

struct SfaDiagnostics {
    std::vector<int> skipped_sensors;
};

/// Sequential fusion: predict the fused track over `model`, then Kalman-update with each measurement in turn.
/// A measurement whose innovation covariance is singular is skipped and reported.
template <typename Scalar>
FusedTrack<Scalar> sfa(const FusedTrack<Scalar>& fused_prev, const MultiStepModel<Scalar, 4>& model,
                       std::span<const FusionInput<Scalar>> measurements, SfaDiagnostics* diag = nullptr)
{
    FusedTrack<Scalar> out;
    out.est = kf_predict(fused_prev.est, model);
    for (const auto& m : measurements) {
        try {
            out.est = kf_update(out.est, CartesianMeasurement<Scalar>{m.y, m.R}).first;
            out.sensors.push_back(m.sensor);
        } catch (const NumericalError&) {
            if (diag) diag->skipped_sensors.push_back(m.sensor);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fused bias estimation for one target at one reporting frame.

/// Local track snapshots a sensor sent at its previous and current report.
template <typename Scalar>
struct SensorReport {
    int sensor = -1;
    GaussianEstimate<Scalar> prev;
    GaussianEstimate<Scalar> curr;
};

/// Fusion-center tracks for one target: one per leave-one-out sensor set, plus the all-sensor track.
template <typename Scalar>
struct TargetFusionState {
    std::map<int, FusedTrack<Scalar>> leave_one_out;
    std::optional<FusedTrack<Scalar>> global;
};

template <typename Scalar>
struct FbeConfig {
    MotionModel<Scalar, 4> fusion_model;
};

enum class FbeSkip { None, TrackletFailed, TooFewSensors, NoLeaveOneOutPrior, NumericalFailure };

template <typename Scalar>
struct FbeSensorOutcome {
    int sensor = -1;
    bool bias_updated = false;
    FbeSkip skip = FbeSkip::None;
    std::optional<TrackletKind> tracklet_kind;
    std::optional<PseudoMeasurement<Scalar>> pseudo;
};

template <typename Scalar>
struct FbeOutcome {
    std::vector<FbeSensorOutcome<Scalar>> sensors;
    SfaDiagnostics sfa;
};

namespace detail {
template <typename Scalar>
class StepCache {
public:
    explicit StepCache(const MotionModel<Scalar, 4>& m) : model_(m) {}
    const MultiStepModel<Scalar, 4>& get(int L)
    {
        auto it = cache_.find(L);
        if (it == cache_.end()) it = cache_.emplace(L, compose_steps(model_, L)).first;
        return it->second;
    }

private:
    MotionModel<Scalar, 4> model_;
    std::map<int, MultiStepModel<Scalar, 4>> cache_;
};

/// Fused track started from the first member's current local estimate with its position bias-corrected.
template <typename Scalar>
FusedTrack<Scalar> start_fused(const GaussianEstimate<Scalar>& local, const Vec2<Scalar>& corrected_position,
                               int sensor)
{
    FusedTrack<Scalar> f;
    f.est = local;
    f.est.mean(0) = corrected_position(0);
    f.est.mean(2) = corrected_position(1);
    f.sensors = {sensor};
    return f;
}

template <typename Scalar>
Vec2<Scalar> corrected_position(const GaussianEstimate<Scalar>& est, const BiasEstimate<Scalar>& bias,
                                const SensorInfo<Scalar>& sensor)
{
    Tracklet<Scalar> t;
    t.u = est.mean;
    t.U = est.cov;
    return bias_correct(t, bias, sensor).y_bc;
}
} // namespace detail

/// Starts the fused tracks of a target from the first reports of its sensors.
template <typename Scalar>
void fbe_initialize(std::span<const SensorReport<Scalar>> reports, std::span<const SensorInfo<Scalar>> sensors,
                    std::span<const BiasEstimate<Scalar>> biases, TargetFusionState<Scalar>& state)
{
    if (reports.empty()) return;
    std::vector<Vec2<Scalar>> pos;
    for (const auto& r : reports) pos.push_back(detail::corrected_position(r.curr, biases[r.sensor], sensors[r.sensor]));
    for (std::size_t i = 0; i < reports.size(); ++i) {
        // first member of the set excluding reports[i]
        const std::size_t first = i == 0 ? 1 : 0;
        if (first < reports.size())
            state.leave_one_out[reports[i].sensor] = detail::start_fused(reports[first].curr, pos[first], reports[first].sensor);
    }
    state.global = detail::start_fused(reports[0].curr, pos[0], reports[0].sensor);
}

/// One frame of fused bias estimation for one target.
///
/// For every reporting sensor s (ascending): the sensor's tracklet gives a reconstructed gain and a
/// gain-deconvolved pseudo-observation; the other sensors' tracklets are bias-corrected with
/// `correction_biases`, fused sequentially into the leave-one-out track for s, and deconvolved with the
/// fused gain; the difference drives a recursive least-squares update of `bias_states[s]`.
/// The all-sensor fused track is updated with every corrected tracklet.
template <typename Scalar>
FbeOutcome<Scalar> fbe_step(std::span<const SensorReport<Scalar>> reports, std::span<const SensorInfo<Scalar>> sensors,
                            std::span<const BiasEstimate<Scalar>> correction_biases,
                            std::vector<BiasEstimate<Scalar>>& bias_states, TargetFusionState<Scalar>& state,
                            const FbeConfig<Scalar>& cfg)
{
    FbeOutcome<Scalar> outcome;
    detail::StepCache<Scalar> steps(cfg.fusion_model);
    const int frame = reports.empty() ? 0 : reports.front().curr.frame;

    struct Usable {
        const SensorReport<Scalar>* report;
        Tracklet<Scalar> tracklet;
        CorrectedMeasurement<Scalar> corrected;
    };
    std::vector<Usable> usable;
    for (const auto& r : reports) {
        if (r.curr.frame != frame) throw InvalidInput("all reports in a fusion step must share the current frame");
        FbeSensorOutcome<Scalar> so;
        so.sensor = r.sensor;
        try {
            const auto& model = steps.get(r.curr.frame - r.prev.frame);
            Tracklet<Scalar> t = make_tracklet(r.prev, r.curr, model);
            so.tracklet_kind = t.kind;
            auto c = bias_correct(t, correction_biases[r.sensor], sensors[r.sensor]);
            usable.push_back({&r, std::move(t), c});
        } catch (const std::exception&) {
            so.skip = FbeSkip::TrackletFailed;
        }
        outcome.sensors.push_back(so);
    }
    auto outcome_for = [&](int sensor) -> FbeSensorOutcome<Scalar>& {
        for (auto& so : outcome.sensors)
            if (so.sensor == sensor) return so;
        throw InvalidInput("unknown sensor");
    };

    const bool enough = usable.size() >= 2;
    for (const auto& us : usable) {
        const int s = us.report->sensor;
        auto& so = outcome_for(s);
        if (!enough) {
            so.skip = FbeSkip::TooFewSensors;
            continue;
        }
        std::vector<FusionInput<Scalar>> others;
        for (const auto& o : usable)
            if (o.report->sensor != s) others.push_back({o.corrected.y_bc, o.corrected.R_bc, o.report->sensor});

        auto loo = state.leave_one_out.find(s);
        if (loo == state.leave_one_out.end()) {
            const auto& first = usable.front().report->sensor == s ? usable[1] : usable.front();
            state.leave_one_out[s] = detail::start_fused(first.report->curr, first.corrected.y_bc, first.report->sensor);
            so.skip = FbeSkip::NoLeaveOneOutPrior;
            continue;
        }
        try {
            const auto& own_model = steps.get(us.report->curr.frame - us.report->prev.frame);
            const auto own = reconstruct_local_gain(us.tracklet, us.tracklet.predicted.cov);
            const Vec2<Scalar> z_own = sensor_pseudo_obs(us.report->curr, us.report->prev, own.W, own_model);

            const FusedTrack<Scalar> prior = loo->second;
            const auto& fused_model = steps.get(frame - prior.est.frame);
            FusedTrack<Scalar> fused = sfa(prior, fused_model, std::span<const FusionInput<Scalar>>(others), &outcome.sfa);
            const GaussianEstimate<Scalar> fused_pred = kf_predict(prior.est, fused_model);
            const auto fused_gain = reconstruct_fused_gain(std::span<const FusionInput<Scalar>>(others), fused_pred.cov);
            const Vec2<Scalar> z_ref = sensor_pseudo_obs(fused.est, prior.est, fused_gain.W, fused_model);
            loo->second = fused;

            const Vec2<Scalar> rel = own.y - sensors[s].position;
            const Vec2<Scalar> polar = cart_to_polar(rel);
            const auto jac = bias_jacobians(
                PolarMeasurement<Scalar>{polar(0), polar(1), sensors[s].sigma_r, sensors[s].sigma_theta});
            auto pm = difference_pseudo_measurement(z_ref, z_own, jac, fused_gain.R_meas, own.R_meas,
                                                    static_cast<int>(bias_states[s].dim()));
            bias_states[s] = rlsb_update(bias_states[s], pm);
            so.bias_updated = true;
            so.pseudo = std::move(pm);
        } catch (const NumericalError&) {
            so.skip = FbeSkip::NumericalFailure;
        }
    }

    std::vector<FusionInput<Scalar>> all;
    for (const auto& u : usable) all.push_back({u.corrected.y_bc, u.corrected.R_bc, u.report->sensor});
    if (!state.global && !usable.empty())
        state.global = detail::start_fused(usable.front().report->curr, usable.front().corrected.y_bc,
                                           usable.front().report->sensor);
    else if (state.global && !all.empty())
        state.global = sfa(*state.global, steps.get(frame - state.global->est.frame),
                           std::span<const FusionInput<Scalar>>(all), &outcome.sfa);
    return outcome;
}

} // namespace regbias
