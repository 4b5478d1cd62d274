#include "regbias/harness/local_tracker.hpp"

namespace regbias::harness {

namespace {

template <int N>
ImmState<double, N> start_imm(const std::vector<MotionModel<double, N>>& models, const Gaussian<double, N>& start,
                              const LocalFilterSpec& spec)
{
    ImmState<double, N> s;
    s.models = models;
    s.modes.assign(models.size(), start);
    s.mode_probs = spec.initial_mode_probs;
    s.transition = spec.transition;
    return s;
}

} // namespace

LocalTracker::LocalTracker(const LocalFilterSpec& spec, double T, const Eigen::Vector2d& sensor_position)
    : spec_(spec), sensor_position_(sensor_position), primary_(ncv_model(T, spec.q.front(), spec.q.front()))
{
    if (spec.kind == LocalFilterKind::ImmNcvNcv || spec.kind == LocalFilterKind::ImmNcaNcv) {
        if (spec.q.size() != 2) throw InvalidInput("IMM local filter needs two q values");
    }
}

CartesianMeasurement<double> LocalTracker::convert(const PolarMeasurement<double>& m) const
{
    CartesianMeasurement<double> c = polar_to_cart(m);
    c.z += sensor_position_;
    return c;
}

const GaussianEstimate<double>& LocalTracker::initialize(const PolarMeasurement<double>& m, int frame)
{
    const auto c = convert(m);
    GaussianEstimate<double> g;
    g.mean << c.z(0), 0.0, c.z(1), 0.0;
    g.cov = spec_.initial_cov_diag.asDiagonal();
    g.frame = frame;
    est_ = g;

    const double T = primary_.T;
    switch (spec_.kind) {
    case LocalFilterKind::KfNcv:
        state_ = g;
        break;
    case LocalFilterKind::ImmNcvNcv: {
        std::vector<MotionModel<double, 4>> models{ncv_model(T, spec_.q[0], spec_.q[0]),
                                                   ncv_model(T, spec_.q[1], spec_.q[1])};
        state_ = start_imm<4>(models, g, spec_);
        break;
    }
    case LocalFilterKind::ImmNcaNcv: {
        std::vector<MotionModel<double, 6>> models{nca_model(T, spec_.q[0], spec_.q[0]),
                                                   with_zero_acceleration(ncv_model(T, spec_.q[1], spec_.q[1]))};
        Gaussian<double, 6> g6;
        g6.mean.setZero();
        g6.mean.head<4>() = g.mean;
        g6.cov.setZero();
        g6.cov.topLeftCorner<4, 4>() = g.cov;
        const double va = spec_.initial_accel_std * spec_.initial_accel_std;
        g6.cov(4, 4) = g6.cov(5, 5) = va;
        g6.frame = frame;
        state_ = start_imm<6>(models, g6, spec_);
        break;
    }
    }
    return est_;
}

LocalStep LocalTracker::step(const PolarMeasurement<double>& m)
{
    const auto z = convert(m);
    LocalStep out;
    if (auto* kf = std::get_if<GaussianEstimate<double>>(&state_)) {
        auto [upd, rec] = kf_update(kf_predict(*kf, primary_), z);
        *kf = upd;
        out.est = upd;
        out.record = rec;
    } else if (auto* imm4 = std::get_if<ImmState<double, 4>>(&state_)) {
        auto [next, combined] = imm_step(*imm4, z);
        *imm4 = std::move(next);
        out.est = combined;
    } else {
        auto& imm6 = std::get<ImmState<double, 6>>(state_);
        auto [next, combined] = imm_step(imm6, z);
        imm6 = std::move(next);
        out.est = combined;
    }
    est_ = out.est;
    return out;
}

} // namespace regbias::harness
