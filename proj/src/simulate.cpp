#include "regbias/harness/simulate.hpp"

namespace regbias::harness {

namespace {

const MotionSegment& segment_at(const TargetSpec& target, int step)
{
    int end = 0;
    for (const auto& seg : target.segments) {
        end += seg.frames;
        if (step < end) return seg;
    }
    return target.segments.back();
}

} // namespace

std::vector<Eigen::Vector4d> propagate_target(const TargetSpec& target, double T, double q, int frames,
                                              std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto ncv = ncv_model(T, q, q);
    // process noise is the same white-acceleration block for every segment kind
    const Eigen::Matrix4d Lq = ncv.Q.llt().matrixL();

    std::vector<Eigen::Vector4d> xs;
    xs.reserve(frames + 1);
    xs.push_back(target.initial_state);
    for (int k = 1; k <= frames; ++k) {
        const auto& seg = segment_at(target, k - 1);
        const Eigen::Matrix4d F = seg.kind == SegmentKind::Turn ? turn_model(T, seg.omega).F : ncv.F;
        Eigen::Vector4d w = Eigen::Vector4d::Zero();
        if (q > 0.0) {
            Eigen::Vector4d n;
            for (int i = 0; i < 4; ++i) n(i) = gauss(rng);
            w = Lq * n;
        }
        xs.push_back(F * xs.back() + w);
    }
    return xs;
}

TruthRun simulate_truth(const Scenario& s, int run_index)
{
    TruthRun out;
    const int nt = static_cast<int>(s.targets.size());
    const int ns = static_cast<int>(s.sensors.size());
    for (int t = 0; t < nt; ++t) {
        std::mt19937_64 rng(stream_seed(s.rng_seed, run_index, Stream::Truth, -1, t));
        out.states.push_back(propagate_target(s.targets[t], s.T, s.truth_q, s.frames, rng));
    }
    out.truth_polar.assign(ns, {});
    out.noise.assign(ns, {});
    for (int i = 0; i < ns; ++i) {
        const auto& sn = s.sensors[i];
        for (int t = 0; t < nt; ++t) {
            std::mt19937_64 rng(stream_seed(s.rng_seed, run_index, Stream::Measurement, i, t));
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<Eigen::Vector2d> polar, noise;
            polar.reserve(s.frames + 1);
            noise.reserve(s.frames + 1);
            for (int k = 0; k <= s.frames; ++k) {
                const Eigen::Vector4d& x = out.states[t][k];
                polar.push_back(cart_to_polar(Eigen::Vector2d(x(0) - sn.position(0), x(2) - sn.position(1))));
                const double wr = sn.sigma_r * gauss(rng);
                const double wt = sn.sigma_theta * gauss(rng);
                noise.emplace_back(wr, wt);
            }
            out.truth_polar[i].push_back(std::move(polar));
            out.noise[i].push_back(std::move(noise));
        }
    }
    return out;
}

PolarMeasurement<double> TruthRun::measurement(const Scenario& sc, int s, int t, int k, bool biased) const
{
    const auto& sn = sc.sensors[s];
    const Eigen::Vector2d& p = truth_polar[s][t][k];
    const PolarMeasurement<double> truth{p(0), p(1), sn.sigma_r, sn.sigma_theta};
    return apply_bias(truth, biased ? sn.bias : BiasVector<double>{}, noise[s][t][k]);
}

std::vector<std::vector<Eigen::Vector4d>> nominal_trajectories(const Scenario& s)
{
    std::vector<std::vector<Eigen::Vector4d>> out;
    std::mt19937_64 unused(0);
    for (const auto& tg : s.targets) out.push_back(propagate_target(tg, s.T, 0.0, s.frames, unused));
    return out;
}

} // namespace regbias::harness
