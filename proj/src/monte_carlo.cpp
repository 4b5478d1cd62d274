#include "regbias/harness/monte_carlo.hpp"

#include "regbias/fusion.hpp"
#include "regbias/harness/local_tracker.hpp"
#include "regbias/harness/metrics.hpp"
#include "regbias/harness/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace regbias::harness {

const char* const bias_component_names[4] = {"b_r", "b_theta", "eps_r", "eps_theta"};

Method parse_method(const std::string& s)
{
    if (s == "fbe") return Method::Fbe;
    if (s == "ex") return Method::Ex;
    if (s == "exl") return Method::Exl;
    if (s == "baseline") return Method::Baseline;
    throw InvalidInput("unknown method '" + s + "'");
}

const char* to_string(Method m)
{
    switch (m) {
    case Method::Fbe: return "fbe";
    case Method::Ex: return "ex";
    case Method::Exl: return "exl";
    case Method::Baseline: return "baseline";
    }
    return "?";
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct Context {
    int run = -1;
    int frame = -1;
    int sensor = -1;
    int target = -1;
};

[[noreturn]] void rethrow_with(const Context& c, const std::exception& e)
{
    std::ostringstream msg;
    msg << e.what() << " (run " << c.run << ", frame " << c.frame;
    if (c.sensor >= 0) msg << ", sensor " << c.sensor + 1;
    if (c.target >= 0) msg << ", target " << c.target + 1;
    msg << ")";
    throw NumericalError(msg.str());
}

double position_sq_error(const GaussianEstimate<double>& est, const Eigen::Vector4d& truth)
{
    const double dx = est.mean(0) - truth(0);
    const double dy = est.mean(2) - truth(2);
    return dx * dx + dy * dy;
}

std::vector<SensorInfo<double>> sensor_infos(const Scenario& s)
{
    std::vector<SensorInfo<double>> out;
    for (const auto& sn : s.sensors) out.push_back({sn.position, sn.sigma_r, sn.sigma_theta});
    return out;
}

Eigen::VectorXd true_bias(const SensorSpec& sn, int d) { return sn.bias.as_vector().head(d); }

BiasEstimate<double> prior_of(const Scenario& s)
{
    Eigen::VectorXd v(s.bias_dim);
    for (int i = 0; i < s.bias_dim; ++i) v(i) = s.bias_prior_std[i] * s.bias_prior_std[i];
    return bias_prior<double>(v);
}

/// Local trackers for every (sensor, target) pair on one measurement set.
class TrackerBank {
public:
    TrackerBank(const Scenario& s, const TruthRun& truth, bool biased) : s_(s), truth_(truth), biased_(biased)
    {
        for (std::size_t i = 0; i < s.sensors.size(); ++i) {
            trackers_.emplace_back();
            for (std::size_t t = 0; t < s.targets.size(); ++t)
                trackers_.back().emplace_back(s.local_filter, s.T, s.sensors[i].position);
        }
        steps_.assign(s.sensors.size(), std::vector<LocalStep>(s.targets.size()));
    }

    void initialize(Context& c)
    {
        c.frame = 0;
        for (std::size_t i = 0; i < trackers_.size(); ++i)
            for (std::size_t t = 0; t < trackers_[i].size(); ++t) {
                c.sensor = int(i);
                c.target = int(t);
                steps_[i][t].est = trackers_[i][t].initialize(truth_.measurement(s_, int(i), int(t), 0, biased_), 0);
            }
    }

    void step(int k, Context& c)
    {
        c.frame = k;
        for (std::size_t i = 0; i < trackers_.size(); ++i)
            for (std::size_t t = 0; t < trackers_[i].size(); ++t) {
                c.sensor = int(i);
                c.target = int(t);
                steps_[i][t] = trackers_[i][t].step(truth_.measurement(s_, int(i), int(t), k, biased_));
            }
    }

    const LocalStep& at(int sensor, int target) const { return steps_[sensor][target]; }
    const LocalTracker& tracker(int sensor, int target) const { return trackers_[sensor][target]; }

private:
    const Scenario& s_;
    const TruthRun& truth_;
    bool biased_;
    std::vector<std::vector<LocalTracker>> trackers_;
    std::vector<std::vector<LocalStep>> steps_;
};

bool reports_at(const SensorSpec& sn, int k) { return k % sn.report_lag == 0; }

/// Fusion of uncorrected local tracks over all reporting sensors, one fused track per target.
class PlainFusion {
public:
    PlainFusion(const Scenario& s) : model_(ncv_model(s.T, s.fusion_q, s.fusion_q)), fused_(s.targets.size()) {}

    void update(int t, std::span<const SensorReport<double>> reports)
    {
        if (reports.empty()) return;
        auto& f = fused_[t];
        if (!f) {
            f = FusedTrack<double>{reports.front().curr, {reports.front().sensor}};
            return;
        }
        const Mat24<double> H = position_selector<double>();
        std::vector<FusionInput<double>> inputs;
        for (const auto& r : reports) {
            try {
                const auto tr = make_tracklet(r.prev, r.curr, steps(r.curr.frame - r.prev.frame));
                inputs.push_back({H * tr.u, symmetrized(H * tr.U * H.transpose()), r.sensor});
            } catch (const NumericalError&) {
            }
        }
        const int frame = reports.front().curr.frame;
        f = sfa(*f, steps(frame - f->est.frame), std::span<const FusionInput<double>>(inputs));
    }

    const std::optional<FusedTrack<double>>& track(int t) const { return fused_[t]; }

private:
    const MultiStepModel<double, 4>& steps(int L)
    {
        auto it = cache_.find(L);
        if (it == cache_.end()) it = cache_.emplace(L, compose_steps(model_, L)).first;
        return it->second;
    }

    MotionModel<double, 4> model_;
    std::map<int, MultiStepModel<double, 4>> cache_;
    std::vector<std::optional<FusedTrack<double>>> fused_;
};

void record_biases(RunRecord& rec, const Scenario& s, std::span<const BiasEstimate<double>> est, const Context& c)
{
    std::vector<Eigen::VectorXd> errs;
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (!est[i].b_hat.allFinite() || !est[i].Sigma.allFinite()) {
            Context cc = c;
            cc.sensor = int(i);
            cc.target = -1;
            rethrow_with(cc, NumericalError("bias estimate is not finite"));
        }
        errs.push_back(est[i].b_hat - true_bias(s.sensors[i], s.bias_dim));
        covs.push_back(est[i].Sigma);
    }
    rec.bias_error.push_back(std::move(errs));
    rec.bias_cov.push_back(std::move(covs));
}

double mean_or_nan(double sum, int n) { return n > 0 ? sum / n : nan; }

RunRecord run_fbe(const Scenario& s, int run, bool estimate_biases)
{
    Context c{run};
    RunRecord rec;
    const TruthRun truth = simulate_truth(s, run);
    const int ns = int(s.sensors.size());
    const int nt = int(s.targets.size());
    const auto infos = sensor_infos(s);

    TrackerBank biased(s, truth, true);
    TrackerBank clean(s, truth, false);
    PlainFusion plain(s);
    std::vector<BiasEstimate<double>> bias(ns, prior_of(s));
    std::vector<TargetFusionState<double>> fstate(nt);
    const FbeConfig<double> cfg{ncv_model(s.T, s.fusion_q, s.fusion_q)};

    // last reported snapshot per [sensor][target]
    std::vector<std::vector<GaussianEstimate<double>>> last_biased(ns, std::vector<GaussianEstimate<double>>(nt));
    std::vector<std::vector<GaussianEstimate<double>>> last_clean = last_biased;

    auto record_epoch = [&](int k) {
        rec.frames.push_back(k);
        if (estimate_biases) record_biases(rec, s, bias, c);
        double local = 0.0, fused = 0.0, fused_clean = 0.0;
        int n_fused = 0, n_clean = 0;
        for (int t = 0; t < nt; ++t) {
            const auto& x = truth.states[t];
            local += position_sq_error((estimate_biases ? biased : clean).at(0, t).est, x[k]);
            if (estimate_biases && fstate[t].global) {
                fused += position_sq_error(fstate[t].global->est, x[fstate[t].global->est.frame]);
                ++n_fused;
            }
            if (plain.track(t)) {
                fused_clean += position_sq_error(plain.track(t)->est, x[plain.track(t)->est.frame]);
                ++n_clean;
            }
        }
        rec.local_sq.push_back(local / nt);
        rec.fused_sq.push_back(mean_or_nan(fused, n_fused));
        rec.fused_nobias_sq.push_back(mean_or_nan(fused_clean, n_clean));
    };

    try {
        if (estimate_biases) biased.initialize(c);
        clean.initialize(c);
        c.sensor = c.target = -1;
        for (int t = 0; t < nt; ++t) {
            std::vector<SensorReport<double>> rb, rc;
            for (int i = 0; i < ns; ++i) {
                last_clean[i][t] = clean.at(i, t).est;
                rc.push_back({i, last_clean[i][t], last_clean[i][t]});
                if (estimate_biases) {
                    last_biased[i][t] = biased.at(i, t).est;
                    rb.push_back({i, last_biased[i][t], last_biased[i][t]});
                }
            }
            if (estimate_biases) fbe_initialize<double>(rb, infos, bias, fstate[t]);
            plain.update(t, rc);
        }
        record_epoch(0);

        for (int k = 1; k <= s.frames; ++k) {
            if (estimate_biases) biased.step(k, c);
            clean.step(k, c);
            c.sensor = c.target = -1;

            std::vector<int> reporting;
            for (int i = 0; i < ns; ++i)
                if (reports_at(s.sensors[i], k)) reporting.push_back(i);
            if (reporting.empty()) continue;

            const std::vector<BiasEstimate<double>> snapshot = bias;
            for (int t = 0; t < nt; ++t) {
                c.target = t;
                std::vector<SensorReport<double>> rb, rc;
                for (int i : reporting) {
                    rc.push_back({i, last_clean[i][t], clean.at(i, t).est});
                    last_clean[i][t] = clean.at(i, t).est;
                    if (estimate_biases) {
                        rb.push_back({i, last_biased[i][t], biased.at(i, t).est});
                        last_biased[i][t] = biased.at(i, t).est;
                    }
                }
                if (estimate_biases) {
                    const auto t0 = Clock::now();
                    const auto out = fbe_step<double>(rb, infos, snapshot, bias, fstate[t], cfg);
                    rec.bias_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
                    for (const auto& so : out.sensors) {
                        if (so.bias_updated)
                            ++rec.bias_iterations;
                        else
                            ++rec.skipped_updates;
                    }
                }
                plain.update(t, rc);
            }
            c.target = -1;
            record_epoch(k);
        }
    } catch (const std::exception& e) {
        rethrow_with(c, e);
    }
    return rec;
}

RunRecord run_stacked(const Scenario& s, int run, bool true_gains)
{
    Context c{run};
    RunRecord rec;
    const TruthRun truth = simulate_truth(s, run);
    const int ns = int(s.sensors.size());
    const int nt = int(s.targets.size());
    const int d = s.bias_dim;
    const int L = s.sensors.front().report_lag;

    TrackerBank bank(s, truth, true);
    const auto fusion_steps = compose_steps(ncv_model(s.T, s.fusion_q, s.fusion_q), L);

    BiasEstimate<double> est;
    {
        const auto p = prior_of(s);
        est.b_hat = Eigen::VectorXd::Zero(d * ns);
        est.Sigma = Eigen::MatrixXd::Zero(d * ns, d * ns);
        for (int i = 0; i < ns; ++i) est.Sigma.block(d * i, d * i, d, d) = p.Sigma;
    }
    Eigen::VectorXd truth_stack(d * ns);
    for (int i = 0; i < ns; ++i) truth_stack.segment(d * i, d) = true_bias(s.sensors[i], d);

    auto record_epoch = [&](int k) {
        rec.frames.push_back(k);
        std::vector<BiasEstimate<double>> per_sensor;
        for (int i = 0; i < ns; ++i)
            per_sensor.push_back({est.b_hat.segment(d * i, d), est.Sigma.block(d * i, d * i, d, d)});
        record_biases(rec, s, per_sensor, c);
        rec.stacked_error.push_back(est.b_hat - truth_stack);
        rec.stacked_cov.push_back(est.Sigma);
        double local = 0.0;
        for (int t = 0; t < nt; ++t) local += position_sq_error(bank.at(0, t).est, truth.states[t][k]);
        rec.local_sq.push_back(local / nt);
        rec.fused_sq.push_back(nan);
        rec.fused_nobias_sq.push_back(nan);
    };

    std::vector<std::vector<GaussianEstimate<double>>> last(ns, std::vector<GaussianEstimate<double>>(nt));
    std::vector<Vec2<double>> z(ns);
    std::vector<BiasJacobians<double>> jac(ns);
    std::vector<Mat2<double>> R(ns);
    try {
        bank.initialize(c);
        for (int i = 0; i < ns; ++i)
            for (int t = 0; t < nt; ++t) last[i][t] = bank.at(i, t).est;
        c.sensor = c.target = -1;
        record_epoch(0);

        for (int k = 1; k <= s.frames; ++k) {
            bank.step(k, c);
            c.sensor = -1;
            if (k % L != 0) continue;
            for (int t = 0; t < nt; ++t) {
                c.target = t;
                const auto t0 = Clock::now();
                for (int i = 0; i < ns; ++i) {
                    c.sensor = i;
                    const auto& step = bank.at(i, t);
                    const auto& sn = s.sensors[i];
                    if (true_gains) {
                        const auto& tr = bank.tracker(i, t);
                        const PolarMeasurement<double> m = truth.measurement(s, i, t, k, true);
                        z[i] = sensor_pseudo_obs(step.est, last[i][t], step.record->gain, single_step(tr.primary_model()));
                        jac[i] = bias_jacobians(m);
                        R[i] = converted_covariance(m);
                    } else {
                        const auto tl = tracklet_decorrelated(last[i][t], step.est, fusion_steps);
                        const auto g = reconstruct_local_gain(tl, tl.predicted.cov);
                        z[i] = sensor_pseudo_obs(step.est, last[i][t], g.W, fusion_steps);
                        const Vec2<double> p = cart_to_polar<double>(g.y - sn.position);
                        jac[i] = bias_jacobians(PolarMeasurement<double>{p(0), p(1), sn.sigma_r, sn.sigma_theta});
                        R[i] = g.R_meas;
                    }
                }
                c.sensor = -1;
                const auto pm = stacked_pseudo_measurement<double>(z, jac, R, d);
                est = rlsb_update(est, pm);
                rec.bias_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
                ++rec.bias_iterations;
            }
            for (int i = 0; i < ns; ++i)
                for (int t = 0; t < nt; ++t) last[i][t] = bank.at(i, t).est;
            c.target = -1;
            record_epoch(k);
        }
    } catch (const std::exception& e) {
        rethrow_with(c, e);
    }
    return rec;
}

void check_method(const Scenario& s, Method m)
{
    if (m != Method::Ex && m != Method::Exl) return;
    for (const auto& sn : s.sensors)
        if (sn.report_lag != s.sensors.front().report_lag)
            throw ScenarioError("the stacked estimators need a common report lag");
    if (m == Method::Ex) {
        if (s.sensors.front().report_lag != 1) throw ScenarioError("the ex method needs every-frame reporting (lag 1)");
        if (s.local_filter.kind != LocalFilterKind::KfNcv)
            throw ScenarioError("the ex method needs Kalman filter local trackers to provide gains");
    }
}

} // namespace

RunRecord run_single(const Scenario& s, Method method, int run_index)
{
    switch (method) {
    case Method::Fbe: return run_fbe(s, run_index, true);
    case Method::Baseline: return run_fbe(s, run_index, false);
    case Method::Ex: return run_stacked(s, run_index, true);
    case Method::Exl: return run_stacked(s, run_index, false);
    }
    throw InvalidInput("unknown method");
}

RunMetrics run_monte_carlo(const Scenario& scenario, Method method, const McOptions& opt)
{
    Scenario s = scenario;
    if (opt.runs > 0) s.mc_runs = opt.runs;
    if (opt.seed) s.rng_seed = *opt.seed;
    validate(s);
    check_method(s, method);

    RunMetrics m;
    m.scenario = s.name;
    m.method = method;
    m.local_filter = s.local_filter.kind;
    m.runs = s.mc_runs;
    m.bias_dim = s.bias_dim;
    m.sensors = int(s.sensors.size());
    m.records.resize(s.mc_runs);

    const int hw = int(std::max(1u, std::thread::hardware_concurrency()));
    const int workers = std::min(s.mc_runs, opt.threads > 0 ? opt.threads : hw);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (int r = next++; r < s.mc_runs; r = next++) {
            try {
                m.records[r] = run_single(s, method, r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = s.mc_runs;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    m.frames = m.records.front().frames;
    aggregate(m);
    return m;
}

void aggregate(RunMetrics& m)
{
    m.bias_rmse.clear();
    m.bias_sigma.clear();
    m.nees.clear();
    m.track_rmse.clear();
    if (m.records.empty()) return;
    const int runs = int(m.records.size());
    const bool has_bias = !m.records.front().bias_error.empty();

    for (std::size_t e = 0; e < m.frames.size(); ++e) {
        const int k = m.frames[e];
        if (has_bias) {
            for (int i = 0; i < m.sensors; ++i) {
                std::vector<Eigen::VectorXd> errs;
                std::vector<Eigen::MatrixXd> covs;
                for (const auto& r : m.records) {
                    errs.push_back(r.bias_error[e][i]);
                    covs.push_back(r.bias_cov[e][i]);
                }
                for (int j = 0; j < m.bias_dim; ++j) {
                    double se = 0.0, var = 0.0;
                    for (int r = 0; r < runs; ++r) {
                        se += errs[r](j) * errs[r](j);
                        var += covs[r](j, j);
                    }
                    const double rmse = std::sqrt(se / runs);
                    const Interval ci = rmse_confidence(rmse, runs);
                    const std::string name = bias_component_names[j];
                    m.bias_rmse.push_back({k, i + 1, name, rmse, ci.low, ci.high});
                    const double sig = std::sqrt(var / runs);
                    m.bias_sigma.push_back({k, i + 1, name, sig, sig, sig});
                }
                const NeesPoint p = nees_series(errs, covs);
                m.nees.push_back({k, i + 1, "nees", p.value, p.two_sided.low, p.two_sided.high});
                m.nees.push_back({k, i + 1, "nees_one_sided", p.value, 0.0, p.one_sided_upper});
            }
            if (!m.records.front().stacked_error.empty()) {
                std::vector<Eigen::VectorXd> errs;
                std::vector<Eigen::MatrixXd> covs;
                for (const auto& r : m.records) {
                    errs.push_back(r.stacked_error[e]);
                    covs.push_back(r.stacked_cov[e]);
                }
                const NeesPoint p = nees_series(errs, covs);
                m.nees.push_back({k, 0, "nees_stacked", p.value, p.two_sided.low, p.two_sided.high});
            }
        }

        auto track_row = [&](const char* name, int sensor, auto member) {
            std::vector<double> xs;
            for (const auto& r : m.records) {
                const double v = (r.*member)[e];
                if (std::isnan(v)) return;
                xs.push_back(v);
            }
            const SampleMean sm = sample_mean(xs);
            m.track_rmse.push_back({k, sensor, name, std::sqrt(sm.mean), std::sqrt(std::max(0.0, sm.mean - 1.96 * sm.std_error)),
                                    std::sqrt(sm.mean + 1.96 * sm.std_error)});
        };
        track_row("local", 1, &RunRecord::local_sq);
        track_row("fused_corrected", 0, &RunRecord::fused_sq);
        track_row("fused_no_bias", 0, &RunRecord::fused_nobias_sq);
    }
}

const MetricRow& RunMetrics::row(const std::vector<MetricRow>& family, const std::string& metric, int sensor,
                                 int frame) const
{
    for (const auto& r : family)
        if (r.metric == metric && r.sensor == sensor && r.frame == frame) return r;
    throw std::out_of_range("no metric row " + metric + " for sensor " + std::to_string(sensor) + " at frame " +
                            std::to_string(frame));
}

double RunMetrics::mean_bias_iteration_seconds() const
{
    double secs = 0.0;
    long its = 0;
    for (const auto& r : records) {
        secs += r.bias_seconds;
        its += r.bias_iterations;
    }
    return its > 0 ? secs / double(its) : 0.0;
}

} // namespace regbias::harness
