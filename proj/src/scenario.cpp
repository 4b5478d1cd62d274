#include "regbias/harness/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace regbias::harness {

namespace {

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts)
{
    std::ostringstream msg;
    (msg << ... << parts);
    throw ScenarioError(msg.str());
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

LocalFilterKind parse_filter(const std::string& s)
{
    if (s == "kf_ncv") return LocalFilterKind::KfNcv;
    if (s == "imm_ncv_ncv") return LocalFilterKind::ImmNcvNcv;
    if (s == "imm_nca_ncv") return LocalFilterKind::ImmNcaNcv;
    fail("unknown local filter type '", s, "'");
}

SegmentKind parse_segment(const std::string& s)
{
    if (s == "ncv") return SegmentKind::NCV;
    if (s == "turn") return SegmentKind::Turn;
    fail("unknown motion segment model '", s, "'");
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

Eigen::Vector2d vec2(const nlohmann::json& j, const char* what)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) fail(what, " must have 2 entries");
    return {v[0], v[1]};
}

} // namespace

const char* to_string(LocalFilterKind k)
{
    switch (k) {
    case LocalFilterKind::KfNcv: return "kf_ncv";
    case LocalFilterKind::ImmNcvNcv: return "imm_ncv_ncv";
    case LocalFilterKind::ImmNcaNcv: return "imm_nca_ncv";
    }
    return "?";
}

void validate(const Scenario& s)
{
    if (s.sensors.size() < 2) fail("scenario needs at least 2 sensors, got ", s.sensors.size());
    if (s.targets.empty()) fail("scenario needs at least 1 target");
    if (s.frames < 2) fail("frames must be at least 2, got ", s.frames);
    if (s.mc_runs < 1) fail("mc_runs must be at least 1");
    if (!positive(s.T)) fail("sampling interval must be positive");
    if (!(s.truth_q >= 0.0)) fail("truth process noise must be non-negative");
    if (!positive(s.fusion_q)) fail("fusion q must be positive");
    if (s.bias_dim != 2 && s.bias_dim != 4) fail("bias_dim must be 2 or 4");
    if (static_cast<int>(s.bias_prior_std.size()) != s.bias_dim)
        fail("bias_prior_std must have bias_dim = ", s.bias_dim, " entries");
    for (double v : s.bias_prior_std)
        if (!positive(v)) fail("bias prior standard deviations must be positive");

    for (std::size_t i = 0; i < s.sensors.size(); ++i) {
        const auto& sn = s.sensors[i];
        if (!positive(sn.sigma_r) || !positive(sn.sigma_theta)) fail("sensor ", i + 1, ": noise parameters must be positive");
        if (sn.report_lag < 1) fail("sensor ", i + 1, ": report lag must be at least 1");
        if (!sn.bias.valid()) fail("sensor ", i + 1, ": scale biases must keep 1 + eps positive");
        if (!sn.position.allFinite()) fail("sensor ", i + 1, ": position must be finite");
        if (s.bias_dim == 2 && (sn.bias.eps_r != 0.0 || sn.bias.eps_theta != 0.0))
            fail("sensor ", i + 1, ": scale biases need bias_dim = 4");
    }
    for (std::size_t t = 0; t < s.targets.size(); ++t) {
        const auto& tg = s.targets[t];
        if (!tg.initial_state.allFinite()) fail("target ", t + 1, ": initial state must be finite");
        if (tg.segments.empty()) fail("target ", t + 1, ": needs at least one motion segment");
        for (const auto& seg : tg.segments) {
            if (seg.frames < 1) fail("target ", t + 1, ": segment lengths must be at least 1 frame");
            if (!std::isfinite(seg.omega)) fail("target ", t + 1, ": turn rate must be finite");
        }
        for (std::size_t i = 0; i < s.sensors.size(); ++i)
            if ((tg.initial_state(0) - s.sensors[i].position(0)) == 0.0 &&
                (tg.initial_state(2) - s.sensors[i].position(1)) == 0.0)
                fail("target ", t + 1, " starts on sensor ", i + 1);
    }

    const auto& lf = s.local_filter;
    const std::size_t modes = lf.kind == LocalFilterKind::KfNcv ? 1 : 2;
    if (lf.q.size() != modes) fail("local filter ", to_string(lf.kind), " needs ", modes, " q value(s)");
    for (double q : lf.q)
        if (!positive(q)) fail("local filter q must be positive");
    if ((lf.initial_cov_diag.array() <= 0.0).any()) fail("initial covariance diagonal must be positive");
    if (modes == 2) {
        if ((lf.transition.array() < 0.0).any() || ((lf.transition.rowwise().sum().array() - 1.0).abs() > 1e-9).any())
            fail("IMM transition matrix must be row-stochastic");
        if ((lf.initial_mode_probs.array() < 0.0).any() || std::abs(lf.initial_mode_probs.sum() - 1.0) > 1e-9)
            fail("IMM initial mode probabilities must sum to 1");
        if (!positive(lf.initial_accel_std)) fail("initial acceleration standard deviation must be positive");
    }
}

Scenario scenario_from_json(const nlohmann::json& j)
{
    Scenario s;
    try {
        s.name = get_or<std::string>(j, "name", s.name);
        s.T = get_or(j, "sampling_interval", s.T);
        s.frames = j.at("frames").get<int>();
        s.mc_runs = get_or(j, "mc_runs", s.mc_runs);
        s.rng_seed = get_or<std::uint64_t>(j, "rng_seed", s.rng_seed);
        s.truth_q = get_or(j, "truth_q", s.truth_q);
        s.fusion_q = get_or(j, "fusion_q", s.fusion_q);
        s.bias_dim = get_or(j, "bias_dim", s.bias_dim);
        s.bias_prior_std = get_or(j, "bias_prior_std", s.bias_prior_std);

        for (const auto& js : j.at("sensors")) {
            SensorSpec sn;
            sn.position = vec2(js.at("position"), "sensor position");
            sn.sigma_r = js.at("sigma_r").get<double>();
            sn.sigma_theta = js.at("sigma_theta").get<double>();
            const auto b = js.at("bias").get<std::vector<double>>();
            if (b.size() != 2 && b.size() != 4) fail("sensor bias must have 2 or 4 entries");
            sn.bias = BiasVector<double>::from_vector(Eigen::Map<const Eigen::VectorXd>(b.data(), Eigen::Index(b.size())));
            sn.report_lag = get_or(js, "report_lag", 1);
            s.sensors.push_back(sn);
        }
        for (const auto& jt : j.at("targets")) {
            TargetSpec tg;
            const auto x0 = jt.at("initial_state").get<std::vector<double>>();
            if (x0.size() != 4) fail("target initial_state must be [x, vx, y, vy]");
            tg.initial_state = Eigen::Vector4d(x0[0], x0[1], x0[2], x0[3]);
            for (const auto& jg : jt.at("segments")) {
                MotionSegment seg;
                seg.kind = parse_segment(jg.at("model").get<std::string>());
                seg.frames = jg.at("frames").get<int>();
                seg.omega = get_or(jg, "omega", 0.0);
                tg.segments.push_back(seg);
            }
            s.targets.push_back(tg);
        }
        if (j.contains("local_filter")) {
            const auto& jl = j.at("local_filter");
            auto& lf = s.local_filter;
            lf.kind = parse_filter(jl.at("type").get<std::string>());
            lf.q = jl.at("q").get<std::vector<double>>();
            if (jl.contains("transition")) {
                const auto m = jl.at("transition").get<std::vector<std::vector<double>>>();
                if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2) fail("transition must be 2 x 2");
                lf.transition << m[0][0], m[0][1], m[1][0], m[1][1];
            }
            if (jl.contains("initial_mode_probs")) lf.initial_mode_probs = vec2(jl.at("initial_mode_probs"), "initial_mode_probs");
            if (jl.contains("initial_cov_diag")) {
                const auto d = jl.at("initial_cov_diag").get<std::vector<double>>();
                if (d.size() != 4) fail("initial_cov_diag must have 4 entries");
                lf.initial_cov_diag = Eigen::Vector4d(d[0], d[1], d[2], d[3]);
            }
            lf.initial_accel_std = get_or(jl, "initial_accel_std", lf.initial_accel_std);
        }
    } catch (const nlohmann::json::exception& e) {
        fail("malformed scenario: ", e.what());
    } catch (const InvalidInput& e) {
        fail("malformed scenario: ", e.what());
    }
    validate(s);
    return s;
}

nlohmann::json to_json(const Scenario& s)
{
    nlohmann::json j;
    j["name"] = s.name;
    j["sampling_interval"] = s.T;
    j["frames"] = s.frames;
    j["mc_runs"] = s.mc_runs;
    j["rng_seed"] = s.rng_seed;
    j["truth_q"] = s.truth_q;
    j["fusion_q"] = s.fusion_q;
    j["bias_dim"] = s.bias_dim;
    j["bias_prior_std"] = s.bias_prior_std;
    for (const auto& sn : s.sensors) {
        nlohmann::json js;
        js["position"] = {sn.position(0), sn.position(1)};
        js["sigma_r"] = sn.sigma_r;
        js["sigma_theta"] = sn.sigma_theta;
        if (s.bias_dim == 4)
            js["bias"] = {sn.bias.b_r, sn.bias.b_theta, sn.bias.eps_r, sn.bias.eps_theta};
        else
            js["bias"] = {sn.bias.b_r, sn.bias.b_theta};
        js["report_lag"] = sn.report_lag;
        j["sensors"].push_back(js);
    }
    for (const auto& tg : s.targets) {
        nlohmann::json jt;
        jt["initial_state"] = {tg.initial_state(0), tg.initial_state(1), tg.initial_state(2), tg.initial_state(3)};
        for (const auto& seg : tg.segments) {
            nlohmann::json jg{{"model", seg.kind == SegmentKind::NCV ? "ncv" : "turn"}, {"frames", seg.frames}};
            if (seg.kind == SegmentKind::Turn) jg["omega"] = seg.omega;
            jt["segments"].push_back(jg);
        }
        j["targets"].push_back(jt);
    }
    const auto& lf = s.local_filter;
    j["local_filter"] = {{"type", to_string(lf.kind)},
                         {"q", lf.q},
                         {"transition", {{lf.transition(0, 0), lf.transition(0, 1)}, {lf.transition(1, 0), lf.transition(1, 1)}}},
                         {"initial_mode_probs", {lf.initial_mode_probs(0), lf.initial_mode_probs(1)}},
                         {"initial_cov_diag",
                          {lf.initial_cov_diag(0), lf.initial_cov_diag(1), lf.initial_cov_diag(2), lf.initial_cov_diag(3)}},
                         {"initial_accel_std", lf.initial_accel_std}};
    return j;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail("cannot open scenario file ", path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(path.string(), ": ", e.what());
    }
    return scenario_from_json(j);
}

} // namespace regbias::harness
