#include "regbias/harness/bounds.hpp"
#include "regbias/harness/monte_carlo.hpp"
#include "regbias/harness/report.hpp"
#include "regbias/harness/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace regbias;
using namespace regbias::harness;

namespace {

enum Exit { Ok = 0, BadScenario = 1, Numerical = 2, OutputFailure = 3 };

int run_simulate(const std::string& scenario_path, const std::string& method, int runs, std::optional<std::uint64_t> seed,
                 int threads, const std::string& out_dir)
{
    const Scenario s = load_scenario(scenario_path);
    McOptions opt;
    opt.runs = runs;
    opt.seed = seed;
    opt.threads = threads;
    const RunMetrics m = run_monte_carlo(s, parse_method(method), opt);
    emit_report(m, out_dir);

    long skipped = 0;
    for (const auto& r : m.records) skipped += r.skipped_updates;
    std::cerr << s.name << ": " << m.runs << " runs of " << method << " written to " << out_dir;
    if (skipped > 0) std::cerr << " (" << skipped << " bias updates skipped)";
    std::cerr << '\n';
    return Ok;
}

int run_crlb(const std::string& scenario_path, const std::string& out_dir, bool every_frame)
{
    const Scenario s = load_scenario(scenario_path);
    const CrlbSeries c = compute_crlb(s, CrlbOptions{every_frame});
    emit_crlb(crlb_rows(c, s.mc_runs), out_dir);
    return Ok;
}

int run_report(const std::vector<std::string>& dirs, bool tables)
{
    std::vector<TableColumn> cols;
    for (const auto& d : dirs) cols.push_back(table_column(d));
    if (tables) {
        std::cout << format_tables(cols);
        write_csv(std::filesystem::path(dirs.front()) / "tables.csv", table_rows(cols));
    }
    return Ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sensor bias estimation and track fusion simulator"};
    app.require_subcommand(1);

    std::string scenario, method = "fbe", out_dir;
    int runs = 0, threads = 0;
    std::uint64_t seed = 0;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation of one estimator");
    sim->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sim->add_option("--method", method, "estimator")->check(CLI::IsMember({"fbe", "ex", "exl", "baseline"}));
    sim->add_option("--runs", runs, "Monte Carlo runs (default: from scenario)")->check(CLI::PositiveNumber);
    auto* seed_opt = sim->add_option("--seed", seed, "root RNG seed (default: from scenario)");
    sim->add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    sim->add_option("--out", out_dir, "output directory")->required();

    std::string crlb_scenario, crlb_out;
    bool every_frame = false;
    auto* crlb = app.add_subcommand("crlb", "bias Cramer-Rao lower bound along the nominal trajectories");
    crlb->add_option("--scenario", crlb_scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    crlb->add_option("--out", crlb_out, "output directory")->required();
    crlb->add_flag("--every-frame", every_frame, "accumulate information at every frame instead of every report");

    std::vector<std::string> in_dirs;
    bool tables = false;
    auto* report = app.add_subcommand("report", "summary tables from simulation output");
    report->add_option("--in", in_dirs, "run directories (one table column each)")->required()->check(CLI::ExistingDirectory);
    report->add_flag("--tables", tables, "print the summary tables and write tables.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return run_simulate(scenario, method, runs, *seed_opt ? std::optional(seed) : std::nullopt, threads, out_dir);
        if (*crlb) return run_crlb(crlb_scenario, crlb_out, every_frame);
        if (*report) return run_report(in_dirs, tables);
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << '\n';
        return BadScenario;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return BadScenario;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return Numerical;
    } catch (const ReportError& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return OutputFailure;
    }
    return Ok;
}
