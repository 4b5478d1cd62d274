#include "regbias/harness/report.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace regbias::harness {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw ReportError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

void close_checked(std::ofstream& out, const fs::path& path)
{
    out.close();
    if (!out) throw ReportError("error while writing " + path.string());
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

} // namespace

void write_csv(const fs::path& path, const std::vector<MetricRow>& rows)
{
    auto out = open_out(path);
    out << csv_header << '\n';
    for (const auto& r : rows)
        out << r.frame << ',' << r.sensor << ',' << r.metric << ',' << r.value << ',' << r.ci_low << ',' << r.ci_high << '\n';
    close_checked(out, path);
}

std::vector<MetricRow> read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ReportError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != csv_header) throw ReportError(path.string() + ": missing or unexpected header");
    std::vector<MetricRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field[6];
        for (auto& f : field)
            if (!std::getline(ss, f, ',')) throw ReportError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
        try {
            rows.push_back({std::stoi(field[0]), std::stoi(field[1]), field[2], std::stod(field[3]), std::stod(field[4]),
                            std::stod(field[5])});
        } catch (const std::exception&) {
            throw ReportError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

void emit_report(const RunMetrics& m, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ReportError("cannot create " + dir.string() + ": " + ec.message());
    write_csv(dir / "bias_rmse.csv", m.bias_rmse);
    write_csv(dir / "bias_sigma.csv", m.bias_sigma);
    write_csv(dir / "nees.csv", m.nees);
    write_csv(dir / "track_rmse.csv", m.track_rmse);

    nlohmann::json info{{"scenario", m.scenario},
                        {"method", to_string(m.method)},
                        {"local_filter", to_string(m.local_filter)},
                        {"runs", m.runs},
                        {"bias_dim", m.bias_dim},
                        {"sensors", m.sensors}};
    auto out = open_out(dir / "run.json");
    out << info.dump(2) << '\n';
    close_checked(out, dir / "run.json");
}

void emit_crlb(const std::vector<MetricRow>& rows, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ReportError("cannot create " + dir.string() + ": " + ec.message());
    write_csv(dir / "crlb.csv", rows);
}

TableColumn table_column(const fs::path& dir)
{
    TableColumn col;
    col.label = dir.filename().string();
    if (fs::exists(dir / "run.json")) {
        std::ifstream in(dir / "run.json");
        try {
            const auto j = nlohmann::json::parse(in);
            col.label = j.at("local_filter").get<std::string>();
        } catch (const std::exception& e) {
            throw ReportError((dir / "run.json").string() + ": " + e.what());
        }
    }
    const auto rmse = read_csv(dir / "bias_rmse.csv");
    const auto sigma = read_csv(dir / "bias_sigma.csv");
    std::vector<MetricRow> crlb;
    if (fs::exists(dir / "crlb.csv")) crlb = read_csv(dir / "crlb.csv");

    for (const auto& r : rmse) col.frame = std::max(col.frame, r.frame);
    for (const char* name : bias_component_names) {
        auto find = [&](const std::vector<MetricRow>& rows) -> const MetricRow* {
            for (const auto& r : rows)
                if (r.sensor == 1 && r.frame == col.frame && r.metric == name) return &r;
            return nullptr;
        };
        const MetricRow* a = find(rmse);
        if (!a) break;
        const MetricRow* b = find(sigma);
        const MetricRow* c = find(crlb);
        col.rmse.push_back(a->value);
        col.sigma.push_back(b ? b->value : nan());
        col.sqrt_crlb.push_back(c ? c->value : nan());
        col.ci_upper.push_back(c ? c->ci_high : nan());
        col.ci_lower.push_back(c ? c->ci_low : nan());
    }
    return col;
}

std::string format_tables(const std::vector<TableColumn>& cols)
{
    std::ostringstream out;
    if (cols.empty()) return out.str();
    std::size_t dims = cols.front().rmse.size();
    for (const auto& c : cols) dims = std::min(dims, c.rmse.size());
    for (std::size_t j = 0; j < dims; ++j) {
        out << "Sensor 1, " << bias_component_names[j] << ", last frame\n";
        out << std::left << std::setw(14) << "";
        for (const auto& c : cols) out << std::right << std::setw(16) << c.label;
        out << '\n';
        auto line = [&](const char* name, auto member) {
            out << std::left << std::setw(14) << name;
            for (const auto& c : cols) out << std::right << std::setw(16) << std::setprecision(4) << (c.*member)[j];
            out << '\n';
        };
        line("RMSE", &TableColumn::rmse);
        line("sqrt(Sigma)", &TableColumn::sigma);
        line("sqrt(CRLB)", &TableColumn::sqrt_crlb);
        line("upper 95%", &TableColumn::ci_upper);
        line("lower 95%", &TableColumn::ci_lower);
        out << '\n';
    }
    return out.str();
}

std::vector<MetricRow> table_rows(const std::vector<TableColumn>& cols)
{
    std::vector<MetricRow> rows;
    for (const auto& c : cols)
        for (std::size_t j = 0; j < c.rmse.size(); ++j) {
            const std::string base = c.label + ":" + bias_component_names[j];
            rows.push_back({c.frame, 1, base + ":rmse", c.rmse[j], c.rmse[j], c.rmse[j]});
            rows.push_back({c.frame, 1, base + ":sigma", c.sigma[j], c.sigma[j], c.sigma[j]});
            rows.push_back({c.frame, 1, base + ":sqrt_crlb", c.sqrt_crlb[j], c.ci_lower[j], c.ci_upper[j]});
        }
    return rows;
}

} // namespace regbias::harness
