#pragma once

#include "regbias/harness/monte_carlo.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace regbias::harness {

/// I/O failure, reported with the offending path.
class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* csv_header = "frame,sensor,metric,value,ci_low,ci_high";

void write_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_csv(const std::filesystem::path& path);

/// Writes one CSV per metric family plus run.json describing the run.
void emit_report(const RunMetrics& m, const std::filesystem::path& dir);

/// Writes crlb.csv.
void emit_crlb(const std::vector<MetricRow>& rows, const std::filesystem::path& dir);

/// One column of the summary table: sensor-1 values at the last frame of a run directory.
struct TableColumn {
    std::string label;
    int frame = 0;
    std::vector<double> rmse;
    std::vector<double> sigma;
    std::vector<double> sqrt_crlb;
    std::vector<double> ci_upper;
    std::vector<double> ci_lower;
};

TableColumn table_column(const std::filesystem::path& dir);

/// Text tables, one per bias component, with a column per run directory.
std::string format_tables(const std::vector<TableColumn>& cols);

/// The same content as rows (sensor 1), for tables.csv.
std::vector<MetricRow> table_rows(const std::vector<TableColumn>& cols);

} // namespace regbias::harness
