#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mvflow/fixed_point.hpp"
#include "mvflow/measures.hpp"
#include "mvflow/sde_solver.hpp"

namespace mvflow::io {

/// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double x);

/// Writes to a temporary sibling and renames it into place; creates parent directories.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Header plus rows; every cell is preformatted text.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<double>& values);
    void add_row(std::vector<std::string> cells);
    std::string str() const;
};

/// `w,x1..xd`
std::string measure_csv(const EmpiricalMeasure& mu);
EmpiricalMeasure parse_measure_csv(const std::string& text);
EmpiricalMeasure read_measure_csv(const std::filesystem::path& path);

/// One CSV per grid time plus index.csv with columns `step,t,file`.
void write_flow(const std::filesystem::path& dir, const MeasureFlow& flow);
MeasureFlow read_flow(const std::filesystem::path& dir);

/// `path,t,x1..xd`, one row per (path, grid time), time steps thinned by `stride`.
std::string ensemble_csv(const PathEnsemble& ens, std::size_t stride = 1);

/// `iter,distance,metric,window`
CsvTable diagnostics_table(const PicardDiagnostics& diag);

}  // namespace mvflow::io
