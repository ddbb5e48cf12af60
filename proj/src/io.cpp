#include "mvflow/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mvflow/error.hpp"

namespace fs = std::filesystem;

namespace mvflow::io {

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void CsvTable::add_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    add_row(std::move(cells));
}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns.size()) throw InvalidArgument("csv row width differs from the header");
    rows.push_back(std::move(cells));
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& text, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("line " + std::to_string(line) + ": not a number: '" + text + "'");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string CsvTable::str() const {
    std::string out;
    append_line(out, columns);
    for (const auto& row : rows) append_line(out, row);
    return out;
}

std::string measure_csv(const EmpiricalMeasure& mu) {
    CsvTable t;
    t.columns.push_back("w");
    for (std::size_t j = 0; j < mu.dim(); ++j) t.columns.push_back("x" + std::to_string(j + 1));
    std::vector<double> row(mu.dim() + 1);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        row[0] = mu.weight(i);
        const auto p = mu.point(i);
        std::copy(p.begin(), p.end(), row.begin() + 1);
        t.add_row(row);
    }
    return t.str();
}

EmpiricalMeasure parse_measure_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("measure csv: empty input");
    const auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "w") throw InvalidArgument("measure csv: header must be w,x1..xd");
    const std::size_t d = header.size() - 1;
    std::vector<double> coords, weights;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != d + 1) {
            throw InvalidArgument("measure csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(d + 1) + " fields");
        }
        weights.push_back(parse_number(cells[0], lineno));
        for (std::size_t j = 0; j < d; ++j) coords.push_back(parse_number(cells[j + 1], lineno));
    }
    if (weights.empty()) throw InvalidArgument("measure csv: no atoms");
    return EmpiricalMeasure(d, std::move(coords), std::move(weights));
}

EmpiricalMeasure read_measure_csv(const fs::path& path) { return parse_measure_csv(read_file(path)); }

namespace {

std::string flow_file_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%06zu.csv", k);
    return buf;
}

}  // namespace

void write_flow(const fs::path& dir, const MeasureFlow& flow) {
    CsvTable index{{"step", "t", "file"}, {}};
    for (std::size_t k = 0; k < flow.size(); ++k) {
        const auto name = flow_file_name(k);
        write_atomic(dir / name, measure_csv(flow[k]));
        index.add_row({std::to_string(k), format_double(flow.times()[k]), name});
    }
    write_atomic(dir / "index.csv", index.str());
}

MeasureFlow read_flow(const fs::path& dir) {
    std::istringstream in(read_file(dir / "index.csv"));
    std::string line;
    std::getline(in, line);
    if (line != "step,t,file") throw InvalidArgument("flow index: unexpected header");
    std::vector<double> times;
    std::vector<EmpiricalMeasure> measures;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 3) throw InvalidArgument("flow index line " + std::to_string(lineno) + ": expected 3 fields");
        times.push_back(parse_number(cells[1], lineno));
        measures.push_back(read_measure_csv(dir / cells[2]));
    }
    return MeasureFlow(std::move(times), std::move(measures));
}

std::string ensemble_csv(const PathEnsemble& ens, std::size_t stride) {
    if (stride == 0) throw InvalidArgument("ensemble csv: stride must be >= 1");
    CsvTable t;
    t.columns = {"path", "t"};
    for (std::size_t j = 0; j < ens.dim(); ++j) t.columns.push_back("x" + std::to_string(j + 1));
    const std::size_t n = ens.grid().n_steps();
    for (std::size_t i = 0; i < ens.n_paths(); ++i) {
        for (std::size_t k = 0; k <= n; k += stride) {
            std::vector<std::string> row{std::to_string(i), format_double(ens.grid().time(k))};
            for (double x : ens.position(i, k)) row.push_back(format_double(x));
            t.add_row(std::move(row));
        }
    }
    return t.str();
}

CsvTable diagnostics_table(const PicardDiagnostics& diag) {
    CsvTable t{{"iter", "distance", "metric", "window"}, {}};
    for (const auto& r : diag.records) {
        t.add_row({std::to_string(r.iteration), format_double(r.distance), diag.metric, std::to_string(r.window)});
    }
    return t;
}

}  // namespace mvflow::io
