#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvflow/coefficients.hpp"
#include "mvflow/error.hpp"
#include "mvflow/io.hpp"

using namespace mvflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("mvflow_test_io_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::strtod(io::format_double(x).c_str(), nullptr) == x);
    }
    CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("atomic write creates directories and leaves no temporary") {
    const auto dir = scratch("atomic");
    io::write_atomic(dir / "a" / "b.txt", "hello\n");
    CHECK(slurp(dir / "a" / "b.txt") == "hello\n");
    io::write_atomic(dir / "a" / "b.txt", "x");
    CHECK(slurp(dir / "a" / "b.txt") == "x");
    CHECK(!fs::exists(dir / "a" / "b.txt.tmp"));
    fs::remove_all(dir);
}

TEST_CASE("measure csv round trip is exact") {
    const EmpiricalMeasure m(2, {0.1, -3.0, 1.0 / 7.0, 2e-9, 5.0, 5.0}, {0.2, 0.3, 0.5});
    const auto text = io::measure_csv(m);
    CHECK(text.rfind("w,x1,x2\n", 0) == 0);
    CHECK(io::parse_measure_csv(text).identical_to(m));
    CHECK_THROWS_AS(io::parse_measure_csv("w,x1\n0.5,1\n0.5\n"), InvalidArgument);
    CHECK_THROWS_AS(io::parse_measure_csv("v,x1\n1,1\n"), InvalidArgument);
    CHECK_THROWS_AS(io::parse_measure_csv("w,x1\n1,abc\n"), InvalidArgument);
}

TEST_CASE("flow directory round trip") {
    const auto dir = scratch("flow");
    const TimeGrid grid(0.3, 3);
    std::vector<EmpiricalMeasure> ms;
    for (std::size_t k = 0; k <= 3; ++k) ms.push_back(EmpiricalMeasure::uniform(1, {0.1 * k, -1.0, 2.0}));
    const MeasureFlow flow(grid.times(), ms);
    io::write_flow(dir, flow);
    CHECK(fs::exists(dir / "index.csv"));
    const auto back = io::read_flow(dir);
    REQUIRE(back.size() == 4);
    CHECK(back.times() == flow.times());
    // uniform weights come back as explicit weights 1/3
    for (std::size_t k = 0; k <= 3; ++k) {
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back[k].point(i)[0] == flow[k].point(i)[0]);
            CHECK(back[k].weight(i) == flow[k].weight(i));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("ensemble and diagnostics tables") {
    const TimeGrid grid(1.0, 4);
    const auto ens = euler_maruyama(make_preset("conv_ou", {}), MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac({0.0})),
                                    InitialSampler::dirac({1.0}), grid, 2, 1);
    const auto text = io::ensemble_csv(ens, 2);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "path,t,x1");
    std::getline(in, line);
    CHECK(line == "0,0,1");
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * 3);  // steps 0, 2, 4 for two paths

    PicardDiagnostics d;
    d.metric = "rho";
    d.records = {{1, 0.5, 0}, {2, 0.25, 0}};
    CHECK(io::diagnostics_table(d).str() == "iter,distance,metric,window\n1,0.5,rho,0\n2,0.25,rho,0\n");

    io::CsvTable t{{"a", "b"}, {}};
    CHECK_THROWS_AS(t.add_row(std::vector<double>{1.0}), InvalidArgument);
}
