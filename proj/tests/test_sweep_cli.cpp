#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spikeopt/sweep.hpp"

using namespace spikeopt;
using namespace spikeopt::sweep;

TEST_CASE("parse_m_grid: linspace and list forms") {
    const auto lin = parse_m_grid("0.1:0.5:5");
    REQUIRE(lin.size() == 5);
    CHECK(lin.front() == doctest::Approx(0.1));
    CHECK(lin.back() == doctest::Approx(0.5));
    const auto list = parse_m_grid("0.1,0.7,2.0");
    REQUIRE(list.size() == 3);
    CHECK(list[1] == doctest::Approx(0.7));
    CHECK_THROWS_AS(parse_m_grid("2.0,0.1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_m_grid("0,1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_m_grid(""), std::invalid_argument);
}

TEST_CASE("run_sweep: Hodgkin-Huxley single-point row matches the reported extremes") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto rows = run_sweep(hh, {0.7});
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].min_T.has_value());
    REQUIRE(rows[0].max_T.has_value());
    CHECK(std::fabs(*rows[0].min_T - 13.5) < 0.1);
    CHECK(std::fabs(*rows[0].max_T - 16.37) < 0.1);
    // ripple-refined words keep the Y-leading / X-leading skeletons
    CHECK(rows[0].min_word.front() == 'Y');
    CHECK(rows[0].max_word.front() == 'X');
    CHECK(rows[0].error.empty());
}

TEST_CASE("run_sweep: vanishing amplitude pinches the feasible range") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto rows = run_sweep(hh, {0.001});
    REQUIRE(rows.size() == 1);
    const double t0 = hh.natural_period();
    CHECK(std::fabs(*rows[0].min_T - t0) < 0.05);
    CHECK(std::fabs(*rows[0].max_T - t0) < 0.05);
}

TEST_CASE("run_sweep: the range widens with M and records unbounded rows") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto rows = run_sweep(hh, {0.7, 2.5, 4.0});
    REQUIRE(rows.size() == 3);
    const double spread_07 = *rows[0].max_T - *rows[0].min_T;
    const double spread_25 = *rows[1].max_T - *rows[1].min_T;
    CHECK(spread_25 > spread_07);
    CHECK(*rows[1].min_T < hh.natural_period());
    CHECK(*rows[1].max_T > hh.natural_period());
    CHECK(rows[2].max_unbounded);
    CHECK(rows[2].max_word == "unbounded");
}

TEST_CASE("sweep_to_csv: deterministic output with fixed columns") {
    const auto& model = builtin_model("sniper");
    const auto rows_a = run_sweep(model, {0.3, 0.7});
    const auto rows_b = run_sweep(model, {0.3, 0.7});
    const auto csv_a = sweep_to_csv(rows_a, false);
    const auto csv_b = sweep_to_csv(rows_b, false);
    CHECK(csv_a == csv_b); // byte-identical on identical configs
    std::istringstream in(csv_a);
    std::string header;
    std::getline(in, header);
    CHECK(header == "M,min_T,max_T,min_word,max_word,error");
    std::string row;
    std::getline(in, row);
    CHECK(row.rfind("0.3,", 0) == 0);
}

TEST_CASE("run_validation_sweep: single-point validation row at M=0.7") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto rows = run_validation_sweep(hh, {0.7}, 3);
    REQUIRE(rows.size() == 1);
    const auto& r = rows[0];
    REQUIRE(r.state_min_isi.has_value());
    REQUIRE(r.state_max_isi.has_value());
    CHECK(std::fabs(*r.state_min_isi - 13.65) < 0.3);
    CHECK(std::fabs(*r.state_max_isi - 17.13) < 0.3);
    CHECK(*r.abs_err_min < 1.0);
    CHECK(*r.abs_err_max < 1.0);
    const auto csv = sweep_to_csv(rows, true);
    CHECK(csv.rfind("M,phase_min_T,phase_max_T,min_word,max_word,state_min_ISI,"
                    "state_max_ISI,abs_err_min,abs_err_max,error\n",
                    0) == 0);
}

TEST_CASE("run_validation_sweep: rejects non-HH models") {
    CHECK_THROWS_AS(run_validation_sweep(builtin_model("sniper"), {0.3}, 2),
                    std::invalid_argument);
}

TEST_CASE("plot scripts reference their data files") {
    const auto control = control_plot_script("c.csv", "r.csv", "demo");
    CHECK(control.find("c.csv") != std::string::npos);
    CHECK(control.find("r.csv") != std::string::npos);
    const auto band = sweep_plot_script("s.csv", "demo");
    CHECK(band.find("filledcurves") != std::string::npos);
    const auto errmap = error_map_plot_script("v.csv", "demo");
    CHECK(errmap.find("palette") != std::string::npos);
}
