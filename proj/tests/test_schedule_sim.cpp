#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spikeopt/schedule_sim.hpp"

using namespace spikeopt;
using namespace spikeopt::sim;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

PhaseModel sniper1() {
    return {"sniper", 1.0, SniperPrc{1.0}};
}

} // namespace

TEST_CASE("to_time_domain: degenerate schedule is a single zero interval") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto result = synthesis::min_time_synthesize(hh, 0.0);
    const auto control = to_time_domain(hh, result.schedule);
    REQUIRE(control.values.size() == 1);
    CHECK(control.values[0] == 0.0);
    CHECK(control.total_duration == doctest::Approx(hh.natural_period()).epsilon(1e-10));
}

TEST_CASE("to_time_domain: SNIPER Y-singular-Y breakpoints") {
    const auto model = sniper1();
    const auto result = synthesis::max_time_synthesize(model, 0.7);
    const auto control = to_time_domain(model, result.schedule);
    REQUIRE(control.values.size() == 3);
    const double t1 = control.breakpoints[1];
    const double t2 = control.breakpoints[2] - control.breakpoints[1];
    CHECK(std::fabs(t2 - 4.0 * 0.7 * t1) < 1e-9);
    CHECK(control.holds[1].has_value());
    CHECK(control.total_duration == doctest::Approx(result.predicted_T).epsilon(1e-8));
}

TEST_CASE("to_time_domain: Hodgkin-Huxley durations match the per-segment quadrature") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto result = synthesis::min_time_synthesize(hh, 0.7);
    const auto control = to_time_domain(hh, result.schedule);
    REQUIRE(control.values.size() == result.schedule.segments.size());
    for (std::size_t i = 0; i < control.values.size(); ++i) {
        const auto& seg = result.schedule.segments[i];
        REQUIRE(seg.phase_span.has_value());
        const double quad = numerics::integrate_adaptive(
                                [&](double theta) {
                                    return 1.0 / (hh.omega + seg.u * prc_eval(hh, theta, 0));
                                },
                                *seg.phase_span, 1e-12)
                                .value;
        CHECK(std::fabs((control.breakpoints[i + 1] - control.breakpoints[i]) - quad) < 1e-8);
    }
    CHECK(std::fabs(control.total_duration - result.predicted_T) < 1e-8);
}

TEST_CASE("simulate_phase: unforced Hodgkin-Huxley phase model") {
    const auto& hh = builtin_model("hodgkin_huxley");
    TimeDomainControl zero;
    zero.breakpoints = {0.0, hh.natural_period()};
    zero.values = {0.0};
    zero.holds = {std::nullopt};
    zero.total_duration = hh.natural_period();
    const auto run = simulate_phase(hh, zero);
    CHECK(std::fabs(run.spike_time - 14.61) < 0.02);
    CHECK(run.final_charge == 0.0);
}

TEST_CASE("simulate_phase: SNIPER min-time schedule closes the loop") {
    const auto model = sniper1();
    const auto result = synthesis::min_time_synthesize(model, 0.7);
    const auto control = to_time_domain(model, result.schedule);
    const auto run = simulate_phase(model, control);
    CHECK(std::fabs(run.spike_time - result.predicted_T) < 1e-5);
    CHECK(std::fabs(run.final_charge) < 1e-6);
}

TEST_CASE("simulate_phase: SNIPER max-time spike at 2*t1 + t2") {
    const auto model = sniper1();
    const auto result = synthesis::max_time_synthesize(model, 0.7);
    const auto control = to_time_domain(model, result.schedule);
    const auto run = simulate_phase(model, control);
    const double t1 = control.breakpoints[1];
    const double t2 = control.breakpoints[2] - control.breakpoints[1];
    CHECK(std::fabs(run.spike_time - (2.0 * t1 + t2)) < 1e-5);
    CHECK(std::fabs(run.final_charge) < 1e-6);
}

TEST_CASE("simulate_phase: unbounded-delay schedule spikes at the target") {
    const auto& hh = builtin_model("hodgkin_huxley");
    const auto result = synthesis::max_time_synthesize(hh, 4.0, 60.0);
    const auto control = to_time_domain(hh, result.schedule);
    const auto run = simulate_phase(hh, control);
    CHECK(std::fabs(run.spike_time - 60.0) < 1e-4);
    CHECK(std::fabs(run.final_charge) < 1e-6);
}

TEST_CASE("simulate_phase: NoSpike when the phase stalls under a bad control") {
    const auto model = sniper1();
    TimeDomainControl bad;
    bad.breakpoints = {0.0, 500.0};
    bad.values = {-2.0}; // stalls the phase at 2*cos(theta) = 1
    bad.holds = {std::nullopt};
    bad.total_duration = 500.0;
    CHECK_THROWS_AS(simulate_phase(model, bad), NoSpikeError);
}

TEST_CASE("property: simulation matches quadrature prediction on all models") {
    struct Case {
        const char* name;
        double M;
    };
    const Case cases[] = {{"sniper", 0.4},        {"sniper", 0.7},
                          {"hodgkin_huxley", 0.7}, {"hodgkin_huxley", 2.0},
                          {"morris_lecar", 0.004}, {"morris_lecar", 0.009}};
    for (const auto& c : cases) {
        const auto& model = builtin_model(c.name);
        const double t0 = model.natural_period();
        for (bool maximize : {false, true}) {
            const auto result = maximize ? synthesis::max_time_synthesize(model, c.M)
                                         : synthesis::min_time_synthesize(model, c.M);
            const auto control = to_time_domain(model, result.schedule);
            const auto run = simulate_phase(model, control);
            CHECK(std::fabs(run.spike_time - result.predicted_T) < 1e-5 * t0);
            CHECK(std::fabs(run.final_charge) <= 1e-6 * c.M * result.predicted_T);
        }
    }
}

TEST_CASE("property: the SNIPER Y-singular-Y arcs have equal durations") {
    const auto result = synthesis::max_time_synthesize(sniper1(), 0.9);
    REQUIRE(result.schedule.segments.size() == 3);
    CHECK(std::fabs(result.schedule.segments[0].duration -
                    result.schedule.segments[2].duration) < 1e-9);
}

TEST_CASE("serialization: control CSV and phase-run CSV shapes") {
    const auto model = sniper1();
    const auto result = synthesis::max_time_synthesize(model, 0.7);
    const auto control = to_time_domain(model, result.schedule);
    const auto csv = control_to_csv(control);
    CHECK(csv.rfind("t_start,t_end,u\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4); // header + three intervals
    const auto json = control_to_json(control);
    CHECK(json.find("hold_theta") != std::string::npos);
    CHECK(json.find("total_duration") != std::string::npos);

    const auto run = simulate_phase(model, control);
    const auto run_csv = phase_run_to_csv(run);
    CHECK(run_csv.rfind("t,theta,p\n", 0) == 0);
    CHECK(std::count(run_csv.begin(), run_csv.end(), '\n') >= 10);
}
