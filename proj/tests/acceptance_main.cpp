// Acceptance suite: one pass/fail line per criterion, exit status = number of
// failures. Run all criteria with no arguments or a single one with
// --criterion N.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "spikeopt/hh_statespace.hpp"
#include "spikeopt/schedule_sim.hpp"
#include "spikeopt/sweep.hpp"
#include "spikeopt/synthesis.hpp"

using namespace spikeopt;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty())
                detail += "; ";
            detail += what;
        }
    }

    void note(const std::string& what) {
        if (!detail.empty())
            detail += "; ";
        detail += what;
    }
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

PhaseModel sniper1() {
    return {"sniper", 1.0, SniperPrc{1.0}};
}

// --------------------------------------------------------------------------
// 1. Natural period: phase model T0 = 2*pi/0.43 by quadrature and by
//    simulation; calibrated state-space ISI = 14.64 +/- 0.02 ms.
// --------------------------------------------------------------------------
Check criterion_natural_period() {
    Check c;
    const auto& hh_model = builtin_model("hodgkin_huxley");
    const double t0_exact = kTwoPi / 0.43;

    synthesis::BangWordSpec empty{+1, {}};
    const double t0_quad = synthesis::predicted_time(hh_model, 0.0, empty, 0.0);
    c.require(std::fabs(t0_quad - t0_exact) < 1e-9,
              "quadrature T0 " + fmt(t0_quad) + " != " + fmt(t0_exact));

    const auto degenerate = synthesis::min_time_synthesize(hh_model, 0.0);
    const auto control = sim::to_time_domain(hh_model, degenerate.schedule);
    const auto run = sim::simulate_phase(hh_model, control);
    c.require(std::fabs(run.spike_time - t0_exact) < 1e-5 * t0_exact,
              "simulated T0 " + fmt(run.spike_time));

    hh::HHParams params;
    params.i_b = hh::calibrate_baseline(params, sweep::kCalibrationTargetMs);
    const double isi = hh::unforced_period(params);
    c.require(std::fabs(isi - 14.64) < 0.02, "state-space ISI " + fmt(isi));
    c.note("T0=" + fmt(t0_quad) + " ms, state ISI=" + fmt(isi) + " ms");
    return c;
}

// --------------------------------------------------------------------------
// 2. HH phase-model extremes at M=0.7: 13.5 and 16.37 ms within 0.1 ms.
// --------------------------------------------------------------------------
Check criterion_hh_phase_extremes() {
    Check c;
    const auto& hh_model = builtin_model("hodgkin_huxley");
    const auto min_result = synthesis::min_time_synthesize(hh_model, 0.7);
    const auto max_result = synthesis::max_time_synthesize(hh_model, 0.7);
    c.require(std::fabs(min_result.predicted_T - 13.5) <= 0.1,
              "min T " + fmt(min_result.predicted_T));
    c.require(std::fabs(max_result.predicted_T - 16.37) <= 0.1,
              "max T " + fmt(max_result.predicted_T));
    c.note("min=" + fmt(min_result.predicted_T) + " ms (" +
           synthesis::word_string(min_result.word) + "), max=" +
           fmt(max_result.predicted_T) + " ms (" + synthesis::word_string(max_result.word) +
           ")");
    return c;
}

// --------------------------------------------------------------------------
// 3. HH state-space validation at M=0.7: ISI 13.65 and 17.13 ms within 0.3.
// --------------------------------------------------------------------------
Check criterion_hh_statespace_validation() {
    Check c;
    const auto& hh_model = builtin_model("hodgkin_huxley");
    hh::HHParams params;
    params.i_b = hh::calibrate_baseline(params, sweep::kCalibrationTargetMs);

    const auto min_result = synthesis::min_time_synthesize(hh_model, 0.7);
    const auto min_train =
        hh::apply_control(params, sim::to_time_domain(hh_model, min_result.schedule), 4);
    const double min_isi = sweep::representative_isi(min_train);
    c.require(std::fabs(min_isi - 13.65) <= 0.3, "min ISI " + fmt(min_isi));

    const auto max_result = synthesis::max_time_synthesize(hh_model, 0.7);
    const auto max_train =
        hh::apply_control(params, sim::to_time_domain(hh_model, max_result.schedule), 4);
    const double max_isi = sweep::representative_isi(max_train);
    c.require(std::fabs(max_isi - 17.13) <= 0.3, "max ISI " + fmt(max_isi));
    c.note("min ISI=" + fmt(min_isi) + " ms, max ISI=" + fmt(max_isi) + " ms");
    return c;
}

// --------------------------------------------------------------------------
// 4. SNIPER closed-form equivalence: the generic synthesis reproduces the
//    charge-balance root gamma, the XYX word and the symmetric-time formula
//    within 1e-6 relative; the max-time dwell satisfies t2 = 4 M z_d t1 /
//    omega to 1e-10.
// --------------------------------------------------------------------------
Check criterion_sniper_closed_form() {
    Check c;
    const auto model = sniper1();
    const double M = 0.7;

    // closed-form route: solve R(M, gamma) = 0 directly from the two analytic
    // integrands, then T = integral of 4/(omega - z_d(1-cos)M) over [0,gamma]
    auto x_int = [&](double lo, double hi) {
        return numerics::integrate_adaptive(
                   [&](double t) { return 1.0 / (1.0 - (1.0 - std::cos(t)) * M); }, {lo, hi},
                   1e-13)
            .value;
    };
    auto y_int = [&](double lo, double hi) {
        return numerics::integrate_adaptive(
                   [&](double t) { return 1.0 / (1.0 + (1.0 - std::cos(t)) * M); }, {lo, hi},
                   1e-13)
            .value;
    };
    const double gamma = numerics::find_root_bracketed(
        [&](double g) { return -M * x_int(1e-12, g) + M * y_int(g, kPi); }, {0.05, 1.9}, 1e-13);
    const double t_closed = 4.0 * x_int(1e-12, gamma);

    const auto result = synthesis::min_time_synthesize(model, M);
    c.require(synthesis::word_string(result.word) == "XYX", "word not XYX");
    c.require(result.switch_angles.size() == 2, "switch count");
    if (result.switch_angles.size() == 2) {
        c.require(std::fabs(result.switch_angles[0] - gamma) <= 1e-6 * gamma,
                  "gamma " + fmt(result.switch_angles[0]) + " vs " + fmt(gamma));
        c.require(std::fabs(result.switch_angles[1] - (kTwoPi - gamma)) <= 1e-6 * kTwoPi,
                  "second switch");
    }
    c.require(std::fabs(result.predicted_T - t_closed) <= 1e-6 * t_closed,
              "T " + fmt(result.predicted_T) + " vs closed form " + fmt(t_closed));

    const auto max_result = synthesis::max_time_synthesize(model, M);
    c.require(synthesis::word_string(max_result.word) == "Y-S-Y", "max word not Y-S-Y");
    if (max_result.schedule.segments.size() == 3) {
        const double t1 = max_result.schedule.segments[0].duration;
        const double t2 = max_result.schedule.segments[1].duration;
        c.require(std::fabs(t2 - 4.0 * M * t1) <= 1e-10, "dwell relation |t2-4Mt1|");
    } else {
        c.require(false, "max segment count");
    }
    c.note("gamma=" + fmt(gamma) + ", T_min=" + fmt(result.predicted_T) + " ms, T_max=" +
           fmt(max_result.predicted_T) + " ms");
    return c;
}

// --------------------------------------------------------------------------
// 5. Singular catalog: HH u_s values and locations within 0.02; SNIPER
//    admissibility threshold omega/(2 z_d) = 0.5 exactly, with the max-time
//    structure switching from bang-bang (M=0.4) to bang-singular-bang (M=0.7).
// --------------------------------------------------------------------------
Check criterion_singular_catalog() {
    Check c;
    const auto& hh_model = builtin_model("hodgkin_huxley");
    const auto pts = synthesis::singular_points(hh_model, 3.0);
    bool first_ok = false, second_ok = false;
    for (const auto& sp : pts) {
        if (std::fabs(sp.theta_s - 3.34) <= 0.02 && std::fabs(sp.u_s - 3.50) <= 0.02)
            first_ok = true;
        if (std::fabs(sp.theta_s - 4.58) <= 0.02 && std::fabs(sp.u_s + 2.15) <= 0.02)
            second_ok = true;
    }
    c.require(first_ok, "u_s1=3.50 at 3.34 not found");
    c.require(second_ok, "u_s2=-2.15 at 4.58 not found");

    const auto model = sniper1();
    const auto at_threshold = synthesis::singular_points(model, 0.5);
    c.require(at_threshold.size() == 1 && at_threshold[0].admissible &&
                  std::fabs(at_threshold[0].u_s + 0.5) < 1e-12,
              "threshold admissibility at M=0.5");
    const auto below = synthesis::singular_points(model, 0.5 - 1e-9);
    c.require(!below[0].admissible, "admissible below threshold");

    const auto bb = synthesis::max_time_synthesize(model, 0.4);
    const auto bsb = synthesis::max_time_synthesize(model, 0.7);
    c.require(synthesis::word_string(bb.word) == "YXY", "M=0.4 structure");
    c.require(synthesis::word_string(bsb.word) == "Y-S-Y", "M=0.7 structure");
    c.note("HH singular controls confirmed; SNIPER switches structure at M=0.5");
    return c;
}

// --------------------------------------------------------------------------
// 6. Property suite over all models on 10-point M grids.
// --------------------------------------------------------------------------
Check criterion_property_suite() {
    Check c;
    struct Grid {
        const char* name;
        double lo, hi;
    };
    const Grid grids[] = {{"sniper", 0.08, 0.8},
                          {"hodgkin_huxley", 0.25, 2.5},
                          {"morris_lecar", 0.001, 0.01}};
    for (const auto& g : grids) {
        const auto& model = builtin_model(g.name);
        const double t0 = model.natural_period();
        double prev_min = 1e300, prev_max = 0.0;
        for (int i = 0; i < 10; ++i) {
            const double m = g.lo + (g.hi - g.lo) * i / 9;
            const std::string tag = std::string(g.name) + " M=" + fmt(m);
            synthesis::SynthesisResult results[2] = {synthesis::min_time_synthesize(model, m),
                                                     synthesis::max_time_synthesize(model, m)};
            for (const auto& r : results) {
                c.require(std::fabs(r.schedule.net_charge()) <= 1e-8 * m * r.predicted_T,
                          tag + " charge residual");
                for (double s : r.switch_angles)
                    c.require(std::fabs(prc_eval(model, s, 0) - r.alpha) <= 1e-8,
                              tag + " switch level set");
                c.require(r.pmp_report.all_ok(), tag + " pmp checks");
                const auto run = sim::simulate_phase(model, sim::to_time_domain(model, r.schedule));
                c.require(std::fabs(run.spike_time - r.predicted_T) <= 1e-5 * t0,
                          tag + " simulation agreement");
            }
            c.require(results[0].predicted_T <= t0 && t0 <= results[1].predicted_T,
                      tag + " ordering");
            c.require(results[0].predicted_T <= prev_min + 1e-9, tag + " min monotonicity");
            c.require(results[1].predicted_T >= prev_max - 1e-9, tag + " max monotonicity");
            prev_min = results[0].predicted_T;
            prev_max = results[1].predicted_T;
        }
    }
    c.note("3 models x 10 amplitudes x {min,max}");
    return c;
}

// --------------------------------------------------------------------------
// 7. Brute-force oracle: a 1e-3 rad grid over the two switch angles of the
//    SNIPER M=0.7 bang-bang words finds nothing faster than the synthesized
//    minimum (beyond grid resolution).
// --------------------------------------------------------------------------
Check criterion_brute_force_oracle() {
    Check c;
    const auto model = sniper1();
    const double M = 0.7;
    const auto result = synthesis::min_time_synthesize(model, M);

    // The X field 1 - M(1-cos) is positive only outside the stall window
    // (theta_stall, 2pi - theta_stall); by the symmetry of the PRC about pi,
    // every valid X arc maps onto [0, theta_stall), so one cumulative table
    // over that range covers them all. Y arcs get a full-range table.
    const double theta_stall = std::acos(1.0 - 1.0 / M);
    const double x_edge = theta_stall - 1e-3;
    const double inf = 1e18;
    const int n = 400000;
    const double hx = x_edge / n;
    const double hy = kTwoPi / n;
    std::vector<double> cum_x(n + 1, 0.0), cum_y(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
        auto fx = [&](double t) { return 1.0 / (1.0 - M * (1.0 - std::cos(t))); };
        auto fy = [&](double t) { return 1.0 / (1.0 + M * (1.0 - std::cos(t))); };
        cum_x[i] = cum_x[i - 1] + 0.5 * hx * (fx((i - 1) * hx) + fx(i * hx));
        cum_y[i] = cum_y[i - 1] + 0.5 * hy * (fy((i - 1) * hy) + fy(i * hy));
    }
    auto interp = [n](const std::vector<double>& cum, double x) {
        const int i = std::min(n - 1, std::max(0, static_cast<int>(x)));
        return cum[i] + (cum[i + 1] - cum[i]) * (x - i);
    };
    auto x_left = [&](double t) { return interp(cum_x, t / hx); };
    auto x_time = [&](double a, double b) -> double {
        if (a >= b)
            return 0.0;
        if (b <= x_edge)
            return x_left(b) - x_left(a);
        if (a >= kTwoPi - x_edge)
            return x_left(kTwoPi - a) - x_left(kTwoPi - b);
        return inf;
    };
    auto y_time = [&](double a, double b) {
        return a >= b ? 0.0 : interp(cum_y, b / hy) - interp(cum_y, a / hy);
    };

    // Literal two-parameter grid search with charge-balance filtering over
    // both two-switch bang-bang words.
    const double step = 1e-3;
    const double charge_tol = 2e-3;
    const int grid_n = static_cast<int>(kTwoPi / step);
    double best_t = inf;
    for (int word = 0; word < 2; ++word) {
        for (int i = 1; i < grid_n; ++i) {
            const double th1 = i * step;
            const double lead =
                word == 0 ? -M * x_time(0, th1) : M * y_time(0, th1);
            if (std::fabs(lead) >= inf / 2)
                continue;
            for (int j = i + 1; j < grid_n; ++j) {
                const double th2 = j * step;
                double charge, total;
                if (word == 0) { // XYX
                    const double tail = x_time(th2, kTwoPi);
                    if (tail >= inf / 2)
                        continue;
                    const double mid = y_time(th1, th2);
                    charge = lead + M * mid - M * tail;
                    total = -lead / M + mid + tail;
                } else { // YXY
                    const double mid = x_time(th1, th2);
                    if (mid >= inf / 2)
                        continue;
                    const double tail = y_time(th2, kTwoPi);
                    charge = lead - M * mid + M * tail;
                    total = lead / M + mid + tail;
                }
                if (std::fabs(charge) <= charge_tol)
                    best_t = std::min(best_t, total);
            }
        }
    }
    c.require(best_t < inf / 2, "grid search found no charge-balanced schedule");
    c.require(best_t >= result.predicted_T - 0.01,
              "grid found faster schedule: " + fmt(best_t) + " vs " + fmt(result.predicted_T));
    c.require(std::fabs(best_t - result.predicted_T) < 0.01,
              "grid optimum " + fmt(best_t) + " does not match synthesis");
    c.note("grid best T=" + fmt(best_t) + " ms vs synthesized " + fmt(result.predicted_T) +
           " ms");
    return c;
}

// --------------------------------------------------------------------------
// 8. Weak-forcing trend: the phase-vs-state absolute error of the min-time
//    control is monotone non-increasing as M drops through
//    {0.7, 0.5, 0.3, 0.1}, with 0.05 ms measurement slack.
// --------------------------------------------------------------------------
Check criterion_weak_forcing_trend() {
    Check c;
    const auto& hh_model = builtin_model("hodgkin_huxley");
    hh::HHParams params;
    params.i_b = hh::calibrate_baseline(params, sweep::kCalibrationTargetMs);

    const double amplitudes[] = {0.7, 0.5, 0.3, 0.1};
    std::vector<double> errors;
    std::string series;
    for (double m : amplitudes) {
        const auto result = synthesis::min_time_synthesize(hh_model, m);
        const auto train =
            hh::apply_control(params, sim::to_time_domain(hh_model, result.schedule), 4);
        const double err =
            hh::spike_time_error(result.predicted_T, sweep::representative_isi(train));
        errors.push_back(err);
        series += (series.empty() ? "" : ", ") + fmt(err);
    }
    for (std::size_t i = 1; i < errors.size(); ++i)
        c.require(errors[i] <= errors[i - 1] + 0.05,
                  "error rose from M=" + fmt(amplitudes[i - 1]) + " to M=" +
                      fmt(amplitudes[i]));
    c.note("abs errors (ms) at M=0.7,0.5,0.3,0.1: " + series);
    return c;
}

struct Criterion {
    const char* name;
    std::function<Check()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"natural period", criterion_natural_period},
        {"HH phase-model extremes at M=0.7", criterion_hh_phase_extremes},
        {"HH state-space validation at M=0.7", criterion_hh_statespace_validation},
        {"SNIPER closed-form equivalence", criterion_sniper_closed_form},
        {"singular catalog", criterion_singular_catalog},
        {"property suite", criterion_property_suite},
        {"brute-force oracle", criterion_brute_force_oracle},
        {"weak-forcing trend", criterion_weak_forcing_trend},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            only = std::atoi(argv[i + 1]);
    }

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (only != 0 && only != number)
            continue;
        Check result;
        try {
            result = criteria[i].run();
        } catch (const std::exception& e) {
            result.ok = false;
            result.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s%s%s\n", result.ok ? "PASS" : "FAIL", number,
                    criteria[i].name, result.detail.empty() ? "" : " -- ",
                    result.detail.c_str());
        std::fflush(stdout);
        if (!result.ok)
            ++failures;
    }
    return failures;
}
