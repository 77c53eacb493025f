#include "spikeopt/schedule_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace spikeopt::sim {

using numerics::Interval;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt12(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

} // namespace

double TimeDomainControl::value_at(double t) const {
    if (t < 0.0 || values.empty() || t >= total_duration)
        return 0.0;
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - breakpoints.begin());
    if (idx == 0 || idx > values.size())
        return 0.0;
    return values[idx - 1];
}

TimeDomainControl to_time_domain(const PhaseModel& model,
                                 const synthesis::ControlSchedule& schedule) {
    const double tol = std::min(numerics::tolerances().quad_abs, 1e-11);
    TimeDomainControl control;
    control.breakpoints.push_back(0.0);
    double t = 0.0;
    for (const auto& seg : schedule.segments) {
        double duration;
        if (seg.phase_span) {
            if (seg.phase_span->width() <= 0.0)
                continue;
            // re-derive the duration from the phase traversal quadrature
            double worst = model.omega;
            constexpr int kProbes = 256;
            for (int i = 0; i <= kProbes; ++i) {
                const double theta =
                    seg.phase_span->lo + seg.phase_span->width() * i / kProbes;
                worst = std::min(worst, model.omega + seg.u * prc_eval(model, theta, 0));
            }
            if (worst <= 1e-9)
                throw InfeasibleError("bang segment stalls or reverses the phase");
            duration = numerics::integrate_adaptive(
                           [&](double theta) {
                               return 1.0 / (model.omega + seg.u * prc_eval(model, theta, 0));
                           },
                           *seg.phase_span, tol)
                           .value;
        } else {
            duration = seg.duration;
        }
        if (duration <= 0.0)
            continue;
        t += duration;
        control.breakpoints.push_back(t);
        control.values.push_back(seg.u);
        control.holds.push_back(seg.hold_theta);
    }
    control.total_duration = t;
    return control;
}

PhaseRun simulate_phase(const PhaseModel& model, const TimeDomainControl& control, double tol) {
    if (!(tol > 0.0))
        throw std::invalid_argument("simulate_phase requires tol > 0");

    PhaseRun run;
    run.trajectory.times.push_back(0.0);
    run.trajectory.states.push_back({0.0, 0.0});

    // Singular holds stall on purpose; everything else must spike within ten
    // natural periods.
    double hold_time = 0.0;
    for (std::size_t i = 0; i < control.values.size(); ++i)
        if (control.holds[i])
            hold_time += control.breakpoints[i + 1] - control.breakpoints[i];
    const double deadline = 10.0 * model.natural_period() + hold_time;

    double t = 0.0, theta = 0.0, p = 0.0;

    auto integrate_interval = [&](double t_end, double u) -> bool {
        // dtheta/dt = omega + Z(theta) u on [t, t_end]; p advances linearly.
        if (t_end - t <= 0.0)
            return false;
        numerics::OdeOptions opt;
        opt.rel_tol = tol;
        opt.abs_tol = 1e-2 * tol;
        opt.stop_at_event = true;
        opt.event_label = "spike";
        const double t_start = t, p_start = p;
        auto traj = numerics::integrate_ode(
            [&](double, std::span<const double> y, std::span<double> dy) {
                dy[0] = model.omega + prc_eval(model, y[0], 0) * u;
            },
            {theta}, {t, t_end}, opt,
            [](double, std::span<const double> y) { return y[0] - kTwoPi; });
        for (std::size_t i = 1; i < traj.times.size(); ++i) {
            run.trajectory.times.push_back(traj.times[i]);
            run.trajectory.states.push_back(
                {traj.states[i][0], p_start + u * (traj.times[i] - t_start)});
        }
        t = run.trajectory.times.back();
        theta = run.trajectory.states.back()[0];
        p = run.trajectory.states.back()[1];
        if (!traj.events.empty()) {
            run.spike_time = traj.events.front().time;
            run.final_charge = p_start + u * (run.spike_time - t_start);
            run.trajectory.events.push_back({run.spike_time, "spike"});
            return true;
        }
        return false;
    };

    for (std::size_t i = 0; i < control.values.size(); ++i) {
        const double t_end = control.breakpoints[i + 1];
        if (control.holds[i]) {
            // singular hold: the field is zero by construction, pin the phase
            p += control.values[i] * (t_end - t);
            t = t_end;
            run.trajectory.times.push_back(t);
            run.trajectory.states.push_back({theta, p});
            continue;
        }
        if (integrate_interval(std::min(t_end, deadline), control.values[i]))
            return run;
        if (t >= deadline)
            throw NoSpikeError("phase failed to reach 2*pi within ten natural periods");
    }

    // control exhausted without a spike: free-run at u = 0
    if (integrate_interval(deadline, 0.0))
        return run;
    throw NoSpikeError("phase failed to reach 2*pi within ten natural periods");
}

std::string control_to_csv(const TimeDomainControl& control) {
    std::ostringstream out;
    out << "t_start,t_end,u\n";
    for (std::size_t i = 0; i < control.values.size(); ++i)
        out << fmt12(control.breakpoints[i]) << ',' << fmt12(control.breakpoints[i + 1]) << ','
            << fmt12(control.values[i]) << '\n';
    return out.str();
}

std::string control_to_json(const TimeDomainControl& control) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json intervals = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < control.values.size(); ++i) {
        nlohmann::ordered_json row;
        row["t_start"] = control.breakpoints[i];
        row["t_end"] = control.breakpoints[i + 1];
        row["u"] = control.values[i];
        if (control.holds[i])
            row["hold_theta"] = *control.holds[i];
        intervals.push_back(row);
    }
    j["intervals"] = intervals;
    j["total_duration"] = control.total_duration;
    return j.dump(2);
}

std::string phase_run_to_csv(const PhaseRun& run) {
    std::ostringstream out;
    out << "t,theta,p\n";
    for (std::size_t i = 0; i < run.trajectory.times.size(); ++i)
        out << fmt12(run.trajectory.times[i]) << ',' << fmt12(run.trajectory.states[i][0]) << ','
            << fmt12(run.trajectory.states[i][1]) << '\n';
    return out.str();
}

} // namespace spikeopt::sim
