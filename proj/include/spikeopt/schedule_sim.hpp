#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikeopt/synthesis.hpp"

namespace spikeopt::sim {

/// Piecewise-constant stimulus in time: values[i] applies on
/// [breakpoints[i], breakpoints[i+1]). holds[i], when set, marks a singular
/// hold pinning the phase at that angle for the interval.
struct TimeDomainControl {
    std::vector<double> breakpoints; // strictly ascending, first = 0
    std::vector<double> values;      // one per inter-breakpoint interval
    std::vector<std::optional<double>> holds;
    double total_duration = 0.0;

    double value_at(double t) const;
};

/// Converts a phase-indexed schedule to a time-domain stimulus: each bang
/// (or coast) segment's duration is the phase-traversal quadrature of
/// 1/(omega + u Z); holds are appended verbatim. Throws InfeasibleError if a
/// bang segment violates the positivity guard.
TimeDomainControl to_time_domain(const PhaseModel& model,
                                 const synthesis::ControlSchedule& schedule);

struct PhaseRun {
    numerics::OdeTrajectory trajectory; // states are (theta, p)
    double spike_time = 0.0;            // first time theta reaches 2*pi
    double final_charge = 0.0;          // p at the spike
};

/// Integrates dtheta/dt = omega + Z(theta) u(t) with charge accounting
/// p' = u. Holds pin theta analytically instead of integrating through the
/// stall. The spike event theta = 2*pi is located to the event tolerance;
/// if the control ends early the run continues with u = 0. Throws
/// NoSpikeError if theta fails to reach 2*pi within 10 natural periods past
/// the control.
PhaseRun simulate_phase(const PhaseModel& model, const TimeDomainControl& control,
                        double tol = numerics::tolerances().ode_rel);

/// CSV with one "t_start,t_end,u" row per interval.
std::string control_to_csv(const TimeDomainControl& control);
std::string control_to_json(const TimeDomainControl& control);

/// CSV with "t,theta,p" rows for plotting.
std::string phase_run_to_csv(const PhaseRun& run);

} // namespace spikeopt::sim
