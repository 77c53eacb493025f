#pragma once

#include <array>
#include <string>
#include <vector>

#include "spikeopt/schedule_sim.hpp"

namespace spikeopt::hh {

/// Standard squid-axon constants; i_b is the baseline current that puts the
/// model on its periodic firing branch.
struct HHParams {
    double c_m = 1.0;     // uF/cm^2
    double g_na = 120.0;  // mS/cm^2
    double g_k = 36.0;
    double g_l = 0.3;
    double e_na = 50.0;   // mV
    double e_k = -77.0;
    double e_l = -54.4;
    double i_b = 10.0;    // uA/cm^2
};

struct HHState {
    double v = -65.0; // mV
    double m = 0.0, h = 0.0, n = 0.0; // gating variables in [0, 1]
};

/// Right-hand side of the four-dimensional model with applied current
/// i_b + u. The voltage-dependent rate functions use series limits at their
/// removable singularities.
std::array<double, 4> hh_field(const HHParams& params, const HHState& state, double u);

/// Gating steady state at fixed voltage; used for initial conditions.
HHState gating_steady_state(double v);

struct SpikeTrain {
    std::vector<double> spike_times;          // ascending, ms
    std::vector<double> inter_spike_intervals; // consecutive differences
};

/// Spikes are upward crossings of V through 0 mV with dV/dt > 0; crossing
/// times refined by local interpolation. States must be the (V, m, h, n)
/// rows of an integrated trajectory.
SpikeTrain detect_spikes(const numerics::OdeTrajectory& trajectory);

/// Unforced inter-spike interval after transients, measured from a long run.
/// Throws NotOscillatoryError if the model does not fire repetitively.
double unforced_period(const HHParams& params);

/// Scalar root solve on i_b in [5, 20] uA/cm^2 so the unforced limit-cycle
/// period equals target_period within 0.01 ms. Results are memoized per
/// target. Throws NotOscillatoryError if the target is outside the range the
/// model can reach.
double calibrate_baseline(const HHParams& params_sans_ib, double target_period);

/// State on the limit cycle at the spike (V = 0 mV, rising); phase 0 anchors
/// here when controls are applied.
HHState limit_cycle_anchor(const HHParams& params);

/// Applies the time-domain control re-triggered at each detected spike for
/// n_cycles cycles, starting from the limit-cycle spike point. Throws
/// NoSpikeError if a cycle runs 10x the control duration without spiking.
SpikeTrain apply_control(const HHParams& params, const sim::TimeDomainControl& control,
                         int n_cycles);

/// |observed_ISI - phase_T|, ms.
double spike_time_error(double phase_T, double observed_isi);

/// Full-state trajectory under the control for one cycle from the limit-cycle
/// anchor; exposed for CSV export.
numerics::OdeTrajectory controlled_trajectory(const HHParams& params,
                                              const sim::TimeDomainControl& control,
                                              double t_max);

std::string trajectory_to_csv(const numerics::OdeTrajectory& trajectory,
                              const sim::TimeDomainControl& control);
std::string spike_train_to_json(const SpikeTrain& train);

} // namespace spikeopt::hh
