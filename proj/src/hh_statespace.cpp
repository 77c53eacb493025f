#include "spikeopt/hh_statespace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace spikeopt::hh {

namespace {

// x/(1 - exp(-x/s)) with the series limit at the removable singularity.
double vtrap(double x, double s) {
    const double denom = 1.0 - std::exp(-x / s);
    if (std::fabs(denom) < 1e-7)
        return s * (1.0 + x / (2.0 * s)); // x -> 0 limit of x/(1-e^{-x/s})
    return x / denom;
}

double alpha_m(double v) { return 0.1 * vtrap(v + 40.0, 10.0); }
double beta_m(double v) { return 4.0 * std::exp(-(v + 65.0) / 18.0); }
double alpha_h(double v) { return 0.07 * std::exp(-(v + 65.0) / 20.0); }
double beta_h(double v) { return 1.0 / (1.0 + std::exp(-(v + 35.0) / 10.0)); }
double alpha_n(double v) { return 0.01 * vtrap(v + 55.0, 10.0); }
double beta_n(double v) { return 0.125 * std::exp(-(v + 65.0) / 80.0); }

constexpr double kSpikeThreshold = 0.0; // mV, upward crossing marks phase 0

numerics::OdeField make_field(const HHParams& params, const sim::TimeDomainControl* control,
                              double t_offset) {
    return [params, control, t_offset](double t, std::span<const double> y,
                                       std::span<double> dy) {
        HHState s{y[0], std::clamp(y[1], 0.0, 1.0), std::clamp(y[2], 0.0, 1.0),
                  std::clamp(y[3], 0.0, 1.0)};
        const double u = control ? control->value_at(t - t_offset) : 0.0;
        const auto d = hh_field(params, s, u);
        std::copy(d.begin(), d.end(), dy.begin());
    };
}

numerics::OdeOptions ode_options(bool stop_at_spike) {
    numerics::OdeOptions opt;
    opt.rel_tol = numerics::tolerances().ode_rel;
    opt.abs_tol = 1e-8;
    opt.stop_at_event = stop_at_spike;
    opt.event_label = "spike";
    return opt;
}

// Voltage-peak detector: crosses upward where dV/dt turns negative above
// threshold. Phase 0 of the reduction sits at the peak, so controls are
// aligned here rather than at the 0 mV crossing.
numerics::OdeEventFn peak_event(const HHParams& params) {
    return [params](double, std::span<const double> y) {
        if (y[0] < kSpikeThreshold)
            return -1.0;
        const auto d = hh_field(params, {y[0], y[1], y[2], y[3]}, 0.0);
        return -d[0];
    };
}

} // namespace

std::array<double, 4> hh_field(const HHParams& params, const HHState& state, double u) {
    const double v = state.v;
    const double m = std::clamp(state.m, 0.0, 1.0);
    const double h = std::clamp(state.h, 0.0, 1.0);
    const double n = std::clamp(state.n, 0.0, 1.0);

    const double i_na = params.g_na * m * m * m * h * (v - params.e_na);
    const double i_k = params.g_k * n * n * n * n * (v - params.e_k);
    const double i_l = params.g_l * (v - params.e_l);

    return {(params.i_b + u - i_na - i_k - i_l) / params.c_m,
            alpha_m(v) * (1.0 - m) - beta_m(v) * m,
            alpha_h(v) * (1.0 - h) - beta_h(v) * h,
            alpha_n(v) * (1.0 - n) - beta_n(v) * n};
}

HHState gating_steady_state(double v) {
    HHState s;
    s.v = v;
    s.m = alpha_m(v) / (alpha_m(v) + beta_m(v));
    s.h = alpha_h(v) / (alpha_h(v) + beta_h(v));
    s.n = alpha_n(v) / (alpha_n(v) + beta_n(v));
    return s;
}

SpikeTrain detect_spikes(const numerics::OdeTrajectory& trajectory) {
    SpikeTrain train;
    for (std::size_t i = 1; i < trajectory.times.size(); ++i) {
        const double v_prev = trajectory.states[i - 1][0];
        const double v_curr = trajectory.states[i][0];
        if (v_prev < kSpikeThreshold && v_curr >= kSpikeThreshold && v_curr > v_prev) {
            const double frac = (kSpikeThreshold - v_prev) / (v_curr - v_prev);
            train.spike_times.push_back(trajectory.times[i - 1] +
                                        frac * (trajectory.times[i] - trajectory.times[i - 1]));
        }
    }
    for (std::size_t i = 1; i < train.spike_times.size(); ++i)
        train.inter_spike_intervals.push_back(train.spike_times[i] - train.spike_times[i - 1]);
    return train;
}

double unforced_period(const HHParams& params) {
    const HHState init = gating_steady_state(-65.0);
    auto traj = numerics::integrate_ode(make_field(params, nullptr, 0.0),
                                        {init.v, init.m, init.h, init.n}, {0.0, 220.0},
                                        ode_options(false));
    const SpikeTrain train = detect_spikes(traj);
    if (train.inter_spike_intervals.size() < 4)
        throw NotOscillatoryError("model does not fire repetitively at this baseline current");
    // transients decay quickly; average the last few intervals
    const std::size_t n = train.inter_spike_intervals.size();
    double acc = 0.0;
    for (std::size_t i = n - 3; i < n; ++i)
        acc += train.inter_spike_intervals[i];
    const double period = acc / 3.0;
    const double spread = std::fabs(train.inter_spike_intervals[n - 1] -
                                    train.inter_spike_intervals[n - 3]);
    if (spread > 0.05)
        throw NotOscillatoryError("inter-spike intervals have not settled");
    return period;
}

double calibrate_baseline(const HHParams& params_sans_ib, double target_period) {
    using Key = std::array<double, 8>;
    const Key key{params_sans_ib.c_m, params_sans_ib.g_na, params_sans_ib.g_k,
                  params_sans_ib.g_l, params_sans_ib.e_na, params_sans_ib.e_k,
                  params_sans_ib.e_l, target_period};
    static std::map<Key, double> cache;
    static std::mutex cache_mutex;
    {
        std::lock_guard lock(cache_mutex);
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
    }

    auto period_at = [&](double i_b) -> double {
        HHParams p = params_sans_ib;
        p.i_b = i_b;
        try {
            return unforced_period(p);
        } catch (const NotOscillatoryError&) {
            return -1.0;
        }
    };

    // Period decreases with baseline current; bracket the target on a coarse
    // grid of the admissible range, then bisect.
    constexpr double kLo = 5.0, kHi = 20.0;
    constexpr int kGrid = 16;
    double prev_ib = 0.0, prev_period = -1.0;
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    for (int i = 0; i <= kGrid; ++i) {
        const double i_b = kLo + (kHi - kLo) * i / kGrid;
        const double period = period_at(i_b);
        if (period > 0.0 && prev_period > 0.0 &&
            (period - target_period) * (prev_period - target_period) <= 0.0) {
            lo = prev_ib;
            hi = i_b;
            bracketed = true;
            break;
        }
        prev_ib = i_b;
        prev_period = period;
    }
    if (!bracketed)
        throw NotOscillatoryError("no baseline current in [5, 20] reaches the target period");

    for (int iter = 0; iter < 40; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double period = period_at(mid);
        if (period < 0.0)
            throw NotOscillatoryError("oscillation lost inside the calibration bracket");
        if (std::fabs(period - target_period) <= 0.005)
            break;
        const double p_lo = period_at(lo);
        if ((period - target_period) * (p_lo - target_period) <= 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo < 1e-6)
            break;
    }
    const double i_b = 0.5 * (lo + hi);
    const double achieved = period_at(i_b);
    if (std::fabs(achieved - target_period) > 0.01)
        throw NotOscillatoryError("calibration failed to meet the period tolerance");
    {
        std::lock_guard lock(cache_mutex);
        cache[key] = i_b;
    }
    return i_b;
}

HHState limit_cycle_anchor(const HHParams& params) {
    const HHState init = gating_steady_state(-65.0);
    // settle transients, then stop exactly on the next voltage peak
    auto settle = numerics::integrate_ode(make_field(params, nullptr, 0.0),
                                          {init.v, init.m, init.h, init.n}, {0.0, 150.0},
                                          ode_options(false));
    auto to_spike = numerics::integrate_ode(make_field(params, nullptr, 0.0),
                                            settle.final_state(), {150.0, 220.0},
                                            ode_options(true), peak_event(params));
    if (to_spike.events.empty())
        throw NotOscillatoryError("no spike found while anchoring the limit cycle");
    const auto& y = to_spike.final_state();
    return {y[0], y[1], y[2], y[3]};
}

SpikeTrain apply_control(const HHParams& params, const sim::TimeDomainControl& control,
                         int n_cycles) {
    if (n_cycles < 1)
        throw std::invalid_argument("apply_control requires n_cycles >= 1");

    HHState anchor = limit_cycle_anchor(params);
    SpikeTrain train;
    train.spike_times.push_back(0.0);
    double t_global = 0.0;

    for (int cycle = 0; cycle < n_cycles; ++cycle) {
        // Re-trigger the control at the spike: integrate interval by interval
        // so the integrator never straddles a control discontinuity.
        std::vector<double> y{anchor.v, anchor.m, anchor.h, anchor.n};
        double t_local = 0.0;
        bool spiked = false;
        const double deadline = 10.0 * std::max(control.total_duration, 1.0);

        // the cycle starts exactly on the voltage peak, so detections within
        // the first millisecond are re-detections of the anchoring spike
        const auto peak = peak_event(params);
        const auto guarded_spike = [&peak](double t, std::span<const double> yy) {
            return t < 1.0 ? -1.0 : peak(t, yy);
        };
        auto run_to = [&](double t_end, double u) -> bool {
            if (t_end - t_local <= 0.0)
                return false;
            auto traj = numerics::integrate_ode(
                [&](double, std::span<const double> yy, std::span<double> dy) {
                    HHState s{yy[0], yy[1], yy[2], yy[3]};
                    const auto d = hh_field(params, s, u);
                    std::copy(d.begin(), d.end(), dy.begin());
                },
                y, {t_local, t_end}, ode_options(true), guarded_spike);
            y = traj.final_state();
            t_local = traj.final_time();
            return !traj.events.empty();
        };

        for (std::size_t i = 0; i < control.values.size() && !spiked; ++i)
            spiked = run_to(control.breakpoints[i + 1], control.values[i]);
        if (!spiked)
            spiked = run_to(deadline, 0.0);
        if (!spiked)
            throw NoSpikeError("cycle exceeded 10x the control duration without spiking");

        t_global += t_local;
        train.spike_times.push_back(t_global);
        train.inter_spike_intervals.push_back(t_local);
        anchor = {y[0], y[1], y[2], y[3]};
    }
    return train;
}

double spike_time_error(double phase_T, double observed_isi) {
    if (!(phase_T > 0.0) || !(observed_isi > 0.0))
        throw std::invalid_argument("spike_time_error requires positive times");
    return std::fabs(observed_isi - phase_T);
}

numerics::OdeTrajectory controlled_trajectory(const HHParams& params,
                                              const sim::TimeDomainControl& control,
                                              double t_max) {
    const HHState anchor = limit_cycle_anchor(params);
    numerics::OdeTrajectory out;
    std::vector<double> y{anchor.v, anchor.m, anchor.h, anchor.n};
    out.times.push_back(0.0);
    out.states.push_back(y);
    double t = 0.0;

    auto run_to = [&](double t_end, double u) {
        if (t_end - t <= 0.0)
            return;
        auto traj = numerics::integrate_ode(
            [&](double, std::span<const double> yy, std::span<double> dy) {
                HHState s{yy[0], yy[1], yy[2], yy[3]};
                const auto d = hh_field(params, s, u);
                std::copy(d.begin(), d.end(), dy.begin());
            },
            y, {t, t_end}, ode_options(false));
        for (std::size_t i = 1; i < traj.times.size(); ++i) {
            out.times.push_back(traj.times[i]);
            out.states.push_back(traj.states[i]);
        }
        y = traj.final_state();
        t = traj.final_time();
    };

    for (std::size_t i = 0; i < control.values.size() && t < t_max; ++i)
        run_to(std::min(control.breakpoints[i + 1], t_max), control.values[i]);
    run_to(t_max, 0.0);
    return out;
}

std::string trajectory_to_csv(const numerics::OdeTrajectory& trajectory,
                              const sim::TimeDomainControl& control) {
    std::ostringstream out;
    out << "t,V,m,h,n,u\n";
    char buf[192];
    for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
        const auto& s = trajectory.states[i];
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      trajectory.times[i], s[0], s[1], s[2], s[3],
                      control.value_at(trajectory.times[i]));
        out << buf;
    }
    return out.str();
}

std::string spike_train_to_json(const SpikeTrain& train) {
    nlohmann::ordered_json j;
    j["spike_times"] = train.spike_times;
    j["inter_spike_intervals"] = train.inter_spike_intervals;
    return j.dump(2);
}

} // namespace spikeopt::hh
