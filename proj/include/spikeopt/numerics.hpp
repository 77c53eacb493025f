#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spikeopt/errors.hpp"

namespace spikeopt::numerics {

/// Closed interval [lo, hi] with lo < hi, both finite.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Throws std::invalid_argument unless lo < hi and both are finite.
void validate(const Interval& iv);

/// Library-wide default tolerances. SPIKEOPT_TOL (read by the CLI) and
/// tests may adjust these before any computation starts; individual calls
/// can always pass explicit tolerances instead.
struct Tolerances {
    double quad_abs = 1e-10;      // absolute quadrature tolerance
    double root = 1e-10;          // root residual tolerance
    double ode_rel = 1e-8;        // ODE relative tolerance
    double ode_abs = 1e-10;       // ODE absolute tolerance floor
    double event_time = 1e-9;     // event location tolerance, ms
    std::size_t budget = 1000000; // function evaluations per quadrature/root call
};

Tolerances& tolerances();

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

struct QuadResult {
    double value = 0.0;
    double err_estimate = 0.0;
    std::size_t evaluations = 0;
};

/// Adaptive bisection quadrature with an embedded Gauss(7)/Kronrod(15) pair.
/// Tolerance is absolute over the whole interval. Throws NonFiniteError if
/// the integrand returns a non-finite value, NoConvergenceError if the
/// evaluation budget runs out before the tolerance is met.
QuadResult integrate_adaptive(const std::function<double(double)>& f, Interval iv,
                              double tol = tolerances().quad_abs);

// ---------------------------------------------------------------------------
// Bracketed scalar root finding
// ---------------------------------------------------------------------------

/// Bisection-safeguarded secant iteration on a sign-change bracket.
/// Polishes the bracket down to machine width unless |f| <= tol first, so
/// returned roots carry residuals far below tol for smooth functions.
/// Throws NoSignChangeError if f(lo) and f(hi) have the same sign.
double find_root_bracketed(const std::function<double(double)>& f, Interval iv,
                           double tol = tolerances().root);

// ---------------------------------------------------------------------------
// Adaptive ODE integration with event detection
// ---------------------------------------------------------------------------

struct OdeEvent {
    double time = 0.0;
    std::string label;
};

struct OdeTrajectory {
    std::vector<double> times;               // strictly ascending
    std::vector<std::vector<double>> states; // same length as times
    std::vector<OdeEvent> events;

    const std::vector<double>& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }
};

using OdeField = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;
using OdeEventFn = std::function<double(double t, std::span<const double> y)>;

struct OdeOptions {
    double rel_tol = tolerances().ode_rel;
    double abs_tol = tolerances().ode_abs;
    double event_time_tol = tolerances().event_time;
    bool stop_at_event = false;
    std::string event_label = "event";
    std::size_t max_steps = 10000000;
};

/// Dormand-Prince 5(4) embedded pair with adaptive steps. Each upward zero
/// crossing of the event function is located by bisection over the bracketing
/// step and recorded; with stop_at_event the trajectory is truncated at the
/// first crossing. Throws StepUnderflowError if the step collapses and
/// NonFiniteError if the field diverges.
OdeTrajectory integrate_ode(const OdeField& field, std::vector<double> y0, Interval span,
                            const OdeOptions& opt = {}, const OdeEventFn& event = nullptr);

} // namespace spikeopt::numerics
