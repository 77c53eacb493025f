#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spikeopt/numerics.hpp"

namespace spikeopt {

/// Analytic SNIPER phase response curve Z(theta) = z_d (1 - cos theta).
struct SniperPrc {
    double z_d = 1.0; // model-dependent gain, > 0
};

/// One term of a harmonic-series PRC: amplitude * sin(frequency*theta + phase).
/// The frequency multipliers need not be integers, so the series is evaluated
/// literally on [0, 2*pi] and never wrapped.
struct HarmonicTerm {
    double amplitude = 0.0;
    double frequency = 1.0; // > 0
    double phase = 0.0;
};

struct HarmonicPrc {
    std::vector<HarmonicTerm> terms;
};

using Prc = std::variant<SniperPrc, HarmonicPrc>;

/// Phase oscillator dtheta/dt = omega + Z(theta) u(t); a spike is the phase
/// reaching 2*pi.
struct PhaseModel {
    std::string name;
    double omega = 1.0; // natural frequency, rad/ms, > 0
    Prc prc;

    double natural_period() const;
};

/// Z, dZ/dtheta or d2Z/dtheta2 at theta, by closed-form term-by-term
/// differentiation. order must be 0, 1 or 2.
double prc_eval(const PhaseModel& model, double theta, int order = 0);

/// Zeros, critical points and monotone pieces of Z on [0, 2*pi].
struct PrcStructure {
    std::vector<double> zeros;                       // ascending, in [0, 2*pi]
    std::vector<double> critical_points;             // ascending, in (0, 2*pi)
    std::vector<numerics::Interval> monotone_segments; // partition of [0, 2*pi]
};

/// Grid-plus-refine structural analysis: sign changes of Z and dZ/dtheta on a
/// grid_n-point grid are refined by bracketed root finding; monotone segments
/// are the intervals between consecutive critical points. Endpoints and
/// critical points where |Z| falls below a small fraction of the PRC amplitude
/// count as (tangential) zeros.
PrcStructure analyze_structure(const PhaseModel& model, int grid_n = 4096);

/// The unique theta in the monotone segment with Z(theta) = alpha, or nullopt
/// if alpha lies outside Z's range there. Roots within 1e-9 of a segment
/// boundary are attributed to the boundary. Throws NotMonotoneError if Z is
/// not strictly monotone on the segment.
std::optional<double> invert_prc(const PhaseModel& model, double alpha,
                                 numerics::Interval segment);

/// Exact min/max of Z over a sub-interval of [0, 2*pi], using the structure's
/// critical points (candidates are the endpoints plus interior critical points).
std::pair<double, double> prc_range(const PhaseModel& model, const PrcStructure& structure,
                                    numerics::Interval iv);

// ---------------------------------------------------------------------------
// Harmonic least-squares fitting
// ---------------------------------------------------------------------------

struct FitOptions {
    int max_iterations = 400;
    double frequency_max = 16.0; // upper end of the frequency scan
    double rms_bound = -1.0;     // throw IllConditionedError above this; < 0 disables
};

struct FitResult {
    HarmonicPrc prc;
    double rms = 0.0;
    int iterations = 0;
};

/// Nonlinear least squares over (amplitude, frequency, phase) triplets:
/// terms are seeded one at a time from a frequency scan of the running
/// residual, then polished jointly by damped Gauss-Newton. Best-effort; with
/// a non-negative rms_bound, stalling above it raises IllConditionedError.
FitResult fit_harmonics(std::span<const std::pair<double, double>> samples, int n_terms,
                        const FitOptions& opts = {});

// ---------------------------------------------------------------------------
// Model catalog
// ---------------------------------------------------------------------------

/// Built-in models: sniper (z_d=1, omega=1), hodgkin_huxley (omega=0.43,
/// eight-term harmonic PRC), morris_lecar (omega=0.283, eight-term PRC).
const std::vector<PhaseModel>& builtin_models();

/// Look up a built-in model by name; throws MissingInputError if unknown.
const PhaseModel& builtin_model(const std::string& name);

/// JSON (de)serialization of a single catalog entry:
/// {"name":..., "omega":..., "prc":{"kind":"sniper","z_d":...}} or
/// {"name":..., "omega":..., "prc":{"kind":"harmonic","terms":[[a,b,c],...]}}.
std::string model_to_json(const PhaseModel& model);
PhaseModel model_from_json(const std::string& text);

/// Load every entry of a catalog file (JSON array of entries).
std::vector<PhaseModel> load_catalog(const std::string& path);

} // namespace spikeopt
