#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikeopt/phase_model.hpp"

namespace spikeopt::synthesis {

enum class Objective { MinTime, MaxTime };

/// A point where dZ/dtheta = 0 together with the control u_s = -omega/Z that
/// stalls the phase there. admissible means |u_s| <= M; reachable means the
/// charge-compatible entry bang (sign opposite to u_s) keeps the phase moving
/// forward all the way from 0 to theta_s and on to 2*pi.
struct SingularPoint {
    double theta_s = 0.0;
    double u_s = 0.0;
    bool admissible = false;
    bool reachable = false;
};

std::vector<SingularPoint> singular_points(const PhaseModel& model, double M);

/// One tag of a control word: a bang arc at +/-M, a singular hold, or a
/// zero-control coast (used only when realizing an unbounded-delay schedule
/// through a region no bang can traverse).
struct WordTag {
    enum class Kind { Bang, Hold, Coast } kind = Kind::Bang;
    int sign = +1;          // bang sign; Y = +1, X = -1
    double theta_s = 0.0;   // hold location, Kind::Hold only
};

using TrajectoryWord = std::vector<WordTag>;

/// Compact display form: "XYX", "Y-S-Y", "X-S-O-S-Y", ...
std::string word_string(const TrajectoryWord& word);

/// A candidate bang-bang word identified by its initial control sign and the
/// monotone segments (indices into PrcStructure::monotone_segments) that each
/// carry exactly one switch.
struct BangWordSpec {
    int initial_sign = +1;
    std::vector<int> switch_segments;
};

/// Net charge of the bang word whose switch angles are the inversions of
/// alpha on the designated segments (so every switch sits on the level set
/// Z = alpha). Throws NoSwitchAngleError if alpha misses a segment range and
/// InfeasibleError if a bang arc would stall or reverse the phase.
double charge_residual(const PhaseModel& model, const PrcStructure& structure, double M,
                       const BangWordSpec& word, double alpha);

/// Convenience overload computing the structure internally.
double charge_residual(const PhaseModel& model, double M, const BangWordSpec& word,
                       double alpha);

/// Total time for the phase to traverse [0, 2*pi] under the bang word with
/// switch level alpha. A degenerate word (no switches) under u = 0 gives the
/// natural period.
double predicted_time(const PhaseModel& model, const PrcStructure& structure, double M,
                      const BangWordSpec& word, double alpha);
double predicted_time(const PhaseModel& model, double M, const BangWordSpec& word, double alpha);

/// Tag-level overload: a word with one SingularHold gets its dwell from the
/// charge-balance rule t_hold = |(sum of bang durations) * M / u_s|; a
/// bang-only word switches at every crossing of the level alpha (their count
/// must match the word). Throws NoSwitchAngleError on a crossing-count
/// mismatch.
double predicted_time(const PhaseModel& model, double M, const TrajectoryWord& word,
                      double alpha);

/// One segment of a synthesized schedule: a phase span traversed under
/// constant u (bang or coast), or a hold (no span) pinning the phase at
/// hold_theta.
struct ScheduleSegment {
    std::optional<numerics::Interval> phase_span;
    double u = 0.0;
    double duration = 0.0;
    std::optional<double> hold_theta;
};

struct ControlSchedule {
    std::vector<ScheduleSegment> segments;
    double total_time = 0.0;

    double net_charge() const;
};

/// Pontryagin-condition diagnostics for a synthesized result.
struct PmpReport {
    bool vacuous = false;            // no switches to check (degenerate schedule)
    bool interior_sign_ok = false;   // (a) bang value matches sign of phi
    bool switch_phi_ok = false;      // (b) |phi| small at every switch angle
    bool switch_direction_ok = false;// (c) sign of dphi/dt matches switch type
    double worst_interior_margin = 0.0; // min over samples of sign-corrected phi
    double worst_switch_phi = 0.0;      // max |phi| over switch angles
    double hold_residual = 0.0;         // max |omega + u_s Z| over holds

    bool all_ok() const {
        return vacuous || (interior_sign_ok && switch_phi_ok && switch_direction_ok);
    }
};

struct SynthesisResult {
    PhaseModel model;
    double M = 0.0;
    Objective objective = Objective::MinTime;
    ControlSchedule schedule;
    TrajectoryWord word;
    std::vector<double> switch_angles;
    double alpha = 0.0;          // switch level Z(theta_i) = alpha = lambda_2 * omega
    double predicted_T = 0.0;    // ms
    double charge_residual = 0.0;
    PmpReport pmp_report;
    bool unbounded_delay = false; // both singular control signs admissible
};

/// Charge-balanced minimum-time control (bang-bang): enumerates the candidate
/// words allowed by the switch-type rule (X->Y where dZ/dtheta > 0, Y->X
/// where dZ/dtheta < 0), solves the scalar charge-balance equation in alpha
/// for each, and returns the fastest feasible solution. M = 0 yields the
/// degenerate no-switch schedule. Throws NoFeasibleWordError when no word
/// admits a charge-balanced solution.
SynthesisResult min_time_synthesize(const PhaseModel& model, double M);

/// Charge-balanced maximum-time control. Without an admissible singular point
/// the synthesis is bang-bang with the reversed switch rule; with one it is
/// bang-singular-bang, the dwell set by charge balance. When singular controls
/// of both signs are admissible the delay is unbounded: the result is only
/// constructed against target_delay (total time, ms) and carries the
/// unbounded_delay flag; without a target, throws TargetRequiredError.
SynthesisResult max_time_synthesize(const PhaseModel& model, double M,
                                    std::optional<double> target_delay = std::nullopt);

/// Evaluates the maximum-principle conditions along a synthesized result:
/// lambda_1(theta) = -(1 + lambda_2 u)/(omega + Z u) from H = 0, phi =
/// lambda_1 Z + lambda_2, with lambda_2 = alpha/omega. Never throws; the
/// report records pass/fail per check with worst margins.
PmpReport verify_pmp(const PhaseModel& model, double M, const SynthesisResult& result);

/// JSON (de)serialization of a full result, embedding the model.
std::string result_to_json(const SynthesisResult& result);
SynthesisResult result_from_json(const std::string& text);

} // namespace spikeopt::synthesis
