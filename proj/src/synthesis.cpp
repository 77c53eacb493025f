#include "spikeopt/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace spikeopt::synthesis {

using numerics::Interval;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFieldGuard = 1e-9; // bang arcs must keep omega + u Z above this

struct Arc {
    double lo, hi, u;
};

// Arcs of a bang word: switch angles partition [0, 2*pi], control alternates
// starting from initial_sign * M.
std::vector<Arc> word_arcs(const BangWordSpec& word, const std::vector<double>& switches,
                           double M) {
    std::vector<Arc> arcs;
    double lo = 0.0;
    double u = word.initial_sign * M;
    for (double sw : switches) {
        arcs.push_back({lo, sw, u});
        lo = sw;
        u = -u;
    }
    arcs.push_back({lo, kTwoPi, u});
    return arcs;
}

// Exact minimum of the bang field omega + u Z over an arc, via the PRC
// extrema candidates (endpoints plus interior critical points).
double min_field(const PhaseModel& model, const PrcStructure& structure, const Arc& arc) {
    if (arc.hi - arc.lo <= 0.0)
        return model.omega;
    const auto [z_min, z_max] = prc_range(model, structure, {arc.lo, arc.hi});
    return model.omega + (arc.u >= 0.0 ? arc.u * z_min : arc.u * z_max);
}

// Traversal time of one arc: quadrature of 1/(omega + u Z) over the phase span.
double arc_time(const PhaseModel& model, const Arc& arc, double tol) {
    if (arc.hi - arc.lo <= 0.0)
        return 0.0;
    return numerics::integrate_adaptive(
               [&](double theta) {
                   return 1.0 / (model.omega + arc.u * prc_eval(model, theta, 0));
               },
               {arc.lo, arc.hi}, tol)
        .value;
}

std::vector<double> switch_angles_for(const PhaseModel& model, const PrcStructure& structure,
                                      const BangWordSpec& word, double alpha) {
    std::vector<double> switches;
    switches.reserve(word.switch_segments.size());
    for (int seg : word.switch_segments) {
        if (seg < 0 || seg >= static_cast<int>(structure.monotone_segments.size()))
            throw std::invalid_argument("switch segment index out of range");
        const auto theta = invert_prc(model, alpha, structure.monotone_segments[seg]);
        if (!theta)
            throw NoSwitchAngleError("alpha misses the PRC range of a designated segment");
        switches.push_back(*theta);
    }
    return switches;
}

struct WordQuad {
    std::vector<double> switches;
    std::vector<Arc> arcs;
    std::vector<double> arc_times;
    double total_time = 0.0;
    double charge = 0.0;
};

WordQuad evaluate_word(const PhaseModel& model, const PrcStructure& structure, double M,
                       const BangWordSpec& word, double alpha, double tol) {
    WordQuad q;
    q.switches = switch_angles_for(model, structure, word, alpha);
    q.arcs = word_arcs(word, q.switches, M);
    for (const Arc& arc : q.arcs) {
        if (min_field(model, structure, arc) <= kFieldGuard)
            throw InfeasibleError("bang arc stalls or reverses the phase");
        const double t = arc_time(model, arc, tol);
        q.arc_times.push_back(t);
        q.total_time += t;
        q.charge += arc.u * t;
    }
    return q;
}

int segment_slope_sign(const PhaseModel& model, const Interval& segment) {
    const double mid = 0.5 * (segment.lo + segment.hi);
    return prc_eval(model, mid, 1) > 0.0 ? +1 : -1;
}

// Switch type on a segment: +1 for X->Y (u goes -M -> +M), -1 for Y->X.
// Minimum time: X->Y where dZ/dtheta > 0 (Y->X where < 0); maximum time the
// reverse.
int switch_type(int slope_sign, Objective objective) {
    return objective == Objective::MinTime ? slope_sign : -slope_sign;
}

struct Candidate {
    BangWordSpec word;
    double alpha = 0.0;
    WordQuad quad;
};

// All bang-bang words consistent with the switch-type rule: at most one
// switch per monotone segment, consecutive switch types alternating, at
// least two switches (one-switch words cannot be charge-balanced).
std::vector<BangWordSpec> enumerate_words(const PhaseModel& model, const PrcStructure& structure,
                                          Objective objective) {
    const int k = static_cast<int>(structure.monotone_segments.size());
    std::vector<int> types(k);
    for (int i = 0; i < k; ++i)
        types[i] = switch_type(segment_slope_sign(model, structure.monotone_segments[i]), objective);

    std::vector<BangWordSpec> words;
    if (k > 16)
        return words; // degenerate PRC; enumeration class capped
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        std::vector<int> segs;
        for (int i = 0; i < k; ++i)
            if (mask & (1u << i))
                segs.push_back(i);
        if (segs.size() < 2)
            continue;
        bool alternating = true;
        for (std::size_t j = 1; j < segs.size(); ++j)
            if (types[segs[j]] == types[segs[j - 1]]) {
                alternating = false;
                break;
            }
        if (!alternating)
            continue;
        BangWordSpec word;
        word.initial_sign = types[segs.front()] == +1 ? -1 : +1;
        word.switch_segments = std::move(segs);
        words.push_back(std::move(word));
    }
    return words;
}

// Charge residual normalized by M (so tolerances are M-independent); NaN
// marks an alpha where the word is infeasible or misses a segment range.
double normalized_residual(const PhaseModel& model, const PrcStructure& structure, double M,
                           const BangWordSpec& word, double alpha, double tol) {
    try {
        const WordQuad q = evaluate_word(model, structure, M, word, alpha, tol);
        return q.charge / M;
    } catch (const NoSwitchAngleError&) {
        return std::numeric_limits<double>::quiet_NaN();
    } catch (const InfeasibleError&) {
        return std::numeric_limits<double>::quiet_NaN();
    } catch (const NoConvergenceError&) {
        // arcs grazing the stall boundary can exhaust the quadrature budget;
        // treat them as infeasible sweep points
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Solve the scalar charge-balance equation in alpha for one candidate word:
// sweep the admissible alpha range, bracket every sign change between
// adjacent feasible points, refine each bracket.
std::vector<Candidate> solve_word(const PhaseModel& model, const PrcStructure& structure,
                                  double M, const BangWordSpec& word) {
    double alpha_lo = -std::numeric_limits<double>::infinity();
    double alpha_hi = std::numeric_limits<double>::infinity();
    for (int seg : word.switch_segments) {
        const auto [z_min, z_max] = prc_range(model, structure, structure.monotone_segments[seg]);
        alpha_lo = std::max(alpha_lo, z_min);
        alpha_hi = std::min(alpha_hi, z_max);
    }
    std::vector<Candidate> out;
    if (!(alpha_hi - alpha_lo > 1e-12))
        return out;
    const double margin = 1e-7 * (alpha_hi - alpha_lo);
    alpha_lo += margin;
    alpha_hi -= margin;

    constexpr int kSweepPoints = 512;
    const double sweep_tol = 1e-6;
    const double t0 = model.natural_period();
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-9 * t0);
    const double residual_tol = 1e-9 * t0;

    double prev_alpha = 0.0;
    double prev_r = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < kSweepPoints; ++i) {
        const double alpha = alpha_lo + (alpha_hi - alpha_lo) * i / (kSweepPoints - 1);
        const double r = normalized_residual(model, structure, M, word, alpha, sweep_tol);
        if (!std::isnan(r) && !std::isnan(prev_r) && (r > 0.0) != (prev_r > 0.0)) {
            try {
                const double alpha_root = numerics::find_root_bracketed(
                    [&](double a) {
                        const double v =
                            normalized_residual(model, structure, M, word, a, tight_tol);
                        if (std::isnan(v))
                            throw InfeasibleError("word infeasible inside bracket");
                        return v;
                    },
                    {prev_alpha, alpha}, residual_tol);
                bool duplicate = false;
                for (const Candidate& c : out)
                    if (std::fabs(c.alpha - alpha_root) < 1e-9 * (alpha_hi - alpha_lo))
                        duplicate = true;
                if (!duplicate) {
                    Candidate c;
                    c.word = word;
                    c.alpha = alpha_root;
                    c.quad = evaluate_word(model, structure, M, word, alpha_root, tight_tol);
                    out.push_back(std::move(c));
                }
            } catch (const Error&) {
                // bracket crossed an infeasibility boundary; no root kept
            }
        }
        prev_alpha = alpha;
        prev_r = r;
    }
    return out;
}

TrajectoryWord word_tags(const std::vector<Arc>& arcs) {
    TrajectoryWord tags;
    for (const Arc& arc : arcs)
        tags.push_back({WordTag::Kind::Bang, arc.u >= 0.0 ? +1 : -1, 0.0});
    return tags;
}

ControlSchedule schedule_from(const WordQuad& q) {
    ControlSchedule s;
    for (std::size_t i = 0; i < q.arcs.size(); ++i) {
        ScheduleSegment seg;
        seg.phase_span = Interval{q.arcs[i].lo, q.arcs[i].hi};
        seg.u = q.arcs[i].u;
        seg.duration = q.arc_times[i];
        s.segments.push_back(seg);
    }
    s.total_time = q.total_time;
    return s;
}

SynthesisResult degenerate_result(const PhaseModel& model, Objective objective) {
    SynthesisResult r;
    r.model = model;
    r.M = 0.0;
    r.objective = objective;
    ScheduleSegment seg;
    seg.phase_span = Interval{0.0, kTwoPi};
    seg.u = 0.0;
    seg.duration = model.natural_period();
    r.schedule.segments.push_back(seg);
    r.schedule.total_time = seg.duration;
    r.word.push_back({WordTag::Kind::Coast, 0, 0.0});
    r.alpha = std::numeric_limits<double>::quiet_NaN();
    r.predicted_T = seg.duration;
    r.charge_residual = 0.0;
    r.pmp_report.vacuous = true;
    return r;
}

SynthesisResult bang_bang_synthesize(const PhaseModel& model, double M, Objective objective) {
    const PrcStructure structure = analyze_structure(model);
    std::vector<Candidate> candidates;
    for (const BangWordSpec& word : enumerate_words(model, structure, objective)) {
        auto found = solve_word(model, structure, M, word);
        candidates.insert(candidates.end(), found.begin(), found.end());
    }
    if (candidates.empty())
        throw NoFeasibleWordError("no candidate word admits a charge-balanced solution");

    const Candidate* best = &candidates.front();
    for (const Candidate& c : candidates) {
        const bool better = objective == Objective::MinTime
                                ? c.quad.total_time < best->quad.total_time
                                : c.quad.total_time > best->quad.total_time;
        if (better)
            best = &c;
    }

    SynthesisResult result;
    result.model = model;
    result.M = M;
    result.objective = objective;
    result.schedule = schedule_from(best->quad);
    result.word = word_tags(best->quad.arcs);
    result.switch_angles = best->quad.switches;
    result.alpha = best->alpha;
    result.predicted_T = best->quad.total_time;
    result.charge_residual = best->quad.charge;
    result.pmp_report = verify_pmp(model, M, result);
    return result;
}

// Traversal control for a phase leg when realizing an unbounded-delay
// schedule: the safer of the two bangs, or a zero-control coast when neither
// bang keeps the phase advancing (the dwell split absorbs any leg charge).
double traverse_control(const PhaseModel& model, const PrcStructure& structure, double M,
                        const Interval& span) {
    double best_u = 0.0;
    double best_margin = 0.0;
    for (double u : {+M, -M}) {
        const double margin = min_field(model, structure, {span.lo, span.hi, u});
        if (margin > best_margin) {
            best_margin = margin;
            best_u = u;
        }
    }
    return best_margin > 1e-6 ? best_u : 0.0;
}

SynthesisResult unbounded_delay_result(const PhaseModel& model, const PrcStructure& structure,
                                       double M, const SingularPoint& first,
                                       const SingularPoint& second, double target_delay) {
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-11);
    const Interval legs[3] = {{0.0, first.theta_s},
                              {first.theta_s, second.theta_s},
                              {second.theta_s, kTwoPi}};
    double leg_u[3], leg_t[3];
    double legs_time = 0.0, legs_charge = 0.0;
    for (int i = 0; i < 3; ++i) {
        leg_u[i] = traverse_control(model, structure, M, legs[i]);
        leg_t[i] = arc_time(model, {legs[i].lo, legs[i].hi, leg_u[i]}, tight_tol);
        legs_time += leg_t[i];
        legs_charge += leg_u[i] * leg_t[i];
    }

    // Split the dwell between the two holds: charge balance plus the target
    // total time give a 2x2 linear system in the hold durations.
    const double spare = target_delay - legs_time;
    const double det = first.u_s - second.u_s;
    double t_a = (-legs_charge - second.u_s * spare) / det;
    double t_b = spare - t_a;
    if (t_a < 0.0 && t_a > -1e-12)
        t_a = 0.0;
    if (t_b < 0.0 && t_b > -1e-12)
        t_b = 0.0;
    if (spare < 0.0 || t_a < 0.0 || t_b < 0.0)
        throw InfeasibleError("target delay below the minimum realizable time");

    SynthesisResult result;
    result.model = model;
    result.M = M;
    result.objective = Objective::MaxTime;
    result.unbounded_delay = true;
    result.alpha = std::numeric_limits<double>::quiet_NaN();
    result.switch_angles = {first.theta_s, second.theta_s};

    const SingularPoint* holds[2] = {&first, &second};
    const double hold_t[2] = {t_a, t_b};
    for (int i = 0; i < 3; ++i) {
        ScheduleSegment seg;
        seg.phase_span = legs[i];
        seg.u = leg_u[i];
        seg.duration = leg_t[i];
        result.schedule.segments.push_back(seg);
        const double m = std::fabs(leg_u[i]);
        result.word.push_back({m > 0.0 ? WordTag::Kind::Bang : WordTag::Kind::Coast,
                               leg_u[i] >= 0.0 ? +1 : -1, 0.0});
        if (i < 2) {
            ScheduleSegment hold;
            hold.u = holds[i]->u_s;
            hold.duration = hold_t[i];
            hold.hold_theta = holds[i]->theta_s;
            result.schedule.segments.push_back(hold);
            result.word.push_back({WordTag::Kind::Hold, 0, holds[i]->theta_s});
        }
    }
    result.schedule.total_time = legs_time + t_a + t_b;
    result.predicted_T = result.schedule.total_time;
    result.charge_residual = result.schedule.net_charge();
    result.pmp_report = verify_pmp(model, M, result);
    return result;
}

SynthesisResult bang_singular_bang_result(const PhaseModel& model, const PrcStructure& structure,
                                          double M, const SingularPoint& sp) {
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-11);
    const double u_bang = (sp.u_s > 0.0 ? -1.0 : +1.0) * M;
    const Arc entry{0.0, sp.theta_s, u_bang};
    const Arc exit{sp.theta_s, kTwoPi, u_bang};
    if (min_field(model, structure, entry) <= kFieldGuard ||
        min_field(model, structure, exit) <= kFieldGuard)
        throw InfeasibleError("singular point unreachable under the charge-compatible bang");

    const double t1 = arc_time(model, entry, tight_tol);
    const double t3 = arc_time(model, exit, tight_tol);
    const double t_hold = std::fabs((t1 + t3) * M / sp.u_s);

    SynthesisResult result;
    result.model = model;
    result.M = M;
    result.objective = Objective::MaxTime;
    result.alpha = prc_eval(model, sp.theta_s, 0); // the hold sits on the switch level set
    result.switch_angles = {sp.theta_s};

    ScheduleSegment in_seg{Interval{0.0, sp.theta_s}, u_bang, t1, std::nullopt};
    ScheduleSegment hold_seg{std::nullopt, sp.u_s, t_hold, sp.theta_s};
    ScheduleSegment out_seg{Interval{sp.theta_s, kTwoPi}, u_bang, t3, std::nullopt};
    result.schedule.segments = {in_seg, hold_seg, out_seg};
    result.schedule.total_time = t1 + t_hold + t3;
    result.word = {{WordTag::Kind::Bang, u_bang >= 0.0 ? +1 : -1, 0.0},
                   {WordTag::Kind::Hold, 0, sp.theta_s},
                   {WordTag::Kind::Bang, u_bang >= 0.0 ? +1 : -1, 0.0}};
    result.predicted_T = result.schedule.total_time;
    result.charge_residual = result.schedule.net_charge();
    result.pmp_report = verify_pmp(model, M, result);
    return result;
}

} // namespace

double ControlSchedule::net_charge() const {
    double q = 0.0;
    for (const auto& seg : segments)
        q += seg.u * seg.duration;
    return q;
}

std::string word_string(const TrajectoryWord& word) {
    std::string out;
    bool prev_bang = false;
    for (const WordTag& tag : word) {
        const bool bang_like = tag.kind != WordTag::Kind::Hold;
        if (!out.empty() && !(prev_bang && bang_like))
            out += '-';
        switch (tag.kind) {
        case WordTag::Kind::Bang:
            out += tag.sign >= 0 ? 'Y' : 'X';
            break;
        case WordTag::Kind::Hold:
            out += 'S';
            break;
        case WordTag::Kind::Coast:
            out += 'O';
            break;
        }
        prev_bang = bang_like;
    }
    // Hold-containing words read better fully hyphenated: "Y-S-Y".
    if (out.find('S') != std::string::npos) {
        std::string spaced;
        for (char c : out) {
            if (c == '-')
                continue;
            if (!spaced.empty())
                spaced += '-';
            spaced += c;
        }
        return spaced;
    }
    return out;
}

std::vector<SingularPoint> singular_points(const PhaseModel& model, double M) {
    if (!(M > 0.0))
        throw std::invalid_argument("singular_points requires M > 0");
    const PrcStructure structure = analyze_structure(model);
    double amplitude = 0.0;
    for (const auto& seg : structure.monotone_segments) {
        const auto [z_min, z_max] = prc_range(model, structure, seg);
        amplitude = std::max({amplitude, std::fabs(z_min), std::fabs(z_max)});
    }

    std::vector<SingularPoint> points;
    for (double theta_c : structure.critical_points) {
        const double z = prc_eval(model, theta_c, 0);
        if (std::fabs(z) <= 1e-9 * amplitude)
            continue; // PRC zero: no finite stalling control
        SingularPoint sp;
        sp.theta_s = theta_c;
        sp.u_s = -model.omega / z;
        sp.admissible = std::fabs(sp.u_s) <= M * (1.0 + 1e-12);
        const double u_bang = (sp.u_s > 0.0 ? -1.0 : +1.0) * M;
        sp.reachable =
            min_field(model, structure, {0.0, theta_c, u_bang}) > kFieldGuard &&
            min_field(model, structure, {theta_c, kTwoPi, u_bang}) > kFieldGuard;
        points.push_back(sp);
    }
    return points;
}

double charge_residual(const PhaseModel& model, const PrcStructure& structure, double M,
                       const BangWordSpec& word, double alpha) {
    if (!(M > 0.0))
        throw std::invalid_argument("charge_residual requires M > 0");
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-11);
    return evaluate_word(model, structure, M, word, alpha, tight_tol).charge;
}

double charge_residual(const PhaseModel& model, double M, const BangWordSpec& word,
                       double alpha) {
    return charge_residual(model, analyze_structure(model), M, word, alpha);
}

double predicted_time(const PhaseModel& model, const PrcStructure& structure, double M,
                      const BangWordSpec& word, double alpha) {
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-11);
    if (word.switch_segments.empty()) {
        const double u = word.initial_sign * M;
        return arc_time(model, {0.0, kTwoPi, u}, tight_tol);
    }
    return evaluate_word(model, structure, M, word, alpha, tight_tol).total_time;
}

double predicted_time(const PhaseModel& model, double M, const BangWordSpec& word, double alpha) {
    return predicted_time(model, analyze_structure(model), M, word, alpha);
}

double predicted_time(const PhaseModel& model, double M, const TrajectoryWord& word,
                      double alpha) {
    const PrcStructure structure = analyze_structure(model);
    const double tight_tol = std::min(numerics::tolerances().quad_abs, 1e-11);

    int holds = 0;
    for (const auto& tag : word)
        if (tag.kind == WordTag::Kind::Hold)
            ++holds;
    if (holds > 1)
        throw std::invalid_argument("predicted_time supports at most one hold per word");

    if (holds == 1) {
        // bang into the hold, dwell by charge balance, bang out
        double theta_s = 0.0;
        int bang_sign = +1;
        for (const auto& tag : word) {
            if (tag.kind == WordTag::Kind::Hold)
                theta_s = tag.theta_s;
            else
                bang_sign = tag.sign;
        }
        const double u_bang = bang_sign * M;
        const double u_s = -model.omega / prc_eval(model, theta_s, 0);
        const Arc entry{0.0, theta_s, u_bang};
        const Arc exit{theta_s, kTwoPi, u_bang};
        if (min_field(model, structure, entry) <= kFieldGuard ||
            min_field(model, structure, exit) <= kFieldGuard)
            throw InfeasibleError("hold unreachable under the word's bang");
        const double t1 = arc_time(model, entry, tight_tol);
        const double t3 = arc_time(model, exit, tight_tol);
        return t1 + t3 + std::fabs((t1 + t3) * M / u_s);
    }

    // bang-only: the word must switch at every crossing of the alpha level
    BangWordSpec spec;
    spec.initial_sign = word.empty() || word.front().sign >= 0 ? +1 : -1;
    for (std::size_t i = 0; i < structure.monotone_segments.size(); ++i) {
        const auto [z_min, z_max] = prc_range(model, structure, structure.monotone_segments[i]);
        if (alpha > z_min && alpha < z_max)
            spec.switch_segments.push_back(static_cast<int>(i));
    }
    const std::size_t switches = word.empty() ? 0 : word.size() - 1;
    if (spec.switch_segments.size() != switches)
        throw NoSwitchAngleError("alpha level crossings do not match the word's switches");
    if (switches == 0)
        return arc_time(model, {0.0, kTwoPi, word.empty() ? 0.0 : word.front().sign * M},
                        tight_tol);
    return evaluate_word(model, structure, M, spec, alpha, tight_tol).total_time;
}

SynthesisResult min_time_synthesize(const PhaseModel& model, double M) {
    if (M < 0.0)
        throw std::invalid_argument("min_time_synthesize requires M >= 0");
    if (M == 0.0)
        return degenerate_result(model, Objective::MinTime);
    return bang_bang_synthesize(model, M, Objective::MinTime);
}

SynthesisResult max_time_synthesize(const PhaseModel& model, double M,
                                    std::optional<double> target_delay) {
    if (M < 0.0)
        throw std::invalid_argument("max_time_synthesize requires M >= 0");
    if (M == 0.0)
        return degenerate_result(model, Objective::MaxTime);

    const PrcStructure structure = analyze_structure(model);
    const auto singulars = singular_points(model, M);

    bool has_positive = false, has_negative = false;
    for (const auto& sp : singulars) {
        if (!sp.admissible)
            continue;
        (sp.u_s > 0.0 ? has_positive : has_negative) = true;
    }

    if (has_positive && has_negative) {
        // Both singular control signs admissible: the spiking time can be
        // delayed arbitrarily (Case III); a schedule exists only against a
        // caller-specified target.
        if (!target_delay)
            throw TargetRequiredError(
                "both singular control signs admissible: supply a target delay");
        const SingularPoint* first = nullptr;
        const SingularPoint* second = nullptr;
        for (const auto& sp : singulars) {
            if (!sp.admissible)
                continue;
            if (!first && sp.u_s > 0.0)
                first = &sp;
            if (sp.u_s < 0.0)
                second = &sp;
        }
        if (first->theta_s > second->theta_s)
            std::swap(first, second);
        return unbounded_delay_result(model, structure, M, *first, *second, *target_delay);
    }

    const SingularPoint* best_sp = nullptr;
    SynthesisResult best_bsb;
    for (const auto& sp : singulars) {
        if (!sp.admissible || !sp.reachable)
            continue;
        SynthesisResult r = bang_singular_bang_result(model, structure, M, sp);
        if (!best_sp || r.predicted_T > best_bsb.predicted_T) {
            best_sp = &sp;
            best_bsb = std::move(r);
        }
    }
    if (best_sp)
        return best_bsb;
    return bang_bang_synthesize(model, M, Objective::MaxTime);
}

PmpReport verify_pmp(const PhaseModel& model, double M, const SynthesisResult& result) {
    PmpReport report;
    report.worst_interior_margin = std::numeric_limits<double>::infinity();

    for (const auto& seg : result.schedule.segments) {
        if (seg.hold_theta) {
            report.hold_residual =
                std::max(report.hold_residual,
                         std::fabs(model.omega + seg.u * prc_eval(model, *seg.hold_theta, 0)));
            // a hold control must itself respect the amplitude bound
            report.hold_residual = std::max(
                report.hold_residual, std::max(0.0, std::fabs(seg.u) - M * (1.0 + 1e-12)));
        }
    }

    if (result.unbounded_delay || result.switch_angles.empty()) {
        report.vacuous = true;
        report.worst_interior_margin = 0.0;
        return report;
    }

    const double lambda2 = result.alpha / model.omega;
    const bool min_time = result.objective == Objective::MinTime;

    // (a) interior sign of the switching function along every bang arc
    constexpr int kSamples = 1000;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& seg : result.schedule.segments) {
        if (!seg.phase_span || std::fabs(seg.u) == 0.0)
            continue;
        if (seg.phase_span->width() < 1e-12)
            continue;
        for (int j = 0; j < kSamples; ++j) {
            const double theta =
                seg.phase_span->lo + seg.phase_span->width() * (j + 0.5) / kSamples;
            const double z = prc_eval(model, theta, 0);
            const double lambda1 = -(1.0 + lambda2 * seg.u) / (model.omega + z * seg.u);
            const double phi = lambda1 * z + lambda2;
            // minimum time: u = +M requires phi < 0; maximum time the reverse
            const double expected_sign = (seg.u > 0.0) == min_time ? -1.0 : +1.0;
            worst = std::min(worst, expected_sign * phi);
        }
    }
    report.worst_interior_margin = worst;
    report.interior_sign_ok = worst > -1e-9;

    // (b) the switching function vanishes at every switch angle
    double worst_phi = 0.0;
    for (double theta_i : result.switch_angles) {
        double u_in = result.schedule.segments.front().u;
        for (const auto& seg : result.schedule.segments)
            if (seg.phase_span && theta_i > seg.phase_span->lo - 1e-12 &&
                theta_i <= seg.phase_span->hi + 1e-12)
                u_in = seg.u;
        const double z = prc_eval(model, theta_i, 0);
        const double lambda1 = -(1.0 + lambda2 * u_in) / (model.omega + z * u_in);
        worst_phi = std::max(worst_phi, std::fabs(lambda1 * z + lambda2));
    }
    report.worst_switch_phi = worst_phi;
    report.switch_phi_ok = worst_phi <= 1e-6;

    // (c) dphi/dt = -dZ/dtheta sign agrees with each bang-bang switch type
    bool directions_ok = true;
    std::size_t switch_idx = 0;
    for (std::size_t i = 0; i + 1 < result.schedule.segments.size(); ++i) {
        const auto& a = result.schedule.segments[i];
        const auto& b = result.schedule.segments[i + 1];
        if (!a.phase_span || !b.phase_span)
            continue; // hold entry/exit: not a bang-bang switch
        if (switch_idx >= result.switch_angles.size())
            break;
        const double theta_i = result.switch_angles[switch_idx++];
        const double dz = prc_eval(model, theta_i, 1);
        const bool x_to_y = a.u < b.u;
        // minimum time: X->Y requires dphi/dt < 0, i.e. dZ/dtheta > 0
        const bool needs_positive_dz = x_to_y == min_time;
        if (needs_positive_dz ? dz <= 0.0 : dz >= 0.0)
            directions_ok = false;
    }
    report.switch_direction_ok = directions_ok;
    return report;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

namespace {

double round12(double x) {
    if (!std::isfinite(x))
        return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::strtod(buf, nullptr);
}

nlohmann::ordered_json num(double x) {
    if (std::isnan(x))
        return nullptr;
    return round12(x);
}

} // namespace

std::string result_to_json(const SynthesisResult& result) {
    nlohmann::ordered_json j;
    j["model"] = nlohmann::ordered_json::parse(model_to_json(result.model));
    j["M"] = num(result.M);
    j["objective"] = result.objective == Objective::MinTime ? "min" : "max";
    j["word"] = word_string(result.word);
    nlohmann::ordered_json tags = nlohmann::ordered_json::array();
    for (const auto& tag : result.word) {
        nlohmann::ordered_json t;
        t["kind"] = tag.kind == WordTag::Kind::Bang ? "bang"
                    : tag.kind == WordTag::Kind::Hold ? "hold"
                                                      : "coast";
        t["sign"] = tag.sign;
        if (tag.kind == WordTag::Kind::Hold)
            t["theta_s"] = num(tag.theta_s);
        tags.push_back(t);
    }
    j["word_tags"] = tags;
    nlohmann::ordered_json switches = nlohmann::ordered_json::array();
    for (double s : result.switch_angles)
        switches.push_back(num(s));
    j["switch_angles"] = switches;
    j["alpha"] = num(result.alpha);
    nlohmann::ordered_json segs = nlohmann::ordered_json::array();
    for (const auto& seg : result.schedule.segments) {
        nlohmann::ordered_json s;
        if (seg.phase_span) {
            s["theta_lo"] = num(seg.phase_span->lo);
            s["theta_hi"] = num(seg.phase_span->hi);
        }
        if (seg.hold_theta)
            s["hold_theta"] = num(*seg.hold_theta);
        s["u"] = num(seg.u);
        s["duration"] = num(seg.duration);
        segs.push_back(s);
    }
    j["segments"] = segs;
    j["predicted_T"] = num(result.predicted_T);
    j["charge_residual"] = num(result.charge_residual);
    j["unbounded_delay"] = result.unbounded_delay;
    j["pmp_report"] = {{"vacuous", result.pmp_report.vacuous},
                {"interior_sign_ok", result.pmp_report.interior_sign_ok},
                {"switch_phi_ok", result.pmp_report.switch_phi_ok},
                {"switch_direction_ok", result.pmp_report.switch_direction_ok},
                {"worst_interior_margin", num(result.pmp_report.worst_interior_margin)},
                {"worst_switch_phi", num(result.pmp_report.worst_switch_phi)},
                {"hold_residual", num(result.pmp_report.hold_residual)}};
    return j.dump(2);
}

SynthesisResult result_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    SynthesisResult r;
    r.model = model_from_json(j.at("model").dump());
    r.M = j.at("M").get<double>();
    r.objective = j.at("objective").get<std::string>() == "min" ? Objective::MinTime
                                                                : Objective::MaxTime;
    for (const auto& t : j.at("word_tags")) {
        WordTag tag;
        const std::string kind = t.at("kind").get<std::string>();
        tag.kind = kind == "bang" ? WordTag::Kind::Bang
                   : kind == "hold" ? WordTag::Kind::Hold
                                    : WordTag::Kind::Coast;
        tag.sign = t.at("sign").get<int>();
        if (t.contains("theta_s"))
            tag.theta_s = t.at("theta_s").get<double>();
        r.word.push_back(tag);
    }
    for (const auto& s : j.at("switch_angles"))
        r.switch_angles.push_back(s.get<double>());
    r.alpha = j.at("alpha").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                      : j.at("alpha").get<double>();
    for (const auto& s : j.at("segments")) {
        ScheduleSegment seg;
        if (s.contains("theta_lo"))
            seg.phase_span = Interval{s.at("theta_lo").get<double>(), s.at("theta_hi").get<double>()};
        if (s.contains("hold_theta"))
            seg.hold_theta = s.at("hold_theta").get<double>();
        seg.u = s.at("u").get<double>();
        seg.duration = s.at("duration").get<double>();
        r.schedule.segments.push_back(seg);
        r.schedule.total_time += seg.duration;
    }
    r.predicted_T = j.at("predicted_T").get<double>();
    r.charge_residual = j.at("charge_residual").get<double>();
    r.unbounded_delay = j.value("unbounded_delay", false);
    if (j.contains("pmp_report")) {
        const auto& p = j.at("pmp_report");
        r.pmp_report.vacuous = p.value("vacuous", false);
        r.pmp_report.interior_sign_ok = p.value("interior_sign_ok", false);
        r.pmp_report.switch_phi_ok = p.value("switch_phi_ok", false);
        r.pmp_report.switch_direction_ok = p.value("switch_direction_ok", false);
        r.pmp_report.worst_interior_margin = p.value("worst_interior_margin", 0.0);
        r.pmp_report.worst_switch_phi = p.value("worst_switch_phi", 0.0);
        r.pmp_report.hold_residual = p.value("hold_residual", 0.0);
    }
    return r;
}

} // namespace spikeopt::synthesis
