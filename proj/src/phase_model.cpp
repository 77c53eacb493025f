#include "spikeopt/phase_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace spikeopt {

using numerics::Interval;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double PhaseModel::natural_period() const {
    return kTwoPi / omega;
}

double prc_eval(const PhaseModel& model, double theta, int order) {
    if (order < 0 || order > 2)
        throw std::invalid_argument("prc_eval order must be 0, 1 or 2");
    if (const auto* sniper = std::get_if<SniperPrc>(&model.prc)) {
        switch (order) {
        case 0:
            return sniper->z_d * (1.0 - std::cos(theta));
        case 1:
            return sniper->z_d * std::sin(theta);
        default:
            return sniper->z_d * std::cos(theta);
        }
    }
    const auto& harmonic = std::get<HarmonicPrc>(model.prc);
    double acc = 0.0;
    for (const auto& term : harmonic.terms) {
        const double arg = term.frequency * theta + term.phase;
        switch (order) {
        case 0:
            acc += term.amplitude * std::sin(arg);
            break;
        case 1:
            acc += term.amplitude * term.frequency * std::cos(arg);
            break;
        default:
            acc -= term.amplitude * term.frequency * term.frequency * std::sin(arg);
            break;
        }
    }
    return acc;
}

namespace {

// Refined locations of sign changes of f over [0, 2*pi] on an n-point grid.
std::vector<double> refined_sign_changes(const std::function<double(double)>& f, int n) {
    std::vector<double> roots;
    double prev_theta = 0.0;
    double prev_value = f(0.0);
    for (int i = 1; i < n; ++i) {
        const double theta = kTwoPi * i / (n - 1);
        const double value = f(theta);
        if (prev_value == 0.0) {
            if (prev_theta > 0.0)
                roots.push_back(prev_theta);
        } else if ((prev_value > 0.0) != (value > 0.0)) {
            roots.push_back(numerics::find_root_bracketed(f, {prev_theta, theta}, 1e-13));
        }
        prev_theta = theta;
        prev_value = value;
    }
    return roots;
}

void push_unique_sorted(std::vector<double>& xs, double x, double tol) {
    for (double existing : xs)
        if (std::fabs(existing - x) <= tol)
            return;
    xs.insert(std::upper_bound(xs.begin(), xs.end(), x), x);
}

} // namespace

PrcStructure analyze_structure(const PhaseModel& model, int grid_n) {
    if (grid_n < 256)
        throw std::invalid_argument("analyze_structure requires grid_n >= 256");

    double amplitude = 0.0;
    for (int i = 0; i < grid_n; ++i)
        amplitude = std::max(amplitude, std::fabs(prc_eval(model, kTwoPi * i / (grid_n - 1), 0)));
    const double zero_atol = 1e-3 * std::max(amplitude, 1e-300);

    PrcStructure s;
    s.critical_points = refined_sign_changes(
        [&](double t) { return prc_eval(model, t, 1); }, grid_n);

    for (double z : refined_sign_changes([&](double t) { return prc_eval(model, t, 0); }, grid_n))
        push_unique_sorted(s.zeros, z, 1e-9);
    if (std::fabs(prc_eval(model, 0.0, 0)) <= zero_atol)
        push_unique_sorted(s.zeros, 0.0, 1e-9);
    if (std::fabs(prc_eval(model, kTwoPi, 0)) <= zero_atol)
        push_unique_sorted(s.zeros, kTwoPi, 1e-9);
    for (double c : s.critical_points)
        if (std::fabs(prc_eval(model, c, 0)) <= zero_atol)
            push_unique_sorted(s.zeros, c, 1e-9);

    double lo = 0.0;
    for (double c : s.critical_points) {
        s.monotone_segments.push_back({lo, c});
        lo = c;
    }
    s.monotone_segments.push_back({lo, kTwoPi});
    return s;
}

std::optional<double> invert_prc(const PhaseModel& model, double alpha, Interval segment) {
    numerics::validate(segment);
    if (segment.lo < -1e-9 || segment.hi > kTwoPi + 1e-9)
        throw NotMonotoneError("segment must lie within [0, 2*pi]");

    // Strict monotonicity check: the derivative may only vanish at the ends.
    int sign = 0;
    double scale = 0.0;
    constexpr int kProbes = 64;
    double probe_deriv[kProbes];
    for (int i = 0; i < kProbes; ++i) {
        const double t = segment.lo + segment.width() * (i + 0.5) / kProbes;
        probe_deriv[i] = prc_eval(model, t, 1);
        scale = std::max(scale, std::fabs(probe_deriv[i]));
    }
    for (int i = 0; i < kProbes; ++i) {
        if (std::fabs(probe_deriv[i]) <= 1e-7 * scale)
            continue; // flat shoulder next to a critical point
        const int s = probe_deriv[i] > 0.0 ? 1 : -1;
        if (sign == 0)
            sign = s;
        else if (s != sign)
            throw NotMonotoneError("segment is not a monotone piece of the PRC");
    }

    const double z_lo = prc_eval(model, segment.lo, 0);
    const double z_hi = prc_eval(model, segment.hi, 0);
    const double z_min = std::min(z_lo, z_hi);
    const double z_max = std::max(z_lo, z_hi);
    if (alpha < z_min || alpha > z_max)
        return std::nullopt;
    if (alpha == z_lo)
        return segment.lo;
    if (alpha == z_hi)
        return segment.hi;

    const double root = numerics::find_root_bracketed(
        [&](double t) { return prc_eval(model, t, 0) - alpha; }, segment, 1e-14);
    if (root - segment.lo < 1e-9)
        return segment.lo;
    if (segment.hi - root < 1e-9)
        return segment.hi;
    return root;
}

std::pair<double, double> prc_range(const PhaseModel& model, const PrcStructure& structure,
                                    Interval iv) {
    double z_min = std::min(prc_eval(model, iv.lo, 0), prc_eval(model, iv.hi, 0));
    double z_max = std::max(prc_eval(model, iv.lo, 0), prc_eval(model, iv.hi, 0));
    for (double c : structure.critical_points) {
        if (c > iv.lo && c < iv.hi) {
            const double z = prc_eval(model, c, 0);
            z_min = std::min(z_min, z);
            z_max = std::max(z_max, z);
        }
    }
    return {z_min, z_max};
}

// ---------------------------------------------------------------------------
// Harmonic fitting
// ---------------------------------------------------------------------------

namespace {

double eval_terms(const std::vector<HarmonicTerm>& terms, double theta) {
    double acc = 0.0;
    for (const auto& t : terms)
        acc += t.amplitude * std::sin(t.frequency * theta + t.phase);
    return acc;
}

// Best single-frequency sinusoid p*sin(b t)+q*cos(b t) for the residual, in
// the least-squares sense; returns the achieved SSE reduction.
double project_frequency(std::span<const std::pair<double, double>> pts,
                         const std::vector<double>& residual, double b, double& p, double& q) {
    double ss = 0.0, sc = 0.0, cc = 0.0, rs = 0.0, rc = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const double s = std::sin(b * pts[j].first);
        const double c = std::cos(b * pts[j].first);
        ss += s * s;
        sc += s * c;
        cc += c * c;
        rs += residual[j] * s;
        rc += residual[j] * c;
    }
    const double det = ss * cc - sc * sc;
    if (std::fabs(det) < 1e-12 * (ss + cc + 1e-300)) {
        p = q = 0.0;
        return 0.0;
    }
    p = (cc * rs - sc * rc) / det;
    q = (ss * rc - sc * rs) / det;
    return p * rs + q * rc;
}

// Solve (A + lambda*diag(A)) x = rhs by Cholesky; returns false if the
// damped matrix is not positive definite.
bool solve_damped(std::vector<double> a, std::vector<double> rhs, int n, double lambda,
                  std::vector<double>& x) {
    for (int i = 0; i < n; ++i)
        a[i * n + i] *= (1.0 + lambda);
    for (int i = 0; i < n; ++i)
        a[i * n + i] += 1e-300;
    // in-place Cholesky, lower triangle
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (int k = 0; k < j; ++k)
                sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0.0)
                    return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    x.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double sum = rhs[i];
        for (int k = 0; k < i; ++k)
            sum -= a[i * n + k] * x[k];
        x[i] = sum / a[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double sum = x[i];
        for (int k = i + 1; k < n; ++k)
            sum -= a[k * n + i] * x[k];
        x[i] = sum / a[i * n + i];
    }
    return true;
}

double sse_of(std::span<const std::pair<double, double>> pts,
              const std::vector<HarmonicTerm>& terms) {
    double sse = 0.0;
    for (const auto& [theta, z] : pts) {
        const double r = z - eval_terms(terms, theta);
        sse += r * r;
    }
    return sse;
}

// Exact linear least squares over all amplitudes and phases at the current
// frequencies (the model is linear in p_i = a_i cos c_i, q_i = a_i sin c_i).
void resolve_amplitudes(std::span<const std::pair<double, double>> pts,
                        std::vector<HarmonicTerm>& terms) {
    const int k = static_cast<int>(terms.size());
    const int n = 2 * k;
    std::vector<double> ata(n * n, 0.0), atb(n, 0.0), row(n), x;
    for (const auto& [theta, z] : pts) {
        for (int i = 0; i < k; ++i) {
            row[2 * i] = std::sin(terms[i].frequency * theta);
            row[2 * i + 1] = std::cos(terms[i].frequency * theta);
        }
        for (int col = 0; col < n; ++col) {
            atb[col] += row[col] * z;
            for (int r = 0; r <= col; ++r)
                ata[col * n + r] += row[col] * row[r];
        }
    }
    for (int col = 0; col < n; ++col)
        for (int r = col + 1; r < n; ++r)
            ata[col * n + r] = ata[r * n + col];
    if (!solve_damped(ata, atb, n, 1e-12, x))
        return; // duplicated frequencies; keep the current terms
    std::vector<HarmonicTerm> trial = terms;
    for (int i = 0; i < k; ++i) {
        trial[i].amplitude = std::hypot(x[2 * i], x[2 * i + 1]);
        trial[i].phase = std::atan2(x[2 * i + 1], x[2 * i]);
    }
    if (sse_of(pts, trial) <= sse_of(pts, terms))
        terms = std::move(trial);
}

} // namespace

FitResult fit_harmonics(std::span<const std::pair<double, double>> samples, int n_terms,
                        const FitOptions& opts) {
    if (n_terms < 1)
        throw std::invalid_argument("fit_harmonics requires n_terms >= 1");
    if (samples.size() < static_cast<std::size_t>(4 * n_terms))
        throw std::invalid_argument("fit_harmonics requires at least 4*n_terms samples");

    const std::size_t m = samples.size();
    std::vector<HarmonicTerm> terms;
    std::vector<double> residual(m);
    for (std::size_t j = 0; j < m; ++j)
        residual[j] = samples[j].second;

    // Seed terms greedily: scan the residual spectrum for the frequency with
    // the largest SSE reduction, refine it by golden section, subtract.
    const double b_lo = 0.05;
    const double b_hi = std::max(1.0, opts.frequency_max);
    const int scan_n = static_cast<int>((b_hi - b_lo) / 0.01) + 1;
    for (int term_i = 0; term_i < n_terms; ++term_i) {
        double best_b = 1.0, best_gain = -1.0;
        for (int k = 0; k < scan_n; ++k) {
            const double b = b_lo + (b_hi - b_lo) * k / (scan_n - 1);
            double p, q;
            const double gain = project_frequency(samples, residual, b, p, q);
            if (gain > best_gain) {
                best_gain = gain;
                best_b = b;
            }
        }
        double lo = std::max(b_lo, best_b - 0.02), hi = std::min(b_hi, best_b + 0.02);
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 60; ++it) {
            const double x1 = hi - gr * (hi - lo);
            const double x2 = lo + gr * (hi - lo);
            double p, q;
            if (project_frequency(samples, residual, x1, p, q) >
                project_frequency(samples, residual, x2, p, q))
                hi = x2;
            else
                lo = x1;
        }
        best_b = 0.5 * (lo + hi);
        double p, q;
        project_frequency(samples, residual, best_b, p, q);
        terms.push_back({std::hypot(p, q), best_b, std::atan2(q, p)});
        // re-solve every amplitude and phase at the fixed frequencies so the
        // next scan sees only genuinely unexplained content
        resolve_amplitudes(samples, terms);
        for (std::size_t j = 0; j < m; ++j)
            residual[j] = samples[j].second - eval_terms(terms, samples[j].first);
    }

    // Joint damped Gauss-Newton polish over all (a, b, c).
    const int n = 3 * n_terms;
    std::vector<double> jt_j(n * n), jt_r(n), jac_row(n), delta;
    double lambda = 1e-3;
    double sse = sse_of(samples, terms);
    int iterations = 0;
    for (; iterations < opts.max_iterations; ++iterations) {
        std::fill(jt_j.begin(), jt_j.end(), 0.0);
        std::fill(jt_r.begin(), jt_r.end(), 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const double theta = samples[j].first;
            double modeled = 0.0;
            for (int i = 0; i < n_terms; ++i) {
                const auto& t = terms[i];
                const double arg = t.frequency * theta + t.phase;
                const double s = std::sin(arg), c = std::cos(arg);
                modeled += t.amplitude * s;
                jac_row[3 * i] = s;
                jac_row[3 * i + 1] = t.amplitude * theta * c;
                jac_row[3 * i + 2] = t.amplitude * c;
            }
            const double r = samples[j].second - modeled;
            for (int col = 0; col < n; ++col) {
                jt_r[col] += jac_row[col] * r;
                for (int row = 0; row <= col; ++row)
                    jt_j[col * n + row] += jac_row[col] * jac_row[row];
            }
        }
        for (int col = 0; col < n; ++col)
            for (int row = col + 1; row < n; ++row)
                jt_j[col * n + row] = jt_j[row * n + col];

        bool improved = false;
        for (int tries = 0; tries < 24; ++tries) {
            if (solve_damped(jt_j, jt_r, n, lambda, delta)) {
                std::vector<HarmonicTerm> trial = terms;
                for (int i = 0; i < n_terms; ++i) {
                    trial[i].amplitude += delta[3 * i];
                    trial[i].frequency += delta[3 * i + 1];
                    trial[i].phase += delta[3 * i + 2];
                }
                const double trial_sse = sse_of(samples, trial);
                if (std::isfinite(trial_sse) && trial_sse < sse) {
                    terms = std::move(trial);
                    const double rel_drop = (sse - trial_sse) / std::max(sse, 1e-300);
                    sse = trial_sse;
                    lambda = std::max(lambda / 3.0, 1e-14);
                    improved = true;
                    if (rel_drop < 1e-14)
                        tries = 24; // effectively converged
                    break;
                }
            }
            lambda *= 3.0;
        }
        if (!improved)
            break;
        if (iterations % 8 == 7) {
            resolve_amplitudes(samples, terms);
            sse = sse_of(samples, terms);
        }
    }
    resolve_amplitudes(samples, terms);

    // Canonical form: non-negative amplitudes, phases in (-pi, pi], ascending
    // frequency order.
    for (auto& t : terms) {
        if (t.amplitude < 0.0) {
            t.amplitude = -t.amplitude;
            t.phase += std::numbers::pi;
        }
        if (t.frequency < 0.0) {
            t.frequency = -t.frequency;
            t.phase = std::numbers::pi - t.phase;
        }
        t.phase = std::remainder(t.phase, kTwoPi);
        if (t.phase <= -std::numbers::pi)
            t.phase += kTwoPi;
    }
    std::sort(terms.begin(), terms.end(),
              [](const HarmonicTerm& a, const HarmonicTerm& b) { return a.frequency < b.frequency; });

    FitResult result;
    result.prc.terms = std::move(terms);
    result.rms = std::sqrt(sse_of(samples, result.prc.terms) / static_cast<double>(m));
    result.iterations = iterations;
    if (opts.rms_bound >= 0.0 && result.rms > opts.rms_bound)
        throw IllConditionedError("fit stalled with RMS above the configured bound");
    return result;
}

// ---------------------------------------------------------------------------
// Model catalog
// ---------------------------------------------------------------------------

namespace {

HarmonicPrc make_harmonic(std::initializer_list<double> a, std::initializer_list<double> b,
                          std::initializer_list<double> c) {
    HarmonicPrc prc;
    auto ai = a.begin();
    auto bi = b.begin();
    auto ci = c.begin();
    for (; ai != a.end(); ++ai, ++bi, ++ci)
        prc.terms.push_back({*ai, *bi, *ci});
    return prc;
}

std::vector<PhaseModel> make_builtins() {
    std::vector<PhaseModel> models;
    models.push_back({"sniper", 1.0, SniperPrc{1.0}});
    models.push_back(
        {"hodgkin_huxley", 0.43,
         make_harmonic({0.09176, 0.07462, 0.03807, 0.02425, 0.01747, 0.006474, 0.002752, 0.0008111},
                       {1.002, 1.996, 3.002, 0.5, 3.747, 3.747, 6.228, 7.651},
                       {2.609, -1.605, 0.7233, 0.5148, 3.552, -0.7648, 0.6429, -4.726})});
    models.push_back(
        {"morris_lecar", 0.283,
         make_harmonic({5.137, 5.773, 0.7703, 1.065, 0.8143, 0.1028, 0.09711, 0.0698},
                       {0.4356, 0.7105, 2.185, 3.09, 3.362, 4.876, 5.829, 6.525},
                       {1.005, -1.474, 0.6535, 1.238, 3.585, 2.154, 2.375, 3.446})});
    return models;
}

nlohmann::ordered_json model_json(const PhaseModel& model) {
    nlohmann::ordered_json j;
    j["name"] = model.name;
    j["omega"] = model.omega;
    if (const auto* sniper = std::get_if<SniperPrc>(&model.prc)) {
        j["prc"] = {{"kind", "sniper"}, {"z_d", sniper->z_d}};
    } else {
        const auto& harmonic = std::get<HarmonicPrc>(model.prc);
        nlohmann::ordered_json terms = nlohmann::ordered_json::array();
        for (const auto& t : harmonic.terms)
            terms.push_back({t.amplitude, t.frequency, t.phase});
        j["prc"] = {{"kind", "harmonic"}, {"terms", terms}};
    }
    return j;
}

PhaseModel model_from(const nlohmann::json& j) {
    PhaseModel model;
    model.name = j.value("name", "unnamed");
    model.omega = j.at("omega").get<double>();
    if (!(model.omega > 0.0))
        throw std::invalid_argument("model omega must be positive");
    const auto& prc = j.at("prc");
    const std::string kind = prc.at("kind").get<std::string>();
    if (kind == "sniper") {
        const double z_d = prc.at("z_d").get<double>();
        if (!(z_d > 0.0))
            throw std::invalid_argument("sniper z_d must be positive");
        model.prc = SniperPrc{z_d};
    } else if (kind == "harmonic") {
        HarmonicPrc harmonic;
        for (const auto& row : prc.at("terms")) {
            HarmonicTerm t{row.at(0).get<double>(), row.at(1).get<double>(),
                           row.at(2).get<double>()};
            if (!(t.frequency > 0.0) || !std::isfinite(t.amplitude))
                throw std::invalid_argument("harmonic terms require finite a and b > 0");
            harmonic.terms.push_back(t);
        }
        if (harmonic.terms.empty())
            throw std::invalid_argument("harmonic PRC requires at least one term");
        model.prc = std::move(harmonic);
    } else {
        throw std::invalid_argument("unknown PRC kind: " + kind);
    }
    return model;
}

} // namespace

const std::vector<PhaseModel>& builtin_models() {
    static const std::vector<PhaseModel> models = make_builtins();
    return models;
}

const PhaseModel& builtin_model(const std::string& name) {
    for (const auto& m : builtin_models())
        if (m.name == name)
            return m;
    throw MissingInputError("unknown built-in model: " + name);
}

std::string model_to_json(const PhaseModel& model) {
    return model_json(model).dump(2);
}

PhaseModel model_from_json(const std::string& text) {
    return model_from(nlohmann::json::parse(text));
}

std::vector<PhaseModel> load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw MissingInputError("cannot open catalog file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<PhaseModel> models;
    if (j.is_array()) {
        for (const auto& entry : j)
            models.push_back(model_from(entry));
    } else {
        models.push_back(model_from(j));
    }
    return models;
}

} // namespace spikeopt
