#include "spikeopt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spikeopt::numerics {

void validate(const Interval& iv) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi))
        throw std::invalid_argument("interval requires finite lo < hi");
}

Tolerances& tolerances() {
    static Tolerances t;
    return t;
}

namespace {

// Gauss(7)/Kronrod(15) nodes and weights on [-1, 1]; the Gauss points are
// the even-indexed Kronrod points.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b;
};

struct GkEval {
    double kronrod;
    double gauss;
    double magnitude; // L1 panel mass, the roundoff/cancellation scale
};

GkEval gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double resk = 0.0, resg = 0.0, resabs = 0.0;
    for (int j = 0; j < 8; ++j) {
        const double dx = h * kXgk[j];
        double fsum, fabs_sum;
        if (j == 7) {
            fsum = f(c);
            fabs_sum = std::fabs(fsum);
        } else {
            const double f1 = f(c - dx);
            const double f2 = f(c + dx);
            fsum = f1 + f2;
            fabs_sum = std::fabs(f1) + std::fabs(f2);
        }
        if (!std::isfinite(fsum))
            throw NonFiniteError("integrand returned a non-finite value");
        resk += kWgk[j] * fsum;
        resabs += kWgk[j] * fabs_sum;
        if (j % 2 == 1)
            resg += kWg[j / 2] * fsum;
    }
    if (!std::isfinite(resk))
        throw NonFiniteError("quadrature sum overflowed");
    return {resk * h, resg * h, resabs * h};
}

} // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, Interval iv, double tol) {
    validate(iv);
    if (!(tol > 0.0))
        throw std::invalid_argument("quadrature tolerance must be positive");

    const std::size_t budget = tolerances().budget;
    const double total_width = iv.width();
    QuadResult out;

    std::vector<Panel> stack{{iv.lo, iv.hi}};
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        const GkEval e = gk15(f, p.a, p.b);
        out.evaluations += 15;
        const double err = std::fabs(e.kronrod - e.gauss);
        // Share the global tolerance in proportion to panel width, floored at
        // the panel's cancellation noise scale (integrands built from
        // near-cancelling sums carry ~1e-12 relative noise at their worst).
        const double local_tol =
            std::max(tol * (p.b - p.a) / total_width, 1e-12 * e.magnitude);
        const double width_floor =
            std::numeric_limits<double>::epsilon() * 4.0 *
            std::max({std::fabs(p.a), std::fabs(p.b), 1e-300});
        if (err <= local_tol || (p.b - p.a) <= width_floor) {
            out.value += e.kronrod;
            out.err_estimate += err;
            continue;
        }
        if (out.evaluations + 30 > budget)
            throw NoConvergenceError("quadrature evaluation budget exhausted");
        const double mid = 0.5 * (p.a + p.b);
        stack.push_back({p.a, mid});
        stack.push_back({mid, p.b});
    }
    return out;
}

double find_root_bracketed(const std::function<double(double)>& f, Interval iv, double tol) {
    validate(iv);
    if (!(tol > 0.0))
        throw std::invalid_argument("root tolerance must be positive");

    double a = iv.lo, b = iv.hi;
    double fa = f(a), fb = f(b);
    std::size_t evals = 2;
    if (!std::isfinite(fa) || !std::isfinite(fb))
        throw NonFiniteError("root function returned a non-finite value at the bracket");
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw NoSignChangeError("f(lo) and f(hi) have the same sign");

    const std::size_t budget = tolerances().budget;
    double width_at_last_bisect = b - a;
    bool force_bisect = false;
    while (true) {
        const double width = b - a;
        const double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max({std::fabs(a), std::fabs(b), 1.0e-30});
        if (width <= floor)
            return std::fabs(fa) <= std::fabs(fb) ? a : b;

        // Secant step from the bracket endpoints, bisected whenever the
        // bracket is not halving fast enough or the step leaves the interior.
        double x;
        if (!force_bisect) {
            x = a - fa * (b - a) / (fb - fa);
            const double margin = 0.01 * width;
            if (!(x > a + margin && x < b - margin))
                x = 0.5 * (a + b);
        } else {
            x = 0.5 * (a + b);
        }

        const double fx = f(x);
        if (++evals > budget)
            throw NoConvergenceError("root evaluation budget exhausted");
        if (!std::isfinite(fx))
            throw NonFiniteError("root function returned a non-finite value");
        if (std::fabs(fx) <= tol)
            return x;

        if ((fx > 0.0) == (fa > 0.0)) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if ((b - a) > 0.5 * width_at_last_bisect) {
            force_bisect = true;
            width_at_last_bisect = b - a;
        } else {
            force_bisect = false;
            width_at_last_bisect = std::min(width_at_last_bisect, b - a);
        }
    }
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = 35.0 / 384 - 5179.0 / 57600, kE3 = 500.0 / 1113 - 7571.0 / 16695,
                 kE4 = 125.0 / 192 - 393.0 / 640, kE5 = -2187.0 / 6784 + 92097.0 / 339200,
                 kE6 = 11.0 / 84 - 187.0 / 2100, kE7 = -1.0 / 40;
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;

class Dopri5 {
public:
    Dopri5(const OdeField& field, std::size_t dim) : field_(field), dim_(dim) {
        for (auto& k : k_)
            k.resize(dim);
        ytmp_.resize(dim);
    }

    // One trial step from (t, y) of size h; writes the 5th-order result into
    // y_out and returns the scaled error norm. k_[0] must hold f(t, y).
    double step(double t, const std::vector<double>& y, double h, std::vector<double>& y_out,
                double rel_tol, double abs_tol) {
        stage(t + kC2 * h, y, h, {kA21}, 1);
        stage(t + kC3 * h, y, h, {kA31, kA32}, 2);
        stage(t + kC4 * h, y, h, {kA41, kA42, kA43}, 3);
        stage(t + kC5 * h, y, h, {kA51, kA52, kA53, kA54}, 4);
        stage(t + h, y, h, {kA61, kA62, kA63, kA64, kA65}, 5);
        for (std::size_t i = 0; i < dim_; ++i)
            y_out[i] = y[i] + h * (kB1 * k_[0][i] + kB3 * k_[2][i] + kB4 * k_[3][i] +
                                   kB5 * k_[4][i] + kB6 * k_[5][i]);
        field_(t + h, y_out, k_[6]);

        double err_sq = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double e = h * (kE1 * k_[0][i] + kE3 * k_[2][i] + kE4 * k_[3][i] +
                                  kE5 * k_[4][i] + kE6 * k_[5][i] + kE7 * k_[6][i]);
            const double scale =
                abs_tol + rel_tol * std::max(std::fabs(y[i]), std::fabs(y_out[i]));
            err_sq += (e / scale) * (e / scale);
        }
        return std::sqrt(err_sq / static_cast<double>(dim_));
    }

    void eval_f0(double t, const std::vector<double>& y) { field_(t, y, k_[0]); }
    const std::vector<double>& k7() const { return k_[6]; }
    std::vector<double>& k0() { return k_[0]; }

private:
    void stage(double t, const std::vector<double>& y, double h,
               std::initializer_list<double> coeffs, int out_stage) {
        for (std::size_t i = 0; i < dim_; ++i) {
            double acc = 0.0;
            int s = 0;
            for (double c : coeffs)
                acc += c * k_[s++][i];
            ytmp_[i] = y[i] + h * acc;
        }
        field_(t, ytmp_, k_[out_stage]);
    }

    const OdeField& field_;
    std::size_t dim_;
    std::vector<double> k_[7];
    std::vector<double> ytmp_;
};

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

// Single 5th-order step used when locating an event inside an accepted step.
void single_step_to(const OdeField& field, double t0, const std::vector<double>& y0, double t1,
                    std::vector<double>& out) {
    Dopri5 rk(field, y0.size());
    rk.eval_f0(t0, y0);
    out.resize(y0.size());
    rk.step(t0, y0, t1 - t0, out, 1.0, 1.0);
}

} // namespace

OdeTrajectory integrate_ode(const OdeField& field, std::vector<double> y0, Interval span,
                            const OdeOptions& opt, const OdeEventFn& event) {
    validate(span);
    if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0))
        throw std::invalid_argument("ODE tolerances must be positive");
    if (!all_finite(y0))
        throw std::invalid_argument("initial state must be finite");

    const std::size_t dim = y0.size();
    Dopri5 rk(field, dim);

    OdeTrajectory traj;
    traj.times.push_back(span.lo);
    traj.states.push_back(y0);

    double t = span.lo;
    std::vector<double> y = std::move(y0);
    std::vector<double> ynew(dim);
    rk.eval_f0(t, y);
    if (!all_finite(rk.k0()))
        throw NonFiniteError("ODE field non-finite at the initial state");

    double g_prev = event ? event(t, y) : 0.0;
    double h = span.width() / 100.0;
    const double h_min = std::max(span.width(), 1.0) * 1e-14;

    for (std::size_t steps = 0; t < span.hi; ++steps) {
        if (steps >= opt.max_steps)
            throw NoConvergenceError("ODE step budget exhausted");
        h = std::min(h, span.hi - t);
        const double err = rk.step(t, y, h, ynew, opt.rel_tol, opt.abs_tol);
        if (!std::isfinite(err) || !all_finite(ynew)) {
            h *= 0.25;
            if (h < h_min)
                throw NonFiniteError("ODE solution diverged");
            continue;
        }
        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (h < h_min)
                throw StepUnderflowError("ODE step size collapsed below the floor");
            continue;
        }

        const double t_new = t + h;
        if (event) {
            const double g_new = event(t_new, ynew);
            if (g_prev < 0.0 && g_new >= 0.0) {
                // Bisect the bracketing step for the upward crossing time.
                double lo = t, hi = t_new;
                std::vector<double> ymid;
                while (hi - lo > opt.event_time_tol) {
                    const double mid = 0.5 * (lo + hi);
                    single_step_to(field, t, y, mid, ymid);
                    if (event(mid, ymid) >= 0.0)
                        hi = mid;
                    else
                        lo = mid;
                }
                const double t_event = 0.5 * (lo + hi);
                traj.events.push_back({t_event, opt.event_label});
                if (opt.stop_at_event) {
                    single_step_to(field, t, y, t_event, ymid);
                    traj.times.push_back(t_event);
                    traj.states.push_back(ymid);
                    return traj;
                }
            }
            g_prev = g_new;
        }

        t = t_new;
        y.swap(ynew);
        rk.k0() = rk.k7(); // FSAL
        traj.times.push_back(t);
        traj.states.push_back(y);

        const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(grow, 0.2, 5.0);
    }
    return traj;
}

} // namespace spikeopt::numerics
