#include "spikeopt/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace spikeopt::sweep {

namespace {

std::string fmt12(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void fill_phase_columns(const PhaseModel& model, double m, SweepRow& row) {
    try {
        const auto min_result = synthesis::min_time_synthesize(model, m);
        row.min_T = min_result.predicted_T;
        row.min_word = synthesis::word_string(min_result.word);
    } catch (const Error& e) {
        row.error += std::string("min: ") + e.what();
    }
    try {
        const auto max_result = synthesis::max_time_synthesize(model, m);
        row.max_T = max_result.predicted_T;
        row.max_word = synthesis::word_string(max_result.word);
    } catch (const TargetRequiredError&) {
        row.max_unbounded = true;
        row.max_word = "unbounded";
    } catch (const Error& e) {
        if (!row.error.empty())
            row.error += "; ";
        row.error += std::string("max: ") + e.what();
    }
}

void fill_state_columns(const PhaseModel& model, double m, int n_cycles, SweepRow& row) {
    hh::HHParams params;
    params.i_b = hh::calibrate_baseline(params, kCalibrationTargetMs);
    try {
        if (row.min_T) {
            const auto r = synthesis::min_time_synthesize(model, m);
            const auto control = sim::to_time_domain(model, r.schedule);
            const auto train = hh::apply_control(params, control, n_cycles);
            row.state_min_isi = representative_isi(train);
            row.abs_err_min = hh::spike_time_error(*row.min_T, *row.state_min_isi);
        }
        if (row.max_T) {
            const auto r = synthesis::max_time_synthesize(model, m);
            const auto control = sim::to_time_domain(model, r.schedule);
            const auto train = hh::apply_control(params, control, n_cycles);
            row.state_max_isi = representative_isi(train);
            row.abs_err_max = hh::spike_time_error(*row.max_T, *row.state_max_isi);
        }
    } catch (const Error& e) {
        if (!row.error.empty())
            row.error += "; ";
        row.error += std::string("state: ") + e.what();
    }
}

// Rows are embarrassingly parallel; run them on a small pool and assemble in
// grid order regardless of completion order.
template <typename Fn>
std::vector<SweepRow> parallel_rows(const std::vector<double>& m_grid, Fn&& per_row) {
    std::vector<SweepRow> rows(m_grid.size());
    std::atomic<std::size_t> next{0};
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(m_grid.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < m_grid.size(); i = next.fetch_add(1)) {
                rows[i].M = m_grid[i];
                per_row(m_grid[i], rows[i]);
            }
        });
    }
    for (auto& th : pool)
        th.join();
    return rows;
}

} // namespace

double representative_isi(const hh::SpikeTrain& train) {
    std::vector<double> isis = train.inter_spike_intervals;
    if (isis.empty())
        throw NoSpikeError("no inter-spike intervals recorded");
    if (isis.size() > 2)
        isis.erase(isis.begin());
    std::sort(isis.begin(), isis.end());
    const std::size_t n = isis.size();
    return n % 2 == 1 ? isis[n / 2] : 0.5 * (isis[n / 2 - 1] + isis[n / 2]);
}

std::vector<SweepRow> run_sweep(const PhaseModel& model, const std::vector<double>& m_grid) {
    if (m_grid.empty())
        throw std::invalid_argument("sweep requires a nonempty M grid");
    return parallel_rows(m_grid,
                         [&](double m, SweepRow& row) { fill_phase_columns(model, m, row); });
}

std::vector<SweepRow> run_validation_sweep(const PhaseModel& model,
                                           const std::vector<double>& m_grid, int n_cycles) {
    if (m_grid.empty())
        throw std::invalid_argument("sweep requires a nonempty M grid");
    if (model.name != "hodgkin_huxley")
        throw std::invalid_argument("validation sweeps require the hodgkin_huxley model");
    // calibrate once up front so worker threads share the memoized value
    hh::HHParams params;
    hh::calibrate_baseline(params, kCalibrationTargetMs);
    return parallel_rows(m_grid, [&](double m, SweepRow& row) {
        fill_phase_columns(model, m, row);
        fill_state_columns(model, m, n_cycles, row);
    });
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows, bool validation) {
    std::ostringstream out;
    if (validation)
        out << "M,phase_min_T,phase_max_T,min_word,max_word,state_min_ISI,state_max_ISI,"
               "abs_err_min,abs_err_max,error\n";
    else
        out << "M,min_T,max_T,min_word,max_word,error\n";
    auto cell = [](const std::optional<double>& v) { return v ? fmt12(*v) : std::string(); };
    for (const SweepRow& r : rows) {
        out << fmt12(r.M) << ',' << cell(r.min_T) << ','
            << (r.max_unbounded ? std::string("unbounded") : cell(r.max_T)) << ',' << r.min_word
            << ',' << r.max_word;
        if (validation)
            out << ',' << cell(r.state_min_isi) << ',' << cell(r.state_max_isi) << ','
                << cell(r.abs_err_min) << ',' << cell(r.abs_err_max);
        out << ',' << sanitize(r.error) << '\n';
    }
    return out.str();
}

std::vector<double> parse_m_grid(const std::string& spec) {
    std::vector<double> grid;
    if (spec.find(':') != std::string::npos) {
        double lo, hi;
        int count;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
            throw std::invalid_argument("M grid spec must be lo:hi:count or a comma list");
        if (count == 1) {
            grid.push_back(lo);
        } else {
            for (int i = 0; i < count; ++i)
                grid.push_back(lo + (hi - lo) * i / (count - 1));
        }
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty())
                grid.push_back(std::stod(item));
    }
    if (grid.empty())
        throw std::invalid_argument("empty M grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0))
            throw std::invalid_argument("all grid M must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("M grid must be strictly ascending");
    }
    return grid;
}

std::string control_plot_script(const std::string& control_csv, const std::string& run_csv,
                                const std::string& title) {
    std::ostringstream out;
    out << "set datafile separator ','\n"
        << "set multiplot layout 2,1 title '" << title << "'\n"
        << "set ylabel 'u (uA/cm^2)'\n"
        << "plot '" << control_csv << "' every ::1 using 1:3:($2-$1) with steps lw 2 "
        << "title 'control'\n"
        << "set xlabel 't (ms)'\nset ylabel 'theta (rad)'\n"
        << "plot '" << run_csv << "' every ::1 using 1:2 with lines lw 2 title 'phase', \\\n"
        << "     '" << run_csv << "' every ::1 using 1:3 with lines lw 1 title 'charge'\n"
        << "unset multiplot\n";
    return out.str();
}

std::string sweep_plot_script(const std::string& sweep_csv, const std::string& title) {
    std::ostringstream out;
    out << "set datafile separator ','\n"
        << "set title '" << title << "'\n"
        << "set xlabel 'M (uA/cm^2)'\nset ylabel 'spiking time (ms)'\n"
        << "plot '" << sweep_csv << "' every ::1 using 1:2:3 with filledcurves fs transparent "
        << "solid 0.3 title 'feasible range', \\\n"
        << "     '' every ::1 using 1:2 with lines lw 2 title 'min T', \\\n"
        << "     '' every ::1 using 1:3 with lines lw 2 title 'max T'\n";
    return out.str();
}

std::string error_map_plot_script(const std::string& validate_csv, const std::string& title) {
    std::ostringstream out;
    out << "set datafile separator ','\n"
        << "set title '" << title << "'\n"
        << "set xlabel 'spiking time (ms)'\nset ylabel 'absolute error (ms)'\n"
        << "set cblabel 'M (uA/cm^2)'\n"
        << "plot '" << validate_csv << "' every ::1 using 6:8:1 with points pt 7 palette "
        << "title 'min-time', \\\n"
        << "     '' every ::1 using 7:9:1 with points pt 9 palette title 'max-time'\n";
    return out.str();
}

} // namespace spikeopt::sweep
