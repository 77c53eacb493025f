#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikeopt/hh_statespace.hpp"
#include "spikeopt/synthesis.hpp"

namespace spikeopt::sweep {

/// One row of a feasible-region or validation sweep.
struct SweepRow {
    double M = 0.0;
    std::optional<double> min_T;
    std::optional<double> max_T;
    bool max_unbounded = false;
    std::string min_word;
    std::string max_word;
    std::optional<double> state_min_isi; // validation sweeps only
    std::optional<double> state_max_isi;
    std::optional<double> abs_err_min;
    std::optional<double> abs_err_max;
    std::string error; // per-row failure note; empty on success
};

/// The state-space natural period the baseline current is calibrated to, ms.
inline constexpr double kCalibrationTargetMs = 14.64;

/// Minimum- and maximum-time synthesis per grid point on the phase model.
/// Rows are independent and computed concurrently; per-row failures are
/// recorded in the row and the sweep continues.
std::vector<SweepRow> run_sweep(const PhaseModel& model, const std::vector<double>& m_grid);

/// Sweep plus full Hodgkin-Huxley validation: each synthesized control is
/// applied to the calibrated state-space model and the resulting inter-spike
/// interval and absolute error recorded.
std::vector<SweepRow> run_validation_sweep(const PhaseModel& model,
                                           const std::vector<double>& m_grid, int n_cycles);

std::string sweep_to_csv(const std::vector<SweepRow>& rows, bool validation);

/// Median inter-spike interval of a controlled run; the first cycle is
/// dropped when more than two are available (re-synchronization).
double representative_isi(const hh::SpikeTrain& train);

/// Parse "lo:hi:count" (inclusive linspace) or a comma-separated list.
std::vector<double> parse_m_grid(const std::string& spec);

// ---------------------------------------------------------------------------
// Plot script emission (gnuplot sidecars; never required by tests)
// ---------------------------------------------------------------------------

std::string control_plot_script(const std::string& control_csv, const std::string& run_csv,
                                const std::string& title);
std::string sweep_plot_script(const std::string& sweep_csv, const std::string& title);
std::string error_map_plot_script(const std::string& validate_csv, const std::string& title);

} // namespace spikeopt::sweep
