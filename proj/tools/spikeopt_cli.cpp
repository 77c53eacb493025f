#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikeopt/hh_statespace.hpp"
#include "spikeopt/schedule_sim.hpp"
#include "spikeopt/sweep.hpp"
#include "spikeopt/synthesis.hpp"

namespace {

using namespace spikeopt;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingInputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliConfig {
    std::string model = "hodgkin_huxley";
    std::string model_json;
    double m = 0.7;
    std::string objective = "min";
    std::optional<double> target_delay;
    std::string m_grid = "0.05:2.5:50";
    int cycles = 5;
    std::string out;
    std::string samples;
    int terms = 8;
    bool plots = false;
};

// Flags override the config file: apply file values first, reparse flags after.
void apply_config_file(const std::string& path, CliConfig& cfg) {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    if (j.contains("model"))
        cfg.model = j["model"].get<std::string>();
    if (j.contains("model_json"))
        cfg.model_json = j["model_json"].get<std::string>();
    if (j.contains("M"))
        cfg.m = j["M"].get<double>();
    if (j.contains("objective"))
        cfg.objective = j["objective"].get<std::string>();
    if (j.contains("target_delay"))
        cfg.target_delay = j["target_delay"].get<double>();
    if (j.contains("M_grid"))
        cfg.m_grid = j["M_grid"].get<std::string>();
    if (j.contains("cycles"))
        cfg.cycles = j["cycles"].get<int>();
    if (j.contains("out"))
        cfg.out = j["out"].get<std::string>();
    if (j.contains("samples"))
        cfg.samples = j["samples"].get<std::string>();
    if (j.contains("terms"))
        cfg.terms = j["terms"].get<int>();
    if (j.contains("plots"))
        cfg.plots = j["plots"].get<bool>();
}

PhaseModel resolve_model(const CliConfig& cfg) {
    if (!cfg.model_json.empty())
        return model_from_json(read_file(cfg.model_json));
    return builtin_model(cfg.model);
}

std::string default_out(const CliConfig& cfg, const std::string& stem) {
    if (!cfg.out.empty())
        return cfg.out;
    return stem;
}

int cmd_synthesize(const CliConfig& cfg) {
    const PhaseModel model = resolve_model(cfg);
    synthesis::SynthesisResult result;
    if (cfg.objective == "min")
        result = synthesis::min_time_synthesize(model, cfg.m);
    else if (cfg.objective == "max")
        result = synthesis::max_time_synthesize(model, cfg.m, cfg.target_delay);
    else
        throw std::invalid_argument("objective must be min or max");

    const auto control = sim::to_time_domain(model, result.schedule);
    char mbuf[32];
    std::snprintf(mbuf, sizeof mbuf, "%g", cfg.m);
    const std::string base =
        default_out(cfg, model.name + "_" + cfg.objective + "_M" + mbuf);
    write_file(base + ".json", synthesis::result_to_json(result));
    write_file(base + ".control.csv", sim::control_to_csv(control));
    if (cfg.plots) {
        const auto run = sim::simulate_phase(model, control);
        write_file(base + ".run.csv", sim::phase_run_to_csv(run));
        write_file(base + ".gp",
                   sweep::control_plot_script(base + ".control.csv", base + ".run.csv",
                                              model.name + " " + cfg.objective + "-time"));
    }
    std::cout << "word " << synthesis::word_string(result.word) << "  T "
              << result.predicted_T << " ms  charge " << result.charge_residual << "\n"
              << "wrote " << base << ".json\n";
    return 0;
}

int cmd_simulate(const CliConfig& cfg, const std::string& result_path) {
    const auto result = synthesis::result_from_json(read_file(result_path));
    const auto control = sim::to_time_domain(result.model, result.schedule);
    const auto run = sim::simulate_phase(result.model, control);
    const std::string base = default_out(
        cfg, std::filesystem::path(result_path).stem().string() + "_run");
    write_file(base + ".csv", sim::phase_run_to_csv(run));
    std::cout << "predicted_T " << result.predicted_T << " ms  simulated "
              << run.spike_time << " ms  final_charge " << run.final_charge << "\n"
              << "wrote " << base << ".csv\n";
    return 0;
}

int cmd_sweep(const CliConfig& cfg) {
    const PhaseModel model = resolve_model(cfg);
    const auto grid = sweep::parse_m_grid(cfg.m_grid);
    const auto rows = sweep::run_sweep(model, grid);
    const std::string base = default_out(cfg, model.name + "_sweep");
    write_file(base + ".csv", sweep::sweep_to_csv(rows, false));
    if (cfg.plots)
        write_file(base + ".gp",
                   sweep::sweep_plot_script(base + ".csv", model.name + " feasible range"));
    std::cout << "wrote " << base << ".csv (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_validate(const CliConfig& cfg) {
    const PhaseModel model = resolve_model(cfg);
    const auto grid = sweep::parse_m_grid(cfg.m_grid);
    const auto rows = sweep::run_validation_sweep(model, grid, cfg.cycles);
    const std::string base = default_out(cfg, model.name + "_validate");
    write_file(base + ".csv", sweep::sweep_to_csv(rows, true));
    if (cfg.plots) {
        write_file(base + ".gp",
                   sweep::error_map_plot_script(base + ".csv", model.name + " spiking-time error"));
        // one full-state trace and its spike train, for the first grid point
        hh::HHParams params;
        params.i_b = hh::calibrate_baseline(params, sweep::kCalibrationTargetMs);
        const auto result = synthesis::min_time_synthesize(model, grid.front());
        const auto control = sim::to_time_domain(model, result.schedule);
        const auto traj = hh::controlled_trajectory(params, control, control.total_duration + 5.0);
        write_file(base + ".traj.csv", hh::trajectory_to_csv(traj, control));
        write_file(base + ".spikes.json",
                   hh::spike_train_to_json(hh::apply_control(params, control, cfg.cycles)));
    }
    std::cout << "wrote " << base << ".csv (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_fit_prc(const CliConfig& cfg) {
    if (cfg.samples.empty())
        throw MissingInputError("fit-prc requires --samples FILE");
    std::ifstream in(cfg.samples);
    if (!in)
        throw MissingInputError("cannot open " + cfg.samples);
    std::vector<std::pair<double, double>> samples;
    std::string line;
    while (std::getline(in, line)) {
        double theta, z;
        if (std::sscanf(line.c_str(), "%lf,%lf", &theta, &z) == 2)
            samples.emplace_back(theta, z);
    }
    const auto fit = fit_harmonics(samples, cfg.terms);
    PhaseModel model{"fitted", 1.0, fit.prc};
    const std::string base = default_out(cfg, "fitted_prc");
    write_file(base + ".json", model_to_json(model));
    std::cout << "rms " << fit.rms << " over " << samples.size() << " samples ("
              << fit.iterations << " iterations)\nwrote " << base << ".json\n";
    return 0;
}

int cmd_emit_plots(const std::vector<std::string>& files) {
    int written = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string& f = files[i];
        if (!std::filesystem::exists(f))
            throw MissingInputError("input file missing: " + f);
        const std::string stem = std::filesystem::path(f).stem().string();
        std::ifstream in(f);
        std::string header;
        std::getline(in, header);
        if (header.rfind("M,phase_min_T", 0) == 0) {
            write_file(stem + ".gp", sweep::error_map_plot_script(f, stem));
        } else if (header.rfind("M,min_T", 0) == 0) {
            write_file(stem + ".gp", sweep::sweep_plot_script(f, stem));
        } else if (header.rfind("t_start", 0) == 0) {
            // pair a control CSV with the next file (a phase-run CSV)
            if (i + 1 >= files.size())
                throw MissingInputError("control CSV needs a matching run CSV: " + f);
            write_file(stem + ".gp", sweep::control_plot_script(f, files[i + 1], stem));
            ++i;
        } else {
            throw MissingInputError("unrecognized plot input: " + f);
        }
        ++written;
        std::cout << "wrote " << stem << ".gp\n";
    }
    return written > 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* tol_env = std::getenv("SPIKEOPT_TOL")) {
        const double tol = std::strtod(tol_env, nullptr);
        if (tol > 0.0) {
            auto& t = numerics::tolerances();
            t.quad_abs = tol;
            t.root = tol;
            t.ode_rel = tol;
        }
    }

    CLI::App app{"charge-balanced time-optimal stimulus synthesis for phase-model oscillators"};
    app.require_subcommand(1);

    CliConfig cfg;
    std::string config_path, result_path;
    std::vector<std::string> plot_files;

    // pre-scan for --config so file values act as defaults the flags override
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config")
            config_path = argv[i + 1];
    if (!config_path.empty()) {
        try {
            apply_config_file(config_path, cfg);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    auto add_model_flags = [&](CLI::App* sub) {
        sub->add_option("--model", cfg.model, "built-in model name");
        sub->add_option("--model-json", cfg.model_json, "path to a catalog entry JSON");
        sub->add_option("--config", config_path, "JSON config file mirroring the flags");
        sub->add_option("--out", cfg.out, "output path stem");
        sub->add_flag("--plots", cfg.plots, "also write gnuplot sidecar scripts");
    };

    auto* synth = app.add_subcommand("synthesize", "synthesize a charge-balanced control");
    add_model_flags(synth);
    synth->add_option("--M", cfg.m, "control amplitude bound, uA/cm^2");
    synth->add_option("--objective", cfg.objective, "min or max");
    double target_delay_flag = -1.0;
    synth->add_option("--target-delay", target_delay_flag,
                      "target total time (ms) for the unbounded-delay regime");

    auto* simulate = app.add_subcommand("simulate", "simulate a synthesized result file");
    simulate->add_option("--result", result_path, "SynthesisResult JSON")->required();
    simulate->add_option("--out", cfg.out, "output path stem");

    auto* swp = app.add_subcommand("sweep", "feasible-region sweep over M");
    add_model_flags(swp);
    swp->add_option("--M-grid", cfg.m_grid, "lo:hi:count or comma list");

    auto* val = app.add_subcommand("validate", "sweep with full Hodgkin-Huxley validation");
    add_model_flags(val);
    val->add_option("--M-grid", cfg.m_grid, "lo:hi:count or comma list");
    val->add_option("--cycles", cfg.cycles, "control cycles per point");

    auto* fit = app.add_subcommand("fit-prc", "least-squares harmonic PRC fit");
    fit->add_option("--samples", cfg.samples, "CSV of theta,Z rows")->required();
    fit->add_option("--terms", cfg.terms, "number of harmonic terms");
    fit->add_option("--out", cfg.out, "output path stem");

    auto* plots = app.add_subcommand("emit-plots", "write gnuplot scripts for result files");
    plots->add_option("files", plot_files, "result/sweep CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    if (target_delay_flag > 0.0)
        cfg.target_delay = target_delay_flag;

    try {
        if (synth->parsed())
            return cmd_synthesize(cfg);
        if (simulate->parsed())
            return cmd_simulate(cfg, result_path);
        if (swp->parsed())
            return cmd_sweep(cfg);
        if (val->parsed())
            return cmd_validate(cfg);
        if (fit->parsed())
            return cmd_fit_prc(cfg);
        if (plots->parsed())
            return cmd_emit_plots(plot_files);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
