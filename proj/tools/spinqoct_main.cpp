#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinqoct/protocol.hpp"
#include "spinqoct/units.hpp"

namespace fs = std::filesystem;
using namespace spinqoct;

namespace {

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) {
        ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    return ExperimentConfig::from_json_file(path);
}

void print_model(const ExperimentConfig& cfg, bool as_json) {
    const SpinSystem sys = build_system(cfg.spin);
    const double tau = sys.tau();
    const double w_top = sys.transition_frequency(sys.d - 2, sys.d - 1);

    if (as_json) {
        nlohmann::json j;
        j["d"] = sys.d;
        j["energies_rad_us"] =
            std::vector<double>(sys.energies.begin(), sys.energies.end());
        std::vector<double> gaps;
        for (int n = 0; n + 1 < sys.d; ++n)
            gaps.push_back((sys.energies(n + 1) - sys.energies(n)) /
                           units::two_pi * 1e-3);
        j["adjacent_gaps_GHz"] = gaps;
        j["tau_us"] = tau;
        j["omega_top_rad_us"] = w_top;
        j["degenerate"] = sys.degenerate;
        std::vector<double> vmod;
        for (int n = 0; n + 1 < sys.d; ++n)
            vmod.push_back(std::abs(sys.drive_element(n, n + 1)));
        j["adjacent_drive_moduli_rad_us_mT"] = vmod;
        nlohmann::json tmin;
        for (const auto& g : {"U1", "U4", "Toffoli"})
            tmin[g] = min_duration(sys, gate_sequence(g), cfg.A_max_mT) / tau;
        j["T_min_tau"] = tmin;
        std::cout << j.dump(2) << "\n";
        return;
    }

    std::printf("spin system: d = %d levels (S = %g)\n", sys.d, cfg.spin.S);
    std::printf("%-4s %-18s %-12s\n", "n", "E_n [rad/us]", "E_n/2pi [GHz]");
    for (int n = 0; n < sys.d; ++n)
        std::printf("%-4d %-18.6f %-12.6f\n", n, sys.energies(n),
                    sys.energies(n) / units::two_pi * 1e-3);
    std::printf("\nadjacent transitions:\n");
    std::printf("%-8s %-14s %-20s\n", "(j,k)", "gap [GHz]", "|<j|V|k>| [rad/us/mT]");
    for (int n = 0; n + 1 < sys.d; ++n)
        std::printf("(%d,%d)    %-14.6f %-20.6f\n", n, n + 1,
                    sys.transition_frequency(n, n + 1) / units::two_pi * 1e-3,
                    std::abs(sys.drive_element(n, n + 1)));
    std::printf("\ntau = 2pi/omega_%d%d = %.6g us (%.4f ns)\n", sys.d - 2,
                sys.d - 1, tau, tau * 1e3);
    std::printf("omega_max = %g * omega_%d%d = %.6g rad/us\n",
                cfg.omega_max_multiplier, sys.d - 2, sys.d - 1,
                cfg.omega_max_multiplier * w_top);
    if (sys.degenerate)
        std::printf("warning: near-degenerate spectrum, addressability is lost\n");
    std::printf("\nsequence minimum durations at A_max = %g mT:\n", cfg.A_max_mT);
    for (const auto& g : {"U1", "U4", "Toffoli"}) {
        const auto seq = gate_sequence(g);
        std::printf("  %-8s %2zu segments, T_min = %.4f tau\n", g, seq.size(),
                    min_duration(sys, seq, cfg.A_max_mT) / tau);
    }
}

void print_records(const std::vector<SweepRecord>& records) {
    std::printf("%-10s %-8s %9s %9s %12s %8s\n", "method", "gate", "T/tau",
                "T2/tau", "infidelity", "conv");
    for (const auto& r : records)
        std::printf("%-10s %-8s %9.4g %9.4g %12.4e %8s\n", r.method.c_str(),
                    r.gate.c_str(), r.T_over_tau, r.T2_over_tau, r.infidelity,
                    r.converged ? "yes" : "no");
}

void dump_trajectory(const ExperimentConfig& cfg, const ProtocolRunner& runner,
                     const SweepRecord& rec, const std::string& path) {
    if (rec.pulse_file.empty()) return;
    const SpinSystem& sys = runner.system();
    const double T = rec.T_over_tau * runner.tau();
    const bool open_system = rec.method == "M-L" || rec.method == "QOCT-S-L" ||
                             rec.method == "QOCT-L-L";
    const LindbladModel model =
        open_system
            ? LindbladModel::pure_dephasing(sys.d, rec.T2_over_tau * runner.tau())
            : LindbladModel::none();

    // follow the uniform-superposition member of the merit state set
    const Eigen::MatrixXcd rho0 =
        Eigen::MatrixXcd::Constant(sys.d, sys.d, cplx(1.0 / sys.d, 0.0));

    std::function<double(double)> f;
    PulseSequence seq;
    FourierPulse pulse(Eigen::VectorXd::Zero(2), 1.0, 1, 1.0, 0.0, 1e9);
    if (rec.method == "M-S" || rec.method == "M-L") {
        seq = build_sequence(sys, gate_sequence(rec.gate), cfg.A_max_mT, T);
        f = [&seq](double t) { return seq.value(t); };
    } else {
        const fs::path params =
            fs::path(cfg.output_dir) /
            (rec.pulse_file.substr(0, rec.pulse_file.size() - 13) + "_params.json");
        pulse = read_pulse_params(params.string());
        f = [&pulse](double t) { return pulse.value(t); };
    }

    std::vector<TrajectoryPoint> traj;
    const int N = cfg.propagator.steps_for(sys, runner.omega_max(), T);
    const int stride = std::max(1, N / 1000);
    propagate_forward(sys, model, f, rho0, T, cfg.propagator, &traj, stride);

    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path);
    std::fprintf(fp, "# t_us");
    for (int n = 0; n < sys.d; ++n) std::fprintf(fp, " pop%d", n);
    std::fprintf(fp, " Re_rho_%d%d Im_rho_%d%d\n", sys.d - 2, sys.d - 1,
                 sys.d - 2, sys.d - 1);
    for (const auto& pt : traj) {
        std::fprintf(fp, "%.17g", pt.t);
        for (int n = 0; n < sys.d; ++n)
            std::fprintf(fp, " %.17g", pt.rho(n, n).real());
        const cplx c = pt.rho(sys.d - 2, sys.d - 1);
        std::fprintf(fp, " %.17g %.17g\n", c.real(), c.imag());
    }
    std::fclose(fp);
    std::printf("trajectory written to %s\n", path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained pulse design for spin-qudit gates"};
    app.require_subcommand(1);

    std::string config_path, output_dir, gate, method = "QOCT-L-L";
    std::string records_path = "out/records.csv", table_csv, trajectory_path;
    double T_tau = 0.0, T2_tau = 0.0;
    bool as_json = false;

    auto* show = app.add_subcommand("model", "inspect the spin model");
    auto* show_show = show->add_subcommand("show", "levels, gaps, tau");
    show_show->add_option("--config", config_path, "config file (JSON)");
    show_show->add_flag("--json", as_json, "machine-readable output");

    auto* baseline = app.add_subcommand(
        "baseline", "monochromatic-sequence methods only (M-S, M-L)");
    baseline->add_option("--config", config_path, "config file (JSON)");
    baseline->add_option("-o,--output", output_dir, "output directory override");
    baseline->add_option("--gate", gate, "gate override (U1, U4, Toffoli)");

    auto* optimize_cmd =
        app.add_subcommand("optimize", "run one (method, gate, T, T2) point");
    optimize_cmd->add_option("--config", config_path, "config file (JSON)");
    optimize_cmd->add_option("--method", method,
                             "one of M-S, M-L, QOCT-S-S, QOCT-S-L, QOCT-L-L");
    optimize_cmd->add_option("--gate", gate, "gate override");
    optimize_cmd->add_option("-T,--duration", T_tau, "duration in units of tau")
        ->required();
    optimize_cmd->add_option("--T2", T2_tau, "dephasing time in units of tau");
    optimize_cmd->add_option("-o,--output", output_dir, "output directory override");
    optimize_cmd->add_option("--trajectory", trajectory_path,
                             "dump a state trajectory table to this file");

    auto* sweep_cmd = app.add_subcommand("sweep", "full five-method protocol");
    sweep_cmd->add_option("--config", config_path, "config file (JSON)");
    sweep_cmd->add_option("-o,--output", output_dir, "output directory override");

    auto* report = app.add_subcommand("report", "sweet spots and minima tables");
    report->add_option("--records", records_path, "records.csv to analyze");
    report->add_option("--csv", table_csv, "write the minima table as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (show_show->parsed()) {
            print_model(load_config(config_path), as_json);
            return 0;
        }

        if (baseline->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (!output_dir.empty()) cfg.output_dir = output_dir;
            if (!gate.empty()) cfg.gate = gate;
            cfg.methods = {"M-S", "M-L"};
            cfg.validate();
            ProtocolRunner runner(cfg);
            const auto records = runner.sweep();
            print_records(records);
            std::printf("wrote %zu records to %s\n", records.size(),
                        (fs::path(cfg.output_dir) / "records.csv").string().c_str());
            return 0;
        }

        if (optimize_cmd->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (!output_dir.empty()) cfg.output_dir = output_dir;
            if (!gate.empty()) cfg.gate = gate;
            cfg.validate();
            const bool needs_t2 = method == "M-L" || method == "QOCT-S-L" ||
                                  method == "QOCT-L-L";
            if (needs_t2 && T2_tau <= 0.0)
                throw std::invalid_argument(method + " requires --T2 > 0");
            ProtocolRunner runner(cfg);
            const SweepRecord rec = runner.run_method(method, T_tau, T2_tau);
            print_records({rec});
            fs::create_directories(cfg.output_dir);
            write_records_csv(
                (fs::path(cfg.output_dir) / "records.csv").string(), {rec});
            if (!trajectory_path.empty() && rec.converged)
                dump_trajectory(cfg, runner, rec, trajectory_path);
            return rec.converged || std::isfinite(rec.infidelity) ? 0 : 1;
        }

        if (sweep_cmd->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (!output_dir.empty()) cfg.output_dir = output_dir;
            cfg.validate();
            ProtocolRunner runner(cfg);
            std::printf("gate %s, T_min = %.4f tau, %zu durations, %zu T2 values\n",
                        cfg.gate.c_str(), runner.t_min_tau(),
                        cfg.durations_tau.size(), cfg.T2_tau.size());
            const auto records = runner.sweep();
            print_records(records);
            std::printf("wrote %zu records to %s\n", records.size(),
                        (fs::path(cfg.output_dir) / "records.csv").string().c_str());
            return 0;
        }

        if (report->parsed()) {
            const auto records = read_records_csv(records_path);
            const auto rows = min_infidelity_vs_T2(records);
            std::printf("%-8s %-10s %9s %9s %14s\n", "gate", "method", "T2/tau",
                        "T*/tau", "min infidelity");
            for (const auto& row : rows)
                std::printf("%-8s %-10s %9.4g %9.4g %14.6e\n", row.gate.c_str(),
                            row.method.c_str(), row.T2_over_tau, row.T_at_min,
                            row.min_infidelity);
            if (!table_csv.empty()) {
                std::FILE* fp = std::fopen(table_csv.c_str(), "w");
                if (!fp) throw std::runtime_error("cannot open " + table_csv);
                std::fprintf(fp, "gate,method,T2_over_tau,T_at_min,min_infidelity\n");
                for (const auto& row : rows)
                    std::fprintf(fp, "%s,%s,%.17g,%.17g,%.17g\n", row.gate.c_str(),
                                 row.method.c_str(), row.T2_over_tau, row.T_at_min,
                                 row.min_infidelity);
                std::fclose(fp);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
