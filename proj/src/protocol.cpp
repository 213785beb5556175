#include "spinqoct/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "spinqoct/units.hpp"

namespace fs = std::filesystem;

namespace spinqoct {

const std::vector<std::string>& protocol_methods() {
    static const std::vector<std::string> methods = {"M-S", "M-L", "QOCT-S-S",
                                                     "QOCT-S-L", "QOCT-L-L"};
    return methods;
}

int method_index(const std::string& method) {
    const auto& m = protocol_methods();
    for (size_t i = 0; i < m.size(); ++i)
        if (m[i] == method) return static_cast<int>(i);
    throw std::invalid_argument("unknown method label: " + method);
}

void ExperimentConfig::validate() const {
    if (A_max_mT <= 0.0) throw std::invalid_argument("A_max must be positive");
    if (omega_max_multiplier <= 0.0)
        throw std::invalid_argument("omega_max multiplier must be positive");
    if (penalty_weight < 0.0)
        throw std::invalid_argument("penalty weight must be >= 0");
    for (size_t i = 0; i < durations_tau.size(); ++i) {
        if (durations_tau[i] <= 0.0)
            throw std::invalid_argument("durations must be positive");
        if (i > 0 && durations_tau[i] <= durations_tau[i - 1])
            throw std::invalid_argument("durations must be strictly ascending");
    }
    for (double t2 : T2_tau)
        if (t2 <= 0.0) throw std::invalid_argument("T2 values must be positive");
    if (methods.empty()) throw std::invalid_argument("method list is empty");
    for (const auto& m : methods) method_index(m);
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    target_unitary(gate, 8);  // throws for unknown names
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    in >> j;

    ExperimentConfig cfg;
    if (j.contains("spin")) {
        const auto& s = j["spin"];
        cfg.spin.S = s.value("S", cfg.spin.S);
        cfg.spin.D_MHz = s.value("D_MHz", cfg.spin.D_MHz);
        cfg.spin.E_MHz = s.value("E_MHz", cfg.spin.E_MHz);
        cfg.spin.g = s.value("g", cfg.spin.g);
        cfg.spin.B_mT = s.value("B_mT", cfg.spin.B_mT);
        if (s.contains("field_axis")) {
            const auto v = s["field_axis"].get<std::vector<double>>();
            if (v.size() != 3) throw std::invalid_argument("field_axis needs 3 components");
            cfg.spin.field_axis = Eigen::Vector3d(v[0], v[1], v[2]);
        }
        if (s.contains("drive_axis")) {
            const auto v = s["drive_axis"].get<std::vector<double>>();
            if (v.size() != 3) throw std::invalid_argument("drive_axis needs 3 components");
            cfg.spin.drive_axis = Eigen::Vector3d(v[0], v[1], v[2]);
        }
    }
    if (j.contains("drive")) {
        const auto& d = j["drive"];
        cfg.A_max_mT = d.value("A_max_mT", cfg.A_max_mT);
        cfg.omega_max_multiplier =
            d.value("omega_max_over_omega67", cfg.omega_max_multiplier);
        cfg.penalty_weight = d.value("penalty_weight", cfg.penalty_weight);
    }
    cfg.gate = j.value("gate", cfg.gate);
    if (j.contains("durations_tau"))
        cfg.durations_tau = j["durations_tau"].get<std::vector<double>>();
    if (j.contains("T2_tau")) cfg.T2_tau = j["T2_tau"].get<std::vector<double>>();
    if (j.contains("methods"))
        cfg.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        cfg.optimizer.max_iterations =
            o.value("max_iterations", cfg.optimizer.max_iterations);
        cfg.optimizer.screen_iterations =
            o.value("screen_iterations", cfg.optimizer.screen_iterations);
        cfg.optimizer.f_tolerance = o.value("f_tolerance", cfg.optimizer.f_tolerance);
        cfg.optimizer.grad_tolerance =
            o.value("grad_tolerance", cfg.optimizer.grad_tolerance);
        cfg.optimizer.restarts = o.value("restarts", cfg.optimizer.restarts);
        cfg.optimizer.sigma_u = o.value("sigma_u", cfg.optimizer.sigma_u);
        cfg.optimizer.kind = o.value("kind", cfg.optimizer.kind);
    }
    if (j.contains("propagator")) {
        const auto& p = j["propagator"];
        if (p.contains("scheme"))
            cfg.propagator.scheme = scheme_from_string(p["scheme"].get<std::string>());
        cfg.propagator.steps_per_period =
            p.value("steps_per_period", cfg.propagator.steps_per_period);
        cfg.propagator.dt_us = p.value("dt_us", cfg.propagator.dt_us);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.validate();
    return cfg;
}

const char* kRecordsCsvHeader =
    "method,gate,T_over_tau,T2_over_tau,infidelity,G,penalty,restarts,"
    "converged,pulse_file";

void write_records_csv(const std::string& path,
                       const std::vector<SweepRecord>& records) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path);
    std::fprintf(fp, "%s\n", kRecordsCsvHeader);
    for (const auto& r : records) {
        std::fprintf(fp, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s,%s\n",
                     r.method.c_str(), r.gate.c_str(), r.T_over_tau,
                     r.T2_over_tau, r.infidelity, r.G, r.penalty, r.restarts,
                     r.converged ? "true" : "false", r.pulse_file.c_str());
    }
    std::fclose(fp);
}

std::vector<SweepRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty records file " + path);
    if (line != kRecordsCsvHeader)
        throw std::runtime_error("unexpected records header in " + path);
    std::vector<SweepRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() == 9) cells.push_back("");  // empty trailing pulse_file
        if (cells.size() != 10)
            throw std::runtime_error("malformed record line: " + line);
        SweepRecord r;
        r.method = cells[0];
        r.gate = cells[1];
        r.T_over_tau = std::stod(cells[2]);
        r.T2_over_tau = std::stod(cells[3]);
        r.infidelity = std::stod(cells[4]);
        r.G = std::stod(cells[5]);
        r.penalty = std::stod(cells[6]);
        r.restarts = std::stoi(cells[7]);
        r.converged = cells[8] == "true";
        r.pulse_file = cells[9];
        records.push_back(std::move(r));
    }
    return records;
}

ProtocolRunner::ProtocolRunner(const ExperimentConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    sys_ = build_system(cfg_.spin);
    tau_ = sys_.tau();
    omega_max_ =
        cfg_.omega_max_multiplier * sys_.transition_frequency(sys_.d - 2, sys_.d - 1);
    target_ = target_unitary(cfg_.gate, sys_.d);
}

StateSet ProtocolRunner::state_set() const {
    return merit_state_set(sys_.d, target_);
}

double ProtocolRunner::t_min_tau() const {
    return min_duration(sys_, gate_sequence(cfg_.gate), cfg_.A_max_mT) / tau_;
}

std::string ProtocolRunner::file_tag(const std::string& method, double T_tau,
                                     double T2_tau) const {
    char buf[128];
    if (method == "QOCT-L-L")
        std::snprintf(buf, sizeof buf, "%s_%s_T%.6g_T2%.6g", method.c_str(),
                      cfg_.gate.c_str(), T_tau, T2_tau);
    else
        std::snprintf(buf, sizeof buf, "%s_%s_T%.6g", method.c_str(),
                      cfg_.gate.c_str(), T_tau);
    return buf;
}

MeritValue ProtocolRunner::evaluate_waveform(
    const LindbladModel& model, const std::function<double(double)>& f,
    const StateSet& set, double T) const {
    if (cfg_.propagator.scheme != Scheme::ExponentialMidpoint) {
        // per-state propagation honoring the configured cross-check scheme
        double acc = 0.0;
        for (int k = 0; k < set.N; ++k) {
            const Eigen::MatrixXcd fin = propagate_forward(
                sys_, model, f, set.initials[k], T, cfg_.propagator);
            acc += state_fidelity(to_interaction_frame(sys_, fin, T),
                                  set.targets[k]);
        }
        MeritValue m;
        m.fidelity = acc / set.N;
        m.G = m.fidelity;
        return m;
    }
    const int N = cfg_.propagator.steps_for(sys_, omega_max_, T);
    const double h = T / N;
    const int d = sys_.d;
    const bool dissipative = !model.empty();
    const Eigen::MatrixXcd decay = detail::half_step_decay(model, d, h);

    Eigen::VectorXcd phases(d);
    for (int n = 0; n < d; ++n)
        phases(n) = std::exp(cplx(0, -sys_.energies(n) * T));

    Eigen::MatrixXcd states(d, set.N * d), A(d, set.N * d);
    for (int k = 0; k < set.N; ++k)
        states.middleCols(k * d, d) = set.initials[k];

    Eigen::MatrixXcd U(d, d), w1(d, d), w2(d, d);
    for (int n = 0; n < N; ++n) {
        const double fm = f((n + 0.5) * h);
        detail::step_unitary(sys_.energies, sys_.V, fm, h, U, w1, w2);
        if (dissipative)
            for (int k = 0; k < set.N; ++k)
                states.middleCols(k * d, d) =
                    decay.cwiseProduct(states.middleCols(k * d, d));
        A.noalias() = U * states;
        for (int k = 0; k < set.N; ++k)
            states.middleCols(k * d, d).noalias() =
                A.middleCols(k * d, d) * U.adjoint();
        if (dissipative)
            for (int k = 0; k < set.N; ++k)
                states.middleCols(k * d, d) =
                    decay.cwiseProduct(states.middleCols(k * d, d));
    }

    double acc = 0.0;
    for (int k = 0; k < set.N; ++k) {
        const Eigen::MatrixXcd target_lab =
            phases.asDiagonal() * set.targets[k] * phases.conjugate().asDiagonal();
        acc += states.middleCols(k * d, d)
                   .cwiseProduct(target_lab.conjugate())
                   .sum()
                   .real();
    }
    MeritValue m;
    m.fidelity = acc / set.N;
    m.penalty = 0.0;
    m.G = m.fidelity;
    return m;
}

namespace {

long long duration_index(const std::vector<double>& grid, double T_tau) {
    for (size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i] - T_tau) <= 1e-12 * std::max(1.0, std::abs(T_tau)))
            return static_cast<long long>(i);
    return -1;
}

bool t2_dependent(const std::string& method) {
    return method == "M-L" || method == "QOCT-S-L" || method == "QOCT-L-L";
}

}  // namespace

ProtocolRunner::CachedPulse ProtocolRunner::optimize_point(
    const std::string& method, double T_tau, double T2_tau) {
    const double T = T_tau * tau_;
    const int M = FourierPulse::harmonics_for(omega_max_, T);
    const StateSet set = state_set();
    const bool open_system = method == "QOCT-L-L";
    const LindbladModel model =
        open_system ? LindbladModel::pure_dephasing(sys_.d, T2_tau * tau_)
                    : LindbladModel::none();
    MeritGradientEvaluator ev(sys_, model, set, T, M, cfg_.A_max_mT,
                              cfg_.penalty_weight, omega_max_, cfg_.propagator);

    OptimizationConfig opt = cfg_.optimizer;
    const long long ti = duration_index(cfg_.durations_tau, T_tau);
    const long long t2i =
        open_system ? duration_index(cfg_.T2_tau, T2_tau) : 0;
    opt.seed = derive_seed(cfg_.master_seed, method_index(method),
                           static_cast<std::uint64_t>(ti >= 0 ? ti : 997) * 1024 +
                               static_cast<std::uint64_t>(t2i >= 0 ? t2i : 997));

    // reuse the closed-system optimum as the first restart when available
    const Eigen::VectorXd* warm = nullptr;
    Eigen::VectorXd warm_u;
    if (open_system) {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        const auto it = ss_cache_.find(ti);
        if (it != ss_cache_.end() && it->second.u.size() == 2 * M) {
            warm_u = it->second.u;
            warm = &warm_u;
        }
    }

    const std::string tag = file_tag(method, T_tau, T2_tau);
    const fs::path outdir(cfg_.output_dir);
    fs::create_directories(outdir / "pulses");
    fs::create_directories(outdir / "trace");
    const std::string trace_path = (outdir / "trace" / (tag + ".dat")).string();

    OptimizationResult res = optimize(ev, opt, warm, trace_path);

    CachedPulse cp;
    cp.u = res.u;
    cp.G = res.G;
    cp.fidelity = res.fidelity;
    cp.penalty = res.penalty;
    // a capped but finite optimization is still a usable protocol point
    cp.converged = std::isfinite(res.G) && std::isfinite(res.fidelity);
    cp.restarts = res.restarts_used;
    cp.file_base = "pulses/" + tag;

    const FourierPulse pulse = ev.pulse_for(res.u);
    const auto f = [&pulse](double t) { return pulse.value(t); };
    write_waveform((outdir / (cp.file_base + "_waveform.dat")).string(), f, T, 4096);
    write_spectrum((outdir / (cp.file_base + "_spectrum.dat")).string(), f, T, 4096);
    write_pulse_params((outdir / (cp.file_base + "_params.json")).string(), pulse);
    return cp;
}

const ProtocolRunner::CachedPulse* ProtocolRunner::closed_system_pulse(
    double T_tau) {
    const long long ti = duration_index(cfg_.durations_tau, T_tau);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        const auto it = ss_cache_.find(ti);
        if (it != ss_cache_.end()) return &it->second;
    }
    CachedPulse cp = optimize_point("QOCT-S-S", T_tau, 0.0);
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto [it, inserted] = ss_cache_.emplace(ti, std::move(cp));
    return &it->second;
}

SweepRecord ProtocolRunner::run_method(const std::string& method, double T_tau,
                                       double T2_tau) {
    method_index(method);
    SweepRecord rec;
    rec.method = method;
    rec.gate = cfg_.gate;
    rec.T_over_tau = T_tau;
    rec.T2_over_tau = T2_tau;

    const double T = T_tau * tau_;
    try {
        if (method == "M-S" || method == "M-L") {
            const auto specs = gate_sequence(cfg_.gate);
            const double tmin = min_duration(sys_, specs, cfg_.A_max_mT);
            if (T < tmin * (1.0 - 1e-12)) {
                rec.converged = false;  // below the sequence minimum
                return rec;
            }
            const PulseSequence seq = build_sequence(sys_, specs, cfg_.A_max_mT, T);
            const LindbladModel model =
                method == "M-L"
                    ? LindbladModel::pure_dephasing(sys_.d, T2_tau * tau_)
                    : LindbladModel::none();
            const auto f = [&seq](double t) { return seq.value(t); };
            const MeritValue m = evaluate_waveform(model, f, state_set(), T);
            rec.infidelity = infidelity(m);
            rec.G = m.G;
            rec.penalty = m.penalty;
            rec.converged = true;

            // M-S and M-L share one waveform file per duration
            const std::string tag = file_tag("sequence", T_tau, 0.0);
            const fs::path outdir(cfg_.output_dir);
            fs::create_directories(outdir / "pulses");
            rec.pulse_file = "pulses/" + tag + "_waveform.dat";
            const fs::path wf = outdir / rec.pulse_file;
            if (!fs::exists(wf)) write_waveform(wf.string(), f, T, 4096);
            return rec;
        }

        if (method == "QOCT-S-S") {
            const CachedPulse* cp = closed_system_pulse(T_tau);
            rec.infidelity = 1.0 - cp->fidelity;
            rec.G = cp->G;
            rec.penalty = cp->penalty;
            rec.restarts = cp->restarts;
            rec.converged = cp->converged;
            rec.pulse_file = cp->file_base + "_waveform.dat";
            return rec;
        }

        if (method == "QOCT-S-L") {
            const CachedPulse* cp = closed_system_pulse(T_tau);
            const int M = FourierPulse::harmonics_for(omega_max_, T);
            const StateSet set = state_set();
            const LindbladModel model =
                LindbladModel::pure_dephasing(sys_.d, T2_tau * tau_);
            MeritGradientEvaluator ev(sys_, model, set, T, M, cfg_.A_max_mT,
                                      cfg_.penalty_weight, omega_max_,
                                      cfg_.propagator);
            MeritValue m;
            ev.merit(cp->u, &m);
            rec.infidelity = infidelity(m);
            rec.G = m.G;
            rec.penalty = m.penalty;
            rec.restarts = 0;
            rec.converged = cp->converged;
            rec.pulse_file = cp->file_base + "_waveform.dat";
            return rec;
        }

        // QOCT-L-L
        const CachedPulse cp = optimize_point(method, T_tau, T2_tau);
        rec.infidelity = 1.0 - cp.fidelity;
        rec.G = cp.G;
        rec.penalty = cp.penalty;
        rec.restarts = cp.restarts;
        rec.converged = cp.converged;
        rec.pulse_file = cp.file_base + "_waveform.dat";
        return rec;
    } catch (const std::exception&) {
        rec.infidelity = std::numeric_limits<double>::quiet_NaN();
        rec.G = std::numeric_limits<double>::quiet_NaN();
        rec.converged = false;
        return rec;
    }
}

std::vector<SweepRecord> ProtocolRunner::sweep() {
    const auto& durations = cfg_.durations_tau;
    const auto& t2s = cfg_.T2_tau;
    // closed-system rows echo the T2 grid; with no T2 requested they carry
    // the T2 = infinity sentinel instead of disappearing
    const std::vector<double> t2_echo =
        t2s.empty() ? std::vector<double>{std::numeric_limits<double>::infinity()}
                    : t2s;

    // duration groups are independent units of work
    std::vector<std::vector<SweepRecord>> group_records(durations.size());
    auto run_group = [&](size_t gi) {
        const double T_tau = durations[gi];
        std::vector<SweepRecord>& out = group_records[gi];
        for (const auto& method : cfg_.methods) {
            if (t2_dependent(method)) {
                for (double t2 : t2s) out.push_back(run_method(method, T_tau, t2));
            } else {
                out.push_back(run_method(method, T_tau, t2_echo[0]));
                for (size_t j = 1; j < t2_echo.size(); ++j) {
                    SweepRecord copy = out.back();
                    copy.T2_over_tau = t2_echo[j];
                    out.push_back(copy);
                }
            }
        }
    };

    if (cfg_.workers <= 1 || durations.size() <= 1) {
        for (size_t gi = 0; gi < durations.size(); ++gi) run_group(gi);
    } else {
        std::atomic<size_t> next{0};
        const size_t nthreads =
            std::min(static_cast<size_t>(cfg_.workers), durations.size());
        std::vector<std::thread> pool;
        for (size_t w = 0; w < nthreads; ++w) {
            pool.emplace_back([&] {
                for (size_t gi = next.fetch_add(1); gi < durations.size();
                     gi = next.fetch_add(1))
                    run_group(gi);
            });
        }
        for (auto& th : pool) th.join();
    }

    // assemble in canonical (method, T, T2) order
    std::vector<SweepRecord> records;
    for (const auto& method : protocol_methods()) {
        if (std::find(cfg_.methods.begin(), cfg_.methods.end(), method) ==
            cfg_.methods.end())
            continue;
        const auto& t2grid = t2_dependent(method) ? t2s : t2_echo;
        for (size_t gi = 0; gi < durations.size(); ++gi) {
            for (double t2 : t2grid) {
                for (const auto& r : group_records[gi]) {
                    if (r.method == method &&
                        (r.T2_over_tau == t2 ||
                         std::abs(r.T2_over_tau - t2) <=
                             1e-12 * std::max(1.0, std::abs(t2)))) {
                        records.push_back(r);
                        break;
                    }
                }
            }
        }
    }

    fs::create_directories(cfg_.output_dir);
    write_records_csv((fs::path(cfg_.output_dir) / "records.csv").string(),
                      records);
    return records;
}

SweetSpot sweet_spot(const std::vector<SweepRecord>& curve) {
    const SweepRecord* best = nullptr;
    for (const auto& r : curve) {
        if (!std::isfinite(r.infidelity)) continue;
        if (!best || r.infidelity < best->infidelity) best = &r;
    }
    if (!best) throw std::invalid_argument("no valid record on the curve");
    return {best->T_over_tau, best->infidelity};
}

std::vector<MinInfidelityRow> min_infidelity_vs_T2(
    const std::vector<SweepRecord>& records) {
    // preserve first-appearance order of (gate, method, T2) groups
    std::vector<std::tuple<std::string, std::string, double>> keys;
    for (const auto& r : records) {
        const auto key = std::make_tuple(r.gate, r.method, r.T2_over_tau);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            keys.push_back(key);
    }
    std::vector<MinInfidelityRow> rows;
    for (const auto& [gate, method, t2] : keys) {
        MinInfidelityRow row;
        row.gate = gate;
        row.method = method;
        row.T2_over_tau = t2;
        std::vector<SweepRecord> curve;
        for (const auto& r : records)
            if (r.gate == gate && r.method == method && r.T2_over_tau == t2)
                curve.push_back(r);
        try {
            const SweetSpot s = sweet_spot(curve);
            row.T_at_min = s.T_over_tau;
            row.min_infidelity = s.infidelity;
        } catch (const std::invalid_argument&) {
            // flagged by the NaN minimum
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace spinqoct
