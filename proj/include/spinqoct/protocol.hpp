#pragma once

#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "spinqoct/merit.hpp"
#include "spinqoct/propagation.hpp"
#include "spinqoct/pulse.hpp"
#include "spinqoct/qoct.hpp"
#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// The five comparison methods:
//   M-S       monochromatic sequence, closed-system evaluation
//   M-L       the same waveform evaluated under dephasing
//   QOCT-S-S  pulse optimized and evaluated without dissipation
//   QOCT-S-L  that same pulse re-evaluated under dephasing
//   QOCT-L-L  pulse optimized and evaluated under dephasing
const std::vector<std::string>& protocol_methods();
int method_index(const std::string& method);

struct ExperimentConfig {
    SpinParameters spin;
    double A_max_mT = 10.0;
    double omega_max_multiplier = 4.0;  // omega_max = multiplier * omega_67
    double penalty_weight = 1.0;
    std::string gate = "U1";
    std::vector<double> durations_tau = {2, 3, 4.5, 6, 8, 10.5, 13, 16, 22, 30};
    std::vector<double> T2_tau = {5, 50, 200};
    std::vector<std::string> methods = protocol_methods();
    OptimizationConfig optimizer;
    PropagatorConfig propagator;
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;
    int workers = 1;

    void validate() const;
    static ExperimentConfig from_json_file(const std::string& path);
};

struct SweepRecord {
    std::string method;
    std::string gate;
    double T_over_tau = 0.0;
    double T2_over_tau = 0.0;
    double infidelity = std::numeric_limits<double>::quiet_NaN();
    double G = std::numeric_limits<double>::quiet_NaN();
    double penalty = 0.0;
    int restarts = 0;
    bool converged = false;
    std::string pulse_file;  // relative to the records.csv directory
};

// Fixed schema shared by every export; see write_records_csv.
extern const char* kRecordsCsvHeader;

void write_records_csv(const std::string& path,
                       const std::vector<SweepRecord>& records);
std::vector<SweepRecord> read_records_csv(const std::string& path);

// Runs protocol points against one spin system, caching the optimized
// closed-system pulses so QOCT-S-L and QOCT-L-L can reuse them.
class ProtocolRunner {
public:
    explicit ProtocolRunner(const ExperimentConfig& cfg);

    const SpinSystem& system() const { return sys_; }
    double tau() const { return tau_; }
    double omega_max() const { return omega_max_; }

    // Minimum sequence duration of the configured gate, in units of tau.
    double t_min_tau() const;

    // One protocol point. T2_tau is ignored by the closed-system methods
    // (their records echo it for grid bookkeeping). Failures (duration below
    // the sequence minimum, diverged optimizations) come back as records
    // with converged=false rather than throwing.
    SweepRecord run_method(const std::string& method, double T_tau,
                           double T2_tau);

    // Full Cartesian product methods x durations x T2 in deterministic
    // order; writes records.csv, pulse files and optimization traces under
    // the configured output directory.
    std::vector<SweepRecord> sweep();

private:
    struct CachedPulse {
        Eigen::VectorXd u;
        double G = 0.0, fidelity = 0.0, penalty = 0.0;
        bool converged = false;
        int restarts = 0;
        std::string file_base;
    };

    MeritValue evaluate_waveform(const LindbladModel& model,
                                 const std::function<double(double)>& f,
                                 const StateSet& set, double T) const;
    const CachedPulse* closed_system_pulse(double T_tau);
    CachedPulse optimize_point(const std::string& method, double T_tau,
                               double T2_tau);
    StateSet state_set() const;
    std::string file_tag(const std::string& method, double T_tau,
                         double T2_tau) const;

    ExperimentConfig cfg_;
    SpinSystem sys_;
    double tau_;
    double omega_max_;
    Eigen::MatrixXcd target_;
    std::map<long long, CachedPulse> ss_cache_;  // keyed by duration index
    std::mutex cache_mutex_;
};

// Grid minimizer of infidelity over one curve's records (same method, gate
// and T2); invalid records are skipped. Throws if nothing valid remains.
struct SweetSpot {
    double T_over_tau = 0.0;
    double infidelity = 0.0;
};
SweetSpot sweet_spot(const std::vector<SweepRecord>& curve);

// Sweet-spot infidelity per (gate, method, T2) group found in the records;
// groups with no valid record are flagged with a NaN minimum.
struct MinInfidelityRow {
    std::string gate;
    std::string method;
    double T2_over_tau = 0.0;
    double T_at_min = std::numeric_limits<double>::quiet_NaN();
    double min_infidelity = std::numeric_limits<double>::quiet_NaN();
};
std::vector<MinInfidelityRow> min_infidelity_vs_T2(
    const std::vector<SweepRecord>& records);

}  // namespace spinqoct
