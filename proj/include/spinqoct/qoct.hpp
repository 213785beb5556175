#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinqoct/lindblad.hpp"
#include "spinqoct/merit.hpp"
#include "spinqoct/propagation.hpp"
#include "spinqoct/pulse.hpp"
#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// Deterministic seed derivation and uniform draws with a fixed bit-to-double
// mapping, so optimization runs reproduce bitwise across platforms.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);
double uniform_pm1(std::mt19937_64& gen);  // in [-1, 1)

struct OptimizationConfig {
    int max_iterations = 220;
    int screen_iterations = 20;   // short first pass over every restart
    double f_tolerance = 1e-10;   // stop on |dG| per accepted step
    double grad_tolerance = 1e-9;
    int restarts = 10;
    double sigma_u = 0.0;         // initial |u| scale; 0 -> kappa / (4M)
    std::uint64_t seed = 1;
    std::string kind = "lbfgs";   // "lbfgs" or "steepest"
};

struct RestartSummary {
    int index = 0;
    std::uint64_t seed = 0;
    double G = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct OptimizationResult {
    Eigen::VectorXd u;
    double G = 0.0;
    double fidelity = 0.0;
    double penalty = 0.0;
    bool converged = false;
    int restarts_used = 0;
    double wall_time_s = 0.0;
    std::vector<double> history;  // G per accepted iteration, final polish
    std::vector<RestartSummary> restarts;
};

// Merit G(u) = F(u) + P(u) and its exact gradient for one fixed problem
// (system, dissipation model, horizon, harmonic count). The forward pass
// uses the split exponential-midpoint scheme and caches the per-step
// unitaries and intermediate states; the backward pass propagates the d+1
// costates with the exact discrete adjoint of the forward map, so the
// assembled gradient differentiates the discrete dynamics to roundoff.
class MeritGradientEvaluator {
public:
    MeritGradientEvaluator(const SpinSystem& sys, const LindbladModel& model,
                           const StateSet& set, double T, int M, double kappa,
                           double alpha, double omega_max,
                           const PropagatorConfig& cfg);

    int steps() const { return N_; }
    double step_size() const { return h_; }
    int harmonics() const { return M_; }
    double horizon() const { return T_; }
    double kappa() const { return kappa_; }

    FourierPulse pulse_for(const Eigen::VectorXd& u) const;

    // forward pass only
    double merit(const Eigen::VectorXd& u, MeritValue* parts = nullptr);
    // forward + backward pass
    double merit_and_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad,
                              MeritValue* parts = nullptr);

    // Independent check path: propagate the single time-ordered unitary and
    // conjugate every initial state with it (meaningful for the zero-rate
    // model, where it must agree with merit()).
    double unitary_merit(const Eigen::VectorXd& u, MeritValue* parts = nullptr);

    // evaluation counters, for cost bookkeeping
    long forward_count() const { return forward_count_; }
    long gradient_count() const { return gradient_count_; }

private:
    void forward_pass(const Eigen::VectorXd& u, bool keep_trajectory);

    const SpinSystem& sys_;
    LindbladModel model_;
    int d_, N0_;
    double T_, kappa_, alpha_, omega_max_;
    int M_;
    int N_;
    double h_;
    Eigen::MatrixXcd decay_;          // elementwise half-step factor
    bool dissipative_;
    Eigen::MatrixXd B_;               // 2M x N basis at step midpoints
    Eigen::MatrixXcd targets_lab_;    // d x (N0 d) blocks
    Eigen::MatrixXcd initials_;       // d x (N0 d) blocks
    // per-iteration caches
    Eigen::VectorXd ftilde_, f_, phi_prime_;
    Eigen::MatrixXcd Us_;             // d x (N d)
    Eigen::MatrixXcd Ys_;             // d x (N N0 d)
    Eigen::MatrixXcd states_;         // d x (N0 d)
    double last_fidelity_ = 0.0;
    long forward_count_ = 0;
    long gradient_count_ = 0;
};

// Central finite differences of G over each parameter, the validation
// oracle for merit_and_gradient; costs 4M merit evaluations.
Eigen::VectorXd finite_difference_gradient(MeritGradientEvaluator& ev,
                                           const Eigen::VectorXd& u,
                                           double step);

// Maximize G(u) over restarts: every restart is screened with a short
// quasi-Newton run from its own random start, then the best one is polished
// with the full iteration budget. An optional warm start replaces the random
// draw of restart 0. Throws if every restart produced a non-finite merit.
OptimizationResult optimize(MeritGradientEvaluator& ev,
                            const OptimizationConfig& cfg,
                            const Eigen::VectorXd* warm_start = nullptr,
                            const std::string& trace_path = "");

}  // namespace spinqoct
