#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinqoct/lindblad.hpp"
#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// Time stepping schemes. All freeze the generator at the step midpoint.
//   ExponentialMidpoint: split product  D_{h/2} U_n D_{h/2}  with the exact
//     elementwise dissipator half-steps (diagonal jump operators required)
//     and the exact unitary factor U_n = exp(-i h H(t_mid)); trace, Hermiticity
//     and positivity preserving by construction, second order in h.
//   SuperopExponential: dense exponential of the d^2 x d^2 vectorized
//     generator; handles arbitrary jump operators, used as a cross-check.
//   Rk4: classical Runge-Kutta on the master equation.
enum class Scheme { ExponentialMidpoint, SuperopExponential, Rk4 };

Scheme scheme_from_string(const std::string& name);
std::string scheme_to_string(Scheme s);

struct PropagatorConfig {
    double dt_us = 0.0;  // 0 -> derive from the step rule
    Scheme scheme = Scheme::ExponentialMidpoint;
    int steps_per_period = 40;

    // Step rule: at least steps_per_period steps per period of the fastest
    // scale present, the larger of omega_max and the full spectral span.
    double dt_for(const SpinSystem& sys, double omega_max) const;
    int steps_for(const SpinSystem& sys, double omega_max, double T) const;
};

// Right-hand side of the master equation in the eigenbasis:
//   -i [H0 + f V, rho] + sum_a gamma_a (L rho L^dag - {L^dag L, rho}/2)
Eigen::MatrixXcd lindbladian_apply(const SpinSystem& sys,
                                   const LindbladModel& model, double f_t,
                                   const Eigen::MatrixXcd& rho);

// Adjoint generator, the backward costate rhs with the sign convention
// lambda_dot = -L^adj(lambda):
//   L^adj(A) = i [H, A] + sum_a gamma_a (L^dag A L - {L^dag L, A}/2)
Eigen::MatrixXcd adjoint_apply(const SpinSystem& sys, const LindbladModel& model,
                               double f_t, const Eigen::MatrixXcd& lambda);

// Optional per-step trajectory capture.
struct TrajectoryPoint {
    double t;
    Eigen::MatrixXcd rho;
};

Eigen::MatrixXcd propagate_forward(const SpinSystem& sys,
                                   const LindbladModel& model,
                                   const std::function<double(double)>& f,
                                   const Eigen::MatrixXcd& rho0, double T,
                                   const PropagatorConfig& cfg,
                                   std::vector<TrajectoryPoint>* trajectory = nullptr,
                                   int stride = 1);

// Backward propagation of the costate from its terminal value at t = T down
// to t = 0 under the adjoint generator, using the matching scheme so that
// Tr(lambda^dag(t) rho(t)) is conserved along paired trajectories.
Eigen::MatrixXcd propagate_costate(const SpinSystem& sys,
                                   const LindbladModel& model,
                                   const std::function<double(double)>& f,
                                   const Eigen::MatrixXcd& lambda_T, double T,
                                   const PropagatorConfig& cfg,
                                   std::vector<TrajectoryPoint>* trajectory = nullptr,
                                   int stride = 1);

// Time-ordered unitary for H(t) = H0 + f(t) V with the same midpoint rule.
Eigen::MatrixXcd propagate_unitary(const SpinSystem& sys,
                                   const std::function<double(double)>& f,
                                   double T, const PropagatorConfig& cfg);

// Interaction-frame transforms, exp(+i H0 t) rho exp(-i H0 t) for states and
// exp(+i H0 t) U for evolution operators (H0 diagonal in the eigenbasis).
Eigen::MatrixXcd to_interaction_frame(const SpinSystem& sys,
                                      const Eigen::MatrixXcd& rho, double t);
Eigen::MatrixXcd to_interaction_frame_unitary(const SpinSystem& sys,
                                              const Eigen::MatrixXcd& U, double t);

// Low-level kernels shared with the gradient assembly.
namespace detail {

// exp(X) for small-norm X via a truncated Taylor series in Horner form,
// with scaling and squaring engaged automatically for larger norms.
void taylor_exp(const Eigen::MatrixXcd& X, Eigen::MatrixXcd& out,
                Eigen::MatrixXcd& scratch);

// U_n = exp(-i h (diag(energies) + f V))
void step_unitary(const Eigen::VectorXd& energies, const Eigen::MatrixXcd& V,
                  double f, double h, Eigen::MatrixXcd& U,
                  Eigen::MatrixXcd& work1, Eigen::MatrixXcd& work2);

// Omega = int_0^1 e^{i h s H} V e^{-i h s H} ds
//       = sum_k (i h)^k / (k+1)!  ad_H^k(V),
// so that dU_n/df = -i h U_n Omega (exact Frechet derivative of the step).
void omega_series(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& V, double h,
                  Eigen::MatrixXcd& out, Eigen::MatrixXcd& c0,
                  Eigen::MatrixXcd& c1);

// Elementwise dissipator half-step factor exp((h/2) m) for diagonal jumps.
Eigen::MatrixXcd half_step_decay(const LindbladModel& model, int d, double h);

// Dense superoperator of the Lindblad generator at drive value f, acting on
// column-vectorized rho.
Eigen::MatrixXcd dense_superoperator(const SpinSystem& sys,
                                     const LindbladModel& model, double f);
// Same for the adjoint generator L^adj.
Eigen::MatrixXcd dense_adjoint_superoperator(const SpinSystem& sys,
                                             const LindbladModel& model,
                                             double f);

}  // namespace detail

}  // namespace spinqoct
