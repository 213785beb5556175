#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// Saturating clamp bounding waveforms at +-kappa. Identity up to 3/4 kappa,
// constant kappa beyond 5/4 kappa, and in between the unique C1 cubic Hermite
// segment with endpoint values (3/4 kappa, kappa) and slopes (1, 0). Odd in x.
double clamp_phi(double x, double kappa);
double clamp_phi_prime(double x, double kappa);

// Truncated Fourier parametrization of a control waveform on [0, T]:
//   ftilde(u,t) = sum_{m=1..M} u[2m-2] sin(w_m t) + u[2m-1] cos(w_m t),
//   w_m = 2 pi m / T, and f(u,t) = Phi(ftilde(u,t)) with clamp level kappa.
// The penalty P(u) weighs spectral power above omega_max with weight alpha.
class FourierPulse {
public:
    FourierPulse(Eigen::VectorXd u, double T, int M, double kappa,
                 double alpha, double omega_max);

    // Largest harmonic count whose frequency does not exceed omega_max.
    static int harmonics_for(double omega_max, double T);

    const Eigen::VectorXd& u() const { return u_; }
    double T() const { return T_; }
    int M() const { return M_; }
    double kappa() const { return kappa_; }
    double alpha() const { return alpha_; }
    double omega_max() const { return omega_max_; }

    double ftilde(double t) const;
    double value(double t) const;  // Phi(ftilde)

    // d ftilde / du evaluated at t; b[2m-2] = sin(w_m t), b[2m-1] = cos(w_m t)
    void basis(double t, Eigen::Ref<Eigen::VectorXd> b) const;

    // d f / du = Phi'(ftilde) * basis
    Eigen::VectorXd param_gradient(double t) const;

    // Spectral penalty on a uniform grid of n_samples points over [0, T),
    // n_samples a power of two >= 4M; 0 picks the default grid. The discrete
    // spectrum is normalized so that the squared coefficients sum to the
    // mean-square signal, and only bins with |w| > omega_max contribute.
    double penalty(int n_samples = 0) const;
    Eigen::VectorXd penalty_gradient(int n_samples = 0) const;

    int default_penalty_samples() const;

private:
    Eigen::VectorXd u_;
    double T_;
    int M_;
    double kappa_;
    double alpha_;
    double omega_max_;
};

// One requested two-level rotation: angle theta about an equatorial axis
// (axis.z must vanish for directly drivable rotations) on levels (j, k).
struct RotationSpec {
    int j = 0;
    int k = 1;
    Eigen::Vector3d axis{1.0, 0.0, 0.0};
    double theta = 0.0;
};

// One realized monochromatic segment: square envelope of the given amplitude
// on [start, start + duration), carrier cos(omega t + phase) in absolute time.
struct PulseSegment {
    int j = 0;
    int k = 1;
    double amplitude = 0.0;  // mT
    double start = 0.0;      // us
    double duration = 0.0;   // us
    double omega = 0.0;      // rad/us
    double phase = 0.0;      // rad
};

// Contiguous, non-overlapping concatenation of monochromatic segments.
struct PulseSequence {
    std::vector<PulseSegment> segments;
    double T = 0.0;

    double value(double t) const;
};

// Resolve one rotation into segment parameters at amplitude A: duration
// t_f = theta / (A |V_jk|), carrier omega_jk, and the drive phase that
// realizes the requested equatorial axis. Rotations with theta < 0 are
// realized by flipping the axis. Throws if the transition is not
// drive-allowed (|V_jk| below tolerance) or the axis leaves the equator.
PulseSegment rotation_pulse(const SpinSystem& sys, const RotationSpec& spec,
                            double A);

// Shortest duration realizing the rotation list at amplitude bound A_max:
//   T_min = (1/A_max) sum_i theta_i / |V_{j_i k_i}|.
double min_duration(const SpinSystem& sys,
                    const std::vector<RotationSpec>& specs, double A_max);

// Build the full sequence stretched to total duration T >= T_min by scaling
// the common amplitude down from A_max; T <= 0 selects T_min itself.
PulseSequence build_sequence(const SpinSystem& sys,
                             const std::vector<RotationSpec>& specs,
                             double A_max, double T = 0.0);

// R_Z(theta) = R_X(pi/2) R_Y(theta) R_X(-pi/2), returned in application
// order (the R_X(-pi/2) factor acts first).
std::vector<RotationSpec> decompose_rz(int j, int k, double theta);

// Named target gates on the d=8 eigenlevel ladder with the qubit encoding
// |n> = |q1 q2 q3>, n = 4 q1 + 2 q2 + q3:
//   U1      = R_Z^(67)(3 pi/4)
//   U4      = R_Z^(67)(3 pi/4) R_X^(67)(pi)
//   Toffoli = e^{i pi/8} R_Z^(01)(pi/4) R_Z^(12)(pi/2) R_Z^(23)(3 pi/4)
//             R_Z^(34)(pi) R_Z^(45)(5 pi/4) R_Z^(56)(3 pi/2)
//             R_Z^(67)(3 pi/4) R_X^(67)(pi)
// Products act right-to-left.
Eigen::MatrixXcd target_unitary(const std::string& name, int d);

// The same gates as monochromatic rotation lists in application order, with
// every R_Z expanded into its three-rotation decomposition.
std::vector<RotationSpec> gate_sequence(const std::string& name);

// Two-level rotation embedded in a d-dimensional identity; axis may point
// anywhere on the Bloch sphere. sigma_z^(jk) = |j><j| - |k><k|.
Eigen::MatrixXcd subspace_rotation(int d, int j, int k,
                                   const Eigen::Vector3d& axis, double theta);

// Plain-text exports: two-column waveform (t [us], f [mT]) sampled uniformly,
// and its one-sided discrete spectrum (omega [rad/us], Re F, Im F) with the
// same normalization as the penalty.
void write_waveform(const std::string& path,
                    const std::function<double(double)>& f, double T,
                    int n_samples);
void write_spectrum(const std::string& path,
                    const std::function<double(double)>& f, double T,
                    int n_samples);

// JSON round-trip for optimized pulse parameters.
void write_pulse_params(const std::string& path, const FourierPulse& pulse);
FourierPulse read_pulse_params(const std::string& path);

}  // namespace spinqoct
