#pragma once

#include <complex>
#include <tuple>

#include <Eigen/Dense>

namespace spinqoct {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Physical inputs for the static spin Hamiltonian
//   H0 = D [Sz^2 - S(S+1)/3] + E (Sx^2 - Sy^2) - g mu_B B . S
// with an orthorhombic zero-field splitting and a Zeeman term, plus the
// drive operator V = -g mu_B (drive_axis . S) per unit field amplitude.
struct SpinParameters {
    double S = 3.5;           // half-integer spin quantum number
    double D_MHz = 1281.0;    // axial anisotropy
    double E_MHz = 294.0;     // rhombic anisotropy
    double g = 2.0;           // Lande factor
    double B_mT = 150.0;      // static field magnitude
    Eigen::Vector3d field_axis{1.0, 0.0, 0.0};
    Eigen::Vector3d drive_axis{0.0, 1.0, 0.0};
};

// Static spin system in its energy eigenbasis. Levels are indexed
// n = 0..d-1 by ascending energy; each eigenvector's phase is fixed so
// that its largest-modulus component is real and positive. All energies
// are angular frequencies (rad/us); V carries rad/us per mT.
struct SpinSystem {
    int d = 0;
    Eigen::MatrixXcd Sx, Sy, Sz;        // |S,m> basis, m = S..-S
    Eigen::MatrixXcd H0;                // |S,m> basis, rad/us
    Eigen::VectorXd energies;           // ascending, rad/us
    Eigen::MatrixXcd eigenvectors;      // columns are |n>
    Eigen::MatrixXcd V;                 // drive operator, eigenbasis
    bool degenerate = false;            // adjacent levels closer than tolerance

    // |E_k - E_j| in rad/us; throws for j == k
    double transition_frequency(int j, int k) const;

    // <j|V|k> in the eigenbasis
    cplx drive_element(int j, int k) const;

    // Larmor period of the topmost transition (d-2, d-1), in us
    double tau() const;
};

// Standard angular-momentum matrices in the |S,m> basis with m descending
// from S to -S. Throws if 2S is not a non-negative integer or d < 2.
std::tuple<Eigen::MatrixXcd, Eigen::MatrixXcd, Eigen::MatrixXcd>
build_spin_operators(double S);

// Assemble and diagonalize the full system; see SpinSystem for conventions.
SpinSystem build_system(const SpinParameters& params);

}  // namespace spinqoct
