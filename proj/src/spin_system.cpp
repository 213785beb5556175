#include "spinqoct/spin_system.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "spinqoct/units.hpp"

namespace spinqoct {

std::tuple<Eigen::MatrixXcd, Eigen::MatrixXcd, Eigen::MatrixXcd>
build_spin_operators(double S) {
    const double twoS = 2.0 * S;
    if (S < 0.5 || std::abs(twoS - std::round(twoS)) > 1e-12)
        throw std::invalid_argument("spin S must be a positive half-integer");

    const int d = static_cast<int>(std::lround(twoS)) + 1;
    Eigen::MatrixXcd sp = Eigen::MatrixXcd::Zero(d, d);  // raising operator S+
    Eigen::MatrixXcd sz = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const double m = S - i;
        sz(i, i) = m;
        if (i > 0) {
            // <m+1| S+ |m> with |m> at row i, |m+1> at row i-1
            sp(i - 1, i) = std::sqrt(S * (S + 1.0) - m * (m + 1.0));
        }
    }
    const Eigen::MatrixXcd sm = sp.adjoint();
    const cplx half(0.5, 0.0), half_i(0.0, -0.5);
    Eigen::MatrixXcd sx = half * (sp + sm);
    Eigen::MatrixXcd sy = half_i * (sp - sm);
    return {sx, sy, sz};
}

SpinSystem build_system(const SpinParameters& p) {
    if (std::abs(p.field_axis.norm() - 1.0) > 1e-9 ||
        std::abs(p.drive_axis.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("field_axis and drive_axis must be unit vectors");
    if (!std::isfinite(p.D_MHz) || !std::isfinite(p.E_MHz) || !std::isfinite(p.B_mT))
        throw std::invalid_argument("D, E, B must be finite");

    SpinSystem sys;
    std::tie(sys.Sx, sys.Sy, sys.Sz) = build_spin_operators(p.S);
    sys.d = static_cast<int>(sys.Sz.rows());
    const int d = sys.d;

    const double D = p.D_MHz * units::rad_us_per_MHz;
    const double E = p.E_MHz * units::rad_us_per_MHz;
    const double gmu = p.g * units::mu_B_rad_us_per_mT;  // rad/us per mT

    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(d, d);
    const Eigen::MatrixXcd S_field = p.field_axis.x() * sys.Sx +
                                     p.field_axis.y() * sys.Sy +
                                     p.field_axis.z() * sys.Sz;
    sys.H0 = D * (sys.Sz * sys.Sz - p.S * (p.S + 1.0) / 3.0 * eye) +
             E * (sys.Sx * sys.Sx - sys.Sy * sys.Sy) -
             gmu * p.B_mT * S_field;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sys.H0);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition of H0 failed");
    sys.energies = solver.eigenvalues();  // ascending
    sys.eigenvectors = solver.eigenvectors();

    // Phase convention: largest-modulus component of each |n> real positive.
    for (int n = 0; n < d; ++n) {
        int imax = 0;
        solver.eigenvectors().col(n).cwiseAbs().maxCoeff(&imax);
        const cplx v = sys.eigenvectors(imax, n);
        if (std::abs(v) > 0.0) sys.eigenvectors.col(n) *= std::conj(v) / std::abs(v);
    }

    const double scale = std::max(sys.energies.cwiseAbs().maxCoeff(), 1.0);
    double min_gap = std::numeric_limits<double>::infinity();
    for (int n = 0; n + 1 < d; ++n)
        min_gap = std::min(min_gap, sys.energies(n + 1) - sys.energies(n));
    sys.degenerate = min_gap < 1e-9 * scale;

    const Eigen::MatrixXcd S_drive = p.drive_axis.x() * sys.Sx +
                                     p.drive_axis.y() * sys.Sy +
                                     p.drive_axis.z() * sys.Sz;
    const Eigen::MatrixXcd V_spin = -gmu * S_drive;  // per unit mT
    sys.V = sys.eigenvectors.adjoint() * V_spin * sys.eigenvectors;
    return sys;
}

double SpinSystem::transition_frequency(int j, int k) const {
    if (j < 0 || k < 0 || j >= d || k >= d)
        throw std::out_of_range("level index out of range");
    if (j == k) throw std::invalid_argument("transition requires distinct levels");
    return std::abs(energies(k) - energies(j));
}

cplx SpinSystem::drive_element(int j, int k) const {
    if (j < 0 || k < 0 || j >= d || k >= d)
        throw std::out_of_range("level index out of range");
    return V(j, k);
}

double SpinSystem::tau() const {
    return units::two_pi / transition_frequency(d - 2, d - 1);
}

}  // namespace spinqoct
