#pragma once

#include <vector>

#include <Eigen/Dense>

#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// Collection of jump operators with non-negative rates. The pure-dephasing
// constructor produces the d projectors |n><n| at the common rate 1/T2.
struct LindbladModel {
    std::vector<Eigen::MatrixXcd> ops;
    std::vector<double> rates;  // 1/us

    static LindbladModel none();
    static LindbladModel pure_dephasing(int d, double T2_us);

    bool empty() const { return ops.empty(); }

    // True when every jump operator is diagonal, the case in which the
    // dissipator acts elementwise on the density matrix.
    bool all_diagonal() const;

    // For diagonal jump operators the dissipator contributes
    //   (d rho / dt)_{nm} = m_{nm} rho_{nm},
    //   m_{nm} = sum_a gamma_a (l^a_n conj(l^a_m) - (|l^a_n|^2 + |l^a_m|^2)/2),
    // with l^a the diagonal of L_a. Returns the real matrix m (the imaginary
    // part vanishes for projector dephasing; a nonzero imaginary part is a
    // Lamb-shift-like contribution folded into the same exponent).
    Eigen::MatrixXcd diagonal_dissipator_exponent(int d) const;
};

}  // namespace spinqoct
