#pragma once

#include <vector>

#include <Eigen/Dense>

#include "spinqoct/spin_system.hpp"

namespace spinqoct {

// Initial states and their images under the target gate. The d+1 member
// set contains the d level populations |k><k| plus the uniform pure
// superposition projector with every entry 1/d, which pins the relative
// phases the populations alone cannot see. All members are pure, so the
// normalization sum_k Tr[(rho_k)^2] equals d+1.
struct StateSet {
    int d = 0;
    int N = 0;
    std::vector<Eigen::MatrixXcd> initials;
    std::vector<Eigen::MatrixXcd> targets;  // U rho U^dag, interaction frame
    double normalization = 0.0;
};

StateSet merit_state_set(int d, const Eigen::MatrixXcd& U_target);

// Tr(rho_final rho_target), real part (exact for Hermitian arguments)
double state_fidelity(const Eigen::MatrixXcd& rho_final,
                      const Eigen::MatrixXcd& rho_target);

struct MeritValue {
    double G = 0.0;         // fidelity + penalty
    double fidelity = 0.0;  // averaged overlap with the targets
    double penalty = 0.0;
};

// Average the per-state overlaps over the set and add the penalty;
// finals must already be expressed in the interaction frame at t = T.
MeritValue multitarget_merit(const StateSet& set,
                             const std::vector<Eigen::MatrixXcd>& finals,
                             double penalty);

// Reported operation error. The penalty shapes the search but is not a
// physical error, so it is excluded here.
double infidelity(const MeritValue& m);

}  // namespace spinqoct
