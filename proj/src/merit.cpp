#include "spinqoct/merit.hpp"

#include <stdexcept>

namespace spinqoct {

StateSet merit_state_set(int d, const Eigen::MatrixXcd& U_target) {
    const Eigen::MatrixXcd gram = U_target.adjoint() * U_target;
    if ((gram - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("target gate must be unitary");

    StateSet set;
    set.d = d;
    set.N = d + 1;
    set.initials.reserve(set.N);
    for (int k = 0; k < d; ++k) {
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
        rho(k, k) = 1.0;
        set.initials.push_back(std::move(rho));
    }
    set.initials.push_back(Eigen::MatrixXcd::Constant(d, d, cplx(1.0 / d, 0.0)));

    set.targets.reserve(set.N);
    for (const auto& rho : set.initials)
        set.targets.push_back(U_target * rho * U_target.adjoint());
    set.normalization = static_cast<double>(set.N);  // all members are pure
    return set;
}

double state_fidelity(const Eigen::MatrixXcd& rho_final,
                      const Eigen::MatrixXcd& rho_target) {
    return (rho_final.cwiseProduct(rho_target.transpose())).sum().real();
}

MeritValue multitarget_merit(const StateSet& set,
                             const std::vector<Eigen::MatrixXcd>& finals,
                             double penalty) {
    if (static_cast<int>(finals.size()) != set.N)
        throw std::invalid_argument("state count does not match the set");
    MeritValue m;
    double acc = 0.0;
    for (int k = 0; k < set.N; ++k)
        acc += state_fidelity(finals[k], set.targets[k]);
    m.fidelity = acc / set.normalization;
    m.penalty = penalty;
    m.G = m.fidelity + m.penalty;
    return m;
}

double infidelity(const MeritValue& m) { return 1.0 - m.fidelity; }

}  // namespace spinqoct
