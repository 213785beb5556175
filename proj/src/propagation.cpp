#include "spinqoct/propagation.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "spinqoct/units.hpp"

namespace spinqoct {

LindbladModel LindbladModel::none() { return {}; }

LindbladModel LindbladModel::pure_dephasing(int d, double T2_us) {
    if (T2_us <= 0.0) throw std::invalid_argument("T2 must be positive");
    LindbladModel m;
    const double rate = 1.0 / T2_us;
    for (int n = 0; n < d; ++n) {
        Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(d, d);
        proj(n, n) = 1.0;
        m.ops.push_back(std::move(proj));
        m.rates.push_back(rate);
    }
    return m;
}

bool LindbladModel::all_diagonal() const {
    for (const auto& op : ops) {
        const double scale = op.cwiseAbs().maxCoeff() + 1.0;
        Eigen::MatrixXcd off = op;
        off.diagonal().setZero();
        if (off.cwiseAbs().maxCoeff() > 1e-14 * scale) return false;
    }
    return true;
}

Eigen::MatrixXcd LindbladModel::diagonal_dissipator_exponent(int d) const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (size_t a = 0; a < ops.size(); ++a) {
        const Eigen::VectorXcd l = ops[a].diagonal();
        const double g = rates[a];
        for (int n = 0; n < d; ++n)
            for (int mm = 0; mm < d; ++mm)
                m(n, mm) += g * (l(n) * std::conj(l(mm)) -
                                 0.5 * (std::norm(l(n)) + std::norm(l(mm))));
    }
    return m;
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "exponential-midpoint") return Scheme::ExponentialMidpoint;
    if (name == "superop-exp") return Scheme::SuperopExponential;
    if (name == "rk4") return Scheme::Rk4;
    throw std::invalid_argument("unknown propagation scheme: " + name);
}

std::string scheme_to_string(Scheme s) {
    switch (s) {
        case Scheme::ExponentialMidpoint: return "exponential-midpoint";
        case Scheme::SuperopExponential: return "superop-exp";
        case Scheme::Rk4: return "rk4";
    }
    return "?";
}

double PropagatorConfig::dt_for(const SpinSystem& sys, double omega_max) const {
    const double span = sys.energies(sys.d - 1) - sys.energies(0);
    const double w_ref = std::max(span, omega_max);
    if (w_ref <= 0.0) return dt_us > 0.0 ? dt_us : 1e-3;
    const double rule = units::two_pi / (steps_per_period * w_ref);
    if (dt_us > 0.0) {
        if (dt_us > rule * (1.0 + 1e-12))
            throw std::invalid_argument(
                "configured step violates the steps-per-period rule");
        return dt_us;
    }
    return rule;
}

int PropagatorConfig::steps_for(const SpinSystem& sys, double omega_max,
                                double T) const {
    if (T <= 0.0) throw std::invalid_argument("duration must be positive");
    const double dt = dt_for(sys, omega_max);
    return static_cast<int>(std::ceil(T / dt - 1e-9));
}

Eigen::MatrixXcd lindbladian_apply(const SpinSystem& sys,
                                   const LindbladModel& model, double f_t,
                                   const Eigen::MatrixXcd& rho) {
    Eigen::MatrixXcd H = f_t * sys.V;
    H.diagonal() += sys.energies.cast<cplx>();
    Eigen::MatrixXcd out = cplx(0, -1) * (H * rho - rho * H);
    for (size_t a = 0; a < model.ops.size(); ++a) {
        const auto& L = model.ops[a];
        const Eigen::MatrixXcd LdL = L.adjoint() * L;
        out += model.rates[a] *
               (L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL));
    }
    return out;
}

Eigen::MatrixXcd adjoint_apply(const SpinSystem& sys, const LindbladModel& model,
                               double f_t, const Eigen::MatrixXcd& lambda) {
    Eigen::MatrixXcd H = f_t * sys.V;
    H.diagonal() += sys.energies.cast<cplx>();
    Eigen::MatrixXcd out = cplx(0, 1) * (H * lambda - lambda * H);
    for (size_t a = 0; a < model.ops.size(); ++a) {
        const auto& L = model.ops[a];
        const Eigen::MatrixXcd LdL = L.adjoint() * L;
        out += model.rates[a] *
               (L.adjoint() * lambda * L - 0.5 * (LdL * lambda + lambda * LdL));
    }
    return out;
}

namespace detail {

void taylor_exp(const Eigen::MatrixXcd& X, Eigen::MatrixXcd& out,
                Eigen::MatrixXcd& scratch) {
    const int d = static_cast<int>(X.rows());
    const double theta = X.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    int squarings = 0;
    double scale = 1.0;
    if (theta > 0.25) {
        squarings = static_cast<int>(std::ceil(std::log2(theta / 0.25)));
        scale = std::ldexp(1.0, -squarings);
    }
    constexpr int order = 12;
    out.setIdentity(d, d);
    for (int k = order; k >= 1; --k) {
        scratch.noalias() = X * out;
        out = (scale / k) * scratch;
        out.diagonal().array() += 1.0;
    }
    for (int s = 0; s < squarings; ++s) {
        scratch.noalias() = out * out;
        out.swap(scratch);
    }
}

void step_unitary(const Eigen::VectorXd& energies, const Eigen::MatrixXcd& V,
                  double f, double h, Eigen::MatrixXcd& U,
                  Eigen::MatrixXcd& work1, Eigen::MatrixXcd& work2) {
    work1 = cplx(0, -h) * (f * V);
    work1.diagonal() += cplx(0, -h) * energies.cast<cplx>();
    taylor_exp(work1, U, work2);
}

void omega_series(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& V, double h,
                  Eigen::MatrixXcd& out, Eigen::MatrixXcd& c0,
                  Eigen::MatrixXcd& c1) {
    constexpr int terms = 10;
    out = V;
    c0 = V;
    cplx coef(1.0, 0.0);
    for (int k = 1; k < terms; ++k) {
        c1.noalias() = H * c0;
        c1.noalias() -= c0 * H;
        c0.swap(c1);
        coef *= cplx(0, h) / static_cast<double>(k + 1);
        out += coef * c0;
    }
}

Eigen::MatrixXcd half_step_decay(const LindbladModel& model, int d, double h) {
    if (model.empty())
        return Eigen::MatrixXcd::Ones(d, d);
    return model.diagonal_dissipator_exponent(d)
        .unaryExpr([h](cplx m) { return std::exp(0.5 * h * m); });
}

Eigen::MatrixXcd dense_superoperator(const SpinSystem& sys,
                                     const LindbladModel& model, double f) {
    const int d = sys.d;
    Eigen::MatrixXcd H = f * sys.V;
    H.diagonal() += sys.energies.cast<cplx>();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
    Eigen::MatrixXcd sup =
        cplx(0, -1) * (Eigen::kroneckerProduct(id, H).eval() -
                       Eigen::kroneckerProduct(H.transpose(), id).eval());
    for (size_t a = 0; a < model.ops.size(); ++a) {
        const auto& L = model.ops[a];
        const Eigen::MatrixXcd LdL = L.adjoint() * L;
        sup += model.rates[a] *
               (Eigen::kroneckerProduct(L.conjugate(), L).eval() -
                0.5 * Eigen::kroneckerProduct(id, LdL).eval() -
                0.5 * Eigen::kroneckerProduct(LdL.transpose(), id).eval());
    }
    return sup;
}

Eigen::MatrixXcd dense_adjoint_superoperator(const SpinSystem& sys,
                                             const LindbladModel& model,
                                             double f) {
    const int d = sys.d;
    Eigen::MatrixXcd H = f * sys.V;
    H.diagonal() += sys.energies.cast<cplx>();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
    Eigen::MatrixXcd sup =
        cplx(0, 1) * (Eigen::kroneckerProduct(id, H).eval() -
                      Eigen::kroneckerProduct(H.transpose(), id).eval());
    for (size_t a = 0; a < model.ops.size(); ++a) {
        const auto& L = model.ops[a];
        const Eigen::MatrixXcd LdL = L.adjoint() * L;
        sup += model.rates[a] *
               (Eigen::kroneckerProduct(L.transpose(), L.adjoint()).eval() -
                0.5 * Eigen::kroneckerProduct(id, LdL).eval() -
                0.5 * Eigen::kroneckerProduct(LdL.transpose(), id).eval());
    }
    return sup;
}

}  // namespace detail

namespace {

void require_split_applicable(const LindbladModel& model) {
    if (!model.empty() && !model.all_diagonal())
        throw std::invalid_argument(
            "exponential-midpoint requires diagonal jump operators; "
            "use the superop-exp scheme instead");
}

using MapVec = Eigen::Map<Eigen::VectorXcd>;

}  // namespace

Eigen::MatrixXcd propagate_forward(const SpinSystem& sys,
                                   const LindbladModel& model,
                                   const std::function<double(double)>& f,
                                   const Eigen::MatrixXcd& rho0, double T,
                                   const PropagatorConfig& cfg,
                                   std::vector<TrajectoryPoint>* trajectory,
                                   int stride) {
    const double span = sys.energies(sys.d - 1) - sys.energies(0);
    const int N = cfg.steps_for(sys, span, T);
    const double h = T / N;
    const int d = sys.d;
    Eigen::MatrixXcd rho = rho0;
    if (trajectory) trajectory->push_back({0.0, rho});

    switch (cfg.scheme) {
        case Scheme::ExponentialMidpoint: {
            require_split_applicable(model);
            const Eigen::MatrixXcd decay = detail::half_step_decay(model, d, h);
            const bool dissipate = !model.empty();
            Eigen::MatrixXcd U(d, d), w1(d, d), w2(d, d), tmp(d, d);
            for (int n = 0; n < N; ++n) {
                const double fm = f((n + 0.5) * h);
                detail::step_unitary(sys.energies, sys.V, fm, h, U, w1, w2);
                if (dissipate) rho = decay.cwiseProduct(rho);
                tmp.noalias() = U * rho;
                rho.noalias() = tmp * U.adjoint();
                if (dissipate) rho = decay.cwiseProduct(rho);
                if (trajectory && ((n + 1) % stride == 0 || n + 1 == N))
                    trajectory->push_back({(n + 1) * h, rho});
            }
            break;
        }
        case Scheme::SuperopExponential: {
            Eigen::MatrixXcd step(d * d, d * d);
            for (int n = 0; n < N; ++n) {
                const double fm = f((n + 0.5) * h);
                step = (h * detail::dense_superoperator(sys, model, fm)).exp();
                MapVec v(rho.data(), d * d);
                v = (step * v).eval();
                if (trajectory && ((n + 1) % stride == 0 || n + 1 == N))
                    trajectory->push_back({(n + 1) * h, rho});
            }
            break;
        }
        case Scheme::Rk4: {
            for (int n = 0; n < N; ++n) {
                const double t = n * h;
                const double f0 = f(t), fm = f(t + 0.5 * h), f1 = f(t + h);
                const Eigen::MatrixXcd k1 = lindbladian_apply(sys, model, f0, rho);
                const Eigen::MatrixXcd k2 =
                    lindbladian_apply(sys, model, fm, rho + 0.5 * h * k1);
                const Eigen::MatrixXcd k3 =
                    lindbladian_apply(sys, model, fm, rho + 0.5 * h * k2);
                const Eigen::MatrixXcd k4 =
                    lindbladian_apply(sys, model, f1, rho + h * k3);
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (trajectory && ((n + 1) % stride == 0 || n + 1 == N))
                    trajectory->push_back({(n + 1) * h, rho});
            }
            break;
        }
    }
    return rho;
}

Eigen::MatrixXcd propagate_costate(const SpinSystem& sys,
                                   const LindbladModel& model,
                                   const std::function<double(double)>& f,
                                   const Eigen::MatrixXcd& lambda_T, double T,
                                   const PropagatorConfig& cfg,
                                   std::vector<TrajectoryPoint>* trajectory,
                                   int stride) {
    const double span = sys.energies(sys.d - 1) - sys.energies(0);
    const int N = cfg.steps_for(sys, span, T);
    const double h = T / N;
    const int d = sys.d;
    Eigen::MatrixXcd lam = lambda_T;
    if (trajectory) trajectory->push_back({T, lam});

    switch (cfg.scheme) {
        case Scheme::ExponentialMidpoint: {
            // exact discrete adjoint of the forward split step
            require_split_applicable(model);
            const Eigen::MatrixXcd decay = detail::half_step_decay(model, d, h);
            const bool dissipate = !model.empty();
            Eigen::MatrixXcd U(d, d), w1(d, d), w2(d, d), tmp(d, d);
            for (int n = N - 1; n >= 0; --n) {
                const double fm = f((n + 0.5) * h);
                detail::step_unitary(sys.energies, sys.V, fm, h, U, w1, w2);
                if (dissipate) lam = decay.cwiseProduct(lam);
                tmp.noalias() = U.adjoint() * lam;
                lam.noalias() = tmp * U;
                if (dissipate) lam = decay.cwiseProduct(lam);
                if (trajectory && (n % stride == 0))
                    trajectory->push_back({n * h, lam});
            }
            break;
        }
        case Scheme::SuperopExponential: {
            Eigen::MatrixXcd step(d * d, d * d);
            for (int n = N - 1; n >= 0; --n) {
                const double fm = f((n + 0.5) * h);
                step = (h * detail::dense_adjoint_superoperator(sys, model, fm))
                           .exp();
                MapVec v(lam.data(), d * d);
                v = (step * v).eval();
                if (trajectory && (n % stride == 0))
                    trajectory->push_back({n * h, lam});
            }
            break;
        }
        case Scheme::Rk4: {
            // integrate lambda_dot = -L^adj(lambda) backward in time
            for (int n = N - 1; n >= 0; --n) {
                const double t1 = (n + 1) * h;
                const double f1 = f(t1), fm = f(t1 - 0.5 * h), f0 = f(t1 - h);
                const Eigen::MatrixXcd k1 = adjoint_apply(sys, model, f1, lam);
                const Eigen::MatrixXcd k2 =
                    adjoint_apply(sys, model, fm, lam + 0.5 * h * k1);
                const Eigen::MatrixXcd k3 =
                    adjoint_apply(sys, model, fm, lam + 0.5 * h * k2);
                const Eigen::MatrixXcd k4 =
                    adjoint_apply(sys, model, f0, lam + h * k3);
                lam += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (trajectory && (n % stride == 0))
                    trajectory->push_back({n * h, lam});
            }
            break;
        }
    }
    return lam;
}

Eigen::MatrixXcd propagate_unitary(const SpinSystem& sys,
                                   const std::function<double(double)>& f,
                                   double T, const PropagatorConfig& cfg) {
    const double span = sys.energies(sys.d - 1) - sys.energies(0);
    const int N = cfg.steps_for(sys, span, T);
    const double h = T / N;
    const int d = sys.d;
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(d, d);
    Eigen::MatrixXcd Un(d, d), w1(d, d), w2(d, d), tmp(d, d);
    for (int n = 0; n < N; ++n) {
        const double fm = f((n + 0.5) * h);
        detail::step_unitary(sys.energies, sys.V, fm, h, Un, w1, w2);
        tmp.noalias() = Un * U;
        U.swap(tmp);
    }
    return U;
}

Eigen::MatrixXcd to_interaction_frame(const SpinSystem& sys,
                                      const Eigen::MatrixXcd& rho, double t) {
    const int d = sys.d;
    Eigen::VectorXcd phases(d);
    for (int n = 0; n < d; ++n)
        phases(n) = std::exp(cplx(0, sys.energies(n) * t));
    return phases.asDiagonal() * rho * phases.conjugate().asDiagonal();
}

Eigen::MatrixXcd to_interaction_frame_unitary(const SpinSystem& sys,
                                              const Eigen::MatrixXcd& U,
                                              double t) {
    const int d = sys.d;
    Eigen::VectorXcd phases(d);
    for (int n = 0; n < d; ++n)
        phases(n) = std::exp(cplx(0, sys.energies(n) * t));
    return phases.asDiagonal() * U;
}

}  // namespace spinqoct
