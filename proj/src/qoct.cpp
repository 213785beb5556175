#include "spinqoct/qoct.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "spinqoct/lbfgs.hpp"
#include "spinqoct/units.hpp"

namespace spinqoct {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
    return splitmix64(splitmix64(master ^ (0xA24BAED4963EE407ULL * (stream + 1))) ^
                      (0x9FB21C651E98DF25ULL * (index + 1)));
}

double uniform_pm1(std::mt19937_64& gen) {
    const double r = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
    return 2.0 * r - 1.0;
}

MeritGradientEvaluator::MeritGradientEvaluator(
    const SpinSystem& sys, const LindbladModel& model, const StateSet& set,
    double T, int M, double kappa, double alpha, double omega_max,
    const PropagatorConfig& cfg)
    : sys_(sys), model_(model), d_(sys.d), N0_(set.N), T_(T), kappa_(kappa),
      alpha_(alpha), omega_max_(omega_max), M_(M) {
    if (!model_.empty() && !model_.all_diagonal())
        throw std::invalid_argument(
            "gradient evaluator requires diagonal jump operators");
    if (set.d != d_) throw std::invalid_argument("state set dimension mismatch");
    if (M_ < 1) throw std::invalid_argument("harmonic count must be >= 1");

    N_ = cfg.steps_for(sys_, omega_max_, T_);
    h_ = T_ / N_;
    dissipative_ = !model_.empty();
    decay_ = detail::half_step_decay(model_, d_, h_);

    // basis matrix over the step midpoints
    B_.resize(2 * M_, N_);
    const double w1 = units::two_pi / T_;
    for (int n = 0; n < N_; ++n) {
        const double t = (n + 0.5) * h_;
        for (int m = 1; m <= M_; ++m) {
            B_(2 * m - 2, n) = std::sin(w1 * m * t);
            B_(2 * m - 1, n) = std::cos(w1 * m * t);
        }
    }

    // lab-frame images of the interaction-frame targets at t = T
    Eigen::VectorXcd phases(d_);
    for (int n = 0; n < d_; ++n)
        phases(n) = std::exp(cplx(0, -sys_.energies(n) * T_));
    targets_lab_.resize(d_, N0_ * d_);
    initials_.resize(d_, N0_ * d_);
    for (int k = 0; k < N0_; ++k) {
        initials_.middleCols(k * d_, d_) = set.initials[k];
        targets_lab_.middleCols(k * d_, d_) =
            phases.asDiagonal() * set.targets[k] * phases.conjugate().asDiagonal();
    }

    ftilde_.resize(N_);
    f_.resize(N_);
    phi_prime_.resize(N_);
    Us_.resize(d_, static_cast<Eigen::Index>(N_) * d_);
    Ys_.resize(d_, static_cast<Eigen::Index>(N_) * N0_ * d_);
    states_.resize(d_, N0_ * d_);
}

FourierPulse MeritGradientEvaluator::pulse_for(const Eigen::VectorXd& u) const {
    return FourierPulse(u, T_, M_, kappa_, alpha_, omega_max_);
}

void MeritGradientEvaluator::forward_pass(const Eigen::VectorXd& u,
                                          bool keep_trajectory) {
    if (u.size() != 2 * M_)
        throw std::invalid_argument("parameter vector must have length 2M");
    ftilde_.noalias() = B_.transpose() * u;
    for (int n = 0; n < N_; ++n) {
        f_[n] = clamp_phi(ftilde_[n], kappa_);
        phi_prime_[n] = clamp_phi_prime(ftilde_[n], kappa_);
    }

    states_ = initials_;
    Eigen::MatrixXcd U(d_, d_), w1(d_, d_), w2(d_, d_), A(d_, N0_ * d_);
    const Eigen::Index blk = static_cast<Eigen::Index>(N0_) * d_;
    for (int n = 0; n < N_; ++n) {
        detail::step_unitary(sys_.energies, sys_.V, f_[n], h_, U, w1, w2);
        if (keep_trajectory) Us_.middleCols(static_cast<Eigen::Index>(n) * d_, d_) = U;
        if (dissipative_) {
            for (int k = 0; k < N0_; ++k)
                states_.middleCols(k * d_, d_) =
                    decay_.cwiseProduct(states_.middleCols(k * d_, d_));
        }
        if (keep_trajectory) Ys_.middleCols(static_cast<Eigen::Index>(n) * blk, blk) = states_;
        A.noalias() = U * states_;
        for (int k = 0; k < N0_; ++k)
            states_.middleCols(k * d_, d_).noalias() =
                A.middleCols(k * d_, d_) * U.adjoint();
        if (dissipative_) {
            for (int k = 0; k < N0_; ++k)
                states_.middleCols(k * d_, d_) =
                    decay_.cwiseProduct(states_.middleCols(k * d_, d_));
        }
    }

    double acc = 0.0;
    for (int k = 0; k < N0_; ++k)
        acc += states_.middleCols(k * d_, d_)
                   .cwiseProduct(targets_lab_.middleCols(k * d_, d_).conjugate())
                   .sum()
                   .real();
    last_fidelity_ = acc / N0_;
    ++forward_count_;
}

double MeritGradientEvaluator::merit(const Eigen::VectorXd& u,
                                     MeritValue* parts) {
    forward_pass(u, false);
    const double P = alpha_ > 0.0 ? pulse_for(u).penalty() : 0.0;
    MeritValue m;
    m.fidelity = last_fidelity_;
    m.penalty = P;
    m.G = m.fidelity + m.penalty;
    if (parts) *parts = m;
    return m.G;
}

double MeritGradientEvaluator::merit_and_gradient(const Eigen::VectorXd& u,
                                                  Eigen::VectorXd& grad,
                                                  MeritValue* parts) {
    forward_pass(u, true);

    // backward sweep: exact discrete adjoint of the forward split steps
    Eigen::MatrixXcd lam = 0.5 * targets_lab_;
    Eigen::MatrixXcd U(d_, d_), H(d_, d_), Om(d_, d_), c0(d_, d_), c1(d_, d_);
    Eigen::MatrixXcd E(d_, d_), Z(d_, N0_ * d_), EY(d_, N0_ * d_);
    Eigen::VectorXd w(N_);
    const Eigen::Index blk = static_cast<Eigen::Index>(N0_) * d_;
    for (int n = N_ - 1; n >= 0; --n) {
        U = Us_.middleCols(static_cast<Eigen::Index>(n) * d_, d_);
        H = f_[n] * sys_.V;
        H.diagonal() += sys_.energies.cast<cplx>();
        detail::omega_series(H, sys_.V, h_, Om, c0, c1);
        E.noalias() = cplx(0, -h_) * (U * Om);

        if (dissipative_) {
            for (int k = 0; k < N0_; ++k)
                lam.middleCols(k * d_, d_) =
                    decay_.cwiseProduct(lam.middleCols(k * d_, d_));
        }
        Z.noalias() = U.adjoint() * lam;
        EY.noalias() =
            E * Ys_.middleCols(static_cast<Eigen::Index>(n) * blk, blk);
        double snk = 0.0;
        for (int k = 0; k < N0_; ++k) {
            snk += 2.0 * Z.middleCols(k * d_, d_)
                             .cwiseProduct(
                                 EY.middleCols(k * d_, d_).transpose())
                             .sum()
                             .real();
            lam.middleCols(k * d_, d_).noalias() =
                Z.middleCols(k * d_, d_) * U;
        }
        if (dissipative_) {
            for (int k = 0; k < N0_; ++k)
                lam.middleCols(k * d_, d_) =
                    decay_.cwiseProduct(lam.middleCols(k * d_, d_));
        }
        w[n] = (2.0 / N0_) * snk * phi_prime_[n];
    }
    grad.resize(2 * M_);
    grad.noalias() = B_ * w;

    double P = 0.0;
    if (alpha_ > 0.0) {
        const FourierPulse pulse = pulse_for(u);
        P = pulse.penalty();
        grad += pulse.penalty_gradient();
    }
    MeritValue m;
    m.fidelity = last_fidelity_;
    m.penalty = P;
    m.G = m.fidelity + m.penalty;
    if (parts) *parts = m;
    ++gradient_count_;
    return m.G;
}

double MeritGradientEvaluator::unitary_merit(const Eigen::VectorXd& u,
                                             MeritValue* parts) {
    if (u.size() != 2 * M_)
        throw std::invalid_argument("parameter vector must have length 2M");
    const Eigen::VectorXd ft = B_.transpose() * u;
    Eigen::MatrixXcd Utot = Eigen::MatrixXcd::Identity(d_, d_);
    Eigen::MatrixXcd Un(d_, d_), w1(d_, d_), w2(d_, d_), tmp(d_, d_);
    for (int n = 0; n < N_; ++n) {
        detail::step_unitary(sys_.energies, sys_.V, clamp_phi(ft[n], kappa_), h_,
                             Un, w1, w2);
        tmp.noalias() = Un * Utot;
        Utot.swap(tmp);
    }
    double acc = 0.0;
    for (int k = 0; k < N0_; ++k) {
        const Eigen::MatrixXcd fin =
            Utot * initials_.middleCols(k * d_, d_) * Utot.adjoint();
        acc += fin.cwiseProduct(targets_lab_.middleCols(k * d_, d_).conjugate())
                   .sum()
                   .real();
    }
    MeritValue m;
    m.fidelity = acc / N0_;
    m.penalty = alpha_ > 0.0 ? pulse_for(u).penalty() : 0.0;
    m.G = m.fidelity + m.penalty;
    if (parts) *parts = m;
    return m.G;
}

Eigen::VectorXd finite_difference_gradient(MeritGradientEvaluator& ev,
                                           const Eigen::VectorXd& u,
                                           double step) {
    if (step <= 0.0) throw std::invalid_argument("FD step must be positive");
    Eigen::VectorXd grad(u.size());
    Eigen::VectorXd up = u, um = u;
    for (Eigen::Index m = 0; m < u.size(); ++m) {
        up[m] = u[m] + step;
        um[m] = u[m] - step;
        const double Gp = ev.merit(up);
        const double Gm = ev.merit(um);
        grad[m] = (Gp - Gm) / (2.0 * step);
        up[m] = u[m];
        um[m] = u[m];
    }
    return grad;
}

OptimizationResult optimize(MeritGradientEvaluator& ev,
                            const OptimizationConfig& cfg,
                            const Eigen::VectorXd* warm_start,
                            const std::string& trace_path) {
    if (cfg.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const int n = 2 * ev.harmonics();
    const double sigma =
        cfg.sigma_u > 0.0 ? cfg.sigma_u : ev.kappa() / (4.0 * ev.harmonics());

    LbfgsOptions screen_opt;
    screen_opt.max_iterations = std::min(cfg.screen_iterations, cfg.max_iterations);
    screen_opt.grad_tolerance = cfg.grad_tolerance;
    screen_opt.f_tolerance = cfg.f_tolerance;

    const bool steepest = cfg.kind == "steepest";
    if (!steepest && cfg.kind != "lbfgs")
        throw std::invalid_argument("unknown optimizer kind: " + cfg.kind);
    auto minimize = [&](Eigen::VectorXd& x, const LbfgsOptions& opt,
                        const IterationCallback& callback) {
        Objective fg = [&ev](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
            Eigen::VectorXd gG;
            const double G = ev.merit_and_gradient(u, gG);
            g = -gG;
            return -G;
        };
        return steepest ? steepest_minimize(fg, x, opt, callback)
                        : lbfgs_minimize(fg, x, opt, callback);
    };

    OptimizationResult res;
    res.restarts_used = cfg.restarts;
    std::vector<Eigen::VectorXd> screened(cfg.restarts);
    int best = -1;
    double best_G = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.restarts; ++r) {
        Eigen::VectorXd u(n);
        const std::uint64_t seed_r = derive_seed(cfg.seed, 0, r);
        if (r == 0 && warm_start) {
            if (warm_start->size() != n)
                throw std::invalid_argument("warm start length mismatch");
            u = *warm_start;
        } else {
            std::mt19937_64 gen(seed_r);
            for (int i = 0; i < n; ++i) u[i] = sigma * uniform_pm1(gen);
        }
        const LbfgsResult lr = minimize(u, screen_opt, nullptr);
        screened[r] = u;
        res.restarts.push_back({r, seed_r, std::isfinite(lr.f) ? -lr.f : lr.f,
                                lr.iterations, lr.converged});
        if (std::isfinite(lr.f) && -lr.f > best_G) {
            best_G = -lr.f;
            best = r;
        }
    }
    if (best < 0) throw std::runtime_error("every optimizer restart diverged");

    std::FILE* trace = nullptr;
    if (!trace_path.empty()) {
        trace = std::fopen(trace_path.c_str(), "w");
        if (!trace) throw std::runtime_error("cannot open " + trace_path);
        for (const auto& s : res.restarts)
            std::fprintf(trace, "# screen restart=%d seed=%llu G=%.17g iters=%d\n",
                         s.index, static_cast<unsigned long long>(s.seed), s.G,
                         s.iterations);
        std::fprintf(trace, "# polishing restart %d\n", best);
        std::fprintf(trace, "# iter G F P gradnorm\n");
    }

    // polish the screening winner with the remaining budget
    Eigen::VectorXd u = screened[best];
    LbfgsOptions polish_opt = screen_opt;
    polish_opt.max_iterations =
        std::max(0, cfg.max_iterations - screen_opt.max_iterations);
    MeritValue parts;
    IterationCallback callback = [&](int iter, double fx,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& g) {
        res.history.push_back(-fx);
        if (trace) {
            const double P = ev.pulse_for(x).penalty();
            std::fprintf(trace, "%d %.17g %.17g %.17g %.17g\n", iter, -fx,
                         -fx - P, P, g.norm());
        }
    };
    LbfgsResult lr{};
    lr.f = -best_G;
    if (polish_opt.max_iterations > 0) {
        lr = minimize(u, polish_opt, callback);
    }
    if (trace) std::fclose(trace);

    res.u = u;
    res.G = ev.merit(u, &parts);
    res.fidelity = parts.fidelity;
    res.penalty = parts.penalty;
    res.converged = lr.converged;
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return res;
}

}  // namespace spinqoct
