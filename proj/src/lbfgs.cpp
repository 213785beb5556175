#include "spinqoct/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace spinqoct {

namespace {

// Minimizer of the cubic through (a, fa, ga) and (b, fb, gb), clipped into
// the interior of [lo, hi]; falls back to bisection when degenerate.
double cubic_min(double a, double fa, double ga, double b, double fb, double gb,
                 double lo, double hi) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    double cand = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
        if (std::isfinite(t)) cand = t;
    }
    const double span = hi - lo;
    const double margin = 0.1 * span;
    if (cand < lo + margin || cand > hi - margin) cand = 0.5 * (lo + hi);
    return cand;
}

struct LinePoint {
    double alpha, f, slope;
};

// Strong-Wolfe line search along p from (x0, f0, g0). On success x, g hold
// the accepted point and the step length is returned; 0 signals failure.
double wolfe_search(const Objective& fg, const Eigen::VectorXd& x0, double f0,
                    const Eigen::VectorXd& g0, const Eigen::VectorXd& p,
                    double alpha_init, const LbfgsOptions& opt,
                    Eigen::VectorXd& x, Eigen::VectorXd& g, double& f_out) {
    const double slope0 = g0.dot(p);
    if (slope0 >= 0.0) return 0.0;  // not a descent direction

    auto eval = [&](double alpha) -> LinePoint {
        x = x0 + alpha * p;
        const double f = fg(x, g);
        return {alpha, f, g.dot(p)};
    };

    const double c1 = opt.wolfe_c1, c2 = opt.wolfe_c2;
    auto armijo_ok = [&](const LinePoint& pt) {
        return pt.f <= f0 + c1 * pt.alpha * slope0;
    };
    auto curvature_ok = [&](const LinePoint& pt) {
        return std::abs(pt.slope) <= -c2 * slope0;
    };

    auto zoom = [&](LinePoint lo, LinePoint hi) -> double {
        for (int i = 0; i < opt.max_line_search; ++i) {
            const double a = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f,
                                       hi.slope, std::min(lo.alpha, hi.alpha),
                                       std::max(lo.alpha, hi.alpha));
            LinePoint pt = eval(a);
            if (!std::isfinite(pt.f) || !armijo_ok(pt) || pt.f >= lo.f) {
                hi = pt;
            } else {
                if (curvature_ok(pt)) {
                    f_out = pt.f;
                    return pt.alpha;
                }
                if (pt.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = pt;
            }
            if (std::abs(hi.alpha - lo.alpha) <
                1e-14 * std::max(1.0, std::abs(lo.alpha))) {
                break;
            }
        }
        // accept the best sufficient-decrease point found, if any
        if (std::isfinite(lo.f) && lo.f < f0 && lo.alpha > 0.0) {
            LinePoint pt = eval(lo.alpha);
            f_out = pt.f;
            return pt.alpha;
        }
        return 0.0;
    };

    LinePoint prev{0.0, f0, slope0};
    double alpha = alpha_init;
    for (int i = 0; i < opt.max_line_search; ++i) {
        LinePoint pt = eval(alpha);
        if (!std::isfinite(pt.f)) {  // overshot into a bad region
            alpha *= 0.5;
            continue;
        }
        if (!armijo_ok(pt) || (i > 0 && pt.f >= prev.f)) return zoom(prev, pt);
        if (curvature_ok(pt)) {
            f_out = pt.f;
            return pt.alpha;
        }
        if (pt.slope >= 0.0) return zoom(pt, prev);
        prev = pt;
        alpha *= 2.5;
    }
    return 0.0;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& fg, Eigen::VectorXd& x,
                           const LbfgsOptions& opt,
                           const IterationCallback& callback) {
    const int n = static_cast<int>(x.size());
    LbfgsResult res;
    Eigen::VectorXd g(n), g_new(n), x_new(n), p(n), q(n);
    double f = fg(x, g);
    res.f = f;
    if (!std::isfinite(f)) return res;

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tolerance) {
            res.converged = true;
            break;
        }

        // two-loop recursion for p = -H g
        q = g;
        std::vector<double> a(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            a[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= a[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) /
                                 y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            const double b = rho_hist[i] * y_hist[i].dot(q);
            q += (a[i] - b) * s_hist[i];
        }
        p = -q;

        const double alpha0 =
            s_hist.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;
        double f_new = f;
        const double alpha =
            wolfe_search(fg, x, f, g, p, alpha0, opt, x_new, g_new, f_new);
        if (alpha == 0.0) {
            // no acceptable step along p; treat as numerical stationarity
            res.converged = g.lpNorm<Eigen::Infinity>() <
                            std::sqrt(opt.grad_tolerance);
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        const double df = std::abs(f - f_new);
        x = x_new;
        g = g_new;
        f = f_new;
        res.iterations = iter + 1;
        res.history.push_back(f);
        if (callback) callback(iter + 1, f, x, g);
        if (opt.f_tolerance > 0.0 && df < opt.f_tolerance) {
            res.converged = true;
            break;
        }
    }
    res.f = f;
    return res;
}

LbfgsResult steepest_minimize(const Objective& fg, Eigen::VectorXd& x,
                              const LbfgsOptions& opt,
                              const IterationCallback& callback) {
    const int n = static_cast<int>(x.size());
    LbfgsResult res;
    Eigen::VectorXd g(n), x_new(n), g_new(n);
    double f = fg(x, g);
    res.f = f;
    if (!std::isfinite(f)) return res;

    double alpha = 1.0 / std::max(1.0, g.norm());
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tolerance) {
            res.converged = true;
            break;
        }
        bool accepted = false;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            x_new = x - alpha * g;
            const double f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) &&
                f_new <= f - opt.wolfe_c1 * alpha * g.squaredNorm()) {
                const double df = std::abs(f - f_new);
                x = x_new;
                g = g_new;
                f = f_new;
                res.iterations = iter + 1;
                res.history.push_back(f);
                if (callback) callback(iter + 1, f, x, g);
                alpha *= 1.5;
                accepted = true;
                if (opt.f_tolerance > 0.0 && df < opt.f_tolerance) {
                    res.converged = true;
                }
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted || res.converged) break;
    }
    res.f = f;
    return res;
}

}  // namespace spinqoct
