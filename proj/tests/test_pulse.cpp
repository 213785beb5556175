#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "spinqoct/pulse.hpp"
#include "spinqoct/qoct.hpp"
#include "spinqoct/spin_system.hpp"
#include "spinqoct/units.hpp"

using namespace spinqoct;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const cplx I(0.0, 1.0);

SpinSystem& default_system() {
    static SpinSystem sys = build_system(SpinParameters{});
    return sys;
}

// independent quadratic-cost discrete Fourier transform of the sampled
// waveform, accumulating one-sided out-of-band power like the penalty does
double naive_penalty(const FourierPulse& p, int n) {
    const double dt = p.T() / n;
    std::vector<double> f(n);
    for (int j = 0; j < n; ++j) f[j] = p.value(j * dt);
    double acc = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
        const double w = units::two_pi * k / p.T();
        if (w <= p.omega_max()) continue;
        cplx F(0.0, 0.0);
        for (int j = 0; j < n; ++j)
            F += f[j] * std::exp(-I * (units::two_pi * j * k / double(n)));
        const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        acc += weight * std::norm(F);
    }
    return -p.alpha() * acc / (double(n) * n);
}
}  // namespace

TEST_CASE("clamp is a C1 odd saturation", "[pulse]") {
    const double kappa = 10.0;
    CHECK(clamp_phi(0.0, kappa) == 0.0);
    CHECK_THAT(clamp_phi(3.2, kappa), WithinAbs(3.2, 1e-15));
    CHECK_THAT(clamp_phi(-7.49, kappa), WithinAbs(-7.49, 1e-15));
    CHECK_THAT(clamp_phi(12.51, kappa), WithinAbs(kappa, 1e-15));
    CHECK_THAT(clamp_phi(1e6, kappa), WithinAbs(kappa, 1e-15));
    CHECK_THAT(clamp_phi(-80.0, kappa), WithinAbs(-kappa, 1e-15));

    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> dist(-30.0, 30.0);
    for (int i = 0; i < 500; ++i) {
        const double x = dist(gen);
        CHECK(std::abs(clamp_phi(x, kappa)) <= kappa + 1e-12);
        CHECK_THAT(clamp_phi(-x, kappa), WithinAbs(-clamp_phi(x, kappa), 1e-13));
        const double h = 1e-6;
        const double fd =
            (clamp_phi(x + h, kappa) - clamp_phi(x - h, kappa)) / (2 * h);
        CHECK_THAT(clamp_phi_prime(x, kappa), WithinAbs(fd, 1e-6));
    }

    // continuity at the spline knots
    for (const double knee : {0.75 * kappa, 1.25 * kappa}) {
        const double below = clamp_phi(knee - 1e-9, kappa);
        const double above = clamp_phi(knee + 1e-9, kappa);
        CHECK_THAT(above - below, WithinAbs(0.0, 1e-8));
    }
    CHECK_THAT(clamp_phi_prime(0.75 * kappa, kappa), WithinAbs(1.0, 1e-9));
    CHECK_THAT(clamp_phi_prime(1.25 * kappa, kappa), WithinAbs(0.0, 1e-9));
    CHECK_THAT(clamp_phi(0.75 * kappa, kappa), WithinAbs(0.75 * kappa, 1e-12));
    CHECK_THAT(clamp_phi(1.25 * kappa, kappa), WithinAbs(kappa, 1e-12));
}

TEST_CASE("fourier series evaluation", "[pulse]") {
    const double T = 0.0123;
    const int M = 5;
    std::mt19937_64 gen(11);
    Eigen::VectorXd u(2 * M);
    for (int i = 0; i < 2 * M; ++i) u[i] = uniform_pm1(gen);
    const double wmax = units::two_pi * (M + 2) / T;
    FourierPulse p(u, T, M, 50.0, 1.0, wmax);

    for (const double t : {0.0, 0.3 * T, 0.77 * T, T}) {
        double expect = 0.0;
        for (int m = 1; m <= M; ++m) {
            const double w = units::two_pi * m / T;
            expect += u[2 * m - 2] * std::sin(w * t) + u[2 * m - 1] * std::cos(w * t);
        }
        CHECK_THAT(p.ftilde(t), WithinAbs(expect, 1e-13));
        CHECK_THAT(p.value(t), WithinAbs(clamp_phi(expect, 50.0), 1e-13));
    }

    Eigen::VectorXd b(2 * M);
    const double t = 0.41 * T;
    p.basis(t, b);
    for (int m = 1; m <= M; ++m) {
        const double w = units::two_pi * m / T;
        CHECK_THAT(b[2 * m - 2], WithinAbs(std::sin(w * t), 1e-14));
        CHECK_THAT(b[2 * m - 1], WithinAbs(std::cos(w * t), 1e-14));
    }
    const Eigen::VectorXd pg = p.param_gradient(t);
    CHECK((pg - clamp_phi_prime(p.ftilde(t), 50.0) * b).norm() < 1e-13);
}

TEST_CASE("fourier pulse validation", "[pulse]") {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
    CHECK_THROWS_AS(FourierPulse(u, 1.0, 3, 1.0, 1.0, 100.0),
                    std::invalid_argument);  // length mismatch
    CHECK_THROWS_AS(FourierPulse(u, -1.0, 2, 1.0, 1.0, 100.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(FourierPulse(u, 1.0, 2, 0.0, 1.0, 100.0),
                    std::invalid_argument);
    // second harmonic above the admissible band
    CHECK_THROWS_AS(FourierPulse(u, 1.0, 2, 1.0, 1.0, 1.5 * units::two_pi),
                    std::invalid_argument);
    CHECK_NOTHROW(FourierPulse(u, 1.0, 2, 1.0, 1.0, 2.0 * units::two_pi));

    CHECK(FourierPulse::harmonics_for(2 * units::two_pi / 1.0, 1.0) == 2);
    CHECK(FourierPulse::harmonics_for(2.9 * units::two_pi, 1.0) == 2);
    CHECK(FourierPulse::harmonics_for(0.9 * units::two_pi, 1.0) == 0);
    const SpinSystem& sys = default_system();
    const double wmax = 4 * sys.transition_frequency(6, 7);
    CHECK(FourierPulse::harmonics_for(wmax, 2 * sys.tau()) == 8);
}

TEST_CASE("spectral penalty against a direct transform", "[pulse]") {
    const double T = 0.01;
    const int M = 4;
    std::mt19937_64 gen(17);
    Eigen::VectorXd u(2 * M);
    for (int i = 0; i < 2 * M; ++i) u[i] = 2.0 * uniform_pm1(gen);
    // small clamp level so clipping pushes power above the band edge
    const double kappa = 0.8, alpha = 1.3;
    const double wmax = units::two_pi * 6 / T;
    FourierPulse p(u, T, M, kappa, alpha, wmax);

    const int n = 1024;
    const double expect = naive_penalty(p, n);
    CHECK(expect < 0.0);
    CHECK_THAT(p.penalty(n), WithinRel(expect, 1e-10));

    SECTION("default grid is a power of two covering the harmonics") {
        CHECK(p.default_penalty_samples() >= 4 * M);
        CHECK((p.default_penalty_samples() &
               (p.default_penalty_samples() - 1)) == 0);
        CHECK_THAT(p.penalty(), WithinRel(naive_penalty(p, p.default_penalty_samples()),
                                          1e-10));
    }

    SECTION("gradient matches finite differences") {
        const Eigen::VectorXd g = p.penalty_gradient(n);
        REQUIRE(g.size() == 2 * M);
        for (int i = 0; i < 2 * M; ++i) {
            const double h = 1e-6;
            Eigen::VectorXd up = u, dn = u;
            up[i] += h;
            dn[i] -= h;
            const double fd = (FourierPulse(up, T, M, kappa, alpha, wmax).penalty(n) -
                               FourierPulse(dn, T, M, kappa, alpha, wmax).penalty(n)) /
                              (2 * h);
            CHECK_THAT(g[i], WithinAbs(fd, 1e-8 + 1e-6 * std::abs(fd)));
        }
    }

    SECTION("unclipped in-band pulse carries no out-of-band power") {
        FourierPulse q(0.01 * u, T, M, kappa, alpha, wmax);
        CHECK(std::abs(q.penalty(n)) < 1e-24);
    }

    SECTION("zero weight disables the penalty") {
        FourierPulse q(u, T, M, kappa, 0.0, wmax);
        CHECK(q.penalty(n) == 0.0);
        CHECK(q.penalty_gradient(n).norm() == 0.0);
    }

    CHECK_THROWS_AS(p.penalty(1000), std::invalid_argument);  // not a power of 2
    CHECK_THROWS_AS(p.penalty(8), std::invalid_argument);     // below 4M
}

TEST_CASE("monochromatic rotation segments", "[pulse]") {
    const SpinSystem& sys = default_system();

    RotationSpec spec;
    spec.j = 6;
    spec.k = 7;
    spec.axis = Eigen::Vector3d(0, 1, 0);
    spec.theta = 0.75 * units::pi;
    const double A = 4.0;
    const PulseSegment seg = rotation_pulse(sys, spec, A);

    const cplx vjk = sys.drive_element(6, 7);
    CHECK_THAT(seg.duration, WithinRel(spec.theta / (A * std::abs(vjk)), 1e-13));
    CHECK_THAT(seg.omega, WithinRel(sys.transition_frequency(6, 7), 1e-13));
    CHECK_THAT(seg.phase, WithinAbs(-units::pi / 2 - std::arg(vjk), 1e-13));
    CHECK(seg.amplitude == A);

    SECTION("negative angles flip the axis") {
        RotationSpec neg = spec;
        neg.theta = -spec.theta;
        const PulseSegment nseg = rotation_pulse(sys, neg, A);
        RotationSpec flip = spec;
        flip.axis = -spec.axis;
        const PulseSegment fseg = rotation_pulse(sys, flip, A);
        CHECK_THAT(nseg.phase, WithinAbs(fseg.phase, 1e-13));
        CHECK_THAT(nseg.duration, WithinRel(fseg.duration, 1e-13));
    }

    SECTION("invalid requests are rejected") {
        RotationSpec bad = spec;
        bad.axis = Eigen::Vector3d(0, 0, 1);
        CHECK_THROWS_AS(rotation_pulse(sys, bad, A), std::invalid_argument);
        bad.axis = Eigen::Vector3d(1, 1, 0);  // not normalized
        CHECK_THROWS_AS(rotation_pulse(sys, bad, A), std::invalid_argument);
        RotationSpec forbidden = spec;
        forbidden.j = 0;
        forbidden.k = 2;  // same-parity pair is not drive-coupled
        CHECK_THROWS_AS(rotation_pulse(sys, forbidden, A), std::invalid_argument);
        CHECK_THROWS_AS(rotation_pulse(sys, spec, 0.0), std::invalid_argument);
    }
}

TEST_CASE("sequence assembly and duration bookkeeping", "[pulse]") {
    const SpinSystem& sys = default_system();
    const auto specs = gate_sequence("U1");
    REQUIRE(specs.size() == 3);

    const double A_max = 10.0;
    double expect_tmin = 0.0;
    for (const auto& s : specs)
        expect_tmin += std::abs(s.theta) /
                       (A_max * std::abs(sys.drive_element(s.j, s.k)));
    const double tmin = min_duration(sys, specs, A_max);
    CHECK_THAT(tmin, WithinRel(expect_tmin, 1e-12));
    CHECK_THAT(tmin / sys.tau(), WithinRel(10.2485, 1e-3));
    CHECK_THAT(min_duration(sys, specs, A_max / 2), WithinRel(2 * tmin, 1e-12));
    CHECK(min_duration(sys, gate_sequence("Toffoli"), A_max) > tmin);

    SECTION("native duration") {
        const PulseSequence seq = build_sequence(sys, specs, A_max);
        REQUIRE(seq.segments.size() == 3);
        CHECK_THAT(seq.T, WithinRel(tmin, 1e-12));
        double t = 0.0;
        for (const auto& s : seq.segments) {
            CHECK_THAT(s.start, WithinAbs(t, 1e-12));
            CHECK_THAT(s.amplitude, WithinRel(A_max, 1e-12));
            t += s.duration;
        }
        CHECK_THAT(t, WithinRel(seq.T, 1e-12));
    }

    SECTION("stretching scales the amplitude down") {
        const double T = 2.0 * tmin;
        const PulseSequence seq = build_sequence(sys, specs, A_max, T);
        CHECK_THAT(seq.T, WithinRel(T, 1e-12));
        double t = 0.0;
        for (const auto& s : seq.segments) {
            CHECK_THAT(s.amplitude, WithinRel(A_max / 2, 1e-12));
            t += s.duration;
        }
        CHECK_THAT(t, WithinRel(T, 1e-12));
    }

    SECTION("durations below the minimum are rejected") {
        CHECK_THROWS_AS(build_sequence(sys, specs, A_max, 0.99 * tmin),
                        std::invalid_argument);
    }

    SECTION("waveform follows the absolute-time carrier") {
        const PulseSequence seq = build_sequence(sys, specs, A_max);
        const PulseSegment& s1 = seq.segments[1];
        const double t = s1.start + 0.37 * s1.duration;
        CHECK_THAT(seq.value(t),
                   WithinAbs(s1.amplitude * std::cos(s1.omega * t + s1.phase),
                             1e-12));
        CHECK(seq.value(seq.T + 1e-9) == 0.0);
        CHECK(seq.value(-1e-9) == 0.0);
    }
}

TEST_CASE("z rotations factor into drivable rotations", "[pulse]") {
    const int d = 8;
    for (const double theta : {0.25, 1.1, 2.8, -0.9}) {
        const auto parts = decompose_rz(2, 3, theta);
        REQUIRE(parts.size() == 3);
        Matrix U = Matrix::Identity(d, d);
        for (const auto& p : parts)
            U = subspace_rotation(d, p.j, p.k, p.axis, p.theta) * U;
        const Matrix RZ =
            subspace_rotation(d, 2, 3, Eigen::Vector3d(0, 0, 1), theta);
        CHECK((U - RZ).norm() < 1e-13);
        for (const auto& p : parts) CHECK(std::abs(p.axis.z()) < 1e-15);
    }
}

TEST_CASE("embedded rotations act on one two-level block", "[pulse]") {
    const int d = 8;
    const double theta = 1.234;
    const Eigen::Vector3d axis(std::cos(0.3), std::sin(0.3), 0.0);
    const Matrix R = subspace_rotation(d, 4, 5, axis, theta);

    CHECK((R * R.adjoint() - Matrix::Identity(d, d)).norm() < 1e-13);
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    CHECK_THAT(R(4, 4).real(), WithinAbs(c, 1e-14));
    CHECK_THAT(R(5, 5).real(), WithinAbs(c, 1e-14));
    CHECK_THAT(R(4, 5).imag(), WithinAbs(-s * axis.x(), 1e-14));
    CHECK_THAT(R(4, 5).real(), WithinAbs(-s * axis.y(), 1e-14));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if ((i == 4 || i == 5) && (j == 4 || j == 5)) continue;
            const cplx expect = i == j ? cplx(1, 0) : cplx(0, 0);
            CHECK(std::abs(R(i, j) - expect) < 1e-14);
        }
}

TEST_CASE("named gates", "[pulse]") {
    const int d = 8;
    const Matrix U1 = target_unitary("U1", d);
    Matrix expect = Matrix::Identity(d, d);
    expect(6, 6) = std::exp(-I * (3 * units::pi / 8));
    expect(7, 7) = std::exp(I * (3 * units::pi / 8));
    CHECK((U1 - expect).norm() < 1e-14);

    const Matrix U4 = target_unitary("U4", d);
    const Matrix RX =
        subspace_rotation(d, 6, 7, Eigen::Vector3d(1, 0, 0), units::pi);
    CHECK((U4 - U1 * RX).norm() < 1e-13);

    // canonical three-qubit Toffoli in the |q1 q2 q3> encoding
    const Matrix toffoli_target = target_unitary("Toffoli", d);
    Matrix perm = Matrix::Zero(d, d);
    for (int n = 0; n < 6; ++n) perm(n, n) = 1.0;
    perm(6, 7) = 1.0;
    perm(7, 6) = 1.0;
    CHECK((toffoli_target - perm).norm() < 1e-12);

    CHECK(gate_sequence("U1").size() == 3);
    CHECK(gate_sequence("U4").size() == 4);
    CHECK(gate_sequence("Toffoli").size() == 22);
    CHECK_THROWS_AS(target_unitary("CNOT", d), std::invalid_argument);
    CHECK_THROWS_AS(gate_sequence("CNOT"), std::invalid_argument);
}

TEST_CASE("pulse parameter files round trip", "[pulse]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "spinqoct_pulse_test";
    fs::create_directories(dir);

    std::mt19937_64 gen(23);
    const int M = 6;
    Eigen::VectorXd u(2 * M);
    for (int i = 0; i < 2 * M; ++i) u[i] = 3.0 * uniform_pm1(gen);
    FourierPulse p(u, 0.004321, M, 10.0, 1.0, units::two_pi * 2000.0);

    const std::string path = (dir / "params.json").string();
    write_pulse_params(path, p);
    const FourierPulse q = read_pulse_params(path);
    CHECK((q.u() - p.u()).norm() == 0.0);
    CHECK(q.T() == p.T());
    CHECK(q.M() == p.M());
    CHECK(q.kappa() == p.kappa());
    CHECK(q.alpha() == p.alpha());
    CHECK(q.omega_max() == p.omega_max());

    SECTION("waveform export is a two column table") {
        const std::string wpath = (dir / "wave.dat").string();
        write_waveform(wpath, [&p](double t) { return p.value(t); }, p.T(), 64);
        std::ifstream in(wpath);
        REQUIRE(in.good());
        std::string line;
        int rows = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            double t, f;
            REQUIRE(static_cast<bool>(ss >> t >> f));
            if (rows == 0) CHECK(t == 0.0);
            CHECK_THAT(f, WithinAbs(p.value(t), 1e-12));
            ++rows;
        }
        CHECK(rows == 64);
    }

    fs::remove_all(dir);
}
