#include "spinqoct/pulse.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>
#include <json.hpp>

#include "spinqoct/units.hpp"

namespace spinqoct {

namespace {

// The FFTW planner is not thread-safe; plan creation and destruction are
// serialized. fftw_execute on distinct plans is safe concurrently.
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

struct RealFft {
    int n;
    double* in;
    fftw_complex* out;
    fftw_plan fwd;

    explicit RealFft(int n_) : n(n_) {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        in = fftw_alloc_real(n);
        out = fftw_alloc_complex(n / 2 + 1);
        fwd = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_free(in);
        fftw_free(out);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
};

int next_pow2(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

}  // namespace

double clamp_phi(double x, double kappa) {
    if (kappa <= 0.0) throw std::invalid_argument("clamp level must be positive");
    const double ax = std::abs(x);
    const double sgn = x < 0.0 ? -1.0 : 1.0;
    if (ax <= 0.75 * kappa) return x;
    if (ax >= 1.25 * kappa) return sgn * kappa;
    const double s = (ax - 0.75 * kappa) / (0.5 * kappa);
    const double h00 = 2 * s * s * s - 3 * s * s + 1;
    const double h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s;
    // h11 slope term drops out: the exit slope is zero
    return sgn * (h00 * 0.75 * kappa + h10 * 0.5 * kappa + h01 * kappa);
}

double clamp_phi_prime(double x, double kappa) {
    if (kappa <= 0.0) throw std::invalid_argument("clamp level must be positive");
    const double ax = std::abs(x);
    if (ax <= 0.75 * kappa) return 1.0;
    if (ax >= 1.25 * kappa) return 0.0;
    const double s = (ax - 0.75 * kappa) / (0.5 * kappa);
    const double dh00 = 6 * s * s - 6 * s;
    const double dh10 = 3 * s * s - 4 * s + 1;
    const double dh01 = -6 * s * s + 6 * s;
    // even in x: d/dx picks up sgn twice
    return (dh00 * 0.75 * kappa + dh10 * 0.5 * kappa + dh01 * kappa) / (0.5 * kappa);
}

FourierPulse::FourierPulse(Eigen::VectorXd u, double T, int M, double kappa,
                           double alpha, double omega_max)
    : u_(std::move(u)), T_(T), M_(M), kappa_(kappa), alpha_(alpha),
      omega_max_(omega_max) {
    if (T_ <= 0.0) throw std::invalid_argument("pulse horizon must be positive");
    if (M_ < 1) throw std::invalid_argument("harmonic count must be >= 1");
    if (u_.size() != 2 * M_)
        throw std::invalid_argument("parameter vector must have length 2M");
    if (kappa_ <= 0.0) throw std::invalid_argument("clamp level must be positive");
    if (alpha_ < 0.0) throw std::invalid_argument("penalty weight must be >= 0");
    if (units::two_pi * M_ / T_ > omega_max_ * (1.0 + 1e-12))
        throw std::invalid_argument("highest harmonic exceeds omega_max");
}

int FourierPulse::harmonics_for(double omega_max, double T) {
    return static_cast<int>(std::floor(omega_max * T / units::two_pi));
}

double FourierPulse::ftilde(double t) const {
    const double w1 = units::two_pi / T_;
    double acc = 0.0;
    for (int m = 1; m <= M_; ++m) {
        const double wt = w1 * m * t;
        acc += u_[2 * m - 2] * std::sin(wt) + u_[2 * m - 1] * std::cos(wt);
    }
    return acc;
}

double FourierPulse::value(double t) const {
    return clamp_phi(ftilde(t), kappa_);
}

void FourierPulse::basis(double t, Eigen::Ref<Eigen::VectorXd> b) const {
    const double w1 = units::two_pi / T_;
    for (int m = 1; m <= M_; ++m) {
        const double wt = w1 * m * t;
        b[2 * m - 2] = std::sin(wt);
        b[2 * m - 1] = std::cos(wt);
    }
}

Eigen::VectorXd FourierPulse::param_gradient(double t) const {
    Eigen::VectorXd b(2 * M_);
    basis(t, b);
    return clamp_phi_prime(ftilde(t), kappa_) * b;
}

int FourierPulse::default_penalty_samples() const {
    return next_pow2(std::max(1024, 8 * M_));
}

double FourierPulse::penalty(int n_samples) const {
    if (alpha_ == 0.0) return 0.0;
    const int n = n_samples > 0 ? n_samples : default_penalty_samples();
    if ((n & (n - 1)) != 0 || n < 4 * M_)
        throw std::invalid_argument("sample count must be a power of two >= 4M");

    RealFft fft(n);
    const double dt = T_ / n;
    for (int j = 0; j < n; ++j) fft.in[j] = value(j * dt);
    fftw_execute(fft.fwd);

    // one-sided bins k = 0..n/2; interior bins carry both +-w partners
    double out_power = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
        const double w = units::two_pi * k / T_;
        if (w <= omega_max_) continue;
        const double re = fft.out[k][0], im = fft.out[k][1];
        const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        out_power += weight * (re * re + im * im);
    }
    return -alpha_ * out_power / (static_cast<double>(n) * n);
}

Eigen::VectorXd FourierPulse::penalty_gradient(int n_samples) const {
    if (alpha_ == 0.0) return Eigen::VectorXd::Zero(2 * M_);
    const int n = n_samples > 0 ? n_samples : default_penalty_samples();
    if ((n & (n - 1)) != 0 || n < 4 * M_)
        throw std::invalid_argument("sample count must be a power of two >= 4M");

    RealFft fft(n);
    const double dt = T_ / n;
    Eigen::VectorXd ft(n);
    for (int j = 0; j < n; ++j) {
        ft[j] = ftilde(j * dt);
        fft.in[j] = clamp_phi(ft[j], kappa_);
    }
    fftw_execute(fft.fwd);

    // keep only out-of-band bins, invert, chain through Phi' and the basis
    for (int k = 0; k <= n / 2; ++k) {
        const double w = units::two_pi * k / T_;
        if (w <= omega_max_) {
            fft.out[k][0] = 0.0;
            fft.out[k][1] = 0.0;
        }
    }
    double* rec = fftw_alloc_real(n);
    fftw_plan inv;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        inv = fftw_plan_dft_c2r_1d(n, fft.out, rec, FFTW_ESTIMATE);
    }
    fftw_execute(inv);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(inv);
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(2 * M_);
    Eigen::VectorXd b(2 * M_);
    const double scale = -2.0 * alpha_ / (static_cast<double>(n) * n);
    for (int j = 0; j < n; ++j) {
        const double dP_df = scale * rec[j];  // rec = n * out-of-band component
        if (dP_df == 0.0) continue;
        basis(j * dt, b);
        grad += dP_df * clamp_phi_prime(ft[j], kappa_) * b;
    }
    fftw_free(rec);
    return grad;
}

double PulseSequence::value(double t) const {
    for (const auto& seg : segments) {
        if (t >= seg.start && t < seg.start + seg.duration)
            return seg.amplitude * std::cos(seg.omega * t + seg.phase);
    }
    return 0.0;
}

PulseSegment rotation_pulse(const SpinSystem& sys, const RotationSpec& spec,
                            double A) {
    if (A <= 0.0) throw std::invalid_argument("amplitude must be positive");
    Eigen::Vector3d axis = spec.axis;
    double theta = spec.theta;
    if (theta < 0.0) {  // negative angles realized about the flipped axis
        axis = -axis;
        theta = -theta;
    }
    if (std::abs(axis.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("rotation axis must be a unit vector");
    if (std::abs(axis.z()) > 1e-12)
        throw std::invalid_argument("directly drivable rotations need an equatorial axis");

    const cplx vjk = sys.drive_element(spec.j, spec.k);
    const double vmax = sys.V.cwiseAbs().maxCoeff();
    if (std::abs(vjk) <= 1e-8 * vmax)
        throw std::invalid_argument("transition is not drive-allowed");

    PulseSegment seg;
    seg.j = spec.j;
    seg.k = spec.k;
    seg.amplitude = A;
    seg.duration = theta / (A * std::abs(vjk));
    seg.omega = sys.transition_frequency(spec.j, spec.k);
    // axis angle beta in the equatorial plane; the drive phase compensates
    // the matrix-element argument so the effective rotation axis lands on it
    const double beta = std::atan2(axis.y(), axis.x());
    seg.phase = -beta - std::arg(vjk);
    return seg;
}

double min_duration(const SpinSystem& sys,
                    const std::vector<RotationSpec>& specs, double A_max) {
    if (A_max <= 0.0) throw std::invalid_argument("A_max must be positive");
    double acc = 0.0;
    for (const auto& s : specs)
        acc += std::abs(s.theta) / std::abs(sys.drive_element(s.j, s.k));
    return acc / A_max;
}

PulseSequence build_sequence(const SpinSystem& sys,
                             const std::vector<RotationSpec>& specs,
                             double A_max, double T) {
    const double tmin = min_duration(sys, specs, A_max);
    if (T <= 0.0) T = tmin;
    if (T < tmin * (1.0 - 1e-12))
        throw std::invalid_argument("requested duration is below the sequence minimum");
    // stretch by scaling the common amplitude down from A_max
    const double A = A_max * tmin / T;

    PulseSequence seq;
    seq.T = T;
    double t0 = 0.0;
    for (const auto& s : specs) {
        PulseSegment seg = rotation_pulse(sys, s, A);
        seg.start = t0;
        t0 += seg.duration;
        seq.segments.push_back(seg);
    }
    return seq;
}

std::vector<RotationSpec> decompose_rz(int j, int k, double theta) {
    const Eigen::Vector3d x{1, 0, 0}, y{0, 1, 0};
    return {
        RotationSpec{j, k, -x, units::pi / 2},  // R_X(-pi/2), applied first
        RotationSpec{j, k, y, theta},
        RotationSpec{j, k, x, units::pi / 2},
    };
}

Eigen::MatrixXcd subspace_rotation(int d, int j, int k,
                                   const Eigen::Vector3d& axis, double theta) {
    if (j < 0 || k < 0 || j >= d || k >= d || j == k)
        throw std::invalid_argument("invalid subspace levels");
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(d, d);
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    const cplx i(0, 1);
    // n . sigma in the (j, k) ordering with sigma_z = |j><j| - |k><k|
    U(j, j) = c - i * s * axis.z();
    U(k, k) = c + i * s * axis.z();
    U(j, k) = -i * s * (axis.x() - i * axis.y());
    U(k, j) = -i * s * (axis.x() + i * axis.y());
    return U;
}

namespace {

struct RzTerm {
    int j, k;
    double theta;
};

// Z-rotation angles of the Toffoli phase ladder, leftmost factor first.
const std::vector<RzTerm> kToffoliRz = {
    {0, 1, units::pi / 4},     {1, 2, units::pi / 2},
    {2, 3, 3 * units::pi / 4}, {3, 4, units::pi},
    {4, 5, 5 * units::pi / 4}, {5, 6, 3 * units::pi / 2},
    {6, 7, 3 * units::pi / 4},
};

}  // namespace

Eigen::MatrixXcd target_unitary(const std::string& name, int d) {
    if (d != 8)
        throw std::invalid_argument("named gates are defined on the d=8 ladder");
    const Eigen::Vector3d x{1, 0, 0}, z{0, 0, 1};
    if (name == "U1") return subspace_rotation(d, 6, 7, z, 3 * units::pi / 4);
    if (name == "U4")
        return subspace_rotation(d, 6, 7, z, 3 * units::pi / 4) *
               subspace_rotation(d, 6, 7, x, units::pi);
    if (name == "Toffoli") {
        Eigen::MatrixXcd U = subspace_rotation(d, 6, 7, x, units::pi);
        for (auto it = kToffoliRz.rbegin(); it != kToffoliRz.rend(); ++it)
            U = subspace_rotation(d, it->j, it->k, z, it->theta) * U;
        return std::exp(cplx(0, units::pi / 8)) * U;
    }
    throw std::invalid_argument("unknown gate name: " + name);
}

std::vector<RotationSpec> gate_sequence(const std::string& name) {
    const Eigen::Vector3d x{1, 0, 0};
    if (name == "U1") return decompose_rz(6, 7, 3 * units::pi / 4);
    if (name == "U4") {
        std::vector<RotationSpec> seq{RotationSpec{6, 7, x, units::pi}};
        for (const auto& r : decompose_rz(6, 7, 3 * units::pi / 4))
            seq.push_back(r);
        return seq;
    }
    if (name == "Toffoli") {
        std::vector<RotationSpec> seq{RotationSpec{6, 7, x, units::pi}};
        for (auto it = kToffoliRz.rbegin(); it != kToffoliRz.rend(); ++it)
            for (const auto& r : decompose_rz(it->j, it->k, it->theta))
                seq.push_back(r);
        return seq;
    }
    throw std::invalid_argument("unknown gate name: " + name);
}

void write_waveform(const std::string& path,
                    const std::function<double(double)>& f, double T,
                    int n_samples) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path);
    std::fprintf(fp, "# t_us f_mT\n");
    for (int j = 0; j < n_samples; ++j) {
        const double t = T * j / n_samples;
        std::fprintf(fp, "%.17g %.17g\n", t, f(t));
    }
    std::fclose(fp);
}

void write_spectrum(const std::string& path,
                    const std::function<double(double)>& f, double T,
                    int n_samples) {
    const int n = next_pow2(n_samples);
    RealFft fft(n);
    for (int j = 0; j < n; ++j) fft.in[j] = f(T * j / n);
    fftw_execute(fft.fwd);

    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path);
    std::fprintf(fp, "# omega_rad_us ReF ImF\n");
    for (int k = 0; k <= n / 2; ++k) {
        const double w = units::two_pi * k / T;
        std::fprintf(fp, "%.17g %.17g %.17g\n", w, fft.out[k][0] / n,
                     fft.out[k][1] / n);
    }
    std::fclose(fp);
}

void write_pulse_params(const std::string& path, const FourierPulse& pulse) {
    nlohmann::json j;
    j["u"] = std::vector<double>(pulse.u().begin(), pulse.u().end());
    j["T_us"] = pulse.T();
    j["M"] = pulse.M();
    j["kappa_mT"] = pulse.kappa();
    j["alpha"] = pulse.alpha();
    j["omega_max_rad_us"] = pulse.omega_max();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << "\n";
}

FourierPulse read_pulse_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    const auto uvec = j.at("u").get<std::vector<double>>();
    Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(uvec.data(), uvec.size());
    return FourierPulse(u, j.at("T_us").get<double>(), j.at("M").get<int>(),
                        j.at("kappa_mT").get<double>(), j.at("alpha").get<double>(),
                        j.at("omega_max_rad_us").get<double>());
}

}  // namespace spinqoct
