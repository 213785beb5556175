#include <memory>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spinqoct/lbfgs.hpp"
#include "spinqoct/merit.hpp"
#include "spinqoct/propagation.hpp"
#include "spinqoct/protocol.hpp"
#include "spinqoct/pulse.hpp"
#include "spinqoct/qoct.hpp"
#include "spinqoct/spin_system.hpp"
#include "spinqoct/units.hpp"

namespace py = pybind11;
using namespace spinqoct;

namespace {

std::function<double(double)> as_waveform(const py::object& f) {
    if (py::isinstance<FourierPulse>(f)) {
        auto p = f.cast<std::shared_ptr<FourierPulse>>();
        return [p](double t) { return p->value(t); };
    }
    if (py::isinstance<PulseSequence>(f)) {
        auto p = f.cast<std::shared_ptr<PulseSequence>>();
        return [p](double t) { return p->value(t); };
    }
    return f.cast<std::function<double(double)>>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "constrained pulse design for spin-qudit gates";

    m.attr("mu_B_MHz_per_mT") = units::mu_B_MHz_per_mT;
    m.attr("mu_B_rad_us_per_mT") = units::mu_B_rad_us_per_mT;

    py::class_<SpinParameters>(m, "SpinParameters")
        .def(py::init<>())
        .def_readwrite("S", &SpinParameters::S)
        .def_readwrite("D_MHz", &SpinParameters::D_MHz)
        .def_readwrite("E_MHz", &SpinParameters::E_MHz)
        .def_readwrite("g", &SpinParameters::g)
        .def_readwrite("B_mT", &SpinParameters::B_mT)
        .def_readwrite("field_axis", &SpinParameters::field_axis)
        .def_readwrite("drive_axis", &SpinParameters::drive_axis);

    py::class_<SpinSystem>(m, "SpinSystem")
        .def_readonly("d", &SpinSystem::d)
        .def_readonly("Sx", &SpinSystem::Sx)
        .def_readonly("Sy", &SpinSystem::Sy)
        .def_readonly("Sz", &SpinSystem::Sz)
        .def_readonly("H0", &SpinSystem::H0)
        .def_readonly("energies", &SpinSystem::energies)
        .def_readonly("eigenvectors", &SpinSystem::eigenvectors)
        .def_readonly("V", &SpinSystem::V)
        .def_readonly("degenerate", &SpinSystem::degenerate)
        .def("tau", &SpinSystem::tau)
        .def("transition_frequency", &SpinSystem::transition_frequency)
        .def("drive_element", &SpinSystem::drive_element);

    m.def("build_spin_operators", &build_spin_operators);
    m.def("build_system", &build_system, py::arg("params") = SpinParameters{});

    py::class_<LindbladModel>(m, "LindbladModel")
        .def_static("none", &LindbladModel::none)
        .def_static("pure_dephasing", &LindbladModel::pure_dephasing,
                    py::arg("d"), py::arg("T2_us"))
        .def_readonly("ops", &LindbladModel::ops)
        .def_readonly("rates", &LindbladModel::rates)
        .def("all_diagonal", &LindbladModel::all_diagonal);

    py::class_<PropagatorConfig>(m, "PropagatorConfig")
        .def(py::init<>())
        .def_readwrite("dt_us", &PropagatorConfig::dt_us)
        .def_readwrite("steps_per_period", &PropagatorConfig::steps_per_period)
        .def_property(
            "scheme",
            [](const PropagatorConfig& c) { return scheme_to_string(c.scheme); },
            [](PropagatorConfig& c, const std::string& s) {
                c.scheme = scheme_from_string(s);
            })
        .def("dt_for", &PropagatorConfig::dt_for)
        .def("steps_for", &PropagatorConfig::steps_for);

    m.def("clamp_phi", &clamp_phi);
    m.def("clamp_phi_prime", &clamp_phi_prime);

    py::class_<FourierPulse, std::shared_ptr<FourierPulse>>(m, "FourierPulse")
        .def(py::init<Eigen::VectorXd, double, int, double, double, double>(),
             py::arg("u"), py::arg("T"), py::arg("M"), py::arg("kappa"),
             py::arg("alpha"), py::arg("omega_max"))
        .def_static("harmonics_for", &FourierPulse::harmonics_for)
        .def_property_readonly("u", &FourierPulse::u)
        .def_property_readonly("T", &FourierPulse::T)
        .def_property_readonly("M", &FourierPulse::M)
        .def_property_readonly("kappa", &FourierPulse::kappa)
        .def_property_readonly("alpha", &FourierPulse::alpha)
        .def_property_readonly("omega_max", &FourierPulse::omega_max)
        .def("ftilde", &FourierPulse::ftilde)
        .def("value", &FourierPulse::value)
        .def("__call__", &FourierPulse::value)
        .def("penalty", &FourierPulse::penalty, py::arg("n_samples") = 0)
        .def("penalty_gradient", &FourierPulse::penalty_gradient,
             py::arg("n_samples") = 0);

    py::class_<RotationSpec>(m, "RotationSpec")
        .def(py::init<>())
        .def_readwrite("j", &RotationSpec::j)
        .def_readwrite("k", &RotationSpec::k)
        .def_readwrite("axis", &RotationSpec::axis)
        .def_readwrite("theta", &RotationSpec::theta);

    py::class_<PulseSegment>(m, "PulseSegment")
        .def_readonly("j", &PulseSegment::j)
        .def_readonly("k", &PulseSegment::k)
        .def_readonly("amplitude", &PulseSegment::amplitude)
        .def_readonly("start", &PulseSegment::start)
        .def_readonly("duration", &PulseSegment::duration)
        .def_readonly("omega", &PulseSegment::omega)
        .def_readonly("phase", &PulseSegment::phase);

    py::class_<PulseSequence, std::shared_ptr<PulseSequence>>(m, "PulseSequence")
        .def_readonly("segments", &PulseSequence::segments)
        .def_readonly("T", &PulseSequence::T)
        .def("value", &PulseSequence::value)
        .def("__call__", &PulseSequence::value);

    m.def("rotation_pulse", &rotation_pulse);
    m.def("min_duration", &min_duration);
    m.def("build_sequence", &build_sequence, py::arg("sys"), py::arg("specs"),
          py::arg("A_max"), py::arg("T") = 0.0);
    m.def("decompose_rz", &decompose_rz);
    m.def("target_unitary", &target_unitary);
    m.def("gate_sequence", &gate_sequence);
    m.def("subspace_rotation", &subspace_rotation);

    m.def(
        "propagate_forward",
        [](const SpinSystem& sys, const LindbladModel& model,
           const py::object& f, const Eigen::MatrixXcd& rho0, double T,
           const PropagatorConfig& cfg) {
            return propagate_forward(sys, model, as_waveform(f), rho0, T, cfg);
        },
        py::arg("sys"), py::arg("model"), py::arg("f"), py::arg("rho0"),
        py::arg("T"), py::arg("cfg") = PropagatorConfig{});
    m.def(
        "propagate_unitary",
        [](const SpinSystem& sys, const py::object& f, double T,
           const PropagatorConfig& cfg) {
            return propagate_unitary(sys, as_waveform(f), T, cfg);
        },
        py::arg("sys"), py::arg("f"), py::arg("T"),
        py::arg("cfg") = PropagatorConfig{});
    m.def("to_interaction_frame", &to_interaction_frame);
    m.def("to_interaction_frame_unitary", &to_interaction_frame_unitary);

    py::class_<StateSet>(m, "StateSet")
        .def_readonly("d", &StateSet::d)
        .def_readonly("N", &StateSet::N)
        .def_readonly("initials", &StateSet::initials)
        .def_readonly("targets", &StateSet::targets)
        .def_readonly("normalization", &StateSet::normalization);

    m.def("merit_state_set", &merit_state_set);
    m.def("state_fidelity", &state_fidelity);

    py::class_<MeritValue>(m, "MeritValue")
        .def_readonly("G", &MeritValue::G)
        .def_readonly("fidelity", &MeritValue::fidelity)
        .def_readonly("penalty", &MeritValue::penalty);

    py::class_<OptimizationConfig>(m, "OptimizationConfig")
        .def(py::init<>())
        .def_readwrite("max_iterations", &OptimizationConfig::max_iterations)
        .def_readwrite("screen_iterations",
                       &OptimizationConfig::screen_iterations)
        .def_readwrite("f_tolerance", &OptimizationConfig::f_tolerance)
        .def_readwrite("grad_tolerance", &OptimizationConfig::grad_tolerance)
        .def_readwrite("restarts", &OptimizationConfig::restarts)
        .def_readwrite("sigma_u", &OptimizationConfig::sigma_u)
        .def_readwrite("seed", &OptimizationConfig::seed)
        .def_readwrite("kind", &OptimizationConfig::kind);

    py::class_<OptimizationResult>(m, "OptimizationResult")
        .def_readonly("u", &OptimizationResult::u)
        .def_readonly("G", &OptimizationResult::G)
        .def_readonly("fidelity", &OptimizationResult::fidelity)
        .def_readonly("penalty", &OptimizationResult::penalty)
        .def_readonly("converged", &OptimizationResult::converged)
        .def_readonly("restarts_used", &OptimizationResult::restarts_used)
        .def_readonly("wall_time_s", &OptimizationResult::wall_time_s)
        .def_readonly("history", &OptimizationResult::history);

    py::class_<MeritGradientEvaluator>(m, "MeritGradientEvaluator")
        .def(py::init<const SpinSystem&, const LindbladModel&, const StateSet&,
                      double, int, double, double, double,
                      const PropagatorConfig&>(),
             py::arg("sys"), py::arg("model"), py::arg("set"), py::arg("T"),
             py::arg("M"), py::arg("kappa"), py::arg("alpha"),
             py::arg("omega_max"), py::arg("cfg") = PropagatorConfig{},
             py::keep_alive<1, 2>())
        .def_property_readonly("harmonics", &MeritGradientEvaluator::harmonics)
        .def_property_readonly("horizon", &MeritGradientEvaluator::horizon)
        .def_property_readonly("steps", &MeritGradientEvaluator::steps)
        .def_property_readonly("step_size", &MeritGradientEvaluator::step_size)
        .def("pulse_for", &MeritGradientEvaluator::pulse_for)
        .def("merit",
             [](MeritGradientEvaluator& ev, const Eigen::VectorXd& u) {
                 MeritValue parts;
                 ev.merit(u, &parts);
                 return parts;
             })
        .def("merit_and_gradient",
             [](MeritGradientEvaluator& ev, const Eigen::VectorXd& u) {
                 Eigen::VectorXd grad(u.size());
                 MeritValue parts;
                 ev.merit_and_gradient(u, grad, &parts);
                 return py::make_tuple(parts, grad);
             })
        .def("unitary_merit",
             [](MeritGradientEvaluator& ev, const Eigen::VectorXd& u) {
                 MeritValue parts;
                 ev.unitary_merit(u, &parts);
                 return parts;
             });

    m.def("finite_difference_gradient", &finite_difference_gradient,
          py::arg("evaluator"), py::arg("u"), py::arg("step") = 1e-6);
    m.def(
        "optimize",
        [](MeritGradientEvaluator& ev, const OptimizationConfig& cfg,
           const py::object& warm_start, const std::string& trace_path) {
            Eigen::VectorXd warm;
            const Eigen::VectorXd* wp = nullptr;
            if (!warm_start.is_none()) {
                warm = warm_start.cast<Eigen::VectorXd>();
                wp = &warm;
            }
            return optimize(ev, cfg, wp, trace_path);
        },
        py::arg("evaluator"), py::arg("cfg") = OptimizationConfig{},
        py::arg("warm_start") = py::none(), py::arg("trace_path") = "");

    py::class_<SweepRecord>(m, "SweepRecord")
        .def_readonly("method", &SweepRecord::method)
        .def_readonly("gate", &SweepRecord::gate)
        .def_readonly("T_over_tau", &SweepRecord::T_over_tau)
        .def_readonly("T2_over_tau", &SweepRecord::T2_over_tau)
        .def_readonly("infidelity", &SweepRecord::infidelity)
        .def_readonly("G", &SweepRecord::G)
        .def_readonly("penalty", &SweepRecord::penalty)
        .def_readonly("restarts", &SweepRecord::restarts)
        .def_readonly("converged", &SweepRecord::converged)
        .def_readonly("pulse_file", &SweepRecord::pulse_file);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("from_json_file", &ExperimentConfig::from_json_file)
        .def_readwrite("spin", &ExperimentConfig::spin)
        .def_readwrite("A_max_mT", &ExperimentConfig::A_max_mT)
        .def_readwrite("omega_max_multiplier",
                       &ExperimentConfig::omega_max_multiplier)
        .def_readwrite("penalty_weight", &ExperimentConfig::penalty_weight)
        .def_readwrite("gate", &ExperimentConfig::gate)
        .def_readwrite("durations_tau", &ExperimentConfig::durations_tau)
        .def_readwrite("T2_tau", &ExperimentConfig::T2_tau)
        .def_readwrite("methods", &ExperimentConfig::methods)
        .def_readwrite("optimizer", &ExperimentConfig::optimizer)
        .def_readwrite("propagator", &ExperimentConfig::propagator)
        .def_readwrite("output_dir", &ExperimentConfig::output_dir)
        .def_readwrite("master_seed", &ExperimentConfig::master_seed)
        .def_readwrite("workers", &ExperimentConfig::workers)
        .def("validate", &ExperimentConfig::validate);

    py::class_<ProtocolRunner>(m, "ProtocolRunner")
        .def(py::init<const ExperimentConfig&>())
        .def_property_readonly("system", &ProtocolRunner::system,
                               py::return_value_policy::reference_internal)
        .def("tau", &ProtocolRunner::tau)
        .def("omega_max", &ProtocolRunner::omega_max)
        .def("t_min_tau", &ProtocolRunner::t_min_tau)
        .def("run_method", &ProtocolRunner::run_method, py::arg("method"),
             py::arg("T_tau"), py::arg("T2_tau") = 0.0)
        .def("sweep", &ProtocolRunner::sweep);

    m.def("write_records_csv", &write_records_csv);
    m.def("read_records_csv", &read_records_csv);

    py::class_<MinInfidelityRow>(m, "MinInfidelityRow")
        .def_readonly("gate", &MinInfidelityRow::gate)
        .def_readonly("method", &MinInfidelityRow::method)
        .def_readonly("T2_over_tau", &MinInfidelityRow::T2_over_tau)
        .def_readonly("T_at_min", &MinInfidelityRow::T_at_min)
        .def_readonly("min_infidelity", &MinInfidelityRow::min_infidelity);
    m.def("min_infidelity_vs_T2", &min_infidelity_vs_T2);
}
