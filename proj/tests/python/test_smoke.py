import math

import numpy as np
import pytest

import spinqoct as sq


@pytest.fixture(scope="module")
def system():
    return sq.build_system(sq.SpinParameters())


def test_model_basics(system):
    assert system.d == 8
    assert np.all(np.diff(system.energies) > 0)
    w67 = system.transition_frequency(6, 7)
    assert w67 == pytest.approx(11612.1, rel=1e-4)
    assert system.tau() == pytest.approx(2 * math.pi / w67)
    # the drive only connects levels of opposite parity
    V = system.V
    assert abs(V[0, 2]) < 1e-9 * abs(V[6, 7])
    assert abs(V[6, 7]) == pytest.approx(99.14, rel=1e-3)


def test_targets_and_sequences(system):
    U = sq.target_unitary("Toffoli", 8)
    toffoli = np.eye(8, dtype=complex)
    toffoli[6:8, 6:8] = [[0, 1], [1, 0]]
    assert np.linalg.norm(U - toffoli) < 1e-12

    seq = sq.gate_sequence("Toffoli")
    assert len(seq) == 22
    tmin = sq.min_duration(system, sq.gate_sequence("U1"), 10.0)
    assert tmin / system.tau() == pytest.approx(10.25, rel=1e-3)


def test_pulse_and_penalty():
    rng = np.random.default_rng(7)
    T = 0.01
    M = 4
    u = rng.normal(size=2 * M)
    pulse = sq.FourierPulse(u, T, M, 10.0, 1.0, 4 * 2 * math.pi * M / T)
    t = 0.00371
    w = 2 * math.pi / T
    expect = sum(
        u[2 * m - 2] * math.sin(m * w * t) + u[2 * m - 1] * math.cos(m * w * t)
        for m in range(1, M + 1)
    )
    assert pulse.ftilde(t) == pytest.approx(expect, rel=1e-12)
    assert abs(pulse.value(t)) <= 10.0 + 1e-12
    assert pulse.penalty() <= 0.0
    g = pulse.penalty_gradient()
    assert g.shape == (2 * M,)


def test_propagation_and_merit(system):
    tau = system.tau()
    T = 0.5 * tau
    cfg = sq.PropagatorConfig()
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[7, 7] = 1.0
    model = sq.LindbladModel.pure_dephasing(8, 5 * tau)
    rho = sq.propagate_forward(system, model, lambda t: 0.0, rho0, T, cfg)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(rho - rho.conj().T) < 1e-12

    target = sq.target_unitary("U1", 8)
    sset = sq.merit_state_set(8, target)
    assert sset.N == 9 and sset.normalization == pytest.approx(9.0)

    omega_max = 4 * system.transition_frequency(6, 7)
    M = sq.FourierPulse.harmonics_for(omega_max, T)
    assert M == 2
    ev = sq.MeritGradientEvaluator(
        system, sq.LindbladModel.none(), sset, T, M, 10.0, 1.0, omega_max, cfg)
    u = 0.05 * np.ones(2 * M)
    parts, grad = ev.merit_and_gradient(u)
    fd = sq.finite_difference_gradient(ev, u, 1e-6)
    denom = max(np.linalg.norm(fd), 1e-30)
    assert np.linalg.norm(grad - fd) / denom < 1e-5
    assert parts.G == pytest.approx(parts.fidelity + parts.penalty)
