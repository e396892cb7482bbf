import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raresim.exceptions import NoUniqueSteadyStateError, StepSizeError, ValidationError
from raresim.quantum import (
    GAMMA_INTERMEDIATE,
    GAMMA_RYDBERG,
    TWO_PI,
    Coupling,
    Decay,
    DensityMatrix,
    LevelSystem,
    build_hamiltonian,
    evolve,
    ladder,
    lindblad_rhs,
    liouvillian,
    rydberg_ladder,
    rydberg_multiband,
    split_liouvillian,
    steady_state,
    steady_state_batch,
)


def two_level_rho22(omega, delta, gamma):
    """Optical Bloch steady-state excited population."""
    return (omega**2 / 4) / (delta**2 + gamma**2 / 4 + omega**2 / 2)


def random_rho(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_hamiltonian_ladder_convention():
    sys = ladder([1.0, 2.0, 3.0], [0.5, -0.25, 2.0], [1.0, 1.0, 1.0])
    h = build_hamiltonian(sys)
    assert np.allclose(np.diag(h).real, [0.0, -0.5, -0.25, -2.25])
    assert h[0, 1] == -0.5 and h[1, 2] == -1.0 and h[2, 3] == -1.5
    assert np.allclose(h, h.conj().T)


def test_no_couplings_zero_hamiltonian():
    sys = LevelSystem(3, (), (Decay(1, 0, 1.0), Decay(2, 1, 1.0)))
    assert np.all(build_hamiltonian(sys) == 0)


def test_liouvillian_matches_matrix_form():
    rng = np.random.default_rng(1)
    sys = rydberg_ladder(TWO_PI * 5e6, delta_p=TWO_PI * 1e6, delta_c=-TWO_PI * 0.3e6, delta_rf=TWO_PI * 2e5)
    lv = liouvillian(sys)
    for _ in range(5):
        rho = random_rho(4, rng)
        direct = lindblad_rhs(sys, rho)
        assert np.allclose((lv @ rho.reshape(-1)).reshape(4, 4), direct, atol=1e-6 * np.abs(direct).max())


def test_liouvillian_trace_preserving():
    lv = liouvillian(rydberg_ladder(TWO_PI * 3e6))
    trace_row = np.eye(4).reshape(-1)
    assert np.abs(trace_row @ lv).max() < 1e-6


@pytest.mark.parametrize("omega,delta", [(1.0, 0.0), (2.0, 1.5), (0.3, -4.0)])
def test_two_level_closed_form(omega, delta):
    gamma = 1.0
    rho = steady_state(ladder([omega], [delta], [gamma]))
    assert rho[1, 1].real == pytest.approx(two_level_rho22(omega, delta, gamma), abs=1e-12)


def test_undriven_system_relaxes_to_ground():
    sys = ladder([0.0, 0.0], [0.0, 0.0], [1.0, 0.5])
    rho = steady_state(sys)
    assert np.allclose(rho.data, DensityMatrix.pure(3).data)


def test_no_decay_has_no_unique_steady_state():
    sys = ladder([1.0], [0.0], [0.0])
    with pytest.raises(NoUniqueSteadyStateError):
        steady_state(sys)


def test_rabi_oscillation():
    omega = 1.0
    sys = ladder([omega], [0.0], [0.0])
    for t in (0.5, 1.7, 3.0):
        rho = evolve(sys, DensityMatrix.pure(2), t, step=0.01 / omega)
        assert rho[1, 1].real == pytest.approx(math.sin(omega * t / 2) ** 2, abs=1e-9)


def test_spontaneous_decay():
    gamma = 2.0
    sys = ladder([0.0], [0.0], [gamma])
    rho = evolve(sys, DensityMatrix.pure(2, 1), 1.3, step=0.01 / gamma)
    assert rho[1, 1].real == pytest.approx(math.exp(-gamma * 1.3), rel=1e-9)


def test_evolve_zero_duration_and_errors():
    sys = ladder([1.0], [0.0], [1.0])
    rho0 = DensityMatrix.pure(2)
    assert np.array_equal(evolve(sys, rho0, 0.0).data, rho0.data)
    with pytest.raises(ValidationError):
        evolve(sys, rho0, -1.0)
    with pytest.raises(ValidationError):
        evolve(sys, np.eye(3) / 3, 1.0)
    with pytest.raises(StepSizeError):
        evolve(ladder([10.0], [0.0], [50.0]), rho0, 1.0, step=1.0)


def test_evolve_reaches_steady_state_msac_ladder():
    sys = rydberg_ladder(TWO_PI * 10e6)
    t = 50 / min(GAMMA_INTERMEDIATE, GAMMA_RYDBERG)
    rho = evolve(sys, DensityMatrix.pure(4), t)
    assert np.max(np.abs(rho.data - steady_state(sys).data)) < 1e-8


def test_invalid_topologies():
    with pytest.raises(ValidationError):  # level 2 driven twice
        LevelSystem(3, (Coupling(0, 2, 1.0), Coupling(1, 2, 1.0)), (Decay(1, 0, 1.0),))
    with pytest.raises(ValidationError):
        LevelSystem(9)
    with pytest.raises(ValidationError):
        LevelSystem(3, (), (Decay(1, 0, 1.0), Decay(0, 1, 1.0)))
    with pytest.raises(ValidationError):
        LevelSystem(2, (Coupling(0, 2, 1.0),))
    with pytest.raises(ValidationError):
        Decay(1, 0, -1.0)


def test_batch_matches_single_solves():
    sys = rydberg_ladder(0.0)
    l0, drives = split_liouvillian(sys, [(2, 3)])
    rabi = TWO_PI * np.array([0.0, 1e6, 7e6])
    batch = steady_state_batch(l0, drives, rabi)
    for r, rho in zip(rabi, batch):
        assert np.allclose(rho, steady_state(sys.with_coupling((2, 3), rabi=r)).data, atol=1e-12)


def test_multiband_single_band_equals_ladder():
    a = steady_state(rydberg_multiband([TWO_PI * 4e6]))
    b = steady_state(rydberg_ladder(TWO_PI * 4e6))
    assert np.allclose(a.data, b.data, atol=1e-13)


def test_density_matrix_violations():
    assert DensityMatrix.pure(3).is_valid()
    bad = DensityMatrix(np.array([[1.2, 0.0], [0.0, -0.2]]))
    assert any("negative" in v for v in bad.violations())
    assert any("trace" in v for v in DensityMatrix(np.eye(2)).violations())


@st.composite
def level_systems(draw):
    n = draw(st.integers(2, 5))
    rate = st.floats(0.05, 5.0)
    couplings, decays = [], []
    for b in range(1, n):
        a = draw(st.integers(0, b - 1))
        couplings.append(Coupling(a, b, draw(st.floats(0.0, 5.0)), draw(st.floats(-3.0, 3.0))))
        decays.append(Decay(b, a, draw(rate)))
    return LevelSystem(n, tuple(couplings), tuple(decays))


@settings(max_examples=60, deadline=None)
@given(level_systems())
def test_steady_state_is_a_density_matrix(sys):
    rho = steady_state(sys)
    assert rho.violations() == []
    assert np.abs(liouvillian(sys) @ rho.data.reshape(-1)).max() < 1e-8 * max(sys.max_rate, 1.0)


@settings(max_examples=25, deadline=None)
@given(level_systems(), st.floats(0.1, 3.0))
def test_evolution_preserves_invariants(sys, t):
    rho = evolve(sys, DensityMatrix.pure(sys.num_levels), t)
    assert rho.violations() == []
