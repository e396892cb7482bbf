import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from raresim.eit import (
    EitTrace,
    ProbeSweep,
    absorption,
    bare_absorption,
    detector_noise,
    max_slope_detuning,
    peak_splitting,
    rabi_readout,
    readout_pipeline,
    response_bandwidth,
    small_signal_response,
    transmission_at,
    transmission_spectrum,
)
from raresim.exceptions import BracketError, NoSplittingError, ValidationError
from raresim.quantum import TWO_PI, ladder, rydberg_ladder, steady_state


def lorentz_im_rho21(omega, delta, gamma):
    """Weak-probe two-level coherence, Im(rho_21)."""
    return (omega / 2) * (gamma / 2) / (delta**2 + gamma**2 / 4 + omega**2 / 2)


def test_two_level_absorption_is_lorentzian():
    omega, gamma = 0.2, 1.0
    sys = ladder([omega], [0.0], [gamma])
    grid = np.linspace(-3, 3, 13)
    expected = lorentz_im_rho21(omega, grid, gamma) / lorentz_im_rho21(omega, 0.0, gamma)
    assert np.allclose(absorption(sys, grid), expected, rtol=1e-10)


def test_transmission_is_physical():
    sys = rydberg_ladder(TWO_PI * 8e6)
    grid = np.linspace(-TWO_PI * 20e6, TWO_PI * 20e6, 401)
    tr = transmission_spectrum(ProbeSweep(grid, sys, od=2.0))
    assert np.all((tr.transmission > 0) & (tr.transmission <= 1))
    assert tr.detunings_hz[0] == pytest.approx(-20e6)


def test_bare_line_absorbs_fully_at_resonance():
    sys = rydberg_ladder(0.0, omega_c=0.0)
    assert transmission_at(sys, od=1.0) == pytest.approx(np.exp(-1.0), rel=1e-12)
    # value frozen from the steady-state solver with default lasers
    assert bare_absorption(rydberg_ladder()) == pytest.approx(0.1562624695, rel=1e-8)


def test_eit_window_opens_with_coupling():
    with_c = transmission_at(rydberg_ladder(0.0))
    without = transmission_at(rydberg_ladder(0.0, omega_c=0.0))
    assert with_c > without


def test_sweep_validation():
    sys = rydberg_ladder()
    with pytest.raises(ValidationError):
        ProbeSweep(np.array([1.0, 0.0]), sys)
    with pytest.raises(ValidationError):
        ProbeSweep(np.array([0.0, 1.0]), sys, od=0.0)


def test_splitting_tracks_rabi_frequency():
    sys = rydberg_ladder()
    for f in (5e6, 10e6, 30e6):
        assert readout_pipeline(TWO_PI * f, sys) == pytest.approx(f, rel=5e-3)


def test_no_splitting_without_rf():
    grid = np.linspace(-TWO_PI * 10e6, TWO_PI * 10e6, 801)
    tr = transmission_spectrum(ProbeSweep(grid, rydberg_ladder(0.0)))
    with pytest.raises(NoSplittingError):
        peak_splitting(tr)


def test_synthetic_peaks_tie_rule_and_refinement():
    x = np.linspace(-10, 10, 2001)
    t = np.exp(-((x - 3.0) ** 2)) + np.exp(-((x + 3.0) ** 2)) + 0.5 * np.exp(-(x**2))
    f = lambda u: -(np.exp(-((u - 3.0) ** 2)) + np.exp(-((u + 3.0) ** 2)) + 0.5 * np.exp(-(u**2)))
    peak = minimize_scalar(f, bounds=(2.0, 4.0), method="bounded", options={"xatol": 1e-10}).x
    assert peak_splitting(EitTrace(x, t)) * TWO_PI == pytest.approx(2 * peak, abs=1e-5)


def test_rabi_readout():
    assert rabi_readout(1e6) == pytest.approx(TWO_PI * 1e6)
    assert rabi_readout(1e6, calibration=0.5) == pytest.approx(np.pi * 1e6)
    with pytest.raises(ValidationError):
        rabi_readout(-1.0)


def test_detector_noise_statistics():
    # 4.874e-10 V/m/sqrt(Hz) over 500 kHz -> 3.446e-7 V/m
    x = detector_noise(np.zeros(200_000), 4.874e-10, 500e3, seed=3)
    assert x.std() == pytest.approx(4.874e-10 * np.sqrt(500e3), rel=0.01)
    assert np.array_equal(x, detector_noise(np.zeros(200_000), 4.874e-10, 500e3, seed=3))
    assert np.array_equal(detector_noise(np.ones(4), 0.0, 1.0), np.ones(4))
    with pytest.raises(ValidationError):
        detector_noise(np.zeros(3), -1.0, 1.0)


def test_max_slope_is_on_a_flank():
    sys = rydberg_ladder(TWO_PI * 2e6)
    grid = np.linspace(-TWO_PI * 6e6, TWO_PI * 6e6, 1201)
    d = max_slope_detuning(sys, grid)
    assert 0 < abs(d) < TWO_PI * 6e6


def test_small_signal_response_dc_matches_static_derivative():
    sys = rydberg_ladder(TWO_PI * 1e6)
    eps = 1e-3 * TWO_PI * 1e6
    up = steady_state(sys.with_coupling((2, 3), rabi=TWO_PI * 1e6 + eps))[1, 0].imag
    dn = steady_state(sys.with_coupling((2, 3), rabi=TWO_PI * 1e6 - eps))[1, 0].imag
    h0 = small_signal_response(sys, [0.0])[0]
    assert h0.real == pytest.approx((up - dn) / (2 * eps), rel=1e-5)


def test_response_bandwidth_methods_agree():
    sys = rydberg_ladder(TWO_PI * 1e6)
    grid = np.logspace(5, 7.5, 11)
    lin = response_bandwidth(sys, grid, method="linear")
    integ = response_bandwidth(sys, grid)
    assert 0.1e6 <= lin <= 10e6
    assert integ == pytest.approx(lin, rel=0.02)


def test_response_bandwidth_bracketing():
    sys = rydberg_ladder(TWO_PI * 1e6)
    with pytest.raises(BracketError):
        response_bandwidth(sys, np.logspace(3, 4, 5), method="linear")
    with pytest.raises(BracketError):
        response_bandwidth(sys, np.logspace(8, 9, 5), method="linear")
    with pytest.raises(ValidationError):
        response_bandwidth(sys, np.array([1e6]), method="linear")
    with pytest.raises(ValidationError):
        response_bandwidth(sys, np.logspace(5, 6, 3), method="magic")
