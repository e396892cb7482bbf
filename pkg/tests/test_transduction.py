import json
import math
import warnings

import numpy as np
import pytest

from chains import MU, pm_chain
from raresim.exceptions import (
    AliasingError,
    BandwidthError,
    CalibrationError,
    OrthogonalityError,
    ValidationError,
)
from raresim.quantum import TWO_PI, rydberg_ladder
from raresim.registry import HBAR
from raresim.transduction import (
    BPSK,
    FieldEnvelope,
    ReferenceField,
    Transducer,
    ber_from_symbols,
    calibrate_levels,
    demod_am,
    demod_fm,
    demod_pm,
    fdm_demod,
    fdm_modulate,
    fm_levels,
    heterodyne_superpose,
    if_component,
    linearized_heterodyne,
    qpsk_ser,
    quasi_static_receive,
    rabi_from_field,
)


def test_rabi_spot_value():
    # 2.04e-26 C m * 1 V/m / hbar / 2 pi, by hand: 30.7876 MHz
    omega = rabi_from_field(2.04e-26, 1.0)
    assert omega / (2 * math.pi) == pytest.approx(2.04e-26 / 1.054571817e-34 / (2 * math.pi), rel=1e-9)
    assert omega / (2 * math.pi) == pytest.approx(30.79e6, rel=1e-4)


def test_rabi_generalised_and_vectorised():
    base = rabi_from_field(MU, 0.5)
    assert rabi_from_field(MU, 0.5, 3 * base) == pytest.approx(math.sqrt(10) * base)
    assert rabi_from_field(MU, 1.0, 7.0, polarization=0.0) == pytest.approx(7.0)
    arr = rabi_from_field(MU, np.array([1.0, -2.0, 1j]))
    assert np.allclose(arr, MU / HBAR * np.array([1.0, 2.0, 1.0]))
    with pytest.raises(ValidationError):
        rabi_from_field(0.0, 1.0)


def test_envelope_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    env = FieldEnvelope(3.213e9, rng.standard_normal(64) + 1j * rng.standard_normal(64), 16e3)
    path = tmp_path / "wave.c64"
    env.save(path)
    assert path.stat().st_size == 64 * 8
    meta = json.loads((tmp_path / "wave.c64.json").read_text())
    assert meta == {"carrier_hz": 3.213e9, "sample_rate_hz": 16e3}
    back = FieldEnvelope.load(path)
    assert np.allclose(back.samples, env.samples.astype(np.complex64))
    assert back.carrier == env.carrier and back.sample_rate == env.sample_rate


def test_envelope_validation_and_bandwidth():
    with pytest.raises(ValidationError):
        FieldEnvelope(1e9, np.array([1.0, np.nan]), 1e3)
    with pytest.raises(ValidationError):
        FieldEnvelope(1e9, np.ones(4), 0.0)
    t = np.arange(1000) / 1e4
    tone = FieldEnvelope(1e9, np.exp(1j * TWO_PI * 500 * t), 1e4)
    assert tone.occupied_bandwidth() == pytest.approx(1000.0)


def test_heterodyne_matches_elementwise_magnitude():
    rng = np.random.default_rng(2)
    s = 0.01 * (rng.standard_normal(50) + 1j * rng.standard_normal(50))
    env = FieldEnvelope(1e9, s, 16e3)
    ref = ReferenceField(1.0, 2e3, 0.3)
    t = np.arange(50) / 16e3
    expected = [MU / HBAR * abs(si + 1.0 * np.exp(1j * (TWO_PI * 2e3 * ti + 0.3))) for si, ti in zip(s, t)]
    assert np.allclose(heterodyne_superpose(env, ref, MU), expected, rtol=1e-12)
    lin = linearized_heterodyne(env, ref, MU)
    # second-order remainder is bounded by |s|^2 / (2 A_r)
    assert np.max(np.abs(lin - expected)) <= MU / HBAR * np.max(np.abs(s)) ** 2 / 2 * 1.01


def test_zero_signal_gives_reference_rabi():
    env = FieldEnvelope(1e9, np.zeros(8), 16e3)
    assert np.allclose(heterodyne_superpose(env, ReferenceField(0.2), MU), MU / HBAR * 0.2)


def test_transducer_slope_sign_and_batch():
    sys = rydberg_ladder(TWO_PI * 2e6)
    tr = Transducer(sys, TWO_PI * 1.2e6)
    vals = tr(TWO_PI * np.array([1.9e6, 2.0e6, 2.1e6]))
    assert np.all((vals > 0) & (vals <= 1))
    slope = tr.slope(TWO_PI * 2e6)
    assert slope == pytest.approx((vals[2] - vals[0]) / (TWO_PI * 0.2e6), rel=0.05)


def test_quasi_static_bandwidth_guard():
    sys = rydberg_ladder(TWO_PI * 2e6)
    rabi = np.full(16, TWO_PI * 2e6)
    with pytest.raises(BandwidthError):
        quasi_static_receive(sys, rabi, TWO_PI * 1.2e6, signal_bandwidth=5e6)
    out = quasi_static_receive(sys, rabi, TWO_PI * 1.2e6, signal_bandwidth=1e3)
    assert np.ptp(out) < 1e-14


def test_quasi_static_noise_needs_scale():
    sys = rydberg_ladder(TWO_PI * 2e6)
    with pytest.raises(ValidationError):
        quasi_static_receive(sys, np.full(4, TWO_PI * 2e6), 0.0, noise_density=1e-9)


def test_am_demodulation():
    levels = np.array([0.2, 0.5, 0.9])
    sym = np.array([0, 1, 2, 2, 1, 0, 1])
    power = np.repeat(levels[sym], 4) + 0.01 * np.random.default_rng(0).standard_normal(28)
    cal = calibrate_levels(power, sym, 4)
    assert np.allclose(cal, levels, atol=0.02)
    assert np.array_equal(demod_am(power, cal, 4), sym)
    with pytest.raises(CalibrationError):
        demod_am(power, None, 4)
    with pytest.raises(CalibrationError):
        demod_am(power, [0.5, 0.5], 4)
    with pytest.raises(CalibrationError):
        calibrate_levels(power[:4], [2], 4)


def test_fm_symmetric_detunings_are_ambiguous():
    sys = rydberg_ladder(TWO_PI * 2e6)
    tr = Transducer(sys, TWO_PI * 1.2e6)
    amp = HBAR * TWO_PI * 2e6 / MU
    d = TWO_PI * 1e6
    lv = fm_levels(tr, MU, amp, [-d, 0.0, d])
    with pytest.warns(RuntimeWarning):
        dec = demod_fm(np.repeat(lv, 2), lv, 2)
    assert dec.ambiguous == ((0, 2),)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dec = demod_fm(np.repeat(lv[1:], 2), lv[1:], 2)
    assert np.array_equal(dec.symbols, [0, 1])


def test_if_component_recovers_phasor():
    fs, f = 16e3, 2e3
    t = np.arange(160) / fs
    e = 0.3 * np.exp(1j * 0.7)
    p = 5.0 + np.real(e * np.exp(-1j * (TWO_PI * f * t + 0.2)))
    out = if_component(p, f, 0.2, fs, 16)
    assert np.allclose(out, e)


def test_pm_guards():
    with pytest.raises(ValidationError):
        demod_pm(np.zeros(32), ReferenceField(1.0, 0.0), 1e3, 16e3)
    with pytest.raises(AliasingError):
        demod_pm(np.zeros(32), ReferenceField(1.0, 9e3), 1e3, 16e3)
    with pytest.raises(ValidationError):
        demod_pm(np.zeros(32), ReferenceField(1.0, 2e3), 3e3, 16e3)


def test_pm_chain_noiseless():
    sent, got, soft = pm_chain(200, seed=4)
    assert np.array_equal(sent, got)
    assert np.allclose(np.abs(soft), 1.0, atol=0.05)


def test_qpsk_ser_formula():
    q = 0.5 * math.erfc(math.sqrt(10.0) / math.sqrt(2.0))
    assert qpsk_ser(10.0) == pytest.approx(2 * q - q * q)
    assert qpsk_ser(10.0) == pytest.approx(1.5648e-3, rel=1e-3)


def fdm_case(reference, n=200, seed=0):
    rng = np.random.default_rng(seed)
    f = [2e3, 4e3, 6e3, 8e3]
    sym = rng.integers(0, 2, (n, 4))
    env = fdm_modulate(BPSK[sym], f, 0.5e-3, 64e3, amplitude=0.01)
    ref = ReferenceField(20 * np.max(np.abs(env.samples)), 0.0) if reference else None
    return sym, fdm_demod(env, ref, f, 0.5e-3, MU)


def test_fdm_with_reference():
    sym, res = fdm_case(True)
    assert res.accuracy(sym) >= 0.99
    assert np.allclose(res.crosstalk.sum(axis=1), 1.0)


def test_fdm_without_reference_leaks():
    sym, res = fdm_case(False)
    off = res.crosstalk[~np.eye(4, dtype=bool)]
    assert off.sum() > 0


def test_fdm_single_subcarrier_identity():
    env = fdm_modulate(BPSK[[0, 1, 1]][:, None], [2e3], 0.5e-3, 64e3)
    res = fdm_demod(env, None, [2e3], 0.5e-3, MU)
    assert np.array_equal(res.crosstalk, np.eye(1))


def test_fdm_orthogonality_errors():
    with pytest.raises(OrthogonalityError):
        fdm_modulate(np.ones((2, 2)), [2e3, 3.1e3], 0.5e-3, 64e3)
    with pytest.raises(OrthogonalityError):
        fdm_modulate(np.ones((2, 1)), [2e3], 0.5e-3, 64.1e3)


def test_ber_gray_mapping():
    assert ber_from_symbols([0, 1, 2, 3], [0, 1, 2, 3], 2) == 0.0
    # adjacent quadrants differ by one bit, opposite quadrants by two
    assert ber_from_symbols([0], [1], 2) == 0.5
    assert ber_from_symbols([0], [2], 2) == 1.0
    assert ber_from_symbols([0, 1], [1, 1], 1) == 0.5
