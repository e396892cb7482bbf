"""Probe transmission, Autler-Townes readout and receiver noise."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BracketError, NoSplittingError, ValidationError
from .quantum import (
    TWO_PI,
    LevelSystem,
    default_step,
    evolve_modulated,
    liouvillian,
    split_liouvillian,
    steady_state,
    steady_state_batch,
)

PROBE = (0, 1)
RF = (2, 3)


@dataclass(frozen=True)
class ProbeSweep:
    """Probe-detuning scan (rad/s) over a fixed level system."""

    detunings: np.ndarray
    system: LevelSystem
    od: float = 1.0
    probe: tuple[int, int] = PROBE

    def __post_init__(self):
        grid = np.asarray(self.detunings, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValidationError("detuning grid must be a non-empty 1-D array")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("detuning grid must be strictly increasing")
        if not self.od > 0:
            raise ValidationError("optical depth must be positive")
        object.__setattr__(self, "detunings", grid)


@dataclass(frozen=True)
class EitTrace:
    detunings: np.ndarray  # rad/s
    transmission: np.ndarray

    @property
    def detunings_hz(self) -> np.ndarray:
        return self.detunings / TWO_PI

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["detuning_Hz", "transmission"])
            for d, t in zip(self.detunings_hz, self.transmission):
                w.writerow([f"{d:.6f}", f"{t:.12e}"])


def _probe_detuned(sys: LevelSystem, probe, delta: float) -> LevelSystem:
    return sys.with_coupling(probe, detuning=delta)


def bare_absorption(sys: LevelSystem, probe=PROBE) -> float:
    """Im(rho_21) of the probe transition alone, on resonance, other drives off."""
    couplings = tuple(
        c.__class__(c.a, c.b, c.rabi if c.pair == tuple(sorted(probe)) else 0.0,
                    0.0 if c.pair == tuple(sorted(probe)) else c.detuning)
        for c in sys.couplings
    )
    bare = LevelSystem(sys.num_levels, couplings, sys.decays)
    a, b = sorted(probe)
    return steady_state(bare)[b, a].imag


def absorption(sys: LevelSystem, detunings: np.ndarray, probe=PROBE) -> np.ndarray:
    """Im(rho_21) across a probe-detuning grid, normalised to the bare line."""
    a, b = sorted(probe)
    # rotating-frame Liouvillian is affine in the probe detuning
    l_zero = liouvillian(_probe_detuned(sys, probe, 0.0))
    slope = liouvillian(_probe_detuned(sys, probe, 1.0)) - l_zero
    steady_state(_probe_detuned(sys, probe, float(detunings[len(detunings) // 2])))
    rho = steady_state_batch(l_zero, [slope], np.asarray(detunings, dtype=float))
    return rho[:, b, a].imag / bare_absorption(sys, probe)


def transmission_spectrum(sweep: ProbeSweep) -> EitTrace:
    a = absorption(sweep.system, sweep.detunings, sweep.probe)
    # rounding can leave a ~1e-16 negative absorption on a transparency peak
    a = np.where((a < 0) & (a > -1e-9), 0.0, a)
    return EitTrace(sweep.detunings.copy(), np.exp(-sweep.od * a))


def transmission_at(sys: LevelSystem, od: float = 1.0, probe=PROBE) -> float:
    a, b = sorted(probe)
    return math.exp(-od * steady_state(sys)[b, a].imag / bare_absorption(sys, probe))


def _local_maxima(t: np.ndarray) -> np.ndarray:
    inner = (t[1:-1] > t[:-2]) & (t[1:-1] >= t[2:])
    return np.flatnonzero(inner) + 1


def _parabolic_peak(x: np.ndarray, y: np.ndarray, i: int) -> float:
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(x[i])
    # non-uniform grids: fit through the three points exactly
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    if np.isclose(x1 - x0, x2 - x1):
        return float(x1 + 0.5 * (x1 - x0) * (y0 - y2) / denom)
    a = np.polyfit([x0, x1, x2], [y0, y1, y2], 2)
    return float(-a[1] / (2 * a[0])) if a[0] != 0 else float(x1)


def peak_splitting(trace: EitTrace, rtol: float = 1e-12) -> float:
    """Separation (Hz) of the two highest transmission maxima.

    Each maximum is refined by three-point parabolic interpolation. When
    maxima tie in height the outermost pair wins.
    """
    t = np.asarray(trace.transmission, dtype=float)
    x = np.asarray(trace.detunings, dtype=float)
    peaks = _local_maxima(t)
    if peaks.size < 2:
        raise NoSplittingError("fewer than two transmission maxima; the RF field is below resolution")
    heights = t[peaks]
    order = np.argsort(-heights, kind="stable")
    tol = rtol * max(abs(heights.max()), 1.0)
    top = heights[order[0]]
    tied_top = peaks[np.abs(heights - top) <= tol]
    if tied_top.size >= 2:
        left, right = tied_top.min(), tied_top.max()
    else:
        first = peaks[order[0]]
        second_h = heights[order[1]]
        rest = peaks[(np.abs(heights - second_h) <= tol) & (peaks != first)]
        other = rest[np.argmax(np.abs(rest - first))]
        left, right = sorted((first, other))
    return abs(_parabolic_peak(x, t, right) - _parabolic_peak(x, t, left)) / TWO_PI


def rabi_readout(splitting: float, calibration: float = 1.0) -> float:
    if splitting < 0:
        raise ValidationError("splitting must be non-negative")
    return calibration * TWO_PI * splitting


def readout_pipeline(omega_rf: float, sys: LevelSystem, *, span: float | None = None,
                     points: int = 2001, od: float = 1.0, rf=RF) -> float:
    """Full sweep -> splitting (Hz) for one RF Rabi frequency."""
    if span is None:
        span = 1.5 * omega_rf + TWO_PI * 4e6
    grid = np.linspace(-span, span, points)
    trace = transmission_spectrum(ProbeSweep(grid, sys.with_coupling(rf, rabi=omega_rf), od))
    return peak_splitting(trace)


def detector_noise(samples, equivalent_field_noise: float, bandwidth: float,
                   seed=None, gain: float = 1.0) -> np.ndarray:
    """Add Gaussian noise equivalent to a field noise density at the input.

    The field-domain standard deviation is ``equivalent_field_noise *
    sqrt(bandwidth)``; ``gain`` converts it into output units (for a
    photodetector trace, dT/dE at the operating point).
    """
    if equivalent_field_noise < 0:
        raise ValidationError("noise density must be non-negative")
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")
    x = np.array(samples, dtype=float, copy=True)
    if equivalent_field_noise == 0:
        return x
    sigma = equivalent_field_noise * math.sqrt(bandwidth) * abs(gain)
    rng = np.random.default_rng(seed)
    return x + sigma * rng.standard_normal(x.shape)


def max_slope_detuning(sys: LevelSystem, grid: np.ndarray, od: float = 1.0,
                       probe=PROBE) -> float:
    """Probe detuning of steepest |dT/d Delta_p| on ``grid``."""
    trace = transmission_spectrum(ProbeSweep(grid, sys, od, probe))
    slope = np.gradient(trace.transmission, trace.detunings)
    return float(trace.detunings[np.argmax(np.abs(slope))])


def _coherence_index(sys: LevelSystem, probe) -> int:
    a, b = sorted(probe)
    return b * sys.num_levels + a


def small_signal_response(sys: LevelSystem, frequencies, rf=RF, probe=PROBE) -> np.ndarray:
    """Linear-response transfer function d Im(rho_21) / d Omega_RF at each frequency (Hz)."""
    n = sys.num_levels
    lv = liouvillian(sys)
    _, (drive,) = split_liouvillian(sys, [rf])
    rho = steady_state(sys).data.reshape(-1)
    src = drive @ rho
    a, b = sorted(probe)
    i21, i12 = b * n + a, a * n + b
    out = []
    for f in np.atleast_1d(frequencies):
        m = 1j * TWO_PI * f * np.eye(n * n) - lv
        s = src.copy()
        if f == 0:
            # the kernel of L is fixed by trace conservation
            m[0, :] = np.eye(n).reshape(-1)
            s[0] = 0.0
        x = np.linalg.solve(m, s)
        out.append((x[i21] - x[i12]) / 2j)
    return np.array(out)


def modulation_response(sys: LevelSystem, frequencies, *, depth: float = 0.02,
                        settle: float = 30e-6, window: float = 70e-6,
                        step: float | None = None, rf=RF, probe=PROBE) -> np.ndarray:
    """Output modulation of Im(rho_21) relative to the quasi-static response.

    Omega_RF(t) = Omega_0 (1 + depth sin(2 pi f t)) is integrated in time
    from the unmodulated steady state for every ``f`` at once; the response
    at ``f`` is extracted by lock-in over whole periods after ``settle``.
    """
    freqs = np.asarray(frequencies, dtype=float)
    if np.any(freqs <= 0):
        raise ValidationError("modulation frequencies must be positive")
    if np.any(1.0 / freqs > window / 2):
        raise ValidationError("window must span at least two periods of every frequency")
    omega0 = sys.coupling(rf).rabi.real
    if omega0 <= 0:
        raise ValidationError("modulation needs a non-zero RF Rabi frequency")
    l0, (drive,) = split_liouvillian(sys, [rf])
    rho0 = steady_state(sys).data.reshape(-1)
    idx = _coherence_index(sys, probe)
    if step is None:
        step = min(default_step(sys.with_coupling(rf, rabi=omega0 * (1 + depth))),
                   1.0 / (20 * freqs.max()))

    def rabi(t):
        return (omega0 * (1.0 + depth * np.sin(TWO_PI * freqs * t)))[None, :]

    duration = settle + window
    _, obs, times = evolve_modulated(l0, [drive], rabi, rho0, duration, step,
                                     observe=lambda x: x[idx].imag.copy())
    # static reference from two steady states
    eps = 1e-4 * omega0
    up = steady_state(sys.with_coupling(rf, rabi=omega0 + eps))
    dn = steady_state(sys.with_coupling(rf, rabi=omega0 - eps))
    a, b = sorted(probe)
    static = (up[b, a].imag - dn[b, a].imag) / (2 * eps) * omega0 * depth
    ratio = np.empty(freqs.size)
    for k, f in enumerate(freqs):
        periods = math.floor((duration - settle) * f)
        t_end = times[-1]
        sel = times > t_end - periods / f + 1e-15
        y = obs[sel, k]
        ph = np.exp(-1j * TWO_PI * f * times[sel])
        amp = 2.0 * abs(np.mean((y - y.mean()) * ph))
        ratio[k] = amp / abs(static)
    return ratio


def response_bandwidth(sys: LevelSystem, frequencies, *, method: str = "integrate",
                       rf=RF, probe=PROBE, **kwargs) -> float:
    """-3 dB roll-off frequency (Hz) of the RF-to-probe response.

    ``frequencies`` is the modulation grid (increasing, Hz); the first
    downward crossing of 1/sqrt(2) is located by log-log interpolation.
    ``method="linear"`` uses the small-signal transfer function instead of
    time integration.
    """
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.ndim != 1 or freqs.size < 2 or np.any(np.diff(freqs) <= 0):
        raise ValidationError("modulation grid must be increasing with at least two points")
    if method == "integrate":
        ratio = modulation_response(sys, freqs, rf=rf, probe=probe, **kwargs)
    elif method == "linear":
        h = small_signal_response(sys, np.r_[0.0, freqs], rf=rf, probe=probe)
        ratio = np.abs(h[1:] / h[0])
    else:
        raise ValidationError(f"unknown method {method!r}")
    return _crossing(freqs, ratio)


def _crossing(freqs: np.ndarray, ratio: np.ndarray, level: float = 1 / math.sqrt(2)) -> float:
    if ratio[0] < level:
        raise BracketError("response is already below -3 dB at the lowest grid frequency")
    below = np.flatnonzero(ratio < level)
    if below.size == 0:
        raise BracketError("response never drops below -3 dB on this grid")
    i = below[0]
    lf0, lf1 = math.log(freqs[i - 1]), math.log(freqs[i])
    lr0, lr1 = math.log(ratio[i - 1]), math.log(ratio[i])
    frac = (math.log(level) - lr0) / (lr1 - lr0)
    return math.exp(lf0 + frac * (lf1 - lf0))
