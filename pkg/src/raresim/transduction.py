"""Field-to-Rabi conversion, heterodyne mixing, quasi-static reception and demodulators."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .eit import PROBE, RF, bare_absorption, detector_noise, max_slope_detuning, response_bandwidth
from .exceptions import (
    AliasingError,
    BandwidthError,
    CalibrationError,
    OrthogonalityError,
    ValidationError,
)
from .quantum import TWO_PI, LevelSystem, split_liouvillian, steady_state, steady_state_batch
from .registry import HBAR

QPSK = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
BPSK = np.array([1.0 + 0j, -1.0 + 0j])

DEFAULT_IF = 2e3
DEFAULT_REFERENCE_RATIO = 20.0


def rabi_from_field(mu: float, e_field: complex, delta: float = 0.0, *,
                    polarization: float = 1.0, hbar: float = HBAR):
    """Generalised Rabi frequency (rad/s) of a dipole ``mu`` driven by ``e_field``.

    ``polarization`` scales the co-polarised projection of the field onto
    the dipole. Works elementwise on arrays.
    """
    if not mu > 0:
        raise ValidationError("dipole moment must be positive")
    coupling = np.abs(polarization * mu * np.asarray(e_field))
    out = np.sqrt(coupling**2 + (hbar * np.asarray(delta)) ** 2) / hbar
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FieldEnvelope:
    carrier: float  # Hz
    samples: np.ndarray  # complex baseband, V/m
    sample_rate: float  # Hz

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=complex)
        if x.ndim != 1:
            raise ValidationError("samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValidationError("samples must be finite")
        if not self.sample_rate > 0:
            raise ValidationError("sample rate must be positive")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def occupied_bandwidth(self, fraction: float = 0.99) -> float:
        """Two-sided bandwidth holding ``fraction`` of the energy."""
        spec = np.abs(np.fft.fftshift(np.fft.fft(self.samples))) ** 2
        freqs = np.fft.fftshift(np.fft.fftfreq(self.samples.size, 1.0 / self.sample_rate))
        order = np.argsort(np.abs(freqs))
        cum = np.cumsum(spec[order])
        if cum[-1] == 0:
            return 0.0
        k = np.searchsorted(cum, fraction * cum[-1])
        return 2.0 * abs(freqs[order][min(k, len(order) - 1)])

    def save(self, path) -> None:
        """Write interleaved little-endian complex64 samples plus a JSON sidecar."""
        path = Path(path)
        self.samples.astype("<c8").tofile(path)
        sidecar = {"carrier_hz": self.carrier, "sample_rate_hz": self.sample_rate}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True))

    @classmethod
    def load(cls, path) -> "FieldEnvelope":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        samples = np.fromfile(path, dtype="<c8").astype(complex)
        return cls(float(meta["carrier_hz"]), samples, float(meta["sample_rate_hz"]))


@dataclass(frozen=True)
class ReferenceField:
    amplitude: float  # V/m
    offset: float = DEFAULT_IF  # Hz from the signal carrier
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValidationError("reference amplitude must be non-negative")

    def phasor(self, t: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(1j * (TWO_PI * self.offset * t + self.phase))


def heterodyne_superpose(signal: FieldEnvelope, ref: ReferenceField, mu: float, *,
                         hbar: float = HBAR) -> np.ndarray:
    """Rabi frequency (rad/s) of signal plus reference at every sample."""
    return (mu / hbar) * np.abs(signal.samples + ref.phasor(signal.times))


def linearized_heterodyne(signal: FieldEnvelope, ref: ReferenceField, mu: float, *,
                          hbar: float = HBAR) -> np.ndarray:
    """First-order expansion of :func:`heterodyne_superpose` for a strong reference."""
    t = signal.times
    beat = np.exp(-1j * (TWO_PI * ref.offset * t + ref.phase))
    return (mu / hbar) * (ref.amplitude + np.real(signal.samples * beat))


# --- quasi-static receiver -------------------------------------------------


def probe_operating_point(sys: LevelSystem, omega_rf: float, *, rf=RF, od: float = 1.0,
                          span: float | None = None, points: int = 801) -> float:
    """Probe detuning of steepest transmission slope at the given RF Rabi frequency."""
    if span is None:
        span = 1.5 * abs(omega_rf) + 2.0 * abs(sys.coupling((1, 2)).rabi) + TWO_PI * 1e6
    grid = np.linspace(-span, span, points)
    return max_slope_detuning(sys.with_coupling(rf, rabi=omega_rf), grid, od)


def _rf_pairs(rf) -> list[tuple[int, int]]:
    if isinstance(rf[0], (int, np.integer)):
        return [tuple(rf)]
    return [tuple(p) for p in rf]


class Transducer:
    """Steady-state probe transmission as a function of the RF Rabi frequencies.

    Holds the affine Liouvillian decomposition for a fixed probe operating
    point so that long sample series can be solved in batches.
    """

    def __init__(self, sys: LevelSystem, probe_detuning: float, *, rf=RF, od: float = 1.0,
                 probe=PROBE):
        self.pairs = _rf_pairs(rf)
        self.system = sys.with_coupling(probe, detuning=probe_detuning)
        self.od = od
        self.probe = tuple(sorted(probe))
        self.l0, self.drives = split_liouvillian(self.system, self.pairs)
        self.norm = bare_absorption(self.system, probe)

    def __call__(self, rabi) -> np.ndarray:
        r = np.asarray(rabi, dtype=float)
        if r.ndim == 1:
            r = r[:, None] if len(self.pairs) == 1 else r[None, :]
        if r.shape[1] != len(self.pairs):
            raise ValidationError(f"expected {len(self.pairs)} Rabi columns, got {r.shape[1]}")
        a, b = self.probe
        rho = steady_state_batch(self.l0, self.drives, r)
        return np.exp(-self.od * rho[:, b, a].imag / self.norm)

    def check_unique(self, rabi_point) -> None:
        sys = self.system
        for p, v in zip(self.pairs, np.atleast_1d(rabi_point)):
            sys = sys.with_coupling(p, rabi=float(v))
        steady_state(sys)

    def slope(self, rabi_point, band: int = 0) -> float:
        """dT/d Omega for one band at ``rabi_point`` (central difference)."""
        point = np.array(np.atleast_1d(rabi_point), dtype=float)
        eps = 1e-4 * max(abs(point[band]), 1e3)
        up, dn = point.copy(), point.copy()
        up[band] += eps
        dn[band] -= eps
        t = self(np.vstack([up, dn]))
        return float((t[0] - t[1]) / (2 * eps))


def quasi_static_receive(sys: LevelSystem, rabi_series, probe_detuning: float, *,
                         od: float = 1.0, noise_density: float = 0.0,
                         bandwidth: float | None = None, dipole_moment: float | None = None,
                         seed=None, rf=RF, signal_bandwidth: float | None = None,
                         response_bw: float | None = None, hbar: float = HBAR) -> np.ndarray:
    """Photodetector trace for a Rabi-frequency series, sample by sample.

    Each sample is treated as an independent steady state at a fixed probe
    detuning. Noise is the equivalent field-noise density of the receiver,
    mapped to the output through the local slope dT/dE at the median
    operating point of band 0.

    Raises :class:`BandwidthError` when ``signal_bandwidth`` exceeds a fifth
    of the atomic response bandwidth.
    """
    rabi = np.asarray(rabi_series, dtype=float)
    tr = Transducer(sys, probe_detuning, rf=rf, od=od)
    median = np.median(rabi.reshape(rabi.shape[0], -1), axis=0)
    tr.check_unique(median)
    if signal_bandwidth is not None:
        if response_bw is None:
            op = tr.system
            for p, v in zip(tr.pairs, median):
                op = op.with_coupling(p, rabi=float(v))
            grid = np.logspace(3, 9, 61)
            response_bw = response_bandwidth(op, grid, method="linear", rf=tr.pairs[0])
        if signal_bandwidth > 0.2 * response_bw:
            raise BandwidthError(
                f"signal bandwidth {signal_bandwidth:.3g} Hz exceeds 0.2 x response bandwidth "
                f"{response_bw:.3g} Hz; integrate the master equation instead"
            )
    out = tr(rabi)
    if noise_density > 0:
        if dipole_moment is None or bandwidth is None:
            raise ValidationError("noise needs dipole_moment and bandwidth")
        gain = tr.slope(median) * dipole_moment / hbar
        out = detector_noise(out, noise_density, bandwidth, seed=seed, gain=gain)
    return out


# --- demodulators ------------------------------------------------------------


def symbol_average(series, samples_per_symbol: int) -> np.ndarray:
    x = np.asarray(series)
    sps = int(samples_per_symbol)
    if sps < 1:
        raise ValidationError("need at least one sample per symbol")
    n = x.size // sps
    return x[: n * sps].reshape(n, sps).mean(axis=1)


def calibrate_levels(power, symbols, samples_per_symbol: int) -> np.ndarray:
    """Mean received level per symbol index from a known training preamble."""
    avg = symbol_average(power, samples_per_symbol)
    symbols = np.asarray(symbols)[: avg.size]
    m = int(symbols.max()) + 1
    levels = np.full(m, np.nan)
    for k in range(m):
        sel = symbols == k
        if sel.any():
            levels[k] = avg[sel].mean()
    if np.any(np.isnan(levels)):
        raise CalibrationError("every symbol must appear in the preamble")
    return levels


def demod_am(power, levels, samples_per_symbol: int = 1) -> np.ndarray:
    """Maximum-likelihood amplitude decisions under Gaussian noise."""
    if levels is None:
        raise CalibrationError("AM demodulation needs calibrated levels")
    lv = np.asarray(levels, dtype=float)
    if lv.size < 2 or np.any(~np.isfinite(lv)):
        raise CalibrationError("need at least two finite calibrated levels")
    if np.min(np.abs(lv[:, None] - lv[None, :])[~np.eye(lv.size, dtype=bool)]) == 0:
        raise CalibrationError("calibrated levels are not distinct")
    avg = symbol_average(power, samples_per_symbol)
    return np.argmin(np.abs(avg[:, None] - lv[None, :]), axis=1)


class FMDecision(NamedTuple):
    symbols: np.ndarray
    ambiguous: tuple[tuple[int, int], ...]


def fm_levels(transducer: Transducer, mu: float, amplitude: float,
              detunings: Sequence[float], hbar: float = HBAR) -> np.ndarray:
    """Expected transmission for each FM detuning at a fixed field amplitude."""
    omega = rabi_from_field(mu, amplitude, np.asarray(detunings, dtype=float), hbar=hbar)
    return transducer(np.atleast_1d(omega))


def demod_fm(power, detuning_levels, samples_per_symbol: int = 1,
             noise_floor: float = 0.0) -> FMDecision:
    """ML decisions over per-detuning expected transmissions.

    Symbol pairs whose expected levels differ by no more than ``noise_floor``
    cannot be told apart; they are reported in ``ambiguous`` and a warning
    is issued. A ``+delta``/``-delta`` pair always lands here because the
    Rabi frequency depends on ``delta**2``.
    """
    lv = np.asarray(list(detuning_levels.values()) if isinstance(detuning_levels, Mapping)
                    else detuning_levels, dtype=float)
    ambiguous = tuple(
        (i, j) for i in range(lv.size) for j in range(i + 1, lv.size)
        if abs(lv[i] - lv[j]) <= max(noise_floor, 1e-12 * max(abs(lv[i]), 1.0))
    )
    if ambiguous:
        warnings.warn(f"indistinguishable FM symbol pairs: {ambiguous}", RuntimeWarning, stacklevel=2)
    avg = symbol_average(power, samples_per_symbol)
    return FMDecision(np.argmin(np.abs(avg[:, None] - lv[None, :]), axis=1), ambiguous)


class PMDecision(NamedTuple):
    symbols: np.ndarray
    soft: np.ndarray


def _check_if(offset: float, sample_rate: float) -> None:
    if offset <= 0:
        raise ValidationError("phase demodulation needs a non-zero reference offset")
    if offset >= sample_rate / 2:
        raise AliasingError(f"IF {offset} Hz is not below Nyquist ({sample_rate / 2} Hz)")
    if sample_rate / offset < 8:
        raise ValidationError("need at least 8 samples per IF cycle")


def if_component(power, offset: float, phase: float, sample_rate: float,
                 samples_per_symbol: int) -> np.ndarray:
    """Complex amplitude of the beat at ``offset`` in each symbol.

    For ``p = c + Re{E e^{-j(2 pi f t + phase)}}`` this returns ``E`` per
    symbol (up to the transduction gain).
    """
    x = np.asarray(power, dtype=float)
    sps = int(samples_per_symbol)
    n = x.size // sps
    x = x[: n * sps].reshape(n, sps)
    t = (np.arange(n * sps) / sample_rate).reshape(n, sps)
    lo = np.exp(1j * (TWO_PI * offset * t + phase))
    return 2.0 * np.mean((x - x.mean(axis=1, keepdims=True)) * lo, axis=1)


def nearest_symbol(soft, constellation) -> np.ndarray:
    c = np.asarray(constellation)
    return np.argmin(np.abs(np.asarray(soft)[:, None] - c[None, :]), axis=1)


def demod_pm(power, ref: ReferenceField, symbol_rate: float, sample_rate: float,
             constellation=QPSK, gain: complex = 1.0) -> PMDecision:
    """Reference-aided phase demodulation.

    ``gain`` is the complex transduction gain (signed slope times any known
    rotation); soft outputs are divided by it before the nearest-phase
    decision.
    """
    _check_if(ref.offset, sample_rate)
    sps = sample_rate / symbol_rate
    if abs(sps - round(sps)) > 1e-9:
        raise ValidationError("sample rate must be an integer multiple of the symbol rate")
    soft = if_component(power, ref.offset, ref.phase, sample_rate, int(round(sps))) / gain
    c = np.asarray(constellation)
    phases = np.angle(soft)[:, None] - np.angle(c)[None, :]
    idx = np.argmin(np.abs(np.angle(np.exp(1j * phases))), axis=1)
    return PMDecision(idx, soft)


def qpsk_ser(snr) -> np.ndarray:
    """Symbol error rate of Gray QPSK at Es/N0 ``snr`` (linear)."""
    from scipy.special import erfc

    q = 0.5 * erfc(np.sqrt(np.asarray(snr, dtype=float)) / np.sqrt(2.0))
    return 2 * q - q**2


# --- FDM ---------------------------------------------------------------------


@dataclass
class FdmResult:
    soft: np.ndarray  # (symbols, subcarriers)
    symbols: np.ndarray
    crosstalk: np.ndarray  # (subcarriers, subcarriers), row-normalised energy

    def accuracy(self, sent: np.ndarray) -> float:
        return float(np.mean(self.symbols == np.asarray(sent)))


def fdm_modulate(symbols: np.ndarray, subcarriers: Sequence[float], symbol_duration: float,
                 sample_rate: float, amplitude: float = 1.0, carrier: float = 0.0) -> FieldEnvelope:
    """Baseband multicarrier field, one column of ``symbols`` per subcarrier."""
    s = np.atleast_2d(np.asarray(symbols, dtype=complex))
    sps = _fdm_sps(subcarriers, symbol_duration, sample_rate)
    t = np.arange(s.shape[0] * sps) / sample_rate
    tones = np.exp(1j * TWO_PI * np.outer(t, subcarriers))
    field = amplitude * np.sum(np.repeat(s, sps, axis=0) * tones, axis=1)
    return FieldEnvelope(carrier, field, sample_rate)


def _fdm_sps(subcarriers, symbol_duration: float, sample_rate: float) -> int:
    f = np.asarray(subcarriers, dtype=float)
    for name, val in (("subcarrier frequency", f * symbol_duration),
                      ("samples per symbol", np.array([sample_rate * symbol_duration]))):
        if np.any(np.abs(val - np.round(val)) > 1e-6):
            raise OrthogonalityError(f"{name} x symbol duration must be an integer")
    if f.size > 1:
        spacing = np.diff(np.sort(f)) * symbol_duration
        if np.any(np.abs(spacing - np.round(spacing)) > 1e-6) or np.any(np.round(spacing) < 1):
            raise OrthogonalityError("subcarrier spacing x symbol duration must be a positive integer")
    return int(round(sample_rate * symbol_duration))


def _project(rabi: np.ndarray, beats: np.ndarray, sps: int, sample_rate: float) -> np.ndarray:
    n = rabi.size // sps
    x = rabi[: n * sps].reshape(n, sps)
    x = x - x.mean(axis=1, keepdims=True)
    t = np.arange(n * sps).reshape(n, sps) / sample_rate
    return 2.0 * np.einsum("ns,nsk->nk", x, np.exp(-1j * TWO_PI * t[..., None] * beats))


def fdm_demod(signal: FieldEnvelope, ref: ReferenceField | None, subcarriers: Sequence[float],
              symbol_duration: float, mu: float, *, constellation=BPSK,
              noise_sigma: float = 0.0, seed=None, hbar: float = HBAR) -> FdmResult:
    """Demodulate multicarrier symbols from the Rabi-frequency series.

    With ``ref`` the magnitude response is linearised by the strong
    reference and each subcarrier appears at its own beat frequency
    ``f_k - ref.offset``. Without it the receiver sees ``|E(t)|`` only and
    the subcarriers leak into one another; ``crosstalk[i, j]`` is the share
    of subcarrier ``i``'s differential energy that lands in bin ``j``.
    ``noise_sigma`` is additive Gaussian noise on the Rabi series (rad/s).
    """
    f = np.asarray(subcarriers, dtype=float)
    sps = _fdm_sps(f, symbol_duration, signal.sample_rate)
    if ref is not None:
        beats = f - ref.offset
        if np.any(beats <= 0) or np.unique(np.round(beats, 6)).size != beats.size:
            raise OrthogonalityError("beat frequencies f_k - offset must be positive and distinct")
        if beats.max() >= signal.sample_rate / 2:
            raise AliasingError("beat frequencies exceed Nyquist")
        rotation = np.exp(1j * ref.phase)
        ref_field = ref
    else:
        beats = f
        rotation = 1.0
        ref_field = ReferenceField(0.0, 0.0, 0.0)

    def rabi_of(samples):
        env = FieldEnvelope(signal.carrier, samples, signal.sample_rate)
        return heterodyne_superpose(env, ref_field, mu, hbar=hbar)

    rabi = rabi_of(signal.samples)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        rabi = rabi + noise_sigma * rng.standard_normal(rabi.shape)
    soft = _project(rabi, beats, sps, signal.sample_rate) * rotation * hbar / mu
    symbols = np.argmin(np.abs(soft[..., None] - np.asarray(constellation)[None, None, :]), axis=-1)
    crosstalk = _crosstalk(signal, f, sps, beats, rabi_of)
    return FdmResult(soft, symbols, crosstalk)


def _crosstalk(signal: FieldEnvelope, f: np.ndarray, sps: int, beats: np.ndarray, rabi_of) -> np.ndarray:
    k = f.size
    if k == 1:
        return np.eye(1)
    t = signal.times
    full = _project(rabi_of(signal.samples), beats, sps, signal.sample_rate)
    # recover each subcarrier's own contribution by projecting the field itself
    n = signal.samples.size // sps
    x = signal.samples[: n * sps].reshape(n, sps)
    tt = t[: n * sps].reshape(n, sps)
    out = np.zeros((k, k))
    for i in range(k):
        tone = np.exp(1j * TWO_PI * f[i] * tt)
        coeff = np.mean(x * np.conj(tone), axis=1, keepdims=True)
        without = (x - coeff * tone).reshape(-1)
        partial = _project(rabi_of(np.concatenate([without, signal.samples[n * sps:]])),
                           beats, sps, signal.sample_rate)
        energy = np.sum(np.abs(full - partial) ** 2, axis=0)
        total = energy.sum()
        out[i] = energy / total if total > 0 else np.eye(k)[i]
    return out


def ber_from_symbols(sent, received, bits_per_symbol: int = 1) -> float:
    """Bit error rate assuming Gray-mapped indices (BPSK/QPSK)."""
    sent = np.asarray(sent)
    received = np.asarray(received)
    if bits_per_symbol == 1:
        return float(np.mean(sent != received))
    gray = np.array([0, 1, 3, 2])  # QPSK quadrant index -> Gray label
    diff = gray[sent] ^ gray[received]
    bits = sum((diff >> b) & 1 for b in range(bits_per_symbol))
    return float(np.sum(bits) / (sent.size * bits_per_symbol))
