"""Experiment runners: EIT spectra, sensitivity sweep, links, MIMO, MSAC and vibration sensing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .config import BandConfig, ExperimentConfig
from .eit import ProbeSweep, peak_splitting, transmission_spectrum
from .exceptions import ConfigError, DegenerateError, NoSplittingError, TopologyError
from .mimo import DetectOptions, MimoChannel, gs_detect, magnitude_observe, nmse_db, simo_measured_snr
from .quantum import MAX_LEVELS, TWO_PI, rydberg_ladder, rydberg_multiband, steady_state
from .registry import FREE_SPACE_IMPEDANCE, HBAR, SPEED_OF_LIGHT, StateRegistry, Transition
from .sensitivity import (
    AtomSensorParams,
    ClassicAntennaParams,
    SensitivityTable,
    family_grid,
    sensitivity_curve,
    sql_sensitivity,
    thermal_sensitivity,
)
from .transduction import (
    BPSK,
    DEFAULT_REFERENCE_RATIO,
    QPSK,
    FieldEnvelope,
    ReferenceField,
    Transducer,
    ber_from_symbols,
    demod_pm,
    heterodyne_superpose,
    linearized_heterodyne,
    probe_operating_point,
    qpsk_ser,
    quasi_static_receive,
)

CONSTELLATIONS = {"bpsk": BPSK, "qpsk": QPSK}
BITS = {"bpsk": 1, "qpsk": 2}


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *stream]))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# --- link budget -------------------------------------------------------------


def dbm_to_w(p_dbm):
    return 10 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def free_space_field(ptx_w, distance: float, z0: float = FREE_SPACE_IMPEDANCE):
    """RMS field (V/m) of an isotropic transmitter at ``distance``."""
    return np.sqrt(z0 * np.asarray(ptx_w) / (4 * math.pi * distance**2))


def radar_echo_field(ptx_w, distance: float, rcs: float, z0: float = FREE_SPACE_IMPEDANCE):
    """RMS echo field (V/m) back at a co-located receiver (monostatic radar equation)."""
    return np.sqrt(z0 * np.asarray(ptx_w) * rcs / ((4 * math.pi) ** 2 * distance**4))


def classic_floor(frequency: float) -> float:
    """Thermal field-noise density of a half-wave dipole, V/m/sqrt(Hz)."""
    return thermal_sensitivity(ClassicAntennaParams(frequency))


def rare_floor(cfg: ExperimentConfig, t: Transition) -> float:
    """Equivalent field-noise density of the atomic receiver on transition ``t``."""
    if cfg.sensor.rare_floor == "sql":
        return sql_sensitivity(AtomSensorParams(cfg.sensor.n_atoms, cfg.sensor.coherence_time_s, t))
    return classic_floor(t.frequency) * 10 ** (-cfg.sensor.practical_offset_db / 20.0)


def ergodic_se(snr_mean, gains) -> np.ndarray:
    """Mean of ``log2(1 + snr * |h|^2)`` over fading power gains, per SNR."""
    snr = np.atleast_1d(np.asarray(snr_mean, dtype=float))
    return np.array([np.mean(np.log2(1.0 + s * gains)) for s in snr])


# --- EIT and sensitivity -----------------------------------------------------


@dataclass
class EitResult:
    trace: object
    splitting_hz: float | None


def run_eit_spectrum(cfg: ExperimentConfig) -> EitResult:
    e = cfg.eit
    sys = rydberg_ladder(TWO_PI * e.rabi_rf_hz)
    grid = np.linspace(-TWO_PI * e.span_hz / 2, TWO_PI * e.span_hz / 2, e.points)
    trace = transmission_spectrum(ProbeSweep(grid, sys, cfg.sensor.od))
    try:
        split = peak_splitting(trace)
    except NoSplittingError:
        split = None
    return EitResult(trace, split)


@dataclass
class SensitivityResult:
    table: SensitivityTable
    registry: StateRegistry


def run_sensitivity_figure(cfg: ExperimentConfig) -> SensitivityResult:
    reg = cfg.registry()
    s = cfg.sensitivity
    grid = (np.asarray(s.frequencies_hz, dtype=float) if s.frequencies_hz is not None
            else family_grid(reg, s.fmin_hz, s.fmax_hz))
    table = sensitivity_curve(grid, reg, n_atoms=cfg.sensor.n_atoms,
                              coherence_time=cfg.sensor.coherence_time_s,
                              length=s.dipole_length_m, efficiency=s.efficiency)
    return SensitivityResult(table, reg)


# --- heterodyne PM links over one or more bands -----------------------------


@dataclass
class BandLinkResult:
    band_hz: np.ndarray
    ser: np.ndarray
    ber: np.ndarray
    snr_db: np.ndarray  # per-band Es/N0 implied by the common detector noise


def _sample_rate(bands: Sequence[BandConfig]) -> tuple[float, int]:
    rates = {b.symbol_rate_hz for b in bands}
    if len(rates) != 1:
        raise ConfigError("all bands must share one symbol rate")
    rs = rates.pop()
    for b in bands:
        if abs(b.if_hz / rs - round(b.if_hz / rs)) > 1e-9:
            raise ConfigError(f"band {b.name!r}: if_hz must be a multiple of the symbol rate")
    sps = int(math.ceil(8 * max(b.if_hz for b in bands) / rs))
    return rs * sps, sps


def _check_topology(bands: Sequence[BandConfig], reg: StateRegistry) -> list[Transition]:
    ts = [reg.lookup(b.lower, b.upper) for b in bands]
    lowers = {t.lower for t in ts}
    if len(lowers) != 1:
        raise TopologyError("all band transitions must share the same lower Rydberg state")
    uppers = [t.upper for t in ts]
    if len(set(uppers)) != len(uppers):
        raise TopologyError("band transitions must end on distinct upper states")
    if 3 + len(ts) > MAX_LEVELS:
        raise TopologyError(f"{len(ts)} bands need {3 + len(ts)} levels; at most {MAX_LEVELS} supported")
    ifs = [b.if_hz for b in bands]
    if len(set(ifs)) != len(ifs):
        raise TopologyError("bands must use distinct intermediate frequencies")
    return ts


def simulate_bands(cfg: ExperimentConfig, bands: Sequence[BandConfig], n_symbols: int,
                   snr_db: float, seed: int, reg: StateRegistry | None = None) -> BandLinkResult:
    """Simultaneous heterodyne PM reception of ``len(bands)`` symbol streams.

    One probe beam reads a (3 + B)-level system with an RF branch per band.
    Every band gets a reference field ``DEFAULT_REFERENCE_RATIO`` times its
    signal at its own IF. The photodetector noise is set so that band 0
    sees Es/N0 = ``snr_db``; the other bands inherit the same detector noise.
    """
    reg = reg or cfg.registry()
    ts = _check_topology(bands, reg)
    fs, sps = _sample_rate(bands)
    rs = bands[0].symbol_rate_hz
    omega_ref = TWO_PI * cfg.sensor.reference_rabi_hz
    sys = rydberg_multiband([omega_ref] * len(bands))
    delta_p = probe_operating_point(sys, omega_ref, rf=(2, 3), od=cfg.sensor.od)
    rf = [(2, 3 + k) for k in range(len(bands))]
    tr = Transducer(sys, delta_p, rf=rf, od=cfg.sensor.od)

    rabi, refs, sent = [], [], []
    for k, (b, t) in enumerate(zip(bands, ts)):
        rng = _rng(seed, 1, k)
        amp_ref = HBAR * omega_ref / t.dipole_moment
        amp_sig = amp_ref / DEFAULT_REFERENCE_RATIO
        c = CONSTELLATIONS[b.modulation]
        sym = rng.integers(0, c.size, n_symbols)
        env = FieldEnvelope(b.carrier_hz, np.repeat(amp_sig * c[sym], sps), fs)
        ref = ReferenceField(amp_ref, b.if_hz, float(TWO_PI * rng.random()))
        rabi.append(heterodyne_superpose(env, ref, t.dipole_moment))
        refs.append((ref, amp_sig))
        sent.append(sym)
    rabi = np.column_stack(rabi)

    mu0 = ts[0].dipole_moment
    sigma_e = refs[0][1] * math.sqrt(sps / (4.0 * 10 ** (snr_db / 10.0)))
    density = sigma_e / math.sqrt(fs / 2.0)
    power = quasi_static_receive(sys, rabi, delta_p, od=cfg.sensor.od, noise_density=density,
                                 bandwidth=fs / 2.0, dipole_moment=mu0, seed=_rng(seed, 2),
                                 rf=rf)

    median = np.median(rabi, axis=0)
    slopes = np.array([tr.slope(median, k) for k in range(len(bands))])
    out_sigma = abs(slopes[0]) * mu0 / HBAR * sigma_e
    ser, ber, snr = [], [], []
    for k, (b, t) in enumerate(zip(bands, ts)):
        ref, amp_sig = refs[k]
        gain = slopes[k] * t.dipole_moment / HBAR
        dec = demod_pm(power, ref, rs, fs, CONSTELLATIONS[b.modulation], gain=gain)
        ser.append(float(np.mean(dec.symbols != sent[k])))
        ber.append(ber_from_symbols(sent[k], dec.symbols, BITS[b.modulation]))
        field_sigma = out_sigma / abs(gain)
        snr.append(10 * math.log10(amp_sig**2 * sps / (4 * field_sigma**2)))
    return BandLinkResult(np.array([b.carrier_hz for b in bands]), np.array(ser), np.array(ber),
                          np.array(snr))


def theory_ser(modulation: str, snr_db) -> np.ndarray:
    snr = 10 ** (np.asarray(snr_db, dtype=float) / 10.0)
    if modulation == "qpsk":
        return qpsk_ser(snr)
    return 0.5 * erfc(np.sqrt(snr))


@dataclass
class LinkResult:
    snr_db: np.ndarray
    ser: np.ndarray
    ser_theory: np.ndarray
    ber: np.ndarray

    COLUMNS = ("snr_db", "ser", "ser_theory", "ber")

    def to_csv(self, path) -> None:
        write_csv(path, self.COLUMNS, zip(self.snr_db, self.ser, self.ser_theory, self.ber))


def run_link(cfg: ExperimentConfig, seed: int | None = None) -> LinkResult:
    """Single-band heterodyne PM link, SER/BER against Es/N0."""
    seed = cfg.seed if seed is None else seed
    band = cfg.bands[0]
    snr = np.asarray(cfg.link.snr_db, dtype=float)
    ser, ber = [], []
    for i, s in enumerate(snr):
        res = simulate_bands(cfg, [band], cfg.link.symbols, float(s), _seed_for(seed, i))
        ser.append(res.ser[0])
        ber.append(res.ber[0])
    return LinkResult(snr, np.array(ser), theory_ser(band.modulation, snr), np.array(ber))


def _seed_for(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), 100, index]).generate_state(1)[0])


@dataclass
class MultibandResult:
    band_hz: np.ndarray
    ber: np.ndarray
    snr_db: np.ndarray

    COLUMNS = ("band_hz", "ber")

    def to_csv(self, path) -> None:
        write_csv(path, self.COLUMNS, zip(self.band_hz, self.ber))


def run_multiband(cfg: ExperimentConfig, seed: int | None = None,
                  n_symbols: int | None = None) -> MultibandResult:
    """Per-band BER for simultaneous reception of every configured band."""
    seed = cfg.seed if seed is None else seed
    n = cfg.link.symbols if n_symbols is None else n_symbols
    res = simulate_bands(cfg, cfg.bands, n, cfg.bands[0].snr_db, _seed_for(seed, 0))
    return MultibandResult(res.band_hz, res.ber, res.snr_db)


# --- vibration sensing -------------------------------------------------------


@dataclass
class VibrationResult:
    nmse_db: float
    times: np.ndarray = field(repr=False)
    displacement: np.ndarray = field(repr=False)
    estimate: np.ndarray = field(repr=False)

    COLUMNS = ("t_s", "x_m", "x_hat_m")

    def to_csv(self, path, every: int = 1) -> None:
        sl = slice(None, None, max(int(every), 1))
        write_csv(path, self.COLUMNS, zip(self.times[sl], self.displacement[sl], self.estimate[sl]))


def _sensing_band(cfg: ExperimentConfig) -> BandConfig:
    for b in cfg.bands:
        if b.name == "sensing":
            return b
    return cfg.bands[-1]


def _lowpass(z: np.ndarray, cutoff: float, fs: float) -> np.ndarray:
    spec = np.fft.fft(z)
    spec[np.abs(np.fft.fftfreq(z.size, 1.0 / fs)) > cutoff] = 0.0
    return np.fft.ifft(spec)


class VibrationChain:
    """Heterodyne phase readout of a vibrating reflector on one band.

    ``chain="linear"`` uses the first-order heterodyne model with the
    receiver noise added as an equivalent field; ``chain="quantum"`` drives
    the steady-state atomic response sample by sample.
    """

    def __init__(self, cfg: ExperimentConfig, band: BandConfig | None = None,
                 reg: StateRegistry | None = None):
        self.cfg = cfg
        self.band = band or _sensing_band(cfg)
        reg = reg or cfg.registry()
        self.transition = reg.lookup(self.band.lower, self.band.upper)
        self.wavelength = SPEED_OF_LIGHT / self.band.carrier_hz
        self.fs = 2.0 * self.band.bandwidth_hz
        tg = cfg.target
        self.n = int(round(tg.duration_s * self.fs))
        self.times = np.arange(self.n) / self.fs
        self.displacement = tg.amplitude_m * np.sin(TWO_PI * tg.frequency_hz * self.times)
        mu = self.transition.dipole_moment
        omega_ref = TWO_PI * cfg.sensor.reference_rabi_hz
        self.amp_ref = HBAR * omega_ref / mu
        self._quantum = None
        if cfg.sensor.chain == "quantum":
            sys = rydberg_ladder(omega_ref)
            self._quantum = (sys, probe_operating_point(sys, omega_ref, od=cfg.sensor.od))

    def estimate(self, echo_field: float, noise_density: float, noise_seed, phase_seed) -> np.ndarray:
        tg = self.cfg.target
        mu = self.transition.dipole_moment
        phi0 = TWO_PI * np.random.default_rng(phase_seed).random()
        phi = 4 * math.pi * self.displacement / self.wavelength + phi0
        env = FieldEnvelope(self.band.carrier_hz, echo_field * np.exp(1j * phi), self.fs)
        ref = ReferenceField(self.amp_ref, self.band.if_hz, 0.0)
        if self._quantum is None:
            rabi = linearized_heterodyne(env, ref, mu)
            noise = noise_density * math.sqrt(self.band.bandwidth_hz) * mu / HBAR
            if noise > 0:
                rabi = rabi + noise * np.random.default_rng(noise_seed).standard_normal(rabi.shape)
            p = rabi
        else:
            sys, dp = self._quantum
            p = quasi_static_receive(sys, heterodyne_superpose(env, ref, mu), dp, od=self.cfg.sensor.od,
                                     noise_density=noise_density, bandwidth=self.band.bandwidth_hz,
                                     dipole_moment=mu, seed=noise_seed)
        z = 2.0 * (p - p.mean()) * np.exp(1j * TWO_PI * self.band.if_hz * self.times)
        z = _lowpass(z, tg.lowpass_hz, self.fs)
        ph = np.unwrap(np.angle(z))
        return self.wavelength * (ph - ph.mean()) / (4 * math.pi)

    def nmse(self, echo_field: float, noise_density: float, seed: int, trials: int) -> tuple[float, np.ndarray]:
        """Pooled NMSE (dB) over ``trials`` and the first trial's estimate.

        Noise and phase draws depend only on ``seed`` and the trial index,
        so two receivers evaluated with the same seed see scaled copies of
        the same noise.
        """
        err, ref, first = 0.0, 0.0, None
        for k in range(trials):
            est = self.estimate(echo_field, noise_density, _rng(seed, 3, k), _rng(seed, 4, k))
            if first is None:
                first = est
            err += float(np.sum((est - self.displacement) ** 2))
            ref += float(np.sum(self.displacement**2))
        return 10 * math.log10(err / ref), first


def run_vibration_sensing(cfg: ExperimentConfig, *, noise_density: float | None = None,
                          echo_field: float | None = None, seed: int | None = None,
                          trials: int | None = None) -> VibrationResult:
    """NMSE (dB) of the recovered displacement of a vibrating target."""
    tg = cfg.target
    if tg.amplitude_m == 0:
        raise DegenerateError("vibration amplitude is zero; NMSE is undefined")
    chain = VibrationChain(cfg)
    nd = tg.noise_density_vpm_rthz if noise_density is None else noise_density
    ef = tg.echo_field_vpm if echo_field is None else echo_field
    nm, est = chain.nmse(ef, nd, cfg.seed if seed is None else seed, tg.trials if trials is None else trials)
    return VibrationResult(nm, chain.times, chain.displacement, est)


# --- MSAC --------------------------------------------------------------------


@dataclass
class LinkMetrics:
    ptx_dbm: np.ndarray
    se_rare: np.ndarray
    se_cr1: np.ndarray
    nmse_rare_db: np.ndarray
    nmse_cr2_db: np.ndarray
    snr_rare_db: np.ndarray
    snr_cr1_db: np.ndarray
    transduction_slopes: np.ndarray

    COLUMNS = ("ptx_dbm", "se_rare", "se_cr1", "nmse_rare_db", "nmse_cr2_db")

    def rows(self):
        return zip(self.ptx_dbm, self.se_rare, self.se_cr1, self.nmse_rare_db, self.nmse_cr2_db)

    def to_csv(self, path) -> None:
        write_csv(path, self.COLUMNS, self.rows())

    @property
    def se_gap(self) -> float:
        """RARE minus CR1 spectral efficiency at the highest power, bps/Hz."""
        return float(self.se_rare[-1] - self.se_cr1[-1])

    @property
    def nmse_gap(self) -> float:
        """CR2 minus RARE NMSE at the highest power, dB."""
        return float(self.nmse_cr2_db[-1] - self.nmse_rare_db[-1])


def _msac_bands(cfg: ExperimentConfig) -> tuple[BandConfig, BandConfig]:
    names = {b.name: b for b in cfg.bands}
    if "comm" in names and "sensing" in names:
        return names["comm"], names["sensing"]
    if len(cfg.bands) != 2:
        raise ConfigError("msac needs a 'comm' and a 'sensing' band")
    return cfg.bands[0], cfg.bands[1]


def run_msac(cfg: ExperimentConfig, seed: int | None = None) -> LinkMetrics:
    """Dual-band communication and sensing against classic receivers.

    The comm link is Rayleigh block fading with ergodic SE; the sensing link
    is vibration phase estimation. Power points share fading and noise draws
    so the curves are smooth in power.
    """
    seed = cfg.seed if seed is None else seed
    reg = cfg.check_registry()
    comm, sensing = _msac_bands(cfg)
    _check_topology([comm, sensing], reg)
    t_comm = reg.lookup(comm.lower, comm.upper)
    t_sens = reg.lookup(sensing.lower, sensing.upper)

    # five-level operating point with both reference fields on; the solve
    # raises if the point has no unique steady state
    omega_ref = TWO_PI * cfg.sensor.reference_rabi_hz
    sys = rydberg_multiband([omega_ref, omega_ref])
    delta_p = probe_operating_point(sys, omega_ref, rf=(2, 3), od=cfg.sensor.od)
    steady_state(sys.with_coupling((0, 1), detuning=delta_p))
    tr = Transducer(sys, delta_p, rf=[(2, 3), (2, 4)], od=cfg.sensor.od)
    slopes = np.array([tr.slope([omega_ref, omega_ref], k) for k in range(2)])
    if np.any(np.abs(slopes) < 1e-18):
        raise DegenerateError("a band has no transduction slope at the operating point")

    p_w = dbm_to_w(cfg.ptx_dbm)
    gains = _rng(seed, 10).exponential(1.0, cfg.channel.trials)
    e_comm = free_space_field(p_w, cfg.channel.comm_distance_m)
    n_cr1 = classic_floor(t_comm.frequency) ** 2 * comm.bandwidth_hz
    n_rare = rare_floor(cfg, t_comm) ** 2 * comm.bandwidth_hz
    snr_cr1 = e_comm**2 / n_cr1
    snr_rare = e_comm**2 / n_rare

    chain = VibrationChain(cfg, sensing, reg)
    echo = radar_echo_field(p_w, cfg.channel.sensing_distance_m, cfg.channel.target_rcs_m2)
    floor_cr2 = classic_floor(t_sens.frequency)
    floor_rare = rare_floor(cfg, t_sens)
    nm_rare, nm_cr2 = [], []
    for e in echo:
        nm_rare.append(chain.nmse(float(e), floor_rare, seed, cfg.target.trials)[0])
        nm_cr2.append(chain.nmse(float(e), floor_cr2, seed, cfg.target.trials)[0])

    return LinkMetrics(
        np.asarray(cfg.ptx_dbm, dtype=float),
        ergodic_se(snr_rare, gains),
        ergodic_se(snr_cr1, gains),
        np.array(nm_rare),
        np.array(nm_cr2),
        10 * np.log10(snr_rare),
        10 * np.log10(snr_cr1),
        slopes,
    )


# --- MIMO ----------------------------------------------------------------------


@dataclass
class MimoResult:
    nmse_db: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    branches: np.ndarray
    simo_snr_db: np.ndarray
    simo_theory_db: np.ndarray


def random_mimo_instance(k: int, m: int, scale: float, rng: np.random.Generator,
                         constellation=QPSK):
    """Rayleigh ``K x M`` channel, random symbols and a reference of the given relative strength."""
    h = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / math.sqrt(2)
    x = np.asarray(constellation)[rng.integers(0, len(constellation), m)]
    row = np.mean(np.linalg.norm(h, axis=1))
    r = scale * row * np.exp(TWO_PI * 1j * rng.random(k))
    return MimoChannel(h, r), x


def run_mimo(cfg: ExperimentConfig, seed: int | None = None) -> MimoResult:
    seed = cfg.seed if seed is None else seed
    mc = cfg.mimo
    nm, conv, its = [], [], []
    for trial in range(mc.trials):
        ch, x = random_mimo_instance(mc.receivers, mc.users, mc.reference_scale, _rng(seed, 20, trial))
        res = gs_detect(magnitude_observe(ch, x), ch, DetectOptions())
        nm.append(nmse_db(res.x, x))
        conv.append(int(res.converged))
        its.append(res.n_iter)
    branches = np.asarray(mc.branches, dtype=int)
    snr1 = 10 ** (mc.simo_snr_db / 10)
    measured = [10 * math.log10(simo_measured_snr(int(k), snr1, mc.simo_symbols, _rng(seed, 21, int(k))))
                for k in branches]
    theory = mc.simo_snr_db + 10 * np.log10(branches)
    return MimoResult(np.array(nm), np.array(conv), np.array(its), branches, np.array(measured), theory)
