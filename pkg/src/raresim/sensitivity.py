"""Sensitivity limits of atomic and classic receivers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ModelDomainError, NotFoundError, ValidationError
from .registry import (
    FREE_SPACE_IMPEDANCE,
    HBAR,
    SPEED_OF_LIGHT,
    THERMAL_NOISE_W_HZ,
    StateRegistry,
    Transition,
)

# Default sensor operating point: 225 us coherence, 5e5 atoms.
DEFAULT_ATOMS = 5e5
DEFAULT_COHERENCE = 225e-6
HALF_WAVE_GAIN = 1.64
SHORT_DIPOLE_GAIN = 1.5
DEFAULT_DIPOLE_LENGTH = 0.01
DEFAULT_EFFICIENCY = 0.5


@dataclass(frozen=True)
class AtomSensorParams:
    n_atoms: float
    coherence_time: float
    transition: Transition

    def __post_init__(self):
        if not self.n_atoms >= 1:
            raise ValidationError("need at least one participating atom")
        if not self.coherence_time > 0:
            raise ValidationError("coherence time must be positive")


@dataclass(frozen=True)
class ClassicAntennaParams:
    frequency: float
    kind: str = "half-wave"
    length: float = DEFAULT_DIPOLE_LENGTH
    efficiency: float = DEFAULT_EFFICIENCY

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValidationError("frequency must be positive")
        if self.kind not in ("half-wave", "fixed"):
            raise ValidationError(f"unknown antenna kind {self.kind!r}")
        if self.kind == "fixed":
            if not self.length > 0:
                raise ValidationError("antenna length must be positive")
            if not 0 < self.efficiency <= 1:
                raise ValidationError("efficiency must lie in (0, 1]")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def effective_area(self) -> float:
        lam2 = self.wavelength**2
        if self.kind == "half-wave":
            return HALF_WAVE_GAIN * lam2 / (4 * math.pi)
        if self.length >= self.wavelength / 2:
            raise ModelDomainError(
                f"a {self.length} m dipole is not short at {self.frequency:.4g} Hz (lambda/2 = "
                f"{self.wavelength / 2:.4g} m)"
            )
        return self.efficiency * SHORT_DIPOLE_GAIN * lam2 / (4 * math.pi)


def sql_sensitivity(p: AtomSensorParams, hbar: float = HBAR) -> float:
    """Shot-noise-limited field sensitivity, V/m/sqrt(Hz)."""
    return hbar / (p.transition.dipole_moment * math.sqrt(p.n_atoms * p.coherence_time))


def thermal_sensitivity(p: ClassicAntennaParams, noise_power: float = THERMAL_NOISE_W_HZ,
                        z0: float = FREE_SPACE_IMPEDANCE) -> float:
    """Thermal-noise-limited field sensitivity of a dipole, V/m/sqrt(Hz)."""
    return math.sqrt(noise_power * z0 / p.effective_area)


def advantage_db(rare: float, classic: float) -> float:
    if not (rare > 0 and classic > 0):
        raise ValidationError("sensitivities must be positive")
    return 20.0 * math.log10(classic / rare)


def db_to_field_ratio(db: float) -> float:
    """Field-amplitude ratio for a power ratio in dB."""
    return 10 ** (db / 20.0)


def is_family(t: Transition) -> bool:
    """``nD5/2 -> (n+1)P3/2`` transitions used for the frequency sweep."""
    lo, up = t.lower, t.upper
    return lo.l == 2 and lo.j == 2.5 and up.l == 1 and up.j == 1.5 and up.n == lo.n + 1


def family_transition(reg: StateRegistry, frequency: float, rtol: float = 1e-6) -> Transition:
    for t in reg:
        if is_family(t) and abs(t.frequency - frequency) <= rtol * frequency:
            return t
    raise NotFoundError(f"no nD5/2 -> (n+1)P3/2 transition at {frequency:.6g} Hz")


def family_grid(reg: StateRegistry, fmin: float = 1e9, fmax: float = 100e9) -> np.ndarray:
    return np.array(sorted(t.frequency for t in reg if is_family(t) and fmin <= t.frequency <= fmax))


@dataclass
class SensitivityTable:
    frequency: np.ndarray
    sql: np.ndarray
    halfwave: np.ndarray
    fixed: np.ndarray

    COLUMNS = ("freq_hz", "sql_vpm_rthz", "halfwave_vpm_rthz", "fixed_vpm_rthz")

    def __len__(self) -> int:
        return self.frequency.size

    def rows(self):
        return zip(self.frequency, self.sql, self.halfwave, self.fixed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([f"{row[0]:.6e}"] + [f"{v:.6e}" for v in row[1:]])


def sensitivity_curve(frequencies: Sequence[float], reg: StateRegistry, *,
                      n_atoms: float = DEFAULT_ATOMS, coherence_time: float = DEFAULT_COHERENCE,
                      length: float = DEFAULT_DIPOLE_LENGTH,
                      efficiency: float = DEFAULT_EFFICIENCY) -> SensitivityTable:
    """SQL, half-wave and fixed-length limits over a frequency grid.

    The fixed-length column is NaN where the dipole is no longer short
    (``length >= lambda/2``).
    """
    f = np.asarray(frequencies, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValidationError("frequency grid must be a non-empty 1-D array")
    if np.any(np.diff(f) <= 0):
        raise ValidationError("frequency grid must be strictly increasing")
    sql, half, fixed = [], [], []
    for freq in f:
        t = family_transition(reg, freq)
        sql.append(sql_sensitivity(AtomSensorParams(n_atoms, coherence_time, t)))
        half.append(thermal_sensitivity(ClassicAntennaParams(freq)))
        try:
            fixed.append(thermal_sensitivity(ClassicAntennaParams(freq, "fixed", length, efficiency)))
        except ModelDomainError:
            fixed.append(math.nan)
    return SensitivityTable(f, np.array(sql), np.array(half), np.array(fixed))
