"""Rydberg state labels, transition tables and scaling-law helpers."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from scipy import constants as _const

from .exceptions import DuplicateEntryError, NotFoundError, ValidationError

HBAR = _const.hbar  # J s
BOHR_RADIUS = 5.29e-11  # m, rounded value used for the radius scaling law
SPEED_OF_LIGHT = _const.c  # m/s
FREE_SPACE_IMPEDANCE = _const.physical_constants["characteristic impedance of vacuum"][0]  # ohm
THERMAL_NOISE_DBM_HZ = -174.0
THERMAL_NOISE_W_HZ = 10 ** ((THERMAL_NOISE_DBM_HZ - 30.0) / 10.0)

DEFAULT_CONSTANTS = MappingProxyType(
    {
        "hbar": HBAR,
        "a0": BOHR_RADIUS,
        "c": SPEED_OF_LIGHT,
        "z0": FREE_SPACE_IMPEDANCE,
        "p_n": THERMAL_NOISE_W_HZ,
    }
)

_L_LETTERS = "SPDFGHIK"
_STATE_RE = re.compile(r"^\s*(\d+)\s*([SPDFGHIK])\s*_?\{?\s*(\d+)\s*/\s*2\s*\}?\s*$", re.IGNORECASE)


@dataclass(frozen=True, order=True)
class RydbergState:
    """An atomic state labelled by ``(n, l, j)``.

    ``j`` is stored as a :class:`fractions.Fraction` so half-integers compare
    exactly. Construct from spectroscopic notation with :meth:`parse`.
    """

    n: int
    l: int
    j: Fraction

    def __post_init__(self):
        j = Fraction(self.j).limit_denominator(2)
        object.__setattr__(self, "j", j)
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"principal quantum number must be a positive integer, got {self.n!r}")
        if not isinstance(self.l, int) or self.l < 0:
            raise ValidationError(f"azimuthal quantum number must be a non-negative integer, got {self.l!r}")
        if self.n <= self.l:
            raise ValidationError(f"n must exceed l (n={self.n}, l={self.l})")
        allowed = {abs(Fraction(self.l) - Fraction(1, 2)), Fraction(self.l) + Fraction(1, 2)}
        if j not in allowed:
            raise ValidationError(
                f"j={j} is not allowed for l={self.l}; expected one of {sorted(str(a) for a in allowed)}"
            )

    @classmethod
    def parse(cls, label: str) -> "RydbergState":
        """Parse labels such as ``"60D5/2"`` or ``"5P_{3/2}"``."""
        m = _STATE_RE.match(label)
        if m is None:
            raise ValidationError(f"cannot parse state label {label!r}")
        n, letter, twice_j = m.groups()
        return cls(int(n), _L_LETTERS.index(letter.upper()), Fraction(int(twice_j), 2))

    @property
    def label(self) -> str:
        return f"{self.n}{_L_LETTERS[self.l]}{self.j.numerator}/{self.j.denominator}"

    def __str__(self) -> str:
        return self.label


def _as_state(s: RydbergState | str) -> RydbergState:
    return s if isinstance(s, RydbergState) else RydbergState.parse(s)


@dataclass(frozen=True)
class Transition:
    lower: RydbergState
    upper: RydbergState
    dipole_moment: float  # C m
    frequency: float  # Hz

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_state(self.lower))
        object.__setattr__(self, "upper", _as_state(self.upper))
        for name in ("dipole_moment", "frequency"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be finite and positive, got {v!r}")
            object.__setattr__(self, name, v)
        if self.lower == self.upper:
            raise ValidationError("a transition needs two distinct states")

    @property
    def key(self) -> tuple[RydbergState, RydbergState]:
        return (self.lower, self.upper)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency


@dataclass(frozen=True)
class StateRegistry:
    """Immutable, ordered table of transitions.

    ``register_transition`` returns a new registry; the original is never
    modified, so a registry can be shared freely between workers.
    """

    transitions: tuple[Transition, ...] = ()
    constants: Mapping[str, float] = field(default_factory=lambda: DEFAULT_CONSTANTS)

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "constants", MappingProxyType(dict(self.constants)))
        seen = set()
        for t in self.transitions:
            if t.key in seen:
                raise DuplicateEntryError(f"duplicate transition {t.lower} -> {t.upper}")
            seen.add(t.key)

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    def __contains__(self, key) -> bool:
        try:
            self.lookup(*key)
        except NotFoundError:
            return False
        return True

    def register(self, t: Transition) -> "StateRegistry":
        return register_transition(self, t)

    def lookup(self, lower, upper) -> Transition:
        return lookup_transition(self, lower, upper)

    def by_frequency(self, frequency: float, rtol: float = 1e-6) -> Transition:
        """Transition whose frequency matches ``frequency`` within ``rtol``."""
        for t in self.transitions:
            if abs(t.frequency - frequency) <= rtol * frequency:
                return t
        raise NotFoundError(f"no transition resonant with {frequency:.6g} Hz")

    def without(self, lower, upper) -> "StateRegistry":
        key = (_as_state(lower), _as_state(upper))
        self.lookup(*key)
        return StateRegistry(tuple(t for t in self.transitions if t.key != key), self.constants)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lower", "upper", "dipole_Cm", "freq_Hz"])
            for t in self.transitions:
                w.writerow([t.lower.label, t.upper.label, repr(t.dipole_moment), repr(t.frequency)])


def register_transition(reg: StateRegistry, t: Transition) -> StateRegistry:
    if not isinstance(t, Transition):
        raise ValidationError("expected a Transition")
    if t.key in {x.key for x in reg.transitions}:
        raise DuplicateEntryError(f"duplicate transition {t.lower} -> {t.upper}")
    return StateRegistry(reg.transitions + (t,), reg.constants)


def lookup_transition(reg: StateRegistry, lower, upper) -> Transition:
    key = (_as_state(lower), _as_state(upper))
    for t in reg.transitions:
        if t.key == key:
            return t
    raise NotFoundError(f"transition {key[0]} -> {key[1]} not in registry")


def mean_radius(state: RydbergState, a0: float = BOHR_RADIUS) -> float:
    """Expectation value of the orbital radius, ``(3n^2 - l(l+1)) a0 / 2``."""
    return (3 * state.n**2 - state.l * (state.l + 1)) * a0 / 2.0


def detuning(t: Transition, f_rf: float) -> float:
    """Angular detuning of an RF tone from ``t`` (rad/s)."""
    if f_rf <= 0:
        raise ValidationError("RF frequency must be positive")
    return 2.0 * math.pi * (f_rf - t.frequency)


def quantum_defect_frequency(lower: RydbergState, upper: RydbergState,
                             defects: Mapping[int, float], rydberg_hz: float) -> float:
    """Approximate transition frequency from user-supplied quantum defects.

    Uses ``E_n = -R / (n - delta_l)^2``. The result is only as good as the
    defects given; nothing here is tabulated.
    """
    def energy(s: RydbergState) -> float:
        if s.l not in defects:
            raise NotFoundError(f"no quantum defect supplied for l={s.l}")
        return -rydberg_hz / (s.n - defects[s.l]) ** 2

    return abs(energy(upper) - energy(lower))


def load_registry(path, constants: Mapping[str, float] | None = None) -> StateRegistry:
    """Read a ``lower,upper,dipole_Cm,freq_Hz`` CSV table."""
    path = Path(path)
    reg = StateRegistry(constants=constants or DEFAULT_CONSTANTS)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"lower", "upper", "dipole_Cm", "freq_Hz"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValidationError(f"{path}: header must contain {sorted(expected)}")
        for row in reader:
            reg = register_transition(
                reg,
                Transition(
                    RydbergState.parse(row["lower"]),
                    RydbergState.parse(row["upper"]),
                    float(row["dipole_Cm"]),
                    float(row["freq_Hz"]),
                ),
            )
    return reg


# Only the 60D5/2 dipole moments and the 56D line frequency are stated values.
# The rest of the nD5/2 -> (n+1)P3/2 family is generated from the 60D anchor
# with mu ~ n^2 and f ~ n^-3, so treat those rows as illustrative.
_MU_60D61P = 2.04e-26
_F_60D61P = 3.213e9
FAMILY_N = (19, 20, 22, 25, 28, 32, 36, 40, 45, 50, 60, 70, 80, 88)


def _scaled_mu(n: int) -> float:
    return _MU_60D61P * (n / 60.0) ** 2


def _family_rows() -> Iterable[tuple[str, str, float, float]]:
    for n in FAMILY_N:
        if n == 60:
            continue
        yield f"{n}D5/2", f"{n + 1}P3/2", _scaled_mu(n), _F_60D61P * (60.0 / n) ** 3


def default_registry() -> StateRegistry:
    rows = [
        ("60D5/2", "61P3/2", 2.04e-26, 3.213e9),
        ("60D5/2", "62P3/2", 6.24e-27, 30.618e9),
        ("56D5/2", "57P3/2", _scaled_mu(56), 12.01e9),
    ]
    rows.extend(_family_rows())
    reg = StateRegistry()
    for lower, upper, mu, f in rows:
        reg = register_transition(reg, Transition(RydbergState.parse(lower), RydbergState.parse(upper), mu, f))
    return reg


# Bands of the five-band co-detection demonstration. Only the frequencies are
# given; the states are placeholders sharing the 60D5/2 lower level.
MULTIBAND_FREQUENCIES = (1.72e9, 12.11e9, 27.42e9, 65.11e9, 115.75e9)
# mu ~ f^-p fitted through the two stated 60D5/2 lines (61P at 3.213 GHz, 62P at 30.618 GHz)
_MU_FREQ_EXPONENT = math.log(2.04e-26 / 6.24e-27) / math.log(30.618e9 / 3.213e9)


def multiband_registry(frequencies: Iterable[float] = MULTIBAND_FREQUENCIES,
                       lower: str = "60D5/2") -> StateRegistry:
    reg = StateRegistry()
    low = RydbergState.parse(lower)
    for k, f in enumerate(frequencies):
        upper = RydbergState(low.n + 1 + k, 1, Fraction(3, 2))
        mu = _MU_60D61P * (_F_60D61P / f) ** _MU_FREQ_EXPONENT
        reg = register_transition(reg, Transition(low, upper, mu, f))
    return reg
