"""Density-matrix engine for N-level ladder systems.

Everything is in angular-frequency units (rad/s), so the Hamiltonian already
carries the 1/hbar and the master equation reads

    d rho/dt = -i [H, rho] + sum_k G_k (s_k rho s_k^+ - 1/2 {s_k^+ s_k, rho})

with ``s_k = |to><from|`` for every decay channel. Density matrices are
vectorised row-major (``rho.reshape(-1)``), for which
``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import NoUniqueSteadyStateError, StepSizeError, ValidationError

TWO_PI = 2.0 * math.pi

GAMMA_INTERMEDIATE = TWO_PI * 6.07e6
GAMMA_RYDBERG = TWO_PI * 10e3
OMEGA_PROBE = TWO_PI * 1.0e6
OMEGA_COUPLING = TWO_PI * 3.0e6

MAX_LEVELS = 8


@dataclass(frozen=True)
class Coupling:
    """A laser or RF drive between levels ``a < b``.

    ``detuning`` is the detuning of this drive alone; level energies in the
    rotating frame accumulate it along the ladder.
    """

    a: int
    b: int
    rabi: complex
    detuning: float = 0.0

    def __post_init__(self):
        a, b = int(self.a), int(self.b)
        if a == b:
            raise ValidationError(f"coupling needs two distinct levels, got ({a}, {b})")
        if a > b:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "rabi", complex(self.rabi))
        object.__setattr__(self, "detuning", float(self.detuning))

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Decay:
    source: int
    target: int
    rate: float

    def __post_init__(self):
        if self.source == self.target:
            raise ValidationError("decay channel must connect two distinct levels")
        if not self.rate >= 0 or not math.isfinite(self.rate):
            raise ValidationError(f"decay rate must be finite and >= 0, got {self.rate!r}")
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class LevelSystem:
    num_levels: int
    couplings: tuple[Coupling, ...] = ()
    decays: tuple[Decay, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "decays", tuple(self.decays))
        n = self.num_levels
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValidationError("a level system needs at least two levels")
        if n > MAX_LEVELS:
            raise ValidationError(f"at most {MAX_LEVELS} levels are supported")
        pairs = set()
        parents = {}
        for c in self.couplings:
            if not (0 <= c.a < n and 0 <= c.b < n):
                raise ValidationError(f"coupling {c.pair} references a level outside 0..{n - 1}")
            if c.pair in pairs:
                raise ValidationError(f"more than one coupling on pair {c.pair}")
            pairs.add(c.pair)
            if c.b in parents:
                raise ValidationError(
                    f"level {c.b} is driven from both {parents[c.b]} and {c.a}; "
                    "closed loops have no rotating frame"
                )
            parents[c.b] = c.a
        for d in self.decays:
            if not (0 <= d.source < n and 0 <= d.target < n):
                raise ValidationError(f"decay {d.source}->{d.target} references a level outside 0..{n - 1}")
        _check_acyclic(n, self.decays)

    def coupling(self, pair: tuple[int, int]) -> Coupling:
        key = tuple(sorted(pair))
        for c in self.couplings:
            if c.pair == key:
                return c
        raise KeyError(f"no coupling on {key}")

    def with_coupling(self, pair: tuple[int, int], **changes) -> "LevelSystem":
        """Copy with one coupling's ``rabi``/``detuning`` replaced (added if absent)."""
        key = tuple(sorted(pair))
        out, found = [], False
        for c in self.couplings:
            if c.pair == key:
                out.append(replace(c, **changes))
                found = True
            else:
                out.append(c)
        if not found:
            out.append(Coupling(key[0], key[1], changes.get("rabi", 0.0), changes.get("detuning", 0.0)))
        return replace(self, couplings=tuple(out))

    def scale_decays(self, factor: float) -> "LevelSystem":
        return replace(self, decays=tuple(replace(d, rate=d.rate * factor) for d in self.decays))

    @property
    def max_rate(self) -> float:
        vals = [abs(c.rabi) for c in self.couplings] + [d.rate for d in self.decays]
        vals += [abs(x) for x in level_energies(self)]
        return max(vals, default=0.0)

    @property
    def min_decay(self) -> float:
        rates = [d.rate for d in self.decays if d.rate > 0]
        if not rates:
            raise NoUniqueSteadyStateError("system has no decay channels")
        return min(rates)


def _check_acyclic(n: int, decays: Iterable[Decay]) -> None:
    graph = {k: set() for k in range(n)}
    for d in decays:
        if d.rate > 0:
            graph[d.source].add(d.target)
    state = [0] * n  # 0 unvisited, 1 on stack, 2 done

    def visit(u):
        state[u] = 1
        for v in graph[u]:
            if state[v] == 1:
                raise ValidationError("decay graph contains a cycle")
            if state[v] == 0:
                visit(v)
        state[u] = 2

    for u in range(n):
        if state[u] == 0:
            visit(u)


def ladder(rabi: Sequence[complex], detunings: Sequence[float] | None = None,
           decays: Sequence[float] | None = None) -> LevelSystem:
    """Ladder ``0 -> 1 -> ... -> N-1`` where level ``k`` decays to ``k-1``."""
    n = len(rabi) + 1
    detunings = [0.0] * (n - 1) if detunings is None else list(detunings)
    if decays is None:
        decays = [GAMMA_INTERMEDIATE] + [GAMMA_RYDBERG] * (n - 2)
    if len(detunings) != n - 1 or len(decays) != n - 1:
        raise ValidationError("rabi, detunings and decays must have matching lengths")
    return LevelSystem(
        n,
        tuple(Coupling(k, k + 1, rabi[k], detunings[k]) for k in range(n - 1)),
        tuple(Decay(k + 1, k, decays[k]) for k in range(n - 1)),
    )


def rydberg_ladder(omega_rf: float = 0.0, *, omega_p: float = OMEGA_PROBE,
                   omega_c: float = OMEGA_COUPLING, delta_p: float = 0.0,
                   delta_c: float = 0.0, delta_rf: float = 0.0,
                   gamma2: float = GAMMA_INTERMEDIATE,
                   gamma_rydberg: float = GAMMA_RYDBERG) -> LevelSystem:
    """Four-level probe/coupling/RF ladder with the default decay rates."""
    return ladder([omega_p, omega_c, omega_rf], [delta_p, delta_c, delta_rf],
                  [gamma2, gamma_rydberg, gamma_rydberg])


def rydberg_multiband(omega_rf: Sequence[float], *, omega_p: float = OMEGA_PROBE,
                      omega_c: float = OMEGA_COUPLING, delta_p: float = 0.0,
                      delta_rf: Sequence[float] | None = None,
                      gamma2: float = GAMMA_INTERMEDIATE,
                      gamma_rydberg: float = GAMMA_RYDBERG) -> LevelSystem:
    """Probe and coupling ladder with one RF branch per band off level 2.

    With two bands this is the five-level system used for simultaneous
    communication and sensing.
    """
    bands = len(omega_rf)
    if bands < 1:
        raise ValidationError("need at least one RF band")
    delta_rf = [0.0] * bands if delta_rf is None else list(delta_rf)
    n = 3 + bands
    couplings = [Coupling(0, 1, omega_p, delta_p), Coupling(1, 2, omega_c, 0.0)]
    decays = [Decay(1, 0, gamma2), Decay(2, 1, gamma_rydberg)]
    for k in range(bands):
        couplings.append(Coupling(2, 3 + k, omega_rf[k], delta_rf[k]))
        decays.append(Decay(3 + k, 2, gamma_rydberg))
    return LevelSystem(n, tuple(couplings), tuple(decays))


def level_energies(sys: LevelSystem) -> np.ndarray:
    """Cumulative detuning of each level along its coupling path."""
    energy = np.zeros(sys.num_levels)
    resolved = {0}
    pending = sorted(sys.couplings, key=lambda c: c.a)
    # couplings form a forest with single parents; a few passes settle it
    for _ in range(sys.num_levels):
        for c in pending:
            if c.a in resolved and c.b not in resolved:
                energy[c.b] = energy[c.a] + c.detuning
                resolved.add(c.b)
    for c in pending:
        if c.b not in resolved:
            energy[c.b] = energy[c.a] + c.detuning
    return energy


def build_hamiltonian(sys: LevelSystem) -> np.ndarray:
    n = sys.num_levels
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = -level_energies(sys)
    for c in sys.couplings:
        h[c.a, c.b] = -c.rabi / 2.0
        h[c.b, c.a] = -np.conj(c.rabi) / 2.0
    return h


def coherent_superoperator(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator(n: int, decays: Iterable[Decay]) -> np.ndarray:
    eye = np.eye(n)
    out = np.zeros((n * n, n * n), dtype=complex)
    for d in decays:
        if d.rate == 0:
            continue
        s = np.zeros((n, n))
        s[d.target, d.source] = 1.0
        sds = s.T @ s
        out += d.rate * (np.kron(s, s) - 0.5 * np.kron(sds, eye) - 0.5 * np.kron(eye, sds.T))
    return out


def liouvillian(sys: LevelSystem) -> np.ndarray:
    return coherent_superoperator(build_hamiltonian(sys)) + dissipator(sys.num_levels, sys.decays)


def drive_superoperator(n: int, pair: tuple[int, int]) -> np.ndarray:
    """Derivative of the Liouvillian with respect to a real Rabi frequency on ``pair``."""
    a, b = sorted(pair)
    h = np.zeros((n, n), dtype=complex)
    h[a, b] = h[b, a] = -0.5
    return coherent_superoperator(h)


def split_liouvillian(sys: LevelSystem, pairs: Sequence[tuple[int, int]]):
    """Return ``(L0, [L1, ...])`` with ``L = L0 + sum_k rabi_k L_k`` for real rabi_k on ``pairs``."""
    base = sys
    for p in pairs:
        base = base.with_coupling(p, rabi=0.0)
    return liouvillian(base), [drive_superoperator(sys.num_levels, p) for p in pairs]


def lindblad_rhs(sys: LevelSystem, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation evaluated directly in matrix form."""
    h = build_hamiltonian(sys)
    out = -1j * (h @ rho - rho @ h)
    n = sys.num_levels
    for d in sys.decays:
        s = np.zeros((n, n))
        s[d.target, d.source] = 1.0
        sds = s.T @ s
        out += d.rate * (s @ rho @ s.T - 0.5 * (sds @ rho + rho @ sds))
    return out


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state."""

    data: np.ndarray = field(repr=False)

    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-9
    PSD_TOL = 1e-9

    def __post_init__(self):
        rho = np.array(self.data, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        rho.setflags(write=False)
        object.__setattr__(self, "data", rho)

    @classmethod
    def pure(cls, n: int, level: int = 0) -> "DensityMatrix":
        rho = np.zeros((n, n), dtype=complex)
        rho[level, level] = 1.0
        return cls(rho)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def populations(self) -> np.ndarray:
        return self.data.diagonal().real.copy()

    def __getitem__(self, idx):
        return self.data[idx]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def violations(self) -> list[str]:
        rho = self.data
        out = []
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > self.HERMITIAN_TOL:
            out.append(f"not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > self.TRACE_TOL:
            out.append(f"trace {tr:.12g} != 1")
        ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if ev.min() < -self.PSD_TOL:
            out.append(f"negative eigenvalue {ev.min():.3g}")
        return out

    def is_valid(self) -> bool:
        return not self.violations()


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def _trace_row(n: int) -> np.ndarray:
    return np.eye(n).reshape(-1).astype(complex)


def steady_state(sys: LevelSystem) -> DensityMatrix:
    """Unique stationary state of the master equation.

    One row of the Liouvillian is replaced with the trace condition and the
    dense system is solved directly.
    """
    lv = liouvillian(sys)
    sv = np.linalg.svd(lv, compute_uv=False)
    scale = max(sv[0], 1.0)
    if sv[-2] <= 1e-10 * scale:
        raise NoUniqueSteadyStateError(
            f"Liouvillian kernel has dimension > 1 (second-smallest singular value {sv[-2]:.3g})"
        )
    return DensityMatrix(_hermitize(_solve_stationary(lv)))


def _solve_stationary(lv: np.ndarray) -> np.ndarray:
    """Stationary state(s) of one Liouvillian or a stack of them (no uniqueness check)."""
    n2 = lv.shape[-1]
    n = math.isqrt(n2)
    a = np.array(lv, dtype=complex, copy=True)
    a[..., 0, :] = _trace_row(n)
    rhs = np.zeros(a.shape[:-1], dtype=complex)
    rhs[..., 0] = 1.0
    x = np.linalg.solve(a, rhs[..., None])[..., 0]
    return x.reshape(lv.shape[:-2] + (n, n))


def steady_state_batch(l0: np.ndarray, drives: Sequence[np.ndarray], rabi: np.ndarray,
                       chunk: int = 4096) -> np.ndarray:
    """Stationary states for ``L0 + sum_k rabi[:, k] L_k`` at many drive values.

    ``rabi`` has shape ``(samples, len(drives))``; returns ``(samples, N, N)``.
    Uniqueness is the caller's responsibility (check one point with
    :func:`steady_state`).
    """
    rabi = np.asarray(rabi, dtype=float)
    if rabi.ndim == 1:
        rabi = rabi[:, None]
    n = math.isqrt(l0.shape[0])
    out = np.empty((rabi.shape[0], n, n), dtype=complex)
    stack = np.stack(drives)
    for start in range(0, rabi.shape[0], chunk):
        r = rabi[start:start + chunk]
        lv = l0[None] + np.tensordot(r, stack, axes=(1, 0))
        rho = _solve_stationary(lv)
        out[start:start + chunk] = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    return out


def _rk4_propagator(lv: np.ndarray, h: float) -> np.ndarray:
    a = h * lv
    eye = np.eye(lv.shape[0])
    a2 = a @ a
    return eye + a + a2 / 2.0 + a2 @ a / 6.0 + a2 @ a2 / 24.0


def default_step(sys: LevelSystem) -> float:
    rate = sys.max_rate
    # RK4 local error ~ (h*rate)^5 / 120; 0.01 keeps PSD errors well inside 1e-9
    return math.inf if rate == 0 else 0.01 / rate


def evolve(sys: LevelSystem, rho0, duration: float, step: float | None = None) -> DensityMatrix:
    """Integrate the master equation with classical fourth-order Runge-Kutta.

    The Liouvillian is time independent, so ``n`` RK4 steps equal the n-th
    power of the one-step propagator, evaluated here by repeated squaring.
    The default step is ``0.01 / max(|Omega|, Gamma, |Delta|)``.
    """
    rho0 = rho0.data if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    n = sys.num_levels
    if rho0.shape != (n, n):
        raise ValidationError(f"initial state has shape {rho0.shape}, expected {(n, n)}")
    if duration < 0:
        raise ValidationError("duration must be non-negative")
    if duration == 0:
        return DensityMatrix(rho0.copy())
    if step is None:
        step = default_step(sys)
    if step <= 0:
        raise ValidationError("step must be positive")
    nsteps = max(1, math.ceil(duration / step - 1e-9))
    h = duration / nsteps
    prop = _rk4_propagator(liouvillian(sys), h)
    radius = np.max(np.abs(np.linalg.eigvals(prop)))
    if radius > 1.0 + 1e-10:
        raise StepSizeError(f"step {h:.3g} s is unstable (propagator spectral radius {radius:.6g})")
    vec = np.linalg.matrix_power(prop, nsteps) @ rho0.reshape(-1)
    rho = vec.reshape(n, n)
    drift = abs(np.trace(rho) - np.trace(rho0))
    if drift > 1e-6 or not np.all(np.isfinite(rho)):
        raise StepSizeError(f"trace drifted by {drift:.3g}; reduce the step")
    return DensityMatrix(_hermitize(rho))


def evolve_modulated(l0: np.ndarray, drives: Sequence[np.ndarray],
                     rabi_fn: Callable[[float], np.ndarray], rho0: np.ndarray,
                     duration: float, step: float,
                     observe: Callable[[np.ndarray], np.ndarray] | None = None,
                     observe_every: int = 1):
    """RK4 integration with time-dependent drive amplitudes.

    ``rabi_fn(t)`` returns an array of shape ``(len(drives), batch)``: each
    batch column is an independent trajectory sharing ``l0``. ``rho0`` is
    ``(N*N,)`` or ``(N*N, batch)``. Returns the final vectorised states and,
    when ``observe`` is given, the stacked observations and their times.
    """
    nsteps = max(1, math.ceil(duration / step - 1e-9))
    h = duration / nsteps
    probe = np.atleast_2d(np.asarray(rabi_fn(0.0), dtype=float))
    batch = probe.shape[1]
    x = np.array(rho0, dtype=complex)
    if x.ndim == 1:
        x = np.repeat(x[:, None], batch, axis=1)
    stack = list(drives)

    def rhs(t, y):
        r = np.atleast_2d(rabi_fn(t))
        out = l0 @ y
        for k, lk in enumerate(stack):
            out += (lk @ y) * r[k][None, :]
        return out

    obs, times = [], []
    t = 0.0
    for i in range(nsteps):
        k1 = rhs(t, x)
        k2 = rhs(t + h / 2, x + h / 2 * k1)
        k3 = rhs(t + h / 2, x + h / 2 * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (i + 1) * h
        if observe is not None and (i + 1) % observe_every == 0:
            obs.append(observe(x))
            times.append(t)
    if observe is None:
        return x
    return x, np.array(obs), np.array(times)
