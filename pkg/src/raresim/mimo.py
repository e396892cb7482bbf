"""Magnitude-only multi-antenna observation, Gerchberg-Saxton detection and MRC."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateError, RankError, ValidationError


@dataclass(frozen=True)
class MimoChannel:
    """``K x M`` channel and the per-receiver reference contribution ``r``."""

    H: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.H, dtype=complex))
        r = np.asarray(self.reference, dtype=complex).reshape(-1)
        k, m = h.shape
        if not k >= m >= 1:
            raise ValidationError(f"need K >= M >= 1, got K={k}, M={m}")
        if r.size != k:
            raise ValidationError(f"reference has {r.size} entries, channel has {k} receivers")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(r))):
            raise ValidationError("channel and reference must be finite")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "reference", r)

    @property
    def shape(self) -> tuple[int, int]:
        return self.H.shape


def phase(z) -> np.ndarray:
    """Unit phasor of ``z`` with ``phase(0) == 1``."""
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    out = np.ones_like(z)
    nz = mag > 0
    out[nz] = z[nz] / mag[nz]
    return out


def magnitude_observe(ch: MimoChannel, x, sigma: float = 0.0, seed=None) -> np.ndarray:
    """``|H x + r| + n`` clipped at zero."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.size != ch.shape[1]:
        raise ValidationError(f"x has {x.size} entries, channel expects {ch.shape[1]}")
    if sigma < 0:
        raise ValidationError("noise level must be non-negative")
    y = np.abs(ch.H @ x + ch.reference)
    if sigma > 0:
        y = y + sigma * np.random.default_rng(seed).standard_normal(y.shape)
    return np.maximum(y, 0.0)


@dataclass(frozen=True)
class DetectOptions:
    max_iter: int = 2000
    tol: float = 1e-8
    init: str = "reference"
    seed: int | None = None
    # Variant slot: extra random starts, and a constellation used to pick
    # among the fixed points by hard-decision residual.
    restarts: int = 0
    constellation: tuple | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.init not in ("reference", "random", "linearized"):
            raise ValidationError(f"unknown init {self.init!r}")
        if self.restarts < 0:
            raise ValidationError("restarts must be non-negative")
        if self.constellation is not None:
            c = tuple(complex(v) for v in np.asarray(self.constellation).reshape(-1))
            if not c:
                raise ValidationError("constellation must not be empty")
            object.__setattr__(self, "constellation", c)


@dataclass
class GSResult:
    x: np.ndarray
    converged: bool
    n_iter: int
    residuals: list = field(default_factory=list)


class LeastSquares:
    """QR factorisation of a full-column-rank ``H`` reused across solves."""

    def __init__(self, H: np.ndarray):
        self.q, self.r = sla.qr(H, mode="economic")
        diag = np.abs(np.diag(self.r))
        if diag.size == 0 or diag.min() <= 1e-12 * max(diag.max(), 1e-300):
            raise RankError("channel matrix is rank deficient")

    def __call__(self, b: np.ndarray) -> np.ndarray:
        return sla.solve_triangular(self.r, self.q.conj().T @ b)


def _hard_decision(x, constellation) -> np.ndarray:
    c = np.asarray(constellation, dtype=complex)
    return c[np.argmin(np.abs(x[:, None] - c[None, :]), axis=1)]


def gs_detect(y, ch: MimoChannel, opts: DetectOptions | None = None,
              solver: LeastSquares | None = None) -> GSResult:
    """Alternating projections between the magnitude data and the channel range.

    ``residuals[t]`` is ``||y - |H x_t + r|||`` for the t-th iterate; it
    never increases. If ``tol`` is not reached the lowest-residual iterate is
    returned with ``converged=False``.

    With ``opts.restarts`` or ``opts.constellation`` set, GS is run from the
    reference start plus ``restarts`` random starts. The run whose hard
    decision fits ``y`` best is returned (continuous residual if no
    constellation). This resolves the mirror fixed point that exists when
    ``K`` is small compared to ``2M``.
    """
    opts = opts or DetectOptions()
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != ch.shape[0]:
        raise ValidationError("observation length does not match the channel")
    ls = solver or LeastSquares(ch.H)
    if opts.restarts == 0 and opts.constellation is None:
        return _gs_run(y, ch, opts, ls, _initial_phase(y, ch, opts.init, opts.seed))
    rng = np.random.default_rng(opts.seed)
    starts = [_initial_phase(y, ch, opts.init, opts.seed)]
    starts += [np.exp(2j * np.pi * rng.random(y.size)) for _ in range(opts.restarts)]
    best, best_cost = None, np.inf
    for ph in starts:
        res = _gs_run(y, ch, opts, ls, ph)
        xd = res.x if opts.constellation is None else _hard_decision(res.x, opts.constellation)
        cost = float(np.linalg.norm(y - np.abs(ch.H @ xd + ch.reference)))
        if cost < best_cost:
            best, best_cost = res, cost
    return best


def _initial_phase(y, ch, init, seed):
    if init == "reference":
        return phase(ch.reference)
    if init == "linearized":
        return phase(ch.H @ linearized_estimate(y, ch) + ch.reference)
    return np.exp(2j * np.pi * np.random.default_rng(seed).random(y.size))


def linearized_estimate(y, ch: MimoChannel) -> np.ndarray:
    """First-order solve of ``|H x + r| = y`` about ``x = 0``.

    ``|H x + r| ~ |r| + Re(conj(phase(r)) H x)`` is real-linear in
    ``(Re x, Im x)``; the minimum-norm least-squares solution is returned.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    a = np.conj(phase(ch.reference))[:, None] * ch.H
    lhs = np.hstack([a.real, -a.imag])
    sol = np.linalg.lstsq(lhs, y - np.abs(ch.reference), rcond=None)[0]
    m = ch.shape[1]
    return sol[:m] + 1j * sol[m:]


def _gs_run(y, ch: MimoChannel, opts: DetectOptions, ls: LeastSquares, ph) -> GSResult:
    r = ch.reference
    x = ls(y * ph - r)
    residuals = []
    best_x, best_res = x, np.inf
    for it in range(1, opts.max_iter + 1):
        w = ch.H @ x + r
        res = float(np.linalg.norm(y - np.abs(w)))
        residuals.append(res)
        if res < best_res:
            best_x, best_res = x, res
        x_new = ls(y * phase(w) - r)
        step = np.linalg.norm(x_new - x)
        scale = np.linalg.norm(x)
        x = x_new
        if step <= opts.tol * scale or step == 0:
            residuals.append(float(np.linalg.norm(y - np.abs(ch.H @ x + r))))
            return GSResult(x, True, it, residuals)
    return GSResult(best_x, False, opts.max_iter, residuals)


def exhaustive_detect(y, ch: MimoChannel, constellation) -> np.ndarray:
    """Brute-force ML symbol indices (noiseless/Gaussian metric) over a constellation."""
    c = np.asarray(constellation, dtype=complex)
    m = ch.shape[1]
    best, best_cost = None, np.inf
    for combo in itertools.product(range(c.size), repeat=m):
        x = c[list(combo)]
        cost = np.linalg.norm(np.asarray(y) - np.abs(ch.H @ x + ch.reference))
        if cost < best_cost:
            best, best_cost = np.array(combo), cost
    return best


def nmse_db(estimate, truth) -> float:
    truth = np.asarray(truth)
    err = np.sum(np.abs(np.asarray(estimate) - truth) ** 2)
    return float(10 * np.log10(err / np.sum(np.abs(truth) ** 2)))


def simo_combine(y, h, sigma, signal_power: float = 1.0):
    """Maximal-ratio combining over ``K`` branches.

    ``y`` has the branch axis first (``(K,)`` or ``(K, n)``). Returns the
    unbiased combined estimate and the post-combining SNR
    ``signal_power * sum |h_k|^2 / sigma_k^2``.
    """
    h = np.asarray(h, dtype=complex).reshape(-1)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), h.shape)
    y = np.asarray(y, dtype=complex)
    if h.size < 1:
        raise ValidationError("need at least one branch")
    if y.shape[0] != h.size:
        raise ValidationError("observations and gains disagree on the branch count")
    if np.any(sigma <= 0):
        raise ValidationError("branch noise levels must be positive")
    if not np.any(np.abs(h) > 0):
        raise DegenerateError("all branch gains are zero")
    w = np.conj(h) / sigma**2
    norm = np.sum(np.abs(h) ** 2 / sigma**2)
    est = np.tensordot(w, y, axes=(0, 0)) / norm
    return est, float(signal_power * norm)


def simo_measured_snr(n_branches: int, snr_single: float, n_symbols: int, seed=None) -> float:
    """Empirical post-MRC SNR with equal-gain, random-phase branches."""
    rng = np.random.default_rng(seed)
    s = np.exp(2j * np.pi * rng.integers(0, 4, n_symbols) / 4)
    h = np.exp(2j * np.pi * rng.random(n_branches))
    sigma = np.sqrt(1.0 / snr_single)
    noise = sigma * (rng.standard_normal((n_branches, n_symbols))
                     + 1j * rng.standard_normal((n_branches, n_symbols))) / np.sqrt(2)
    est, _ = simo_combine(h[:, None] * s[None, :] + noise, h, sigma)
    return float(np.mean(np.abs(s) ** 2) / np.mean(np.abs(est - s) ** 2))
