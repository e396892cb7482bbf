"""scikit-learn style wrappers around the functional receiver blocks.

The functional API stays primary; these classes add ``fit``/``predict``/
``transform`` with parameter introspection so the blocks compose with
``sklearn.pipeline.Pipeline`` and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .eit import RF, readout_pipeline
from .exceptions import CalibrationError, ValidationError
from .mimo import DetectOptions, LeastSquares, MimoChannel, gs_detect, simo_combine
from .quantum import GAMMA_INTERMEDIATE, GAMMA_RYDBERG, OMEGA_COUPLING, OMEGA_PROBE, TWO_PI, rydberg_ladder
from .transduction import BPSK, QPSK, ReferenceField, calibrate_levels, demod_am, demod_pm

_CONSTELLATIONS = {"bpsk": BPSK, "qpsk": QPSK}


def check_complex(x, ndim: int = 2, name: str = "X") -> np.ndarray:
    """Finite complex array with ``ndim`` dimensions (1-D rows are promoted)."""
    a = np.asarray(x)
    if a.dtype == object:
        raise ValidationError(f"{name} must be numeric")
    a = a.astype(complex)
    if ndim == 2 and a.ndim == 1:
        a = a[None, :]
    if a.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {a.shape}")
    if a.size == 0 or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be non-empty and finite")
    return a


def _trace(X) -> np.ndarray:
    """Flatten a trace given as 1-D or as consecutive per-symbol rows."""
    return check_array(X, ensure_2d=False, dtype=float).reshape(-1)


class SplittingExtractor(TransformerMixin, BaseEstimator):
    """Map RF Rabi frequencies (rad/s, one column) to Autler-Townes splittings in Hz."""

    def __init__(self, omega_p=OMEGA_PROBE, omega_c=OMEGA_COUPLING, gamma2=GAMMA_INTERMEDIATE,
                 gamma_rydberg=GAMMA_RYDBERG, od=1.0, points=2001):
        self.omega_p = omega_p
        self.omega_c = omega_c
        self.gamma2 = gamma2
        self.gamma_rydberg = gamma_rydberg
        self.od = od
        self.points = points

    def fit(self, X, y=None):
        check_array(X)
        self.system_ = rydberg_ladder(omega_p=self.omega_p, omega_c=self.omega_c,
                                      gamma2=self.gamma2, gamma_rydberg=self.gamma_rydberg)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "system_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValidationError("expected a single column of Rabi frequencies")
        out = [readout_pipeline(float(w), self.system_, points=self.points, od=self.od, rf=RF)
               for w in X[:, 0]]
        return np.asarray(out)[:, None]


class RabiReadout(RegressorMixin, BaseEstimator):
    """Linear calibration from splitting (Hz) to Rabi frequency (rad/s).

    Unfitted, the ideal relation ``Omega = 2 pi * splitting`` is not assumed:
    ``fit`` estimates ``calibration_`` and ``intercept_`` by least squares.
    """

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X = check_array(X)
        y = check_array(y, ensure_2d=False, dtype=float).reshape(-1)
        if X.shape[1] != 1 or X.shape[0] != y.size:
            raise ValidationError("need one splitting column and one target per row")
        s = TWO_PI * X[:, 0]
        if self.fit_intercept:
            if X.shape[0] < 2 or np.ptp(s) == 0:
                raise CalibrationError("need at least two distinct splittings")
            a = np.column_stack([s, np.ones_like(s)])
            (self.calibration_, self.intercept_), *_ = np.linalg.lstsq(a, y, rcond=None)
        else:
            self.calibration_ = float(s @ y / (s @ s))
            self.intercept_ = 0.0
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "calibration_")
        X = check_array(X)
        return self.calibration_ * TWO_PI * X[:, 0] + self.intercept_


class AMDemodulator(ClassifierMixin, BaseEstimator):
    """Amplitude decisions against levels learned from a training preamble."""

    def __init__(self, samples_per_symbol=1):
        self.samples_per_symbol = samples_per_symbol

    def fit(self, X, y):
        p = _trace(X)
        sym = np.asarray(y, dtype=int).reshape(-1)
        self.levels_ = calibrate_levels(p, sym, self.samples_per_symbol)
        self.classes_ = np.arange(self.levels_.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "levels_")
        return demod_am(_trace(X), self.levels_, self.samples_per_symbol)


class PMDemodulator(ClassifierMixin, BaseEstimator):
    """Reference-aided phase demodulation with a pilot-estimated complex gain."""

    def __init__(self, symbol_rate=1e3, sample_rate=16e3, offset=2e3, phase=0.0,
                 constellation="qpsk"):
        self.symbol_rate = symbol_rate
        self.sample_rate = sample_rate
        self.offset = offset
        self.phase = phase
        self.constellation = constellation

    def _points(self):
        if self.constellation not in _CONSTELLATIONS:
            raise ValidationError(f"unknown constellation {self.constellation!r}")
        return _CONSTELLATIONS[self.constellation]

    def _ref(self):
        return ReferenceField(0.0, self.offset, self.phase)

    def fit(self, X, y):
        """Estimate the complex transduction gain from known pilot symbol indices ``y``."""
        c = self._points()
        soft = demod_pm(_trace(X), self._ref(), self.symbol_rate, self.sample_rate, c).soft
        sym = np.asarray(y, dtype=int).reshape(-1)
        if sym.size != soft.size:
            raise ValidationError(f"{soft.size} symbols in the trace, {sym.size} pilots given")
        self.gain_ = complex(np.mean(soft / c[sym]))
        if self.gain_ == 0:
            raise CalibrationError("pilot symbols produced no beat signal")
        self.classes_ = np.arange(c.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "gain_")
        return demod_pm(_trace(X), self._ref(), self.symbol_rate, self.sample_rate,
                        self._points(), gain=self.gain_).symbols

    def decision_function(self, X):
        check_is_fitted(self, "gain_")
        return demod_pm(_trace(X), self._ref(), self.symbol_rate, self.sample_rate,
                        self._points(), gain=self.gain_).soft


class GSDetector(BaseEstimator):
    """Gerchberg-Saxton detector for magnitude-only multi-antenna observations.

    ``fit(H, reference)`` stores the channel and its factorisation;
    ``predict(Y)`` detects one symbol vector per row of magnitudes ``Y``.
    """

    def __init__(self, max_iter=2000, tol=1e-8, init="reference", seed=None, restarts=0,
                 constellation=None):
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.seed = seed
        self.restarts = restarts
        self.constellation = constellation

    def _options(self):
        c = self.constellation
        if isinstance(c, str):
            c = tuple(_CONSTELLATIONS[c])
        return DetectOptions(self.max_iter, self.tol, self.init, self.seed, self.restarts, c)

    def fit(self, X, y):
        h = check_complex(X, 2, "H")
        self.channel_ = MimoChannel(h, check_complex(y, 1, "reference"))
        self.solver_ = LeastSquares(self.channel_.H)
        self.n_features_in_ = h.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "channel_")
        Y = check_array(X, dtype=float)
        if Y.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} magnitudes per row")
        opts = self._options()
        results = [gs_detect(row, self.channel_, opts, self.solver_) for row in Y]
        self.converged_ = np.array([r.converged for r in results])
        return np.vstack([r.x for r in results])


class MRCCombiner(TransformerMixin, BaseEstimator):
    """Maximal-ratio combining of ``K`` branch observations (one row per sample)."""

    def __init__(self, signal_power=1.0):
        self.signal_power = signal_power

    def fit(self, X=None, y=None, *, gains=None, noise=None):
        if gains is None or noise is None:
            raise ValidationError("MRC needs branch gains and noise levels")
        self.gains_ = check_complex(gains, 1, "gains")
        self.noise_ = np.broadcast_to(np.asarray(noise, dtype=float), self.gains_.shape).copy()
        _, self.snr_ = simo_combine(np.zeros(self.gains_.size), self.gains_, self.noise_,
                                    self.signal_power)
        self.n_features_in_ = self.gains_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "gains_")
        Y = check_complex(X, 2)
        if Y.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} branches per row")
        est, _ = simo_combine(Y.T, self.gains_, self.noise_, self.signal_power)
        return est
