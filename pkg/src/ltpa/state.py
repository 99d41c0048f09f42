"""Long-term memory state: low-pass filtered instantaneous input power.

Recursions, with ``p[n] = |x[n]|^2`` and ``p[k] = 0`` for ``k < 0``::

    AR(T):      s[n] = p[n] + sum_k alpha_k s[n-k]
    ARMA(T,Z):  s[n] = p[n] + sum_k beta_k p[n-k] + sum_k alpha_k s[n-k]
    FIR(N):     s[n] = (1/N) sum_{k<N} p[n-k]

Prior state values ``s[k<0]`` equal ``initial_state``.  AR/ARMA filters are
used raw by default; with ``normalized=True`` the forcing term is scaled by
``c = (1 - sum alpha) / (1 + sum beta)`` so the filter has unit DC gain.
Normalizing decouples the state's time constant from its scale, which the
identification loop relies on for fast convergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.signal

from .errors import UnsupportedError
from .signal import as_samples

STABILITY_MARGIN = 1e-9


class FilterKind(str, Enum):
    FIR = "fir"
    AR = "ar"
    ARMA = "arma"


def _as_tuple(vals) -> tuple:
    arr = np.atleast_1d(np.asarray(vals, dtype=np.complex128)).ravel()
    return tuple(float(v.real) if v.imag == 0 else complex(v) for v in arr)


@dataclass(frozen=True)
class StateFilter:
    kind: FilterKind
    window: int = 1
    alpha: tuple = ()
    beta: tuple = ()
    initial_state: complex = 0.0
    normalized: bool = False

    def __post_init__(self):
        kind = FilterKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "alpha", _as_tuple(self.alpha))
        object.__setattr__(self, "beta", _as_tuple(self.beta))
        init = complex(self.initial_state)
        object.__setattr__(self, "initial_state", init.real if init.imag == 0 else init)
        object.__setattr__(self, "normalized", bool(self.normalized))
        if kind is FilterKind.FIR:
            if int(self.window) != self.window or self.window < 1:
                raise ValueError("FIR window N must be a positive integer")
            object.__setattr__(self, "window", int(self.window))
            if self.alpha or self.beta:
                raise ValueError("FIR filters take no poles or zeros")
            return
        if not self.alpha:
            raise ValueError(f"{kind.value.upper()} filter needs at least one pole coefficient")
        if kind is FilterKind.AR and self.beta:
            raise ValueError("AR filters take no zeros; use ARMA")
        if kind is FilterKind.ARMA and not self.beta:
            raise ValueError("ARMA filter needs at least one zero coefficient")
        if not all(np.isfinite(complex(v)) for v in self.alpha + self.beta):
            raise ValueError("filter coefficients must be finite")
        radius = self.pole_radius()
        if radius >= 1 - STABILITY_MARGIN:
            raise ValueError(f"unstable state filter: pole radius {radius:.12g} >= 1 - "
                             f"{STABILITY_MARGIN:g}")
        if self.normalized and abs(1 + sum(self.beta)) < 1e-12:
            raise ValueError("cannot normalize a filter with a zero at DC")

    @classmethod
    def fir(cls, window, initial_state=0.0):
        return cls(FilterKind.FIR, window=window, initial_state=initial_state)

    @classmethod
    def ar(cls, alpha, initial_state=0.0, normalized=False):
        return cls(FilterKind.AR, alpha=np.atleast_1d(alpha), initial_state=initial_state,
                   normalized=normalized)

    @classmethod
    def arma(cls, alpha, beta, initial_state=0.0, normalized=False):
        return cls(FilterKind.ARMA, alpha=np.atleast_1d(alpha), beta=np.atleast_1d(beta),
                   initial_state=initial_state, normalized=normalized)

    @property
    def n_params(self) -> int:
        return len(self.alpha) + len(self.beta)

    def pole_radius(self) -> float:
        if self.kind is FilterKind.FIR:
            return 0.0
        if len(self.alpha) == 1:
            return abs(self.alpha[0])
        roots = np.roots(np.r_[1.0, -np.asarray(self.alpha, dtype=np.complex128)])
        return float(np.max(np.abs(roots)))

    def is_real(self) -> bool:
        vals = self.alpha + self.beta + (self.initial_state,)
        return all(np.imag(v) == 0 for v in vals)

    def params(self) -> np.ndarray:
        """Differentiable parameters ``[alpha..., beta...]``."""
        return np.asarray(self.alpha + self.beta, dtype=np.complex128)

    def with_params(self, params) -> StateFilter:
        params = np.asarray(params)
        T = len(self.alpha)
        return StateFilter(self.kind, self.window, params[:T], params[T:],
                           self.initial_state, self.normalized)

    def raw_coefficients(self):
        """``(b, a)`` of the unnormalized transfer function in lfilter convention."""
        if self.kind is FilterKind.FIR:
            return np.full(self.window, 1.0 / self.window), np.ones(1)
        b = np.r_[1.0, np.asarray(self.beta, dtype=np.complex128)] if self.beta else np.ones(1)
        a = np.r_[1.0, -np.asarray(self.alpha, dtype=np.complex128)]
        return _maybe_real(b), _maybe_real(a)

    def input_gain(self) -> complex:
        """Scale applied to the forcing term (1 unless normalized)."""
        if self.kind is FilterKind.FIR or not self.normalized:
            return 1.0
        return (1 - sum(self.alpha)) / (1 + sum(self.beta))

    def coefficients(self):
        b, a = self.raw_coefficients()
        return _maybe_real(b * self.input_gain()), a

    def label(self) -> str:
        if self.kind is FilterKind.FIR:
            return f"FIR({self.window})"
        if self.kind is FilterKind.AR:
            return f"AR({len(self.alpha)})"
        return f"ARMA({len(self.alpha)},{len(self.beta)})"


def _maybe_real(v):
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.all(v.imag == 0):
        return v.real.copy()
    return v


def _power(x) -> np.ndarray:
    x = as_samples(x)
    if x.size == 0:
        raise ValueError("state computation needs a non-empty signal")
    return np.abs(x) ** 2


def _zi(filt: StateFilter, b, a):
    T = a.size - 1
    if T == 0 or filt.initial_state == 0:
        return None
    prior = np.full(T, filt.initial_state)
    return scipy.signal.lfiltic(b, a, prior, np.zeros(max(b.size - 1, 1)))


def compute_state(filt: StateFilter, x) -> np.ndarray:
    """State sequence ``s[n]``; real dtype when the filter is real."""
    p = _power(x)
    b, a = filt.coefficients()
    zi = _zi(filt, b, a)
    if zi is None:
        s = scipy.signal.lfilter(b, a, p)
    else:
        s, _ = scipy.signal.lfilter(b, a, p, zi=zi)
    return _maybe_real(s)


def state_derivatives(filt: StateFilter, x):
    """State and its derivatives w.r.t. ``[alpha..., beta...]``.

    Returns ``(s, ds)`` where ``ds[:, j]`` is ``ds/dparam_j``. Derivatives
    come from the recursions (zero prior derivative)::

        ds[n]/dalpha_j = c'_j q[n] + s[n-j]   + sum_i alpha_i ds[n-i]/dalpha_j
        ds[n]/dbeta_j  = c'_j q[n] + c p[n-j] + sum_i alpha_i ds[n-i]/dbeta_j

    with ``q = p + sum beta p[n-k]`` and ``c`` the normalization gain.
    """
    if filt.kind is FilterKind.FIR:
        raise UnsupportedError("FIR window length is not differentiable")
    p = _power(x)
    s = np.asarray(compute_state(filt, x), dtype=np.complex128)
    b, a = filt.raw_coefficients()
    q = scipy.signal.lfilter(b, np.ones(1), p)
    T, Z = len(filt.alpha), len(filt.beta)
    c = filt.input_gain()
    if filt.normalized:
        den = 1 + sum(filt.beta)
        dc_dalpha = -1 / den
        dc_dbeta = -(1 - sum(filt.alpha)) / den ** 2
    else:
        dc_dalpha = dc_dbeta = 0.0
    forcing = np.empty((p.size, T + Z), dtype=np.complex128)
    for j in range(1, T + 1):
        past = np.full(p.size, filt.initial_state, dtype=np.complex128)
        if j < p.size:
            past[j:] = s[:-j]
        forcing[:, j - 1] = dc_dalpha * q + past
    for j in range(1, Z + 1):
        forcing[:, T + j - 1] = dc_dbeta * q + c * _shift(p, j)
    ds = scipy.signal.lfilter(np.ones(1), a, forcing, axis=0)
    return s, ds


def _shift(v, j):
    out = np.zeros(v.size, dtype=np.complex128)
    if j < v.size:
        out[j:] = v[:-j]
    return out


def effective_memory(filt: StateFilter) -> float:
    """Approximate memory length in samples: ``1/(1-|alpha|)`` for AR(1), N for FIR."""
    if filt.kind is FilterKind.FIR:
        return float(filt.window)
    if filt.kind is FilterKind.AR and len(filt.alpha) == 1:
        return 1.0 / (1.0 - abs(filt.alpha[0]))
    raise UnsupportedError(f"effective memory is only defined for AR(1) and FIR, "
                           f"not {filt.label()}")


def frequency_response(filt: StateFilter, omegas) -> np.ndarray:
    """Complex response ``G(w)`` at normalized frequencies (rad/sample)."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    b, a = filt.coefficients()
    _, h = scipy.signal.freqz(b, a, worN=omegas)
    return h
