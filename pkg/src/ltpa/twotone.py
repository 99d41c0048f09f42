"""Two-tone initialization of the long-term memory filter.

Probe ``x[n] = A exp(-j w n) + B`` through a first-order device
``y = theta0 x + theta1 s x`` whose state ``s`` sees ``|x|^2`` through a
real, DC-normalized filter ``G``.  The output then holds four tones::

    -2w : A^2 B |G| theta1
     -w : A theta0 + (A^3 + A B^2 + A B^2 |G|) theta1
      0 : B theta0 + (A^2 B + B^3 + A^2 B |G|) theta1
     +w : A B^2 |G| theta1

Subtracting the -2w magnitude from the DC magnitude removes |G|, which
gives one LS row ``[B, B^3 + A^2 B]`` per offset; an offset of zero (tones
merged) gives the reference row ``[(A+B), (A+B)^3]``.  ``|G(w)|`` then
follows from the DC tone alone.  Magnitudes lose the sign of theta1, so
both sign hypotheses are solved and the self-consistent one is kept.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.optimize

from .errors import FitError, FormatError, NumericalError
from .textfmt import fmt_float
from .signal import IqSignal, as_samples, generate_two_tone
from .state import StateFilter


class ToneMagnitudes(NamedTuple):
    mag_dc: float
    mag_offset: float
    mag_2offset_neg: float
    mag_offset_pos: float


@dataclass(frozen=True)
class TwoToneMeasurement:
    """One two-tone probe.

    ``mag_offset`` is ``|Y(w_k)|_{w_k}``, the intermodulation magnitude that
    the LS rows subtract from ``mag_dc`` (the ``-2w`` product, equal to the
    ``+w`` product when ``a == b``).  ``offset`` is in rad/sample; zero marks
    the merged-tone reference measurement.
    """

    offset: float
    a: float
    b: float
    mag_dc: float
    mag_offset: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("tone amplitudes must be positive")
        if self.mag_dc < 0 or self.mag_offset < 0:
            raise ValueError("magnitudes must be nonnegative")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative (rad/sample)")

    @property
    def is_reference(self) -> bool:
        return self.offset == 0


@dataclass(frozen=True)
class SampledResponse:
    omegas: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=np.float64)
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if w.shape != m.shape or w.ndim != 1:
            raise ValueError("omegas and magnitudes must be 1-D and equally long")
        if np.any(m < 0):
            raise ValueError("magnitudes must be nonnegative")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "magnitudes", m)


def _bin(y: np.ndarray, omega: float) -> complex:
    """Coefficient of ``exp(j omega n)`` in ``y``."""
    n = np.arange(y.size)
    return complex(np.mean(y * np.exp(-1j * omega * n)))


def tone_bins(y, offset: float) -> dict:
    """Complex tone coefficients at ``{-2w, -w, 0, +w}`` (keys are multiples of w)."""
    y = as_samples(y)
    if offset <= 0:
        raise ValueError("offset must be positive")
    periods = y.size * offset / (2 * np.pi)
    if periods < 1 - 1e-9 or abs(periods - round(periods)) > 1e-6:
        raise ValueError(f"record of {y.size} samples does not hold an integer number of "
                         f"periods of offset {offset} rad/sample ({periods:.6g})")
    return {k: _bin(y, k * offset) for k in (-2, -1, 0, 1)}


def extract_tone_magnitudes(y, offset: float) -> ToneMagnitudes:
    """Single-bin DFT magnitudes at 0, -w (the A tone), -2w and +w."""
    bins = tone_bins(y, offset)
    return ToneMagnitudes(abs(bins[0]), abs(bins[-1]), abs(bins[-2]), abs(bins[1]))


def forward_tones(theta0: float, theta1: float, a: float, b: float, gain: float) -> dict:
    """Tone coefficients of the first-order device, keyed by multiple of w."""
    return {
        -2: a * a * b * gain * theta1,
        -1: a * theta0 + (a ** 3 + a * b * b + a * b * b * gain) * theta1,
        0: b * theta0 + (a * a * b + b ** 3 + a * a * b * gain) * theta1,
        1: a * b * b * gain * theta1,
    }


def synthesize_measurements(theta0: float, theta1: float, a: float, b: float, omegas,
                            gains, reference: bool = True) -> list:
    """Noiseless measurements of the first-order device for the given |G(w_k)|."""
    out = []
    if reference:
        out.append(TwoToneMeasurement(0.0, a, b, abs((a + b) * theta0 + (a + b) ** 3 * theta1)))
    for w, g in zip(omegas, gains):
        t = forward_tones(theta0, theta1, a, b, g)
        out.append(TwoToneMeasurement(float(w), a, b, abs(t[0]), abs(t[-2])))
    return out


def _rows(measurements, sign: float):
    A, rhs = [], []
    for m in measurements:
        if m.is_reference:
            A.append([m.a + m.b, (m.a + m.b) ** 3])
            rhs.append(m.mag_dc)
        else:
            A.append([m.b, m.b ** 3 + m.a ** 2 * m.b])
            rhs.append(m.mag_dc - sign * m.mag_offset)
    return np.array(A), np.array(rhs)


def solve_static_params(measurements) -> tuple:
    """Least-squares ``(theta0, theta1)`` from the stacked two-tone rows."""
    measurements = list(measurements)
    if len(measurements) < 2:
        raise ValueError("need at least two measurements")
    candidates = []
    for sign in (1.0, -1.0):
        A, rhs = _rows(measurements, sign)
        sv = np.linalg.svd(A, compute_uv=False)
        if sv.size < 2 or sv[-1] <= 1e-12 * sv[0]:
            raise NumericalError("two-tone rows are singular; vary offsets or amplitudes",
                                 condition=np.inf if sv[-1] == 0 else sv[0] / sv[-1])
        theta, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        resid = float(np.linalg.norm(A @ theta - rhs))
        consistent = theta[1] == 0 or np.sign(theta[1]) == sign
        candidates.append((not consistent, resid, (float(theta[0]), float(theta[1]))))
    candidates.sort(key=lambda c: (c[0], c[1]))
    return candidates[0][2]


def response_from_measurements(measurements, theta0: float, theta1: float) -> SampledResponse:
    """``|G(w_k)|`` for every non-reference measurement, from the DC tone."""
    if theta1 == 0:
        raise ValueError("theta1 = 0: the device shows no long-term memory to measure")
    w, g = [], []
    for m in measurements:
        if m.is_reference:
            continue
        a, b = m.a, m.b
        g.append((m.mag_dc - (b ** 3 + a * a * b) * theta1 - b * theta0) / (a * a * b * theta1))
        w.append(m.offset)
    if not w:
        raise ValueError("no offset measurements")
    return SampledResponse(np.array(w), np.abs(np.array(g)))


def _normalized_mag(params, kind, omegas, allow_complex):
    if allow_complex:
        p = params[0::2] + 1j * params[1::2]
    else:
        p = params
    alpha = p[0]
    beta = p[1] if kind == "arma11" else 0.0
    z = np.exp(-1j * omegas)
    num = np.abs(1 + beta * z) / abs(1 + beta)
    den = np.abs(1 - alpha * z) / abs(1 - alpha)
    return num / den


def fit_initial_filter(response: SampledResponse, kind: str = "arma11",
                       allow_complex: bool = False, weights=None) -> StateFilter:
    """Fit a DC-normalized AR(1)/ARMA(1,1) to sampled ``|G(w)|`` (log-magnitude LS)."""
    kind = kind.lower().replace("(", "").replace(")", "").replace(",", "")
    if kind not in ("ar1", "arma11"):
        raise ValueError(f"unsupported initial filter kind {kind!r}")
    w = response.omegas
    if w.size < 3:
        raise ValueError("need at least three sampled frequencies")
    if np.any(response.magnitudes <= 0):
        raise ValueError("log-magnitude fit needs strictly positive magnitudes")
    target = np.log(response.magnitudes)
    wt = np.ones_like(w) if weights is None else np.asarray(weights, dtype=np.float64)

    def resid(params):
        return wt * (np.log(_normalized_mag(params, kind, w, allow_complex)) - target)

    # coarse grid over real alpha, then refine
    grid = np.concatenate([1 - np.logspace(-7, 0, 400), -np.linspace(0.05, 0.95, 19)])
    costs = [np.sum(resid(np.array([g] + ([0.0] if kind == "arma11" else [])))**2)
             for g in grid]
    alpha0 = grid[int(np.argmin(costs))]
    x0 = [alpha0] + ([0.0] if kind == "arma11" else [])
    lim = 1 - 1e-9
    lo = [-lim] + ([-0.99] if kind == "arma11" else [])
    hi = [lim] + ([0.99] if kind == "arma11" else [])
    if allow_complex:
        x0 = [v for r in x0 for v in (r, 0.0)]
        lo = [v for r in lo for v in (r, -0.5)]
        hi = [v for r in hi for v in (r, 0.5)]
    sol = scipy.optimize.least_squares(resid, x0, bounds=(lo, hi), method="trf",
                                       xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
                                       x_scale="jac")
    if not sol.success and sol.status <= 0:
        raise FitError(f"initial filter fit failed: {sol.message}")
    p = sol.x[0::2] + 1j * sol.x[1::2] if allow_complex else sol.x
    try:
        if kind == "ar1":
            return StateFilter.ar(p[0], normalized=True)
        return StateFilter.arma(p[0], p[1], normalized=True)
    except ValueError as exc:
        raise FitError(f"initial filter fit produced an unusable filter: {exc}") from None


def default_offsets_hz(sample_rate: float, n: int = 16, lo: float = 100.0,
                       hi: float = 100e3) -> np.ndarray:
    """Roughly log-spaced offsets whose periods are whole numbers of samples."""
    periods = np.unique(np.round(sample_rate / np.logspace(np.log10(lo), np.log10(hi), n)))
    return np.sort(sample_rate / periods)


def measure_device(device, a: float, b: float, offsets_hz, sample_rate: float,
                   settle: int = 100_000) -> list:
    """Run two-tone probes through ``device`` (IqSignal -> IqSignal) and read the tones.

    Each probe runs ``settle`` samples before an analysis window of one whole
    tone period; offsets whose period is not an integer number of samples are
    rejected.  A merged-tone (zero offset) reference is measured first.
    """
    out = []
    ref = device(IqSignal(np.full(settle + 1024, a + b, dtype=np.complex128), sample_rate))
    out.append(TwoToneMeasurement(0.0, a, b, abs(np.mean(ref.samples[settle:]))))
    for f in offsets_hz:
        period = sample_rate / f
        if abs(period - round(period)) > 1e-9:
            raise ValueError(f"offset {f} Hz has non-integer period at {sample_rate} Hz")
        L = int(round(period))
        x = generate_two_tone(a, b, f, settle + L, sample_rate)
        y = device(x).samples[settle:]
        bins = tone_bins(y, 2 * np.pi * f / sample_rate)
        out.append(TwoToneMeasurement(2 * np.pi * f / sample_rate, a, b,
                                      abs(bins[0]), abs(bins[-2])))
    return out


MEAS_HEADER = ["offset_hz", "a", "b", "mag_dc", "mag_offset"]


def write_measurements(measurements, path, sample_rate: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEAS_HEADER)
        for m in measurements:
            w.writerow([fmt_float(v) for v in (m.offset * sample_rate / (2 * np.pi), m.a,
                                               m.b, m.mag_dc, m.mag_offset)])


def read_measurements(path, sample_rate: float) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEAS_HEADER:
            raise FormatError(f"measurement CSV must start with {','.join(MEAS_HEADER)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                f, a, b, dc, off = (float(v) for v in row)
                out.append(TwoToneMeasurement(2 * np.pi * f / sample_rate, a, b, dc, off))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
    if not out:
        raise FormatError("measurement CSV holds no rows")
    return out
