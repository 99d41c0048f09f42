"""Indirect-learning predistortion with frozen long-term state filters.

Each iteration fits a post-inverse on ``(y / G, u)``: the PA output divided
by the linear reference gain is the regressor, the PA input the target.  The
fitted inverse is then copied in front of the PA.  State filters come from a
forward fit and never change; only the theta vectors are re-solved.

The linear reference gain ``G`` is the small-signal gain of the PA without
predistortion (least squares over the lowest-power decile of input samples),
rescaled in magnitude so that ``G x`` carries the PA's no-DPD output power.
Every predistorted waveform is scaled so the PA output holds that same power.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import textfmt
from .basis import BasisSpec, build_matrix
from .errors import LtpaError
from .ident import solve_theta
from .ltmodel import LtModel
from .metrics import BlockNmseProfile, acpr_db, block_nmse, nmse_db
from .signal import IqSignal
from .state import compute_state

log = logging.getLogger(__name__)

STATE_SOURCES = ("pre", "post")


@dataclass(frozen=True)
class DpdConfig:
    iterations: int = 5
    ridge: float = 0.0
    # envelope driving the predistorter's states when applied
    apply_state: str = "pre"
    clip_level: float | None = None
    power_tol_db: float = 0.01
    # NMSE changes smaller than this count as neither progress nor divergence
    converge_tol_db: float = 0.01
    small_signal_fraction: float = 0.1
    block_size: int = 4000
    channel_bw: float = 4 / 30.72
    adjacent_offset: float = 5 / 30.72

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.apply_state not in STATE_SOURCES:
            raise ValueError(f"apply_state must be one of {STATE_SOURCES}")
        if not 0 < self.small_signal_fraction <= 1:
            raise ValueError("small_signal_fraction must be in (0, 1]")
        if self.power_tol_db <= 0:
            raise ValueError("power_tol_db must be positive")


@dataclass
class DpdSession:
    inverse_model: LtModel
    frozen_filters: tuple
    target_output_power: float
    iteration: int = 0

    def __post_init__(self):
        self.frozen_filters = tuple(self.frozen_filters)
        if tuple(self.inverse_model.state_filters) != self.frozen_filters:
            raise ValueError("inverse model filters differ from the frozen filters")
        if not self.target_output_power > 0:
            raise ValueError("target output power must be positive")


@dataclass(frozen=True)
class ApplyResult:
    signal: IqSignal
    pa_output: IqSignal
    scale: float
    output_power: float
    clipped: bool


@dataclass(frozen=True)
class DpdIteration:
    iteration: int
    nmse_db: float
    block: BlockNmseProfile
    acpr_db: float
    output_power: float
    scale: float
    clipped: bool


@dataclass
class DpdResult:
    signal: IqSignal
    pa_output: IqSignal
    reference: IqSignal
    gain: complex
    target_output_power: float
    iterations: list = field(default_factory=list)
    baseline: DpdIteration | None = None
    best_iteration: int = 0
    status: str = "ok"
    session: DpdSession | None = None

    def to_text(self, label: str = "") -> str:
        doc = textfmt.Document("dpd-report")
        if label:
            doc.top["label"] = label
        doc.top["status"] = self.status
        doc.top["best_iteration"] = self.best_iteration
        doc.top["linear_gain"] = textfmt.fmt_complex(self.gain)
        doc.top["target_output_power"] = textfmt.fmt_float(self.target_output_power)
        if self.session is not None:
            doc.top["inverse_model"] = self.session.inverse_model.describe()
        rows = ([self.baseline] if self.baseline is not None else []) + self.iterations
        for it in rows:
            doc.section(f"iteration.{it.iteration}", {
                "nmse_db": f"{it.nmse_db:.9f}",
                "max_block_nmse_db": f"{it.block.max_nmse_db:.9f}",
                "worst_block": it.block.worst_block,
                "acpr_db": f"{it.acpr_db:.9f}",
                "output_power_db": f"{10 * np.log10(it.output_power):.9f}",
                "scale": f"{it.scale:.12f}",
                "clipped": str(it.clipped).lower(),
            })
        return doc.to_text()


def _signal(x) -> IqSignal:
    return x if isinstance(x, IqSignal) else IqSignal(np.asarray(x), 1.0)


def small_signal_gain(x, y, fraction: float = 0.1) -> complex:
    """LS gain ``y ~ g x`` over the ``fraction`` of samples with the smallest |x|."""
    xs, ys = _signal(x).samples, _signal(y).samples
    if xs.size != ys.size:
        raise ValueError("input and output records must be aligned")
    k = max(1, int(np.ceil(fraction * xs.size)))
    idx = np.argsort(np.abs(xs), kind="stable")[:k]
    den = np.vdot(xs[idx], xs[idx])
    if den == 0:
        raise ValueError("small-signal samples are all zero")
    return complex(np.vdot(xs[idx], ys[idx]) / den)


def linear_reference(x, y, fraction: float = 0.1):
    """``(G, target_power)``: small-signal gain phase, magnitude set by output power."""
    xs, ys = _signal(x), _signal(y)
    g = small_signal_gain(xs, ys, fraction)
    target = ys.power()
    mag = np.sqrt(target / xs.power())
    return (g / abs(g) if g != 0 else 1.0) * mag, target


def fit_inverse(pa_input, pa_output, basis: BasisSpec, frozen_filters, ridge: float = 0.0,
                gain: complex = 1.0, label: str = "inverse") -> LtModel:
    """Post-inverse with roles swapped: regressor ``pa_output / gain``, target ``pa_input``.

    States are computed from the regressor through the frozen filters.
    """
    u = _signal(pa_input).samples
    v = _signal(pa_output).samples / gain
    if u.size != v.size:
        raise ValueError("input and output records must be aligned")
    filters = tuple(frozen_filters)
    states = [compute_state(f, v) for f in filters]
    thetas = solve_theta(basis, states, v, u, ridge)
    return LtModel(basis, thetas[0], filters, tuple(thetas[1:]), label)


def _inverse_output(model: LtModel, x: np.ndarray, apply_state: str) -> np.ndarray:
    H = build_matrix(model.basis, x).values
    parts = [H @ t for t in model.thetas()]

    def run(env):
        out = parts[0].copy()
        for f, p in zip(model.state_filters, parts[1:]):
            out += compute_state(f, env) * p
        return out

    u = run(x)
    if apply_state == "post" and model.n_states:
        u = run(u)
    return u


def _scale_to_power(pa, u: IqSignal, target: float, tol_db: float, max_iter: int = 30):
    """Find ``c`` with mean|pa(c u)|^2 = target by secant iteration on dB power."""

    def power_db(c):
        out = pa(u.with_samples(c * u.samples))
        return 10 * np.log10(out.power()), out

    goal = 10 * np.log10(target)
    c0 = 1.0
    p0, out = power_db(c0)
    if abs(p0 - goal) <= tol_db:
        return c0, out
    c1 = c0 * 10 ** ((goal - p0) / 20)
    for _ in range(max_iter):
        p1, out = power_db(c1)
        if abs(p1 - goal) <= tol_db:
            return c1, out
        slope = (p1 - p0) / np.log(c1 / c0) if c1 != c0 else 20 / np.log(10)
        if not np.isfinite(slope) or slope <= 0:
            slope = 20 / np.log(10)
        c0, p0 = c1, p1
        c1 = c1 * np.exp((goal - p1) / slope)
    raise LtpaError(f"output power did not reach target within {tol_db} dB")


def predistort(session: DpdSession, x, pa, config: DpdConfig = DpdConfig()) -> ApplyResult:
    """Apply the inverse model to ``x`` and scale so ``pa`` delivers the target power."""
    x = _signal(x)
    u = x.with_samples(_inverse_output(session.inverse_model, x.samples, config.apply_state))
    scale, out = _scale_to_power(pa, u, session.target_output_power, config.power_tol_db)
    sig = u.with_samples(scale * u.samples)
    peak = float(np.max(np.abs(sig.samples)))
    clipped = config.clip_level is not None and peak > config.clip_level
    if clipped:
        log.warning("predistorted peak %.4g exceeds clip level %.4g", peak, config.clip_level)
    return ApplyResult(sig, out, scale, out.power(), clipped)


def _metrics(i, out, ref, scale, clipped, config) -> DpdIteration:
    return DpdIteration(i, nmse_db(out, ref), block_nmse(out, ref, config.block_size),
                        acpr_db(out, config.channel_bw, config.adjacent_offset), out.power(),
                        scale, clipped)


def run_dpd_loop(pa, x, basis: BasisSpec, frozen_filters,
                 config: DpdConfig = DpdConfig(), label: str = "") -> DpdResult:
    """Iterate fit_inverse / predistort / evaluate, tracking NMSE to ``G x``.

    Stops early once NMSE-to-linear settles (change below
    ``converge_tol_db``) or worsens two iterations in a row; the best
    iteration is kept.
    """
    x = _signal(x)
    frozen = tuple(frozen_filters)
    y0 = pa(x)
    gain, target = linear_reference(x, y0, config.small_signal_fraction)
    ref = x.with_samples(gain * x.samples)
    result = DpdResult(x, y0, ref, gain, target)
    result.baseline = _metrics(0, y0, ref, 1.0, False, config)
    u, y = x, y0
    best = (result.baseline.nmse_db, x, y0, None, 0)
    worse = 0
    for i in range(1, config.iterations + 1):
        inv = fit_inverse(u, y, basis, frozen, config.ridge, gain, label or "inverse")
        session = DpdSession(inv, frozen, target, i)
        if session.frozen_filters != frozen:
            raise AssertionError("state filters changed during DPD")
        applied = predistort(session, x, pa, config)
        u, y = applied.signal, applied.pa_output
        m = _metrics(i, y, ref, applied.scale, applied.clipped, config)
        result.iterations.append(m)
        log.info("dpd %d: NMSE %.3f dB, worst block %.3f dB", i, m.nmse_db, m.block.max_nmse_db)
        if m.nmse_db < best[0]:
            best = (m.nmse_db, u, y, session, i)
        if applied.clipped:
            result.status = "clipped"
        prev = result.iterations[-2].nmse_db if i > 1 else result.baseline.nmse_db
        worse = worse + 1 if m.nmse_db > prev + config.converge_tol_db else 0
        if worse >= 2:
            result.status = "diverged"
            break
        if abs(m.nmse_db - prev) < config.converge_tol_db:
            if result.status == "ok":
                result.status = "converged"
            break
    _, result.signal, result.pa_output, result.session, result.best_iteration = best
    return result
