"""Iterative identification: least squares for theta, damped Gauss-Newton for filters.

Each outer iteration computes the states from the current filters, solves
for all theta vectors in one least-squares problem over ``[H, S_1 H, ...]``,
and then, with theta frozen, runs Gauss-Newton on one filter at a time
(greedy order).  The Jacobian of the output w.r.t. a filter's
``[alpha, beta]`` is ``ds/dparam * (H theta_k)``, with ``ds/dparam``
obtained recursively (see :func:`ltpa.state.state_derivatives`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import textfmt
from .basis import BasisSpec, build_matrix, parameter_count
from .errors import FitError, NumericalError
from .ltmodel import LtModel, combine
from .metrics import nmse_db
from .signal import as_samples
from .state import StateFilter, compute_state, state_derivatives

log = logging.getLogger(__name__)

MAX_HALVINGS = 40


@dataclass(frozen=True)
class FitConfig:
    lam: float = 0.4
    max_outer_iters: int = 20
    max_gn_iters: int = 50
    outer_tol: float = 0.01
    gn_tol: float = 1e-6
    ridge: float = 0.0
    allow_complex_poles: bool = False
    divergence_patience: int = 3

    def __post_init__(self):
        if not (0 < self.lam <= 1):
            raise ValueError("dampening lambda must be in (0, 1]")
        if self.outer_tol <= 0 or self.gn_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.max_outer_iters < 1 or self.max_gn_iters < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class OuterStep:
    iteration: int
    nmse_db: float
    filter_params: list


@dataclass
class FitReport:
    outer_trace: list = field(default_factory=list)
    gn_traces: list = field(default_factory=list)
    converged: bool = False
    final_model: LtModel | None = None
    status: str = "running"
    config: FitConfig | None = None

    def gn_steps(self) -> list:
        """Gauss-Newton step counts, one list (per filter) per outer iteration."""
        return [[len(t) - 1 for t in outer] for outer in self.gn_traces]

    @property
    def final_nmse_db(self) -> float:
        return min(step.nmse_db for step in self.outer_trace)

    def to_text(self) -> str:
        doc = textfmt.Document("fit-report")
        doc.top["status"] = self.status
        doc.top["converged"] = str(self.converged).lower()
        doc.top["outer_iterations"] = len(self.outer_trace)
        if self.outer_trace:
            doc.top["final_nmse_db"] = textfmt.fmt_float(self.final_nmse_db)
        if self.final_model is not None:
            doc.top["model"] = self.final_model.describe()
        if self.config is not None:
            cfg = self.config
            doc.section("config", {"lambda": textfmt.fmt_float(cfg.lam),
                                   "max_outer_iters": cfg.max_outer_iters,
                                   "max_gn_iters": cfg.max_gn_iters,
                                   "outer_tol_db": textfmt.fmt_float(cfg.outer_tol),
                                   "gn_tol": textfmt.fmt_float(cfg.gn_tol),
                                   "ridge": textfmt.fmt_float(cfg.ridge),
                                   "allow_complex_poles": str(cfg.allow_complex_poles).lower()})
        steps = self.gn_steps()
        in_target = [4 <= n <= 6 for outer in steps for n in outer]
        doc.section("gn_soft_target", {
            "range": "4-6",
            "steps_per_outer": " ".join("/".join(map(str, o)) for o in steps) or "-",
            "fraction_within": textfmt.fmt_float(np.mean(in_target)) if in_target else "nan"})
        for step in self.outer_trace:
            keys = {"nmse_db": textfmt.fmt_float(step.nmse_db)}
            for k, p in enumerate(step.filter_params, start=1):
                keys[f"filter.{k}"] = "; ".join(textfmt.fmt_complex(v) for v in p)
            doc.section(f"outer.{step.iteration}", keys)
        for i, outer in enumerate(self.gn_traces):
            for k, trace in enumerate(outer, start=1):
                doc.section(f"gn.{i}.{k}", {"steps": len(trace) - 1},
                            [p[0] for p in trace])
        return doc.to_text()

    def convergence_csv(self) -> str:
        cols = ["iteration", "nmse_db"]
        if self.outer_trace:
            for k, p in enumerate(self.outer_trace[0].filter_params, start=1):
                for j in range(len(p)):
                    cols += [f"filter{k}_p{j}_re", f"filter{k}_p{j}_im"]
        lines = [",".join(cols)]
        for step in self.outer_trace:
            vals = [f"{v.real:.17g},{v.imag:.17g}" for p in step.filter_params for v in p]
            lines.append(",".join([str(step.iteration), f"{step.nmse_db:.6f}", *vals]))
        return "\n".join(lines) + "\n"


def _lstsq(A: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """Column-equilibrated least squares with optional ridge term."""
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        bad = np.flatnonzero(scale == 0).tolist()
        if ridge == 0:
            raise NumericalError(f"regression columns {bad} are identically zero",
                                 condition=np.inf)
        scale[scale == 0] = 1.0
    As = A / scale
    if ridge > 0:
        # ridge acts on the equilibrated problem so it is scale-free
        n = As.shape[1]
        G = As.conj().T @ As + ridge * np.eye(n)
        theta_s = np.linalg.solve(G, As.conj().T @ y)
        return theta_s / scale
    theta_s, _, rank, sv = np.linalg.lstsq(As, y, rcond=None)
    if rank < As.shape[1]:
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        raise NumericalError(f"rank-deficient regression ({rank} of {As.shape[1]} columns); "
                             "add ridge regularization", condition=cond)
    return theta_s / scale


def regression_matrix(H: np.ndarray, states) -> np.ndarray:
    return np.hstack([H] + [np.asarray(s)[:, None] * H for s in states])


def solve_theta(basis: BasisSpec, states, x, y_meas, ridge: float = 0.0,
                H: np.ndarray | None = None) -> list:
    """Least-squares ``[theta0, theta1, ..., thetaK]`` for fixed states."""
    x = as_samples(x)
    y = as_samples(y_meas)
    if y.size != x.size or any(np.size(s) != x.size for s in states):
        raise ValueError("input, output and states must have equal lengths")
    Q = parameter_count(basis)
    if x.size < Q * (len(states) + 1):
        raise ValueError(f"{x.size} samples cannot determine {Q * (len(states) + 1)} parameters")
    if H is None:
        H = build_matrix(basis, x).values
    theta = _lstsq(regression_matrix(H, states), y, ridge)
    return [theta[k * Q:(k + 1) * Q] for k in range(len(states) + 1)]


def _gn_update(filt: StateFilter, x, rest, u, y, lam, allow_complex):
    """One damped Gauss-Newton step for ``filt`` with everything else fixed.

    ``rest`` is the model output without this filter's term and ``u`` is
    ``H theta_k``.  Returns the new filter and the undamped step.
    """
    s, ds = state_derivatives(filt, x)
    r = y - rest - s * u
    J = ds * u[:, None]
    if allow_complex:
        step, _, rank, sv = np.linalg.lstsq(J, r, rcond=None)
    else:
        Jr = np.vstack([J.real, J.imag])
        rr = np.concatenate([r.real, r.imag])
        step, _, rank, sv = np.linalg.lstsq(Jr, rr, rcond=None)
    if rank < J.shape[1]:
        cond = sv[0] / sv[-1] if sv.size and sv[-1] > 0 else np.inf
        raise NumericalError("singular Gauss-Newton normal matrix", condition=cond)
    p = filt.params()
    if not allow_complex:
        p = p.real
    damp = lam
    for _ in range(MAX_HALVINGS):
        try:
            return filt.with_params(p + damp * step), step
        except ValueError:
            damp /= 2
            log.debug("Gauss-Newton step left the stability region; lambda -> %g", damp)
    return filt, step


def jacobian(model: LtModel, x, index: int = 0) -> np.ndarray:
    """``dy/d[alpha, beta]`` of filter ``index`` (columns), computed recursively."""
    H = build_matrix(model.basis, x).values
    u = H @ model.theta_dyn[index]
    _, ds = state_derivatives(model.state_filters[index], x)
    return ds * u[:, None]


def gn_step(model: LtModel, x, y_meas, lam: float = 0.4, index: int = 0,
            allow_complex: bool = False) -> StateFilter:
    """One damped Gauss-Newton update of filter ``index`` with theta fixed."""
    x = as_samples(x)
    y = as_samples(y_meas)
    H = build_matrix(model.basis, x).values
    parts = [H @ t for t in model.thetas()]
    states = [compute_state(f, x) for f in model.state_filters]
    rest = parts[0].copy()
    for j, (s, u) in enumerate(zip(states, parts[1:])):
        if j != index:
            rest += s * u
    new, _ = _gn_update(model.state_filters[index], x, rest, parts[index + 1], y, lam,
                        allow_complex)
    return new


def _params_of(filters) -> list:
    return [f.params() for f in filters]


def fit(basis: BasisSpec, filters_init, x, y_meas, config: FitConfig = FitConfig(),
        label: str = "") -> FitReport:
    """Alternate LS for theta and greedy Gauss-Newton for each state filter.

    Stops when the NMSE changes by less than ``outer_tol`` dB between outer
    iterations, or when a full Gauss-Newton sweep leaves every filter
    parameter unchanged to within ``gn_tol`` (a fixed point).  NMSE getting
    worse ``divergence_patience`` times in a row raises :class:`FitError`
    carrying the best model so far.
    """
    xs = as_samples(x)
    y = as_samples(y_meas)
    if xs.size != y.size:
        raise ValueError("input and output records must be aligned and of equal length")
    filters = list(filters_init)
    H = build_matrix(basis, xs).values
    report = FitReport(config=config)
    best = None
    prev_nmse = None
    worse = 0
    for it in range(config.max_outer_iters):
        states = [compute_state(f, xs) for f in filters]
        thetas = solve_theta(basis, states, xs, y, config.ridge, H=H)
        model = LtModel(basis, thetas[0], tuple(filters), tuple(thetas[1:]), label)
        parts = [H @ t for t in thetas]
        nm = nmse_db(combine(parts, states), y)
        report.outer_trace.append(OuterStep(it, nm, _params_of(filters)))
        log.info("outer %d: NMSE %.3f dB", it, nm)
        if best is None or nm < best[0]:
            best = (nm, model)
        if prev_nmse is not None:
            worse = worse + 1 if nm > prev_nmse else 0
            if worse >= config.divergence_patience:
                report.status = "diverged"
                report.final_model = best[1]
                raise FitError(f"NMSE worsened {worse} outer iterations in a row",
                               best_model=best[1], report=report)
            if abs(prev_nmse - nm) < config.outer_tol:
                report.converged = True
                break
        if not filters:
            report.converged = True
            break
        prev_nmse = nm

        sweep = []
        moved = False
        for k in range(len(filters)):
            rest = parts[0].copy()
            for j, (s, u) in enumerate(zip(states, parts[1:])):
                if j != k:
                    rest += s * u
            trace = [filters[k].params()]
            for _ in range(config.max_gn_iters):
                old = filters[k].params()
                filters[k], _ = _gn_update(filters[k], xs, rest, parts[k + 1], y,
                                           config.lam, config.allow_complex_poles)
                new = filters[k].params()
                trace.append(new)
                if np.linalg.norm(new - old) <= config.gn_tol * max(np.linalg.norm(old), 1e-300):
                    break
            if np.linalg.norm(trace[-1] - trace[0]) > \
                    config.gn_tol * max(np.linalg.norm(trace[0]), 1e-300):
                moved = True
            # later filters see the updated state of this one
            states[k] = compute_state(filters[k], xs)
            sweep.append(trace)
        report.gn_traces.append(sweep)
        if not moved:
            report.converged = True
            # theta for the (unchanged) filters is already the LS solution
            break
    report.final_model = best[1]
    report.status = "converged" if report.converged else "max_iterations"
    return report
