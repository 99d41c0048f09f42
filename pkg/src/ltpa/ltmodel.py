"""Behavioral model with state-dependent parameters.

``y[n] = H_x[n] . (theta0 + sum_k s_k[n] theta_k)`` where ``H_x`` is the
basis row for sample n and each ``s_k`` is produced by its own state filter.
With no filters this is the classical linear-in-parameters model.

FLOP accounting used by :func:`flop_cost` (per output sample)::

    complex multiply 6, complex add 2, real*complex 2, |x|^2 3, |x| 4

    basis, MP/GMP   |x[n]| once (if any p >= 2), P-2 real multiplies for the
                    power chain, one real*complex per new x|x|^(p-1) product
                    (per distinct (p, e) for GMP); delayed columns are reused
    basis, Volterra (p-1) complex multiplies per kernel term with min delay 0
    dot products    (K+1) * (Q complex multiplies + (Q-1) complex adds)
    state combine   K * (complex multiply + complex add)
    state filters   |x|^2 once when K >= 1; per AR/ARMA filter one complex
                    multiply + one complex add per pole/zero coefficient, plus
                    one complex multiply if DC-normalized; FIR running sum is
                    one add, one subtract, one scale (3)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import textfmt
from .basis import BasisKind, BasisSpec, build_matrix, column_labels, parameter_count
from .errors import FormatError, ModelConsistencyError
from .signal import IqSignal
from .state import FilterKind, StateFilter, compute_state

CMUL, CADD, RCMUL, ABS2, ABS = 6, 2, 2, 3, 4


@dataclass(frozen=True, eq=False)
class LtModel:
    basis: BasisSpec
    theta0: np.ndarray
    state_filters: tuple = ()
    theta_dyn: tuple = ()
    label: str = ""

    def __post_init__(self):
        Q = parameter_count(self.basis)
        filters = tuple(self.state_filters)
        thetas = tuple(np.array(t, dtype=np.complex128).reshape(-1) for t in self.theta_dyn)
        theta0 = np.array(self.theta0, dtype=np.complex128).reshape(-1)
        if theta0.size != Q:
            raise ModelConsistencyError(f"theta0 has {theta0.size} entries, basis {self.basis} "
                                        f"needs {Q}")
        if len(thetas) != len(filters):
            raise ModelConsistencyError(f"{len(filters)} state filters but {len(thetas)} "
                                        f"dynamic parameter vectors")
        for k, t in enumerate(thetas, start=1):
            if t.size != Q:
                raise ModelConsistencyError(f"theta.{k} has {t.size} entries, expected {Q}")
        for f in filters:
            if not isinstance(f, StateFilter):
                raise ModelConsistencyError("state_filters must hold StateFilter objects")
        for t in (theta0,) + thetas:
            t.setflags(write=False)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "state_filters", filters)
        object.__setattr__(self, "theta_dyn", thetas)

    @property
    def n_states(self) -> int:
        return len(self.state_filters)

    def parameter_count(self, include_filters=False) -> int:
        n = (self.n_states + 1) * parameter_count(self.basis)
        if include_filters:
            n += sum(f.n_params for f in self.state_filters)
        return n

    def thetas(self) -> list:
        return [self.theta0, *self.theta_dyn]

    def with_filters(self, filters) -> LtModel:
        return replace(self, state_filters=tuple(filters))

    def with_filter(self, k: int, filt: StateFilter) -> LtModel:
        filters = list(self.state_filters)
        filters[k] = filt
        return self.with_filters(filters)

    def __eq__(self, other):
        if not isinstance(other, LtModel):
            return NotImplemented
        return (self.basis == other.basis and self.label == other.label
                and self.state_filters == other.state_filters
                and len(self.theta_dyn) == len(other.theta_dyn)
                and all(np.array_equal(a, b) for a, b in zip(self.thetas(), other.thetas())))

    __hash__ = None

    def describe(self) -> str:
        if not self.state_filters:
            return str(self.basis)
        return f"LT-{self.basis} + " + " + ".join(f.label() for f in self.state_filters)


def model_terms(model: LtModel, x):
    """``(H, states, parts)`` with ``parts[k] = H @ theta_k`` (k = 0..K)."""
    H = build_matrix(model.basis, x).values
    states = [compute_state(f, x) for f in model.state_filters]
    parts = [H @ t for t in model.thetas()]
    return H, states, parts


def combine(parts, states) -> np.ndarray:
    y = parts[0].copy()
    for s, u in zip(states, parts[1:]):
        y += s * u
    return y


def predict_samples(model: LtModel, x) -> np.ndarray:
    _, states, parts = model_terms(model, x)
    return combine(parts, states)


def predict(model: LtModel, x: IqSignal) -> IqSignal:
    """Model output for input ``x`` (same length and sample rate)."""
    return x.with_samples(predict_samples(model, x))


def _basis_flops(spec: BasisSpec) -> int:
    if spec.kind is BasisKind.VOLTERRA:
        return sum((p - 1) * CMUL for p, a, b in column_labels(spec) if min(a + b) == 0)
    hi = [p for p in spec.orders() if p >= 2]
    if not hi:
        return 0
    cost = ABS + max(0, max(hi) - 2)
    products = {(lab[0], lab[2] if len(lab) == 3 else 0)
                for lab in column_labels(spec) if lab[0] >= 2}
    return cost + RCMUL * len(products)


def _filter_flops(f: StateFilter) -> int:
    if f.kind is FilterKind.FIR:
        return 3
    return f.n_params * (CMUL + CADD) + (CMUL if f.normalized else 0)


def flop_cost(model: LtModel) -> int:
    """Floating-point operations per output sample (see module docstring)."""
    Q = parameter_count(model.basis)
    K = model.n_states
    cost = _basis_flops(model.basis)
    cost += (K + 1) * (Q * CMUL + (Q - 1) * CADD)
    cost += K * (CMUL + CADD)
    if K:
        cost += ABS2 + sum(_filter_flops(f) for f in model.state_filters)
    return cost


# --- serialization -----------------------------------------------------------

def basis_keys(spec: BasisSpec) -> dict:
    return {"kind": spec.kind.value, "order": spec.order, "memory": spec.memory,
            "cross": spec.cross, "odd_only": str(spec.odd_only).lower(),
            "columns": parameter_count(spec)}


def filter_sections(doc: textfmt.Document, name: str, f: StateFilter) -> None:
    doc.section(name, {"kind": f.kind.value, "window": f.window,
                       "normalized": str(f.normalized).lower(),
                       "initial_state": textfmt.fmt_complex(f.initial_state),
                       "poles": len(f.alpha), "zeros": len(f.beta)})
    if f.alpha:
        doc.section(f"{name}.alpha", {"length": len(f.alpha)}, f.alpha)
    if f.beta:
        doc.section(f"{name}.beta", {"length": len(f.beta)}, f.beta)


def model_document(model: LtModel) -> textfmt.Document:
    doc = textfmt.Document("model")
    doc.top["label"] = model.label
    doc.top["states"] = model.n_states
    doc.section("basis", basis_keys(model.basis))
    doc.section("basis.columns", {str(j): _label_text(lab)
                                  for j, lab in enumerate(column_labels(model.basis))})
    for k, f in enumerate(model.state_filters, start=1):
        filter_sections(doc, f"state_filter.{k}", f)
    for k, t in enumerate(model.thetas()):
        doc.section(f"theta.{k}", {"length": t.size}, t)
    return doc


def _label_text(label) -> str:
    # delay tuples are comma-joined; an empty one (linear Volterra term) is "-"
    return " ".join((",".join(map(str, v)) or "-") if isinstance(v, tuple) else str(v)
                    for v in label)


def dumps_model(model: LtModel) -> str:
    return model_document(model).to_text()


def save_model(model: LtModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def _parse_bool(text, where) -> bool:
    if text not in ("true", "false"):
        raise FormatError(f"{where}: expected true/false, got {text!r}")
    return text == "true"


def _parse_int(text, where) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: expected integer, got {text!r}") from None


def parse_basis(sec: textfmt.Section) -> BasisSpec:
    where = f"[{sec.name}]"
    try:
        spec = BasisSpec(BasisKind(sec.require("kind")),
                         _parse_int(sec.require("order"), where),
                         _parse_int(sec.require("memory"), where),
                         _parse_int(sec.get("cross", "0"), where),
                         _parse_bool(sec.get("odd_only", "false"), where))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{where}: {exc}") from None
    if "columns" in sec.keys and _parse_int(sec.keys["columns"], where) != parameter_count(spec):
        raise FormatError(f"{where}: declares {sec.keys['columns']} columns, "
                          f"{spec} has {parameter_count(spec)}")
    return spec


def parse_filter(sections: dict, name: str) -> StateFilter:
    sec = sections[name]
    where = f"[{name}]"
    poles = _parse_int(sec.get("poles", "0"), where)
    zeros = _parse_int(sec.get("zeros", "0"), where)
    alpha = sections[f"{name}.alpha"].array() if poles else np.zeros(0)
    beta = sections[f"{name}.beta"].array() if zeros else np.zeros(0)
    if alpha.size != poles or beta.size != zeros:
        raise FormatError(f"{where}: pole/zero counts disagree with their arrays")
    for part in ("alpha", "beta"):
        if f"{name}.{part}" in sections and not (poles if part == "alpha" else zeros):
            raise FormatError(f"{where}: has [{name}.{part}] but declares none")
    try:
        return StateFilter(FilterKind(sec.require("kind")),
                           window=_parse_int(sec.get("window", "1"), where),
                           alpha=alpha, beta=beta,
                           initial_state=textfmt.parse_complex(
                               sec.get("initial_state", "0 0"), where),
                           normalized=_parse_bool(sec.get("normalized", "false"), where))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{where}: {exc}") from None


def _numbered(sections: dict, prefix: str) -> list:
    out = []
    for name in sections:
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            out.append(int(name[len(prefix):]))
    return sorted(out)


def model_from_sections(top: textfmt.Section, sections: dict) -> LtModel:
    if "basis" not in sections:
        raise FormatError("model file lacks a [basis] section")
    basis = parse_basis(sections["basis"])
    if "basis.columns" in sections:
        cols = sections["basis.columns"].keys
        want = {str(j): _label_text(lab) for j, lab in enumerate(column_labels(basis))}
        if cols != want:
            raise FormatError(f"[basis.columns] does not match the column layout of {basis}")
    f_idx = _numbered(sections, "state_filter.")
    t_idx = _numbered(sections, "theta.")
    if 0 not in t_idx:
        raise FormatError("model file lacks [theta.0]")
    K = len(f_idx)
    if "states" in top.keys and _parse_int(top.keys["states"], "header") != K:
        raise FormatError(f"header declares {top.keys['states']} states but file has "
                          f"{K} state_filter sections")
    if f_idx != list(range(1, K + 1)):
        raise FormatError(f"state_filter sections must be numbered 1..{K}, got {f_idx}")
    if t_idx != list(range(K + 1)):
        raise FormatError(f"{K} state filters need theta.0..theta.{K}, found "
                          f"{['theta.%d' % i for i in t_idx]}")
    filters = [parse_filter(sections, f"state_filter.{k}") for k in f_idx]
    thetas = [sections[f"theta.{k}"].array() for k in t_idx]
    try:
        return LtModel(basis, thetas[0], tuple(filters), tuple(thetas[1:]),
                       label=top.keys.get("label", ""))
    except ModelConsistencyError as exc:
        raise FormatError(str(exc)) from None


def loads_model(text: str) -> LtModel:
    top, sections = textfmt.parse(text, "model")
    return model_from_sections(top, sections)


def load_model(path) -> LtModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"model file is not UTF-8 text: {exc}") from None
    return loads_model(text)


# --- standalone filter files (two-tone initialization output) ----------------

def dumps_filter(f: StateFilter) -> str:
    doc = textfmt.Document("filter")
    filter_sections(doc, "state_filter.1", f)
    return doc.to_text()


def loads_filter(text: str) -> StateFilter:
    _, sections = textfmt.parse(text, "filter")
    if "state_filter.1" not in sections:
        raise FormatError("filter file lacks [state_filter.1]")
    return parse_filter(sections, "state_filter.1")
