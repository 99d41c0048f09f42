"""Regression matrices for MP, GMP and pruned Volterra behavioral models.

Column conventions (samples before index 0 are zero):

* MP(P, M): ``x[n-m] |x[n-m]|^(p-1)`` for m = 0..M (outer), p = 1..P (inner).
  Label ``(p, m)``.
* GMP(P, M, G): the MP block, then for g = 1..G the lagging envelope terms
  ``x[n-m] |x[n-m-g]|^(p-1)`` followed by the leading ones
  ``x[n-m] |x[n-m+g]|^(p-1)``, p >= 2 only (p = 1 would duplicate MP columns).
  Label ``(p, m, e)`` where the envelope sits at delay ``m + e``
  (``e = 0`` for MP terms, ``+g`` lagging, ``-g`` leading).
  Count: ``|orders| (M+1) + 2 G |orders >= 2| (M+1)``.
* VOLTERRA(P, M): baseband Volterra terms of odd order p = 2k+1,
  ``prod_{i<=k+1} x[n-a_i] prod_{j<=k} conj(x[n-b_j])`` with sorted delay
  multisets ``a``, ``b`` in 0..M, pruned to kernels whose delays span at
  most one sample (diagonal plus first off-diagonal).  Label ``(p, a, b)``.
  Volterra(7, 1) gives 40 columns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .signal import as_samples


class BasisKind(str, Enum):
    MP = "mp"
    GMP = "gmp"
    VOLTERRA = "volterra"


@dataclass(frozen=True)
class BasisSpec:
    kind: BasisKind
    order: int
    memory: int
    cross: int = 0
    odd_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("nonlinear order P must be a positive integer")
        if int(self.memory) != self.memory or self.memory < 0:
            raise ValueError("memory depth M must be a nonnegative integer")
        if int(self.cross) != self.cross or self.cross < 0:
            raise ValueError("cross depth G must be a nonnegative integer")
        if self.cross and self.kind is not BasisKind.GMP:
            raise ValueError("cross depth G is only meaningful for GMP")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "memory", int(self.memory))
        object.__setattr__(self, "cross", int(self.cross))
        object.__setattr__(self, "odd_only", bool(self.odd_only))

    @classmethod
    def mp(cls, order, memory, odd_only=False):
        return cls(BasisKind.MP, order, memory, 0, odd_only)

    @classmethod
    def gmp(cls, order, memory, cross, odd_only=False):
        return cls(BasisKind.GMP, order, memory, cross, odd_only)

    @classmethod
    def volterra(cls, order, memory):
        return cls(BasisKind.VOLTERRA, order, memory)

    def orders(self) -> list:
        step = 2 if self.odd_only or self.kind is BasisKind.VOLTERRA else 1
        return list(range(1, self.order + 1, step))

    def __str__(self):
        args = [self.order, self.memory] + ([self.cross] if self.kind is BasisKind.GMP else [])
        name = {"mp": "MP", "gmp": "GMP", "volterra": "Volterra"}[self.kind.value]
        return f"{name}({','.join(map(str, args))})" + ("o" if self.odd_only else "")


def column_labels(spec: BasisSpec) -> tuple:
    return _labels(spec)


@lru_cache(maxsize=128)
def _labels(spec: BasisSpec) -> tuple:
    M = spec.memory
    if spec.kind is BasisKind.MP:
        return tuple((p, m) for m in range(M + 1) for p in spec.orders())
    if spec.kind is BasisKind.GMP:
        labels = [(p, m, 0) for m in range(M + 1) for p in spec.orders()]
        hi = [p for p in spec.orders() if p >= 2]
        for g in range(1, spec.cross + 1):
            for e in (g, -g):
                labels += [(p, m, e) for m in range(M + 1) for p in hi]
        return tuple(labels)
    labels = []
    for p in spec.orders():
        k = (p - 1) // 2
        for a in itertools.combinations_with_replacement(range(M + 1), k + 1):
            for b in itertools.combinations_with_replacement(range(M + 1), k):
                delays = a + b
                if max(delays) - min(delays) <= 1:
                    labels.append((p, a, b))
    return tuple(labels)


def parameter_count(spec: BasisSpec) -> int:
    """Number of regression columns (model parameters) for ``spec``."""
    n_taps = spec.memory + 1
    n_orders = len(spec.orders())
    if spec.kind is BasisKind.MP:
        return n_orders * n_taps
    if spec.kind is BasisKind.GMP:
        n_hi = sum(1 for p in spec.orders() if p >= 2)
        return n_orders * n_taps + 2 * spec.cross * n_hi * n_taps
    return len(_labels(spec))


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    values: np.ndarray
    column_labels: tuple

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def delay(x: np.ndarray, d: int) -> np.ndarray:
    """``x[n-d]`` with zeros outside the record; negative ``d`` advances."""
    out = np.zeros_like(x)
    if d == 0:
        out[:] = x
    elif 0 < d < x.size:
        out[d:] = x[:-d]
    elif -x.size < d < 0:
        out[:d] = x[-d:]
    return out


def build_matrix(spec: BasisSpec, x) -> BasisMatrix:
    """Regression matrix ``H_x`` (rows = samples, columns per ``column_labels``)."""
    x = as_samples(x)
    if x.ndim != 1:
        raise ValueError("input must be one-dimensional")
    if x.size < spec.memory + 1:
        raise ValueError(f"signal of length {x.size} is shorter than memory depth "
                         f"{spec.memory} + 1")
    labels = _labels(spec)
    H = np.empty((x.size, len(labels)), dtype=np.complex128)
    if spec.kind is BasisKind.VOLTERRA:
        lagged = {m: delay(x, m) for m in range(spec.memory + 1)}
        conj = {m: v.conj() for m, v in lagged.items()}
        for j, (p, a, b) in enumerate(labels):
            col = np.ones(x.size, dtype=np.complex128)
            for m in a:
                col *= lagged[m]
            for m in b:
                col *= conj[m]
            H[:, j] = col
        return BasisMatrix(H, labels)

    mag = np.abs(x)
    # env[p] = |x|^(p-1) at zero delay; delays applied per column.
    env = {p: mag ** (p - 1) for p in spec.orders()}
    lagged = {}
    for j, lab in enumerate(labels):
        p, m = lab[0], lab[1]
        e = lab[2] if len(lab) == 3 else 0
        if m not in lagged:
            lagged[m] = delay(x, m)
        if p == 1:
            H[:, j] = lagged[m]
        else:
            H[:, j] = lagged[m] * delay(env[p], m + e)
    return BasisMatrix(H, labels)
