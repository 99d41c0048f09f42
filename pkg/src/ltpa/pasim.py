"""Synthetic power amplifier with known ground truth, used as a verification oracle.

The shipped fixture (``default_doherty_like``) is an odd-order MP(5,2) device with
mild compression and a DC-normalized AR(1) long-term state (alpha = 0.9995,
memory ~2000 samples).  ``||theta1|| = 0.05 ||theta0||`` with the state in
input-power units; at the nominal drive (loudest segment RMS 0.3) the
settled state is 0.09, so the high-power gain drifts by ~0.45 %.  Changing
any constant requires bumping ``FIXTURE_VERSION`` and regenerating
``data/default_doherty_like.model``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import textfmt
from .basis import BasisSpec, column_labels
from .errors import FormatError
from .ltmodel import LtModel, model_document, model_from_sections, predict_samples
from .signal import IqSignal
from .state import StateFilter

FIXTURE_VERSION = 1
FIXTURE_FILE = "default_doherty_like.model"
NOMINAL_RMS = 0.3
FIXTURE_ALPHA = 0.9995
FAST_ALPHA = 0.99

# (p, m) -> theta0 coefficient of the odd-order MP(5,2) fixture.  Even orders
# are left out: s * x is nearly collinear with |x|^2 x on bursty data, and
# even terms add more such pairs, which makes theta1 poorly determined.
_THETA0 = {
    (1, 0): 0.98 + 0.12j, (3, 0): -0.15 + 0.05j, (5, 0): 0.03 - 0.01j,
    (1, 1): 0.08 - 0.04j, (3, 1): -0.02 + 0.01j, (5, 1): 0.005,
    (1, 2): -0.03 + 0.02j, (3, 2): 0.01 - 0.005j,
}
_THETA1_ROTATION = np.exp(2.6j)
_THETA1_RATIO = 0.05
_THETA2_RATIO = 0.03


@dataclass(frozen=True)
class SyntheticPa:
    true_model: LtModel
    noise_floor_dbc: float | None = -60.0
    clip_level: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_floor_dbc is not None and not self.noise_floor_dbc < 0:
            raise ValueError("noise_floor_dbc must be negative (or None to disable)")
        if self.clip_level is not None and not self.clip_level > 0:
            raise ValueError("clip_level must be positive")

    def evaluate(self, x: IqSignal) -> IqSignal:
        return evaluate(self, x)

    def noiseless(self) -> SyntheticPa:
        return replace(self, noise_floor_dbc=None)


def soft_clip(y: np.ndarray, level: float, smoothness: float = 2.0) -> np.ndarray:
    """Rapp-style saturation ``y / (1 + (|y|/level)^(2k))^(1/(2k))``."""
    r = np.abs(y) / level
    return y / (1 + r ** (2 * smoothness)) ** (1 / (2 * smoothness))


def evaluate(pa: SyntheticPa, x: IqSignal) -> IqSignal:
    """PA output: model prediction, optional soft clip, then seeded AWGN."""
    y = predict_samples(pa.true_model, x)
    if pa.clip_level is not None:
        y = soft_clip(y, pa.clip_level)
    if pa.noise_floor_dbc is not None:
        rng = np.random.default_rng(pa.seed)
        p = np.mean(np.abs(y) ** 2) * 10 ** (pa.noise_floor_dbc / 10)
        y = y + np.sqrt(p / 2) * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return x.with_samples(y)


def _theta0(spec: BasisSpec) -> np.ndarray:
    return np.array([_THETA0.get(lab[:2], 0) if len(lab) == 2 or lab[2] == 0 else 0
                     for lab in column_labels(spec)], dtype=np.complex128)


def _fixture_thetas(spec: BasisSpec):
    t0 = _theta0(spec)
    t1 = _THETA1_RATIO * _THETA1_ROTATION * t0
    return t0, t1


def build_default_doherty_like() -> SyntheticPa:
    spec = BasisSpec.mp(5, 2, odd_only=True)
    t0, t1 = _fixture_thetas(spec)
    model = LtModel(spec, t0, (StateFilter.ar(FIXTURE_ALPHA, normalized=True),), (t1,),
                    label=f"default_doherty_like v{FIXTURE_VERSION}")
    return SyntheticPa(model, noise_floor_dbc=-60.0, clip_level=None, seed=2024)


def default_doherty_like() -> SyntheticPa:
    """The committed golden fixture (loaded from the packaged model file)."""
    text = resources.files("ltpa").joinpath("data", FIXTURE_FILE).read_text(encoding="utf-8")
    return loads_pa(text)


def two_state_pa(noise_floor_dbc: float | None = -60.0, seed: int = 2025) -> SyntheticPa:
    """Fixture plus a fast second state (alpha 0.99, ~100 samples).

    The fast state mostly modulates the compression terms.
    """
    base = build_default_doherty_like().true_model
    spec = base.basis
    t0 = base.theta0
    weight = np.array([0.3 if lab[0] == 1 else 1.0 for lab in column_labels(spec)])
    shape = t0 * weight * np.exp(-0.7j)
    t2 = _THETA2_RATIO * np.linalg.norm(t0) * shape / np.linalg.norm(shape)
    model = LtModel(spec, t0,
                    base.state_filters + (StateFilter.ar(FAST_ALPHA, normalized=True),),
                    base.theta_dyn + (t2,), label="two_state")
    return SyntheticPa(model, noise_floor_dbc=noise_floor_dbc, seed=seed)


def mismatched_pa(noise_floor_dbc: float | None = -60.0, seed: int = 2026) -> SyntheticPa:
    """Fixture with an extra third-order lagging-envelope term outside the MP basis."""
    spec = BasisSpec.gmp(5, 2, 1, odd_only=True)
    t0, t1 = _fixture_thetas(spec)
    extra = column_labels(spec).index((3, 0, 1))
    t0 = t0.copy()
    t0[extra] = -0.02 + 0.01j
    model = LtModel(spec, t0, (StateFilter.ar(FIXTURE_ALPHA, normalized=True),), (t1,),
                    label="mismatched")
    return SyntheticPa(model, noise_floor_dbc=noise_floor_dbc, seed=seed)


def dumps_pa(pa: SyntheticPa) -> str:
    doc = model_document(pa.true_model)
    doc.section("pasim", {
        "fixture_version": FIXTURE_VERSION,
        "noise_floor_dbc": "off" if pa.noise_floor_dbc is None
        else textfmt.fmt_float(pa.noise_floor_dbc),
        "clip_level": "off" if pa.clip_level is None else textfmt.fmt_float(pa.clip_level),
        "seed": pa.seed,
    })
    return doc.to_text()


def loads_pa(text: str) -> SyntheticPa:
    top, sections = textfmt.parse(text, "model")
    model = model_from_sections(top, sections)
    sec = sections.get("pasim")
    if sec is None:
        return SyntheticPa(model, noise_floor_dbc=None)

    def opt(key):
        v = sec.get(key, "off")
        return None if v == "off" else textfmt.parse_float(v, f"[pasim] {key}")

    try:
        return SyntheticPa(model, opt("noise_floor_dbc"), opt("clip_level"),
                           int(sec.get("seed", "0")))
    except ValueError as exc:
        raise FormatError(f"[pasim]: {exc}") from None


def save_pa(pa: SyntheticPa, path) -> None:
    Path(path).write_text(dumps_pa(pa), encoding="utf-8")


def load_pa(path) -> SyntheticPa:
    return loads_pa(Path(path).read_text(encoding="utf-8"))
