"""Model-quality metrics: NMSE, block-wise NMSE, ACEPR/ACPR and error spectra.

Spectral settings: Welch periodogram, Hann window, 4096-sample segments,
50 % overlap, two-sided.  The in-channel band is centred at DC with width
``channel_bw`` (fraction of the sample rate); adjacent bands have the same
width and are centred at ``+/- adjacent_offset``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .signal import IqSignal, as_samples

NMSE_FLOOR_DB = -300.0
DEFAULT_BLOCK = 4000
DEFAULT_SKIP = 2
DEFAULT_NPERSEG = 4096


def _db(ratio: float) -> float:
    if ratio <= 0:
        return NMSE_FLOOR_DB
    return max(10 * np.log10(ratio), NMSE_FLOOR_DB)


def _pair(y_model, y_meas):
    a, b = as_samples(y_model), as_samples(y_meas)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty signals")
    return a, b


def nmse_db(y_model, y_meas) -> float:
    """``10 log10(sum|y_meas - y_model|^2 / sum|y_meas|^2)``; -300 dB floor."""
    a, b = _pair(y_model, y_meas)
    ref = np.sum(np.abs(b) ** 2)
    if ref == 0:
        raise ValueError("reference signal has zero power")
    return _db(np.sum(np.abs(b - a) ** 2) / ref)


@dataclass(frozen=True)
class BlockNmseProfile:
    block_size: int
    per_block_nmse_db: tuple
    skip_initial_blocks: int
    max_nmse_db: float
    worst_block: int

    def to_csv(self, sample_rate=None) -> str:
        lines = ["block,start_sample,time_s,nmse_db,skipped"]
        for i, v in enumerate(self.per_block_nmse_db):
            start = i * self.block_size
            t = "" if sample_rate is None else format(start / sample_rate, ".9g")
            lines.append(f"{i},{start},{t},{v:.6f},{int(i < self.skip_initial_blocks)}")
        return "\n".join(lines) + "\n"


def block_nmse(y_model, y_meas, block_size: int = DEFAULT_BLOCK,
               skip_initial: int = DEFAULT_SKIP) -> BlockNmseProfile:
    """Per-block MSE normalized by the whole-record reference power.

    A trailing partial block is kept and averaged over its own length.
    ``max_nmse_db`` is taken over blocks after the first ``skip_initial``
    (all blocks if that would leave none).
    """
    a, b = _pair(y_model, y_meas)
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    if a.size < block_size:
        raise ValueError("record is shorter than one block")
    if skip_initial < 0:
        raise ValueError("skip_initial must be >= 0")
    ref = np.mean(np.abs(b) ** 2)
    if ref == 0:
        raise ValueError("reference signal has zero power")
    err = np.abs(b - a) ** 2
    starts = range(0, a.size, block_size)
    vals = tuple(_db(np.mean(err[i:i + block_size]) / ref) for i in starts)
    skip = skip_initial if skip_initial < len(vals) else 0
    worst = skip + int(np.argmax(vals[skip:]))
    return BlockNmseProfile(block_size, vals, skip, vals[worst], worst)


@dataclass(frozen=True)
class Psd:
    """Two-sided power spectral density, frequencies ascending from -fs/2."""

    freqs_hz: np.ndarray
    psd: np.ndarray

    @property
    def df(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0]) if self.freqs_hz.size > 1 else 1.0

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.df)

    def psd_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = 10 * np.log10(self.psd)
        return np.maximum(out, NMSE_FLOOR_DB)

    def to_csv(self) -> str:
        lines = ["frequency_hz,psd_db"]
        lines += [f"{f:.6f},{v:.6f}" for f, v in zip(self.freqs_hz, self.psd_db())]
        return "\n".join(lines) + "\n"


def welch_psd(x, sample_rate: float = 1.0, nperseg: int = DEFAULT_NPERSEG) -> Psd:
    x = as_samples(x)
    n = min(nperseg, x.size)
    f, p = scipy.signal.welch(x, fs=sample_rate, window="hann", nperseg=n,
                              noverlap=n // 2, return_onesided=False, detrend=False,
                              scaling="density")
    order = np.argsort(f)
    return Psd(f[order], p[order])


def _rate(*sigs) -> float:
    for s in sigs:
        if isinstance(s, IqSignal):
            return s.sample_rate
    return 1.0


def _check_bands(channel_bw: float, adjacent_offset: float) -> None:
    if channel_bw <= 0:
        raise ValueError("channel_bw must be positive")
    if adjacent_offset < channel_bw:
        raise ValueError("adjacent bands overlap the main channel "
                         f"(offset {adjacent_offset} < bandwidth {channel_bw})")
    if adjacent_offset + channel_bw / 2 > 0.5:
        raise ValueError("adjacent band extends beyond Nyquist")


def _band_power(psd: Psd, rate: float, center: float, width: float) -> float:
    f = psd.freqs_hz / rate
    mask = np.abs(f - center) <= width / 2
    return float(np.sum(psd.psd[mask]) * psd.df)


def acpr_db(y, channel_bw: float, adjacent_offset: float,
            nperseg: int = DEFAULT_NPERSEG) -> float:
    """Worst adjacent-band power over in-channel power of ``y``."""
    _check_bands(channel_bw, adjacent_offset)
    rate = _rate(y)
    psd = welch_psd(y, rate, nperseg)
    main = _band_power(psd, rate, 0.0, channel_bw)
    if main == 0:
        raise ValueError("signal has no in-channel power")
    adj = max(_band_power(psd, rate, c, channel_bw) for c in (-adjacent_offset, adjacent_offset))
    return _db(adj / main)


def acepr_db(y_model, y_meas, channel_bw: float, adjacent_offset: float,
             nperseg: int = DEFAULT_NPERSEG) -> float:
    """Worst adjacent-band error power over in-channel measured power."""
    _check_bands(channel_bw, adjacent_offset)
    a, b = _pair(y_model, y_meas)
    rate = _rate(y_model, y_meas)
    ref = welch_psd(b, rate, nperseg)
    err = welch_psd(b - a, rate, nperseg)
    main = _band_power(ref, rate, 0.0, channel_bw)
    if main == 0:
        raise ValueError("reference has no in-channel power")
    adj = max(_band_power(err, rate, c, channel_bw) for c in (-adjacent_offset, adjacent_offset))
    return _db(adj / main)


def error_spectrum(y_model, y_meas, segment=None, nperseg: int = DEFAULT_NPERSEG) -> Psd:
    """PSD of ``y_meas - y_model`` over ``segment`` (a ``(start, stop)`` pair or slice).

    The estimate is rescaled so its integral equals the time-domain mean
    error power of the segment.
    """
    a, b = _pair(y_model, y_meas)
    rate = _rate(y_model, y_meas)
    if segment is None:
        segment = slice(None)
    elif not isinstance(segment, slice):
        segment = slice(*segment)
    e = (b - a)[segment]
    if e.size < nperseg:
        raise ValueError(f"segment of {e.size} samples is shorter than one "
                         f"{nperseg}-sample frame")
    psd = welch_psd(e, rate, nperseg)
    target = float(np.mean(np.abs(e) ** 2))
    total = psd.total_power()
    scaled = psd.psd * (target / total) if total > 0 else np.zeros_like(psd.psd)
    return Psd(psd.freqs_hz, scaled)
