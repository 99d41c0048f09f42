"""Complex baseband signals, IQF1/CSV file I/O and deterministic test signals."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.signal

from .errors import FormatError

IQF_MAGIC = b"IQF1"
_HEADER = struct.Struct("<4sdQ")

# Stopband attenuation of the band-limiting filter used by generate_bursty.
BURST_STOPBAND_DB = 60.0


@dataclass(frozen=True, eq=False)
class IqSignal:
    """Complex baseband samples plus their sample rate in Hz.

    Samples are stored as a read-only complex128 array so instances can be
    shared freely.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if s.size == 0:
            raise ValueError("signal must contain at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        rate = float(self.sample_rate)
        if not (np.isfinite(rate) and rate > 0):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate!r}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, IqSignal):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and np.array_equal(self.samples, other.samples))

    __hash__ = None

    def with_samples(self, samples) -> IqSignal:
        return IqSignal(samples, self.sample_rate)

    def power(self) -> float:
        """Mean power ``mean(|x|^2)``."""
        return float(np.mean(np.abs(self.samples) ** 2))


def as_samples(x) -> np.ndarray:
    """Return the complex sample array of an IqSignal or array-like."""
    if isinstance(x, IqSignal):
        return x.samples
    return np.asarray(x, dtype=np.complex128)


@dataclass(frozen=True)
class BurstProfile:
    """Piecewise-constant power profile for :func:`generate_bursty`.

    ``power_steps_db`` are segment powers relative to each other; the
    loudest segment gets RMS amplitude ``rms_level``.
    """

    segment_length: int
    power_steps_db: tuple = (0.0, -10.0, 0.0, -10.0)
    rms_level: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "power_steps_db",
                           tuple(float(v) for v in self.power_steps_db))
        if int(self.segment_length) != self.segment_length or self.segment_length < 1:
            raise ValueError("segment_length must be a positive integer")
        if not self.power_steps_db:
            raise ValueError("power_steps_db must not be empty")
        if not all(np.isfinite(self.power_steps_db)):
            raise ValueError("power_steps_db must be finite")
        if not (self.rms_level > 0 and np.isfinite(self.rms_level)):
            raise ValueError("rms_level must be positive")

    @property
    def length(self) -> int:
        return self.segment_length * len(self.power_steps_db)

    def segment_rms(self) -> np.ndarray:
        steps = np.asarray(self.power_steps_db)
        return self.rms_level * 10 ** ((steps - steps.max()) / 20)


def lowpass_taps(bandwidth_fraction: float) -> np.ndarray:
    """Kaiser-window linear-phase low-pass for a two-sided band of the given width.

    The -6 dB edge sits at ``bandwidth_fraction / 2`` cycles/sample and the
    transition band is 10 % of the bandwidth, with >= 60 dB stopband.
    """
    cutoff = bandwidth_fraction / 2
    width = 0.1 * bandwidth_fraction
    numtaps, beta = scipy.signal.kaiserord(BURST_STOPBAND_DB, width / 0.5)
    numtaps |= 1
    return scipy.signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=1.0)


def generate_bursty(profile: BurstProfile, bandwidth_fraction: float, seed: int,
                    sample_rate: float = 30.72e6) -> IqSignal:
    """Band-limited complex Gaussian noise with abrupt per-segment power steps.

    Noise comes from numpy's PCG64 generator (``default_rng(seed)``), is
    low-pass filtered to ``bandwidth_fraction`` of the sample rate, and each
    segment is then rescaled so its empirical RMS equals its target exactly.
    """
    if not isinstance(profile, BurstProfile):
        raise ValueError("profile must be a BurstProfile")
    if not (0 < bandwidth_fraction <= 1):
        raise ValueError("bandwidth_fraction must be in (0, 1]")
    n = profile.length
    rng = np.random.default_rng(seed)
    if bandwidth_fraction < 1:
        taps = lowpass_taps(bandwidth_fraction)
        m = n + taps.size - 1
    else:
        taps = None
        m = n
    w = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
    if taps is not None:
        w = scipy.signal.fftconvolve(w, taps, mode="valid")
    out = np.empty(n, dtype=np.complex128)
    L = profile.segment_length
    for k, rms in enumerate(profile.segment_rms()):
        seg = w[k * L:(k + 1) * L]
        out[k * L:(k + 1) * L] = seg * (rms / np.sqrt(np.mean(np.abs(seg) ** 2)))
    return IqSignal(out, sample_rate)


def generate_two_tone(a: float, b: float, offset_hz: float, length: int,
                      sample_rate: float) -> IqSignal:
    """``x[n] = a*exp(-j*w0*n) + b`` with ``w0 = 2*pi*offset_hz/sample_rate``.

    The phase is reduced modulo one period before the exponential, so the
    output is exactly periodic whenever ``sample_rate/offset_hz`` is an
    integer and both are integer-valued.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    if not abs(offset_hz) < sample_rate / 2:
        raise ValueError(f"offset {offset_hz} Hz is beyond Nyquist ({sample_rate / 2} Hz)")
    n = np.arange(length, dtype=np.float64)
    cycles = np.mod(n * offset_hz, sample_rate) / sample_rate
    return IqSignal(a * np.exp(-2j * np.pi * cycles) + b, sample_rate)


def write_iq(signal: IqSignal, path) -> None:
    """Write ``signal`` in the IQF1 binary format (little-endian float64 pairs)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        write_iq_csv(signal, path)
        return
    s = signal.samples
    payload = np.empty(2 * s.size, dtype="<f8")
    payload[0::2] = s.real
    payload[1::2] = s.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(IQF_MAGIC, signal.sample_rate, s.size))
        fh.write(payload.tobytes())


def read_iq(path, sample_rate=None) -> IqSignal:
    """Read an IQF1 file (or CSV, by extension; then ``sample_rate`` is required)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if sample_rate is None:
            raise ValueError("CSV waveforms need sample_rate passed explicitly")
        return read_iq_csv(path, sample_rate)
    data = path.read_bytes()
    return parse_iqf(data)


def parse_iqf(data: bytes) -> IqSignal:
    if len(data) < 4:
        raise FormatError(f"file too short for IQF1 magic {IQF_MAGIC!r}", offset=len(data))
    magic = data[:4]
    if magic != IQF_MAGIC:
        if magic[:3] == IQF_MAGIC[:3]:
            raise FormatError(f"unsupported IQF version {magic!r}, expected {IQF_MAGIC!r}",
                              offset=0)
        raise FormatError(f"bad magic {magic!r}, expected {IQF_MAGIC!r}", offset=0)
    if len(data) < _HEADER.size:
        raise FormatError("truncated IQF1 header", offset=len(data))
    _, rate, count = _HEADER.unpack_from(data, 0)
    if not (np.isfinite(rate) and rate > 0):
        raise FormatError(f"invalid sample rate {rate!r}", offset=4)
    if count == 0:
        raise FormatError("IQF1 file holds zero samples", offset=12)
    need = _HEADER.size + 16 * count
    if len(data) < need:
        raise FormatError(f"truncated payload: header declares {count} samples, "
                          f"file ends early", offset=len(data))
    if len(data) > need:
        raise FormatError("trailing bytes after declared payload", offset=need)
    vals = np.frombuffer(data, dtype="<f8", count=2 * count, offset=_HEADER.size)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise FormatError("non-finite sample value", offset=_HEADER.size + 8 * bad)
    samples = vals[0::2] + 1j * vals[1::2]
    return IqSignal(samples, rate)


def write_iq_csv(signal: IqSignal, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "q"])
        for v in signal.samples:
            w.writerow([repr(float(v.real)), repr(float(v.imag))])


def read_iq_csv(path, sample_rate: float) -> IqSignal:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError("empty CSV waveform", offset=0)
        if [h.strip().lower() for h in header] != ["i", "q"]:
            raise FormatError(f"expected CSV header 'i,q', got {','.join(header)!r}", offset=0)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i, q = (float(v) for v in row)
            except ValueError:
                raise FormatError(f"line {lineno}: expected two numbers, got {row!r}") from None
            rows.append(complex(i, q))
    if not rows:
        raise FormatError("CSV waveform has no samples")
    try:
        return IqSignal(np.array(rows), sample_rate)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
