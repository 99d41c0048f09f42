"""Line-oriented ``key = value`` documents with ``[section]`` headers.

Shared by model files, filter files and reports. Array sections carry one
element per line as ``index re im``. Floats use Python's shortest
round-trip ``repr``, so every float64 survives a write/read cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError


def fmt_float(v) -> str:
    return repr(float(v) + 0.0)  # shortest round-trip form; + 0.0 folds -0 into 0


def fmt_complex(v) -> str:
    v = complex(v)
    return f"{fmt_float(v.real)} {fmt_float(v.imag)}"


def parse_float(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{where}: cannot parse number {text!r}") from None
    if not np.isfinite(v):
        raise FormatError(f"{where}: non-finite number {text!r}")
    return v


def parse_complex(text: str, where: str) -> complex:
    parts = text.split()
    if len(parts) != 2:
        raise FormatError(f"{where}: expected 're im', got {text!r}")
    return complex(parse_float(parts[0], where), parse_float(parts[1], where))


@dataclass
class Section:
    name: str
    keys: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    line: int = 0

    def get(self, key, default=None):
        return self.keys.get(key, default)

    def require(self, key) -> str:
        if key not in self.keys:
            raise FormatError(f"line {self.line}: section [{self.name}] lacks key {key!r}")
        return self.keys[key]

    def array(self) -> np.ndarray:
        """Rows as a complex vector, checking indices run 0..n-1."""
        vals = np.empty(len(self.rows), dtype=np.complex128)
        for pos, (lineno, idx, re, im) in enumerate(self.rows):
            if idx != pos:
                raise FormatError(f"line {lineno}: [{self.name}] index {idx}, expected {pos}")
            vals[pos] = complex(re, im)
        declared = self.keys.get("length")
        if declared is not None and int(declared) != len(vals):
            raise FormatError(f"line {self.line}: [{self.name}] declares length {declared} "
                              f"but has {len(vals)} rows")
        return vals


class Document:
    """Builder for structured text documents."""

    def __init__(self, doc_type: str, version: int = 1):
        self.header = (f"ltpa-{doc_type}-version", str(version))
        self.top: dict = {}
        self.sections: list = []

    def section(self, name: str, keys=None, rows=None) -> None:
        self.sections.append((name, dict(keys or {}), rows))

    def to_text(self) -> str:
        out = [f"{self.header[0]} = {self.header[1]}"]
        out += [f"{k} = {v}" for k, v in self.top.items()]
        for name, keys, rows in self.sections:
            out.append("")
            out.append(f"[{name}]")
            out += [f"{k} = {v}" for k, v in keys.items()]
            if rows is not None:
                out += [f"{i} {fmt_complex(v)}" for i, v in enumerate(rows)]
        return "\n".join(out) + "\n"


def parse(text: str, doc_type: str, supported=(1,)):
    """Parse a document, returning ``(top_keys, {name: Section})``."""
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty document")
    want = f"ltpa-{doc_type}-version"
    first = lines[0].split("=", 1)
    if len(first) != 2 or first[0].strip() != want:
        raise FormatError(f"line 1: document must begin with '{want} = <n>'")
    try:
        version = int(first[1].strip())
    except ValueError:
        raise FormatError(f"line 1: bad version {first[1].strip()!r}") from None
    if version not in supported:
        raise FormatError(f"line 1: unsupported {doc_type} version {version}, "
                          f"supported: {list(supported)}")
    top = Section("", line=1)
    sections: dict = {}
    cur = top
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise FormatError(f"line {lineno}: malformed section header {raw!r}")
            name = line[1:-1].strip()
            if name in sections:
                raise FormatError(f"line {lineno}: duplicate section [{name}]")
            cur = sections[name] = Section(name, line=lineno)
        elif "=" in line:
            k, v = line.split("=", 1)
            cur.keys[k.strip()] = v.strip()
        else:
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"line {lineno}: expected 'index re im', got {raw!r}")
            try:
                idx = int(parts[0])
            except ValueError:
                raise FormatError(f"line {lineno}: bad index {parts[0]!r}") from None
            where = f"line {lineno}"
            cur.rows.append((lineno, idx, parse_float(parts[1], where),
                             parse_float(parts[2], where)))
    return top, sections
