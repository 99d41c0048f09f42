"""Shared setup for the experiment scripts: drive signal, fixture and CSV output."""

import csv
import sys
from pathlib import Path

from ltpa import pasim
from ltpa.signal import BurstProfile, generate_bursty

FS = 30.72e6
BW = 4 / 30.72


def drive(seglen: int = 50_000, seed: int = 7):
    """Four segments at 0/-10/0/-10 dB, the setting used throughout the tests."""
    return generate_bursty(BurstProfile(seglen, (0, -10, 0, -10), pasim.NOMINAL_RMS), BW, seed, FS)


def write_rows(path, header, rows) -> None:
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}", file=sys.stderr)


def table(header, rows) -> None:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))
