#!/usr/bin/env python3
"""One versus two long-term states on the two-state synthetic PA.

The PA carries a slow state (tau 2000) and a fast one (tau 100).  The second
fitted state is started from a grid of poles to show how sensitive the gain
is to its initial value.
"""

import argparse

from _common import drive, table

from ltpa import pasim
from ltpa.ident import fit
from ltpa.state import StateFilter, effective_memory


def ar(a):
    return StateFilter.ar(a, normalized=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--inits", default="0.9,0.95,0.98,0.995",
                    help="starting poles for the second state")
    args = ap.parse_args()

    pa = pasim.two_state_pa()
    x = drive()
    y = pa.evaluate(x)
    spec = pa.true_model.basis

    one = fit(spec, [ar(0.999)], x, y)
    rows = [("1", "0.999", "-", f"{one.final_nmse_db:.2f}",
             f"{effective_memory(one.final_model.state_filters[0]):.0f}", "-")]
    for a0 in (float(v) for v in args.inits.split(",")):
        rep = fit(spec, [ar(0.999), ar(a0)], x, y)
        taus = [effective_memory(f) for f in rep.final_model.state_filters]
        rows.append(("2", "0.999", a0, f"{rep.final_nmse_db:.2f}", f"{taus[0]:.0f}",
                     f"{taus[1]:.0f}"))
    table(["states", "init1", "init2", "nmse_db", "tau1", "tau2"], rows)
    true = [effective_memory(f) for f in pa.true_model.state_filters]
    print(f"\ntrue taus: {true[0]:.0f}, {true[1]:.0f}")


if __name__ == "__main__":
    main()
