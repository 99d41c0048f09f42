#!/usr/bin/env python3
"""LT-DPD with frozen filters against plain-MP DPD on the fixture.

The LT inverse reuses the state filter of a forward fit.  Output power is
held to the no-DPD level for every method, so the NMSE-to-linear figures
compare like with like.
"""

import argparse

import numpy as np
from _common import drive, table, write_rows

from ltpa import pasim
from ltpa.basis import BasisSpec, parameter_count
from ltpa.dpd import DpdConfig, run_dpd_loop
from ltpa.ident import fit
from ltpa.state import StateFilter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iterations", type=int, default=5)
    ap.add_argument("--apply-state", choices=["pre", "post"], default="pre")
    ap.add_argument("--blocks-csv")
    args = ap.parse_args()

    pa = pasim.default_doherty_like()
    x = drive()
    lt_spec = BasisSpec.mp(5, 2, odd_only=True)
    forward = fit(lt_spec, [StateFilter.ar(0.99, normalized=True)], x, pa.evaluate(x))
    filters = forward.final_model.state_filters
    cfg = DpdConfig(iterations=args.iterations, apply_state=args.apply_state)

    runs = {"LT " + str(lt_spec): run_dpd_loop(pa.evaluate, x, lt_spec, filters, cfg)}
    for spec in (BasisSpec.mp(5, 3), BasisSpec.mp(7, 4)):
        runs[str(spec)] = run_dpd_loop(pa.evaluate, x, spec, (), cfg)

    rows = []
    base = next(iter(runs.values())).baseline
    rows.append(("no DPD", "-", f"{base.nmse_db:.2f}", f"{base.block.max_nmse_db:.2f}",
                 f"{base.acpr_db:.2f}", "-", "-"))
    best = {}
    for name, res in runs.items():
        it = next(i for i in res.iterations if i.iteration == res.best_iteration)
        best[name] = it
        spec = res.session.inverse_model
        rows.append((name, spec.parameter_count(), f"{it.nmse_db:.2f}",
                     f"{it.block.max_nmse_db:.2f}", f"{it.acpr_db:.2f}",
                     f"{10 * np.log10(it.output_power / res.target_output_power):+.4f}",
                     f"{res.best_iteration}/{res.status}"))
    table(["dpd", "params", "nmse_db", "max_block_db", "acpr_db", "power_db", "iter"], rows)

    names = list(best)
    write_rows(args.blocks_csv, ["block"] + names,
               [(i, *(f"{best[n].block.per_block_nmse_db[i]:.4f}" for n in names))
                for i in range(len(base.block.per_block_nmse_db))])
    print(f"\nLT basis has {parameter_count(lt_spec)} static + "
          f"{parameter_count(lt_spec)} state coefficients")


if __name__ == "__main__":
    main()
