#!/usr/bin/env python3
"""Two-tone initialization of the fixture's state filter, then a full fit.

Probes the noiseless fixture with the two-tone signal, estimates the static
coefficients and |G(w)|, fits AR(1) and ARMA(1,1) initial filters and uses
each as the starting point for identification on bursty data.
"""

import argparse

from _common import FS, drive, table

from ltpa import pasim
from ltpa.ident import fit
from ltpa.state import effective_memory, frequency_response
from ltpa.twotone import (default_offsets_hz, fit_initial_filter, measure_device,
                          response_from_measurements, solve_static_params)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--b", type=float, default=0.1)
    ap.add_argument("--points", type=int, default=16)
    args = ap.parse_args()

    pa = pasim.default_doherty_like()
    device = pa.noiseless().evaluate
    offs = default_offsets_hz(FS, args.points)
    meas = measure_device(device, args.a, args.b, offs, FS)
    t0, t1 = solve_static_params(meas)
    resp = response_from_measurements(meas, t0, t1)
    truth = pa.true_model.state_filters[0]
    g_true = abs(frequency_response(truth, resp.omegas))
    print(f"static estimate: theta0 {t0:.5f}, theta1 {t1:.5f}")
    table(["offset_hz", "G_measured", "G_true"],
          [(f"{f:.1f}", f"{g:.4f}", f"{h:.4f}") for f, g, h in zip(offs, resp.magnitudes, g_true)])

    x = drive()
    y = pa.evaluate(x)
    rows = []
    for kind in ("ar1", "arma11"):
        init = fit_initial_filter(resp, kind)
        rep = fit(pa.true_model.basis, [init], x, y)
        final = rep.final_model.state_filters[0]
        rows.append((kind, f"{init.alpha[0]:.5f}", f"{1 / (1 - init.alpha[0]):.0f}",
                     f"{final.alpha[0]:.6f}", len(rep.outer_trace), f"{rep.final_nmse_db:.2f}"))
    print()
    table(["init", "alpha0", "pole_tau0", "alpha_fit", "outer", "nmse_db"], rows)
    print(f"\ntrue alpha {truth.alpha[0]}, tau {effective_memory(truth):.0f}")


if __name__ == "__main__":
    main()
