"""``ltpa`` command-line front end.

Exit codes: 0 success, 2 usage error, 3 data or file-format error,
4 numerical failure (for ``fit`` the best model so far is still written,
marked ``status = diverged``).  Outputs carry no timestamps, so identical
inputs, flags and seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dpd, ident, metrics, pasim, textfmt, twotone
from .basis import BasisKind, BasisSpec
from .errors import FitError, FormatError, LtpaError, NumericalError, UnsupportedError
from .ltmodel import LtModel, dumps_filter, load_model, loads_filter, model_document, predict
from .signal import BurstProfile, generate_bursty, generate_two_tone, read_iq, write_iq
from .state import StateFilter

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_RATE = 30.72e6
DEFAULT_BW_HZ = 4e6

log = logging.getLogger("ltpa")


class UsageError(Exception):
    pass


# --- helpers -----------------------------------------------------------------

def _floats(text: str, name: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _ints(text: str, name: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated integers, got {text!r}") from None


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _existing(path: str, flag: str) -> str:
    if not Path(path).is_file():
        raise FileNotFoundError(f"{flag}: no such file {path!r}")
    return path


def _basis_from_args(kind: str, orders: str, odd: bool) -> BasisSpec:
    vals = _ints(orders, "orders")
    kind = BasisKind(kind)
    if kind is BasisKind.GMP:
        if len(vals) != 3:
            raise UsageError("--orders for gmp is P,M,G")
        return BasisSpec.gmp(*vals, odd_only=odd)
    if len(vals) != 2:
        raise UsageError(f"--orders for {kind.value} is P,M")
    if kind is BasisKind.VOLTERRA:
        if odd:
            raise UsageError("--odd has no effect on volterra (odd orders are implied)")
        return BasisSpec.volterra(*vals)
    return BasisSpec.mp(*vals, odd_only=odd)


def _filters_from_args(states: str, init_alpha, init_beta, window) -> list:
    """Initial state filters from ``--state`` plus per-filter initial values."""
    if states == "none":
        return []
    kinds = [s.strip() for s in states.split(",")]
    alphas = _floats(init_alpha, "init-alpha") if init_alpha else []
    betas = _floats(init_beta, "init-beta") if init_beta else []
    if alphas and len(alphas) != sum(k != "fir" for k in kinds):
        raise UsageError("--init-alpha needs one value per ar1/arma11 state")
    out, ia, ib = [], iter(alphas), iter(betas)
    for k in kinds:
        if k == "ar1":
            out.append(StateFilter.ar(next(ia, 0.99), normalized=True))
        elif k == "arma11":
            out.append(StateFilter.arma(next(ia, 0.99), next(ib, 0.0), normalized=True))
        elif k == "fir":
            out.append(StateFilter.fir(window))
        else:
            raise UsageError(f"--state: unknown filter kind {k!r} (ar1, arma11, fir, none)")
    return out


def _load_pa(name: str, noise: str | None, seed: int | None) -> pasim.SyntheticPa:
    fixtures = {"default": pasim.default_doherty_like, "two-state": pasim.two_state_pa,
                "mismatched": pasim.mismatched_pa}
    if name in fixtures:
        pa = fixtures[name]()
    else:
        pa = pasim.load_pa(_existing(name, "--pa"))
    if noise is not None:
        pa = replace(pa, noise_floor_dbc=None if noise == "off" else float(noise))
    if seed is not None:
        pa = replace(pa, seed=seed)
    return pa


def _read(args, path: str, flag: str):
    return read_iq(_existing(path, flag), args.csv_rate)


def _pair(args):
    x = _read(args, args.input, "--in")
    y = _read(args, args.meas, "--meas")
    if len(x) != len(y):
        raise FormatError(f"--in has {len(x)} samples but --meas has {len(y)}")
    return x, y


# --- commands ----------------------------------------------------------------

def cmd_gen(args) -> int:
    bursty_only = {"--steps": args.steps, "--seglen": args.seglen, "--rms": args.rms,
                   "--bandwidth": args.bandwidth, "--seed": args.seed}
    tone_only = {"--a": args.a, "--b": args.b, "--offset": args.offset, "--length": args.length}
    wrong = tone_only if args.kind == "bursty" else bursty_only
    given = [k for k, v in wrong.items() if v is not None]
    if given:
        raise UsageError(f"{', '.join(given)} cannot be used with --kind {args.kind}")
    if args.kind == "bursty":
        steps = tuple(_floats(args.steps, "steps")) if args.steps else (0.0, -10.0, 0.0, -10.0)
        prof = BurstProfile(args.seglen or 61440, steps, 0.3 if args.rms is None else args.rms)
        bw = (DEFAULT_BW_HZ if args.bandwidth is None else args.bandwidth) / args.rate
        sig = generate_bursty(prof, bw, 0 if args.seed is None else args.seed, args.rate)
    else:
        if args.offset is None:
            raise UsageError("--kind twotone requires --offset")
        length = args.length or int(round(args.rate / args.offset))
        sig = generate_two_tone(0.5 if args.a is None else args.a,
                                0.5 if args.b is None else args.b,
                                args.offset, length, args.rate)
    write_iq(sig, args.out)
    return EXIT_OK


def cmd_sim(args) -> int:
    pa = _load_pa(args.pa, args.noise, args.seed)
    x = _read(args, args.input, "--in")
    write_iq(pa.evaluate(x), args.out)
    return EXIT_OK


def _fit_config(args) -> ident.FitConfig:
    return ident.FitConfig(lam=args.lam, max_outer_iters=args.max_outer,
                           max_gn_iters=args.max_gn, outer_tol=args.outer_tol,
                           gn_tol=args.gn_tol, ridge=args.ridge,
                           allow_complex_poles=args.complex_poles)


def _write_fit_outputs(args, model: LtModel, report: ident.FitReport, x, y,
                       status: str | None = None) -> None:
    doc = model_document(model)
    if status:
        doc.top["status"] = status
    _write_text(args.out, doc.to_text())
    _write_text(args.report or f"{args.out}.report.txt", report.to_text())
    _write_text(args.trace or f"{args.out}.trace.csv", report.convergence_csv())
    prof = metrics.block_nmse(predict(model, x), y, args.block, args.skip)
    _write_text(args.blocks or f"{args.out}.blocks.csv", prof.to_csv(x.sample_rate))


def cmd_fit(args) -> int:
    basis = _basis_from_args(args.basis, args.orders, args.odd)
    if args.init_filter:
        if args.init_alpha or args.init_beta:
            raise UsageError("--init-filter conflicts with --init-alpha/--init-beta")
        if args.state not in ("ar1", "arma11"):
            raise UsageError("--init-filter needs a single ar1 or arma11 --state")
        f = loads_filter(Path(_existing(args.init_filter, "--init-filter")).read_text())
        if args.state == "arma11" and not f.beta:
            f = StateFilter.arma(f.alpha[0], 0.0, f.initial_state, f.normalized)
        elif args.state == "ar1" and f.beta:
            raise UsageError("--init-filter holds an ARMA filter but --state is ar1")
        filters = [f]
    else:
        filters = _filters_from_args(args.state, args.init_alpha, args.init_beta, args.window)
    x, y = _pair(args)
    cfg = _fit_config(args)
    try:
        report = ident.fit(basis, filters, x, y, cfg, label=args.label)
    except FitError as exc:
        if exc.best_model is not None and exc.report is not None:
            _write_fit_outputs(args, exc.best_model, exc.report, x, y, status="diverged")
        raise
    _write_fit_outputs(args, report.final_model, report, x, y)
    m = report.final_model
    print(f"{m.describe()}: NMSE {report.final_nmse_db:.3f} dB after "
          f"{len(report.outer_trace)} outer iterations ({report.status})")
    for k, f in enumerate(m.state_filters, start=1):
        print(f"  filter {k}: {f.label()}")
    return EXIT_OK


def _eval_text(model, n, nmse, prof, acepr, args) -> str:
    doc = textfmt.Document("eval-report")
    doc.top["model"] = model.describe()
    doc.top["samples"] = n
    doc.top["nmse_db"] = textfmt.fmt_float(nmse)
    doc.top["max_block_nmse_db"] = textfmt.fmt_float(prof.max_nmse_db)
    doc.top["worst_block"] = prof.worst_block
    doc.top["acepr_db"] = textfmt.fmt_float(acepr)
    doc.section("blocks", {"block_size": args.block, "skip_initial": args.skip})
    doc.section("bands", {"channel_bw_hz": textfmt.fmt_float(args.channel_bw),
                          "adjacent_offset_hz": textfmt.fmt_float(args.adjacent_offset)})
    return doc.to_text()


def cmd_eval(args) -> int:
    model = load_model(_existing(args.model, "--model"))
    x, y = _pair(args)
    yp = predict(model, x)
    prof = metrics.block_nmse(yp, y, args.block, args.skip)
    bw, adj = args.channel_bw / x.sample_rate, args.adjacent_offset / x.sample_rate
    nmse = metrics.nmse_db(yp, y)
    acepr = metrics.acepr_db(yp, y, bw, adj)
    if args.format == "csv":
        text = ("model,samples,nmse_db,max_block_nmse_db,worst_block,acepr_db\n"
                f"{model.describe()},{len(x)},{textfmt.fmt_float(nmse)},"
                f"{textfmt.fmt_float(prof.max_nmse_db)},{prof.worst_block},"
                f"{textfmt.fmt_float(acepr)}\n")
    else:
        text = _eval_text(model, len(x), nmse, prof, acepr, args)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if args.blocks:
        _write_text(args.blocks, prof.to_csv(x.sample_rate))
    if args.psd:
        _write_text(args.psd, metrics.error_spectrum(yp, y).to_csv())
    return EXIT_OK


def cmd_twotone_measure(args) -> int:
    pa = _load_pa(args.pa, args.noise, args.seed)
    offsets = (_floats(args.offsets, "offsets") if args.offsets
               else twotone.default_offsets_hz(args.rate, args.points))
    meas = twotone.measure_device(pa.evaluate, args.a, args.b, offsets, args.rate, args.settle)
    twotone.write_measurements(meas, args.out, args.rate)
    return EXIT_OK


def cmd_twotone_init(args) -> int:
    meas = twotone.read_measurements(_existing(args.measurements, "--measurements"), args.rate)
    t0, t1 = twotone.solve_static_params(meas)
    resp = twotone.response_from_measurements(meas, t0, t1)
    filt = twotone.fit_initial_filter(resp, args.fit, args.complex_poles)
    _write_text(args.out, dumps_filter(filt))
    print(f"theta0 = {t0:.6g}, theta1 = {t1:.6g}; initial filter {filt.label()}")
    return EXIT_OK


def cmd_dpd(args) -> int:
    fwd = load_model(_existing(args.freeze_filters, "--freeze-filters"))
    basis = (fwd.basis if args.orders is None
             else _basis_from_args(args.basis, args.orders, args.odd))
    pa = _load_pa(args.pa, args.noise, args.seed)
    x = _read(args, args.input, "--in")
    cfg = dpd.DpdConfig(iterations=args.iterations, ridge=args.ridge,
                        apply_state=args.apply_state, clip_level=args.clip,
                        block_size=args.block, channel_bw=args.channel_bw / x.sample_rate,
                        adjacent_offset=args.adjacent_offset / x.sample_rate)
    runs = [("lt", dpd.run_dpd_loop(pa.evaluate, x, basis, fwd.state_filters, cfg, "lt-dpd"))]
    if args.compare_orders:
        plain = _basis_from_args(args.compare_basis, args.compare_orders, args.compare_odd)
        runs.append(("plain", dpd.run_dpd_loop(pa.evaluate, x, plain, (), cfg, "plain-dpd")))
    parts = [res.to_text(label=name) for name, res in runs]
    if len(runs) == 2:
        lt, pl = runs[0][1], runs[1][1]
        a, b = lt.iterations[lt.best_iteration - 1], pl.iterations[pl.best_iteration - 1]
        cmp_doc = textfmt.Document("dpd-comparison")
        cmp_doc.top["nmse_gain_db"] = textfmt.fmt_float(round(b.nmse_db - a.nmse_db, 9))
        cmp_doc.top["worst_block_gain_db"] = textfmt.fmt_float(
            round(b.block.max_nmse_db - a.block.max_nmse_db, 9))
        cmp_doc.top["output_power_diff_db"] = textfmt.fmt_float(
            round(10 * np.log10(a.output_power / b.output_power), 9))
        parts.append(cmp_doc.to_text())
    _write_text(args.out, "\n".join(parts))
    if args.signal_out:
        write_iq(runs[0][1].signal, args.signal_out)
    for name, res in runs:
        best = res.iterations[res.best_iteration - 1] if res.best_iteration else res.baseline
        print(f"{name}: NMSE-to-linear {best.nmse_db:.3f} dB, worst block "
              f"{best.block.max_nmse_db:.3f} dB ({res.status})")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def _add_fit_flags(p) -> None:
    d = ident.FitConfig()
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam,
                   help="Gauss-Newton dampening (default %(default)s)")
    p.add_argument("--max-outer", type=int, default=d.max_outer_iters)
    p.add_argument("--max-gn", type=int, default=d.max_gn_iters)
    p.add_argument("--outer-tol", type=float, default=d.outer_tol, help="dB NMSE change")
    p.add_argument("--gn-tol", type=float, default=d.gn_tol, help="relative parameter change")
    p.add_argument("--ridge", type=float, default=d.ridge)
    p.add_argument("--complex-poles", action="store_true")


def _add_basis_flags(p, orders_default="5,2", prefix="") -> None:
    p.add_argument(f"--{prefix}basis", choices=[k.value for k in BasisKind], default="mp")
    p.add_argument(f"--{prefix}orders", default=orders_default,
                   help="P,M (mp, volterra) or P,M,G (gmp)")
    p.add_argument(f"--{prefix}odd", action="store_true", help="odd nonlinear orders only")


def _add_band_flags(p) -> None:
    p.add_argument("--channel-bw", type=float, default=DEFAULT_BW_HZ, help="Hz")
    p.add_argument("--adjacent-offset", type=float, default=5e6, help="Hz")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltpa", description="Long-term memory PA modeling")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--csv-rate", type=float, default=DEFAULT_RATE,
                    help="sample rate assumed for CSV waveforms (default %(default)g)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a test waveform")
    p.add_argument("--kind", choices=["bursty", "twotone"], default="bursty")
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, default=DEFAULT_RATE)
    p.add_argument("--steps", help="segment powers in dB (default 0,-10,0,-10)")
    p.add_argument("--seglen", type=int, help="samples per segment (default 61440)")
    p.add_argument("--rms", type=float, help="RMS of the loudest segment (default 0.3)")
    p.add_argument("--bandwidth", type=float, help="noise bandwidth in Hz (default 4e6)")
    p.add_argument("--seed", type=int)
    p.add_argument("--a", type=float, help="tone amplitude at -offset (default 0.5)")
    p.add_argument("--b", type=float, help="DC tone amplitude (default 0.5)")
    p.add_argument("--offset", type=float, help="tone offset in Hz")
    p.add_argument("--length", type=int, help="samples (default one offset period)")
    p.set_defaults(func=cmd_gen)

    def pa_flags(p):
        p.add_argument("--pa", default="default",
                       help="default, two-state, mismatched or a model file with [pasim]")
        p.add_argument("--noise", help="noise floor in dBc or 'off' (overrides the PA file)")
        p.add_argument("--seed", type=int, help="noise seed (overrides the PA file)")

    p = sub.add_parser("sim", help="run a waveform through a synthetic PA")
    pa_flags(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("fit", help="identify an LT model")
    p.add_argument("--in", dest="input", required=True, help="PA input waveform")
    p.add_argument("--meas", required=True, help="measured PA output waveform")
    p.add_argument("--out", required=True, help="model file")
    _add_basis_flags(p)
    p.add_argument("--state", default="ar1", help="comma list of ar1, arma11, fir; or none")
    p.add_argument("--init-alpha", help="initial poles, one per ar1/arma11 state")
    p.add_argument("--init-beta", help="initial zeros, one per arma11 state")
    p.add_argument("--init-filter", help="filter file from twotone-init")
    p.add_argument("--window", type=int, default=2000, help="FIR state window")
    p.add_argument("--label", default="")
    _add_fit_flags(p)
    p.add_argument("--block", type=int, default=metrics.DEFAULT_BLOCK)
    p.add_argument("--skip", type=int, default=metrics.DEFAULT_SKIP)
    p.add_argument("--report", help="fit report (default <out>.report.txt)")
    p.add_argument("--trace", help="NMSE per outer iteration CSV (default <out>.trace.csv)")
    p.add_argument("--blocks", help="block NMSE CSV (default <out>.blocks.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a model against measured output")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--meas", required=True)
    p.add_argument("--block", type=int, default=metrics.DEFAULT_BLOCK)
    p.add_argument("--skip", type=int, default=metrics.DEFAULT_SKIP)
    _add_band_flags(p)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", help="report file (default stdout)")
    p.add_argument("--blocks", help="block NMSE CSV")
    p.add_argument("--psd", help="error spectrum CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("twotone-measure", help="two-tone probe a synthetic PA")
    pa_flags(p)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--b", type=float, default=0.1)
    p.add_argument("--rate", type=float, default=DEFAULT_RATE)
    p.add_argument("--offsets", help="offsets in Hz (default: log grid 100 Hz - 100 kHz)")
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--settle", type=int, default=100_000, help="samples before analysis")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_twotone_measure)

    p = sub.add_parser("twotone-init", help="initial state filter from two-tone data")
    p.add_argument("--measurements", required=True)
    p.add_argument("--rate", type=float, default=DEFAULT_RATE)
    p.add_argument("--fit", choices=["ar1", "arma11"], default="arma11")
    p.add_argument("--complex-poles", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_twotone_init)

    p = sub.add_parser("dpd", help="indirect-learning DPD on a synthetic PA")
    pa_flags(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--freeze-filters", required=True, help="forward model supplying filters")
    p.add_argument("--basis", choices=[k.value for k in BasisKind], default="mp")
    p.add_argument("--orders", help="inverse basis (default: forward model basis)")
    p.add_argument("--odd", action="store_true")
    p.add_argument("--compare-basis", choices=[k.value for k in BasisKind], default="mp")
    p.add_argument("--compare-orders", help="plain (no state) DPD basis to compare against")
    p.add_argument("--compare-odd", action="store_true")
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--apply-state", choices=list(dpd.STATE_SOURCES), default="pre")
    p.add_argument("--clip", type=float, help="warn when predistorted peaks exceed this")
    p.add_argument("--block", type=int, default=metrics.DEFAULT_BLOCK)
    _add_band_flags(p)
    p.add_argument("--out", required=True, help="report file")
    p.add_argument("--signal-out", help="predistorted waveform of the best LT iteration")
    p.set_defaults(func=cmd_dpd)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (FitError, NumericalError) as exc:
        print(f"ltpa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, UnsupportedError, FileNotFoundError, LtpaError) as exc:
        print(f"ltpa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ltpa: invalid data or parameters: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"ltpa: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
