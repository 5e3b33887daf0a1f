"""Command line orchestration: config in, CSV artifacts out.

Every subcommand is a pure pipeline over the run configuration; identical
config plus flags produce byte-identical CSV files.  Exit codes: 0 success,
1 validation failure, 2 numerical error, 3 config error; errors print a
single line ``ERROR <CODE>: <detail>`` on stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bargmann, geometry, maslov, quantization, quasimode, series, spectrum, symbols
from .config import RunConfig, load_config, parse_override_value
from .errors import ConfigError, NumericalError, ToolError, ValidationFailure

SUBCOMMANDS = ("validate", "action", "bs", "reference", "compare", "maslov",
               "quasimode", "bargmann-check", "symcalc")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: str, header: str, rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SPECQUANT_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = _thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _outdir(cfg: RunConfig, override: str | None) -> str:
    return override or cfg["output_dir"]


# ---------------------------------------------------------------------------
# pipelines


def _cmd_validate(cfg: RunConfig, outdir: str) -> int:
    sym = cfg.symbol()
    e1, e2, delta = cfg.window()
    report = symbols.validate_assumptions(sym, e1, e2, delta, cfg.assumption_grid())
    print(f"h1_sublevel_compact={report.h1_sublevel_compact}")
    print(f"h2_regular_connected={report.h2_regular_connected}")
    print(f"h3_elliptic={report.h3_elliptic}")
    for where, note in report.witnesses:
        print(f"witness {where}: {note}")
    if not report.all_pass:
        raise ValidationFailure("ASSUMPTIONS_FAILED",
                                "one or more standing assumptions failed; see witnesses")
    return 0


def _make_profile(cfg: RunConfig) -> geometry.ActionProfile:
    sym = cfg.symbol()
    tol = cfg["tolerances"]["trace"]
    return geometry.action_profile(sym, cfg.lambda_grid(), tol=tol)


def _cmd_action(cfg: RunConfig, outdir: str) -> int:
    profile = _make_profile(cfg)
    rows = list(zip(profile.lambdas, profile.actions, profile.periods))
    _write_csv(os.path.join(outdir, "profile.csv"), "lambda,action,period", rows)
    print(f"wrote {len(rows)} profile rows")
    return 0


def _cmd_bs(cfg: RunConfig, outdir: str) -> int:
    profile = _make_profile(cfg)
    e1, e2, _ = cfg.window()
    tol = cfg["tolerances"]["inverse_action"]
    rows = []
    for hbar in cfg["hbar_list"]:
        for pred in quantization.bs_eigenvalues(profile, hbar, e1, e2, tol=tol):
            rows.append((pred.hbar, pred.k, pred.lam))
    _write_csv(os.path.join(outdir, "bs.csv"), "hbar,k,lambda_bs", rows)
    print(f"wrote {len(rows)} predictions")
    return 0


def _reference_for(cfg: RunConfig, hbar: float) -> spectrum.ReferenceSpectrum:
    sym = cfg.symbol()
    e1, e2, _ = cfg.window()
    certify = bool(cfg["discretization"]["certify"])
    return spectrum.reference_spectrum(sym, cfg.discretization(hbar), e1, e2, certify=certify)


def _cmd_reference(cfg: RunConfig, outdir: str) -> int:
    for hbar in cfg["hbar_list"]:
        ref = _reference_for(cfg, hbar)
        rows = list(enumerate(ref.eigenvalues))
        _write_csv(os.path.join(outdir, f"reference_{hbar:g}.csv"), "index,eigenvalue", rows)
        print(f"hbar={hbar:g}: {len(rows)} eigenvalues in window")
    return 0


def _cmd_compare(cfg: RunConfig, outdir: str) -> int:
    profile = _make_profile(cfg)
    e1, e2, _ = cfg.window()
    tol = cfg["tolerances"]["inverse_action"]
    cap = cfg["tolerances"]["match_radius_cap"]
    lam_mid = 0.5 * (e1 + e2)
    t_mid = profile.period_at(lam_mid)

    def one(hbar: float):
        preds = quantization.bs_eigenvalues(profile, hbar, e1, e2, tol=tol)
        ref = _reference_for(cfg, hbar)
        radius = min(math.pi * hbar / t_mid, cap)
        return quantization.compare_spectra(preds, ref.eigenvalues, radius)

    reports = _map(one, cfg["hbar_list"])
    detail, summary = [], []
    for rep in reports:
        for k, lam_bs, lam_ref, err in rep.pairs:
            detail.append((rep.hbar, k, lam_bs, lam_ref, err))
        summary.append((rep.hbar, rep.max_abs_err, len(rep.pairs)))
    _write_csv(os.path.join(outdir, "compare.csv"),
               "hbar,k,lambda_bs,lambda_ref,abs_err", detail)
    _write_csv(os.path.join(outdir, "summary.csv"), "hbar,max_abs_err,count", summary)
    for hbar, err, count in summary:
        print(f"hbar={hbar:g} max_abs_err={err:.3e} count={count}")
    try:
        order = quantization.convergence_order(reports)
        print(f"convergence_order={order:.3f}")
    except NumericalError as exc:
        print(f"convergence_order=n/a ({exc.code})")
    return 0


def _cmd_maslov(cfg: RunConfig, outdir: str, lam_flag: float | None) -> int:
    sym = cfg.symbol()
    e1, e2, _ = cfg.window()
    lams = [lam_flag] if lam_flag is not None else (cfg["maslov"]["lambdas"]
                                                    or [0.5 * (e1 + e2)])
    m = int(cfg["maslov"]["cover_size"])
    for lam in lams:
        curve = geometry.trace_level_curve(sym, float(lam))
        loop = maslov.maslov_loop(sym, curve)
        wind = maslov.winding_number(loop)
        hol = maslov.sqrt_holonomy(loop)
        coc = maslov.cocycle_product(sym, curve, m=m)
        prefix = f"lambda={lam:g} " if len(lams) > 1 else ""
        print(f"{prefix}winding={wind} holonomy={hol} cocycle={coc}")
    return 0


def _curve_scale(curve: geometry.LevelCurve) -> float:
    z = curve.z_samples()
    return float(np.abs(z - z.mean()).max())


def _cmd_quasimode(cfg: RunConfig, outdir: str) -> int:
    sym = cfg.symbol()
    e1, e2, _ = cfg.window()
    qc = cfg["quasimode"]
    lam = 0.5 * (e1 + e2)
    curve = geometry.trace_level_curve(sym, lam)
    delta = qc["delta_scale"] * _curve_scale(curve)

    def one(hbar: float):
        return quasimode.quasimode_residual(
            sym, lam, hbar, qc["contour_c"], delta, curve=curve,
            n_points=int(qc["eval_points"]), n_theta=int(qc["n_theta"]),
            n_rad=int(qc["n_rad"]))

    residuals = _map(one, qc["hbar_sweep"])
    rows = list(zip(qc["hbar_sweep"], residuals))
    _write_csv(os.path.join(outdir, "residuals.csv"), "hbar,max_residual", rows)
    for hbar, res in rows:
        print(f"hbar={hbar:g} max_residual={res:.6e}")
    return 0


def _cmd_bargmann_check(cfg: RunConfig, outdir: str) -> int:
    bc = cfg["bargmann"]
    rows = []
    for hbar in cfg["hbar_list"]:
        for k in range(int(bc["hermite_max"]) + 1):
            lam = hbar * (2 * k + 1)
            half = math.sqrt(2 * lam) + 9 * math.sqrt(hbar)
            line = bargmann.sample_line(lambda y: bargmann.hermite_function(k, y, hbar),
                                        half, int(bc["line_samples"]))
            grid = bargmann.square_grid(bargmann.default_grid_radius(lam),
                                        int(bc["lattice_n"]))
            field = bargmann.bargmann_transform(line, hbar, grid)
            iso_err = abs(bargmann.phi0_norm(field) - 1.0)
            ratio = bargmann.uncertainty_check(field)
            rows.append((hbar, k, iso_err, ratio))
            print(f"hbar={hbar:g} k={k} isometry_error={iso_err:.3e} "
                  f"uncertainty_ratio={ratio:.6f}")
    _write_csv(os.path.join(outdir, "bargmann.csv"),
               "hbar,k,isometry_error,uncertainty_ratio", rows)
    return 0


def _cmd_symcalc(args) -> int:
    if not args.op:
        raise ConfigError("BAD_CONFIG", "symcalc needs --op")
    if not args.infile:
        raise ConfigError("BAD_CONFIG", "symcalc needs --in FILE")
    with open(args.infile, "r", encoding="utf-8") as fh:
        lhs = series.symbol_from_json(fh.read())
    if args.op in ("product", "compose"):
        if not args.rhs:
            raise ConfigError("BAD_CONFIG", f"symcalc {args.op} needs --rhs FILE")
        with open(args.rhs, "r", encoding="utf-8") as fh:
            rhs = series.symbol_from_json(fh.read())
    if args.op == "product":
        out = series.product(lhs, rhs)
    elif args.op == "compose":
        out = series.compose(lhs, rhs)
    elif args.op == "invert":
        out = series.lagrange_invert(lhs)
    elif args.op == "growth":
        print(f"growth_c={series.growth_estimate(lhs, args.radius):.17g}")
        return 0
    elif args.op == "resum":
        if args.hbar is None or args.cconst is None or args.at is None:
            raise ConfigError("BAD_CONFIG", "symcalc resum needs --hbar, --cconst and --at")
        val = series.resum(lhs, args.hbar, args.cconst, args.at)
        print(f"resum={val:.17g}")
        return 0
    else:
        raise ConfigError("BAD_CONFIG", f"unknown symcalc op {args.op!r}")
    if not args.outfile:
        raise ConfigError("BAD_CONFIG", "symcalc needs --out FILE")
    with open(args.outfile, "w", encoding="utf-8") as fh:
        fh.write(series.symbol_to_json(out) + "\n")
    print(f"wrote {args.outfile}")
    return 0


# ---------------------------------------------------------------------------
# argument handling


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="specquant",
        description="quantization-rule predictions and their checks for 1D polynomial symbols")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="energy override for the maslov subcommand")
    parser.add_argument("--op", default=None, help="symcalc operation")
    parser.add_argument("--in", dest="infile", default=None, help="symcalc input file")
    parser.add_argument("--rhs", default=None, help="symcalc second operand file")
    parser.add_argument("--out-file", dest="outfile", default=None, help="symcalc output file")
    parser.add_argument("--hbar", type=float, default=None)
    parser.add_argument("--cconst", type=float, default=None)
    parser.add_argument("--at", type=float, default=None)
    parser.add_argument("--radius", type=float, default=1.0)
    args, rest = parser.parse_known_args(argv)

    overrides = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or i + 1 >= len(rest):
            raise ConfigError("BAD_CONFIG", f"expected --dotted.key value pairs, got {rest[i:]}")
        overrides[tok[2:]] = parse_override_value(rest[i + 1])
        i += 2
    return args, overrides


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, overrides = _parse_args(argv)
        if args.subcommand == "symcalc":
            return _cmd_symcalc(args)
        if args.config is None:
            raise ConfigError("BAD_CONFIG", "--config is required")
        cfg = load_config(args.config, overrides)
        outdir = _outdir(cfg, args.out)
        if args.subcommand == "validate":
            return _cmd_validate(cfg, outdir)
        if args.subcommand == "action":
            return _cmd_action(cfg, outdir)
        if args.subcommand == "bs":
            return _cmd_bs(cfg, outdir)
        if args.subcommand == "reference":
            return _cmd_reference(cfg, outdir)
        if args.subcommand == "compare":
            return _cmd_compare(cfg, outdir)
        if args.subcommand == "maslov":
            return _cmd_maslov(cfg, outdir, args.lam)
        if args.subcommand == "quasimode":
            return _cmd_quasimode(cfg, outdir)
        if args.subcommand == "bargmann-check":
            return _cmd_bargmann_check(cfg, outdir)
        raise ConfigError("BAD_CONFIG", f"unhandled subcommand {args.subcommand}")
    except ConfigError as exc:
        print(f"ERROR {exc.code}: {exc.detail}", file=sys.stderr)
        return 3
    except ValidationFailure as exc:
        print(f"ERROR {exc.code}: {exc.detail}", file=sys.stderr)
        return 1
    except (NumericalError, ToolError) as exc:
        print(f"ERROR {exc.code}: {exc.detail}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
