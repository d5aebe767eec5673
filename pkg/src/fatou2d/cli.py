"""Command-line entry point.

Exit codes: 0 success, 1 I/O / parse / configuration error, 2 the germ fails
the hypothesis (exactly one characteristic direction, non-degenerate),
3 a verification step failed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import _kernels as K
from .config import Config, load_config
from .coords import default_params, in_region_uv
from .errors import (
    CannotCertifyRegion,
    ConfigError,
    Fatou2dError,
    GermParseError,
    InvarianceViolation,
    NotUniqueDirection,
    OutOfRegion,
)
from .expansion import build_expansion, numeric_fit_gj, write_coeff_csv
from .fatou import build_context, extend_along_orbit, tau_uv, write_orbit_csv
from .germ import check_hypothesis, format_germ, read_germ
from .normal_form import normalize
from .render import SliceSpec, emit_ppm, render_policy, scan, write_pixel_csv
from .suite import run_suite

EXIT_OK, EXIT_IO, EXIT_HYPOTHESIS, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("fatou2d")


class _Hypothesis(Exception):
    pass


def _load(args):
    cfg = load_config(args.config) if args.config else Config()
    cfg = cfg.with_overrides(germ=args.germ, out=args.out, seed=args.seed, workers=args.workers)
    if not cfg.germ:
        raise ConfigError("no germ given (use --germ or 'germ = <path>' in the config)")
    germ = read_germ(cfg.germ)
    return cfg, germ


def _gate(germ):
    rep = check_hypothesis(germ)
    if not rep.passed:
        raise _Hypothesis("; ".join(rep.reasons))
    return rep


def _context(cfg, germ, *, certify=True):
    ng = normalize(germ)
    params = cfg.sector_params(ng.k)
    if params is None and certify:
        from .coords import ChartSystem
        params = default_params(ChartSystem(ng), seed=cfg.seed).params
    return build_context(ng, params=params, policy=cfg.orbit_policy(), seed=cfg.seed,
                         limits=cfg.limits())


def _outdir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _report_lines(rep):
    lines = [f"order k = {rep.k}", f"directions = {len(rep.directions)}"]
    for d in rep.directions:
        lam = complex(d.lam)
        dirr = "n/a" if d.director is None else f"{complex(d.director).real:.6g}{complex(d.director).imag:+.6g}j"
        lines.append(f"  direction {d}  lambda = {lam.real:.6g}{lam.imag:+.6g}j  "
                     f"degenerate = {d.degenerate}  director = {dirr}")
    return lines


# -- subcommands -----------------------------------------------------------------


def cmd_analyze(args):
    cfg = load_config(args.config) if args.config else Config()
    path = args.germ or cfg.germ
    if not path:
        raise ConfigError("no germ given")
    germ = read_germ(path)
    rep = check_hypothesis(germ)
    for line in _report_lines(rep):
        print(line)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "analyze.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["direction", "re_lambda", "im_lambda", "degenerate", "re_director",
                        "im_director"])
            for d in rep.directions:
                dd = complex(d.director) if d.director is not None else complex("nan")
                w.writerow([str(d), complex(d.lam).real, complex(d.lam).imag, d.degenerate,
                            dd.real, dd.imag])
    if not rep.passed:
        print("hypothesis: FAIL")
        for r in rep.reasons:
            print(f"  reason: {r}")
        return EXIT_HYPOTHESIS
    print("hypothesis: PASS")
    return EXIT_OK


def cmd_normalize(args):
    cfg, germ = _load(args)
    _gate(germ)
    ng = normalize(germ)
    pack = build_expansion(ng, cfg.limits())
    out = _outdir(cfg)
    with open(os.path.join(out, "normal_form.txt"), "w") as fh:
        fh.write(format_germ(ng.base))
    write_coeff_csv(pack.g_j, os.path.join(out, "g_coeffs.csv"))
    write_coeff_csv(pack.h_j, os.path.join(out, "h_coeffs.csv"))
    print(f"k = {ng.k}")
    print("conjugating matrix =", np.array2string(np.asarray(ng.conj.matrix), precision=6))
    for line in ng.conj.choices:
        print(f"  choice: {line}")
    print("normal form:")
    sys.stdout.write(format_germ(ng.base))
    if cfg.precision == "high":
        u0 = 40.0
        fit = numeric_fit_gj(ng, u0, ng.k - 1, dps=cfg.oracle_dps + 10)
        sym = [pack.g(j, u0) for j in range(ng.k)]
        err = max(abs(a - b) for a, b in zip(fit, sym))
        print(f"g_j cross-check at u = {u0}: max |symbolic - fit| = {err:.3e}")
    return EXIT_OK


def cmd_orbit(args):
    cfg, germ = _load(args)
    _gate(germ)
    ctx = _context(cfg, germ)
    u0 = complex(args.u) if args.u is not None else cfg.start_u
    v0 = complex(args.v) if args.v is not None else cfg.start_v
    n = args.steps if args.steps is not None else cfg.orbit_steps
    if not in_region_uv(u0, v0, ctx.params):
        raise OutOfRegion(f"start point ({u0}, {v0}) is outside the certified region")
    path = os.path.join(_outdir(cfg), "orbit.csv")
    rows = write_orbit_csv(ctx, u0, v0, n, path)
    print(f"wrote {rows} rows to {path}")
    return EXIT_OK


def cmd_fatou(args):
    cfg, germ = _load(args)
    _gate(germ)
    ctx = _context(cfg, germ)
    if args.x is not None or args.y is not None:
        x, y = complex(args.x or 0), complex(args.y or 0)
        ext = extend_along_orbit(ctx, x, y)
        verdict = {K.ENTERED: "attracted", K.SINGULAR: "chart-singular"}.get(
            int(ext.status[0]), "not-detected")
        print(f"verdict = {verdict}")
        print(f"n_entry = {int(ext.n_entry[0])}")
        print(f"omega = {complex(ext.omega[0])!r}")
        print(f"tau = {complex(ext.tau[0])!r}")
        return EXIT_OK
    u = complex(args.u) if args.u is not None else cfg.start_u
    v = complex(args.v) if args.v is not None else cfg.start_v
    vals = tau_uv(ctx, u, v)
    for key in ("omega", "omega_gap", "omega_confident", "omega_richardson", "omega_tail",
                "tau", "tau_gap", "tau_confident", "n_used", "step_residual"):
        val = getattr(vals, key)[0]
        if isinstance(val, (np.complexfloating, complex)):
            val = complex(val)
        print(f"{key} = {val!r}" if not isinstance(val, np.generic) else f"{key} = {val.item()!r}")
    return EXIT_OK


def cmd_verify(args):
    cfg, germ = _load(args)
    _gate(germ)
    cert = {"germ": cfg.germ, "seed": str(cfg.seed)}
    try:
        ctx = _context(cfg, germ)
    except CannotCertifyRegion as exc:
        cert.update({"region_certified": "false", "error": f"{exc.tag}: {exc}", "all_pass": "false"})
        _write_cert(cfg, cert)
        return EXIT_VERIFY
    p = ctx.params
    cert.update({"k": str(p.k), "R": repr(p.R), "delta": repr(p.delta), "theta": repr(p.theta)})
    results = run_suite(ctx, cfg)
    ok = True
    for r in results:
        cert.update(r.lines())
        ok = ok and r.passed
        log.info("%s: %s (%.3g) in %.1fs %s", r.name, "pass" if r.passed else "FAIL", r.value,
                 r.seconds, r.note)
    cert["all_pass"] = "true" if ok else "false"
    _write_cert(cfg, cert)
    return EXIT_OK if ok else EXIT_VERIFY


def _write_cert(cfg, cert):
    text = "".join(f"{k} = {v}\n" for k, v in cert.items())
    sys.stdout.write(text)
    with open(os.path.join(_outdir(cfg), "certificate.txt"), "w") as fh:
        fh.write(text)


def slice_from_config(cfg: Config) -> SliceSpec:
    return SliceSpec(
        base=(cfg.slice_base_x, cfg.slice_base_y),
        dir1=(cfg.slice_dir1_x, cfg.slice_dir1_y),
        dir2=(cfg.slice_dir2_x, cfg.slice_dir2_y),
        range1=(cfg.slice_s1_min, cfg.slice_s1_max),
        range2=(cfg.slice_s2_min, cfg.slice_s2_max),
        width=cfg.width, height=cfg.height, n_entry=cfg.n_entry,
    )


def cmd_basin(args):
    cfg, germ = _load(args)
    _gate(germ)
    ctx = render_policy(_context(cfg, germ), cfg.render_n_max)
    try:
        spec = slice_from_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = scan(ctx, spec, workers=cfg.workers)
    out = _outdir(cfg)
    emit_ppm(grid, os.path.join(out, "basin.ppm"))
    write_pixel_csv(grid, os.path.join(out, "basin.csv"))
    print(f"attracted pixels = {grid.attracted_count} of {spec.width * spec.height}")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--germ", help="germ file (lines 'c i j re im')")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for all sampling (unsigned 64-bit)")
    common.add_argument("--workers", type=int, help="render threads")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="fatou2d", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("analyze", parents=[common], help="order, characteristic directions, directors")
    sub.add_parser("normalize", parents=[common], help="normal form and series coefficient CSVs")
    po = sub.add_parser("orbit", parents=[common], help="orbit CSV from a (u, v) start point")
    pf = sub.add_parser("fatou", parents=[common], help="omega and tau at a point")
    for p in (po, pf):
        p.add_argument("--u", help="start u (complex literal)")
        p.add_argument("--v", help="start v (complex literal)")
    po.add_argument("--steps", type=int)
    pf.add_argument("--x", help="x of a point of C^2 (uses the orbit extension); "
                    "write --x=-0.1j for values starting with '-'")
    pf.add_argument("--y", help="y of a point of C^2")
    sub.add_parser("verify", parents=[common], help="run the invariant suite, write a certificate")
    sub.add_parser("basin", parents=[common], help="render a basin slice (PPM + CSV)")
    return ap


COMMANDS = {
    "analyze": cmd_analyze,
    "normalize": cmd_normalize,
    "orbit": cmd_orbit,
    "fatou": cmd_fatou,
    "verify": cmd_verify,
    "basin": cmd_basin,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors with status 2, which is reserved here
        return EXIT_IO if exc.code == 2 else exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except _Hypothesis as exc:
        print(f"hypothesis: FAIL ({exc})", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NotUniqueDirection as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (GermParseError, ConfigError, OutOfRegion, OSError) as exc:
        tag = getattr(exc, "tag", "io-error")
        print(f"error: {tag}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CannotCertifyRegion, InvarianceViolation) as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except Fatou2dError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
