"""Command line front end: ``polarmfe {build,verify,converge}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 a structural
assumption (simple eigenvalue, invertible L_j) fails, 4 blow-up.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, dumps_config, load_config
from .errors import MFEError
from .schroedinger import solve_hierarchy
from .study import dump_hierarchy, prepare, run_convergence, solve_slow, verify_residual

log = logging.getLogger("polarmfe")

EXIT_OK, EXIT_VALIDATION, EXIT_ASSUMPTION, EXIT_BLOWUP = 0, 2, 3, 4


def _odd(text):
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if m < 1 or m % 2 == 0:
        raise argparse.ArgumentTypeError(f"the expansion order must be an odd positive integer, got {m}")
    return m


def _real_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            num, _, den = part.partition("/")
            out.append(float(num) / float(den) if den else float(num))
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"cannot parse {part!r} as a number or fraction")
    if not out or any(v <= 0 for v in out):
        raise argparse.ArgumentTypeError("expected a comma separated list of positive numbers")
    return out


def _positive(text):
    v = _real_list(text)
    if len(v) != 1:
        raise argparse.ArgumentTypeError("expected a single positive number")
    return v[0]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML problem file (default: built-in Klein-Gordon)")
    common.add_argument("--m", type=_odd, help="expansion order (odd)")
    common.add_argument("--eps", type=_real_list, metavar="LIST", help="comma separated eps values, fractions allowed")
    common.add_argument("--tau-end", type=_positive, metavar="REAL", help="slow-time horizon")
    common.add_argument("--dtau", type=_positive, metavar="REAL", help="slow time step")
    common.add_argument("--dt-factor", type=_positive, metavar="REAL", help="reference step as a multiple of eps")
    common.add_argument("--nls-only", action="store_true", default=None, help="measure the NLS approximation")
    common.add_argument("--dealias", action="store_true", default=None, help="2/3-rule dealiasing of T")
    common.add_argument("--out", metavar="DIR", default="polarmfe-out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="polarmfe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", parents=[common], help="build the hierarchy and dump its coefficients")
    b.add_argument("--tau", type=_real_list, metavar="LIST", help="slow times to dump (default: 0 and tau_end)")
    b.add_argument("--no-fields", action="store_true", help="write manifests only")
    sub.add_parser("verify", parents=[common], help="residual norms and modulation bounds")
    c = sub.add_parser("converge", parents=[common], help="eps sweep against the reference solver")
    c.add_argument("--workers", type=int, default=1, help="worker processes for the eps sweep")
    c.add_argument("--stem", default="converge", help="report file name stem")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_run(m=args.m, eps=tuple(args.eps) if args.eps else None, dtau=args.dtau,
                       dt_factor=args.dt_factor, nls_only=args.nls_only, dealias=args.dealias)
    if args.tau_end is not None:
        cfg = RunConfig(cfg.system.replace(tau_end=args.tau_end), cfg.grid, cfg.run)
    return cfg


def cmd_build(cfg: RunConfig, out: Path, taus=None, write_fields=True):
    ctx = prepare(cfg)
    p_end = cfg.system.tau_end
    taus = sorted(set(taus or [0.0, p_end]))
    if taus[-1] > p_end + 1e-12:
        raise ValueError(f"requested tau {taus[-1]} lies beyond tau_end={p_end}")
    from .model import make_polarized_envelope

    p = make_polarized_envelope(cfg.system, ctx.disp, ctx.grid)
    states = solve_hierarchy(ctx, p, taus, dtau=cfg.run.dtau or p_end / 200)
    (out / "dispersion.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "dispersion.json").write_text(ctx.disp.to_json())
    manifests = [dump_hierarchy(s.hierarchy(ctx), out, write_fields) for s in states]
    for path in manifests:
        print(f"wrote {path}")
    return manifests


def cmd_verify(cfg: RunConfig, out: Path):
    ctx = prepare(cfg)
    slow = solve_slow(ctx, cfg.system.tau_end, cfg.run.dtau)
    reports = [verify_residual(slow, e) for e in cfg.run.eps]
    out.mkdir(parents=True, exist_ok=True)
    path = out / "verify.json"
    path.write_text(json.dumps(reports, indent=2, sort_keys=True))
    for r in reports:
        print(f"eps={r['epsilon']:.6g} m={r['m']} residual={r['residual_total']:.6e}")
    print(f"wrote {path}")
    return reports


def cmd_converge(cfg: RunConfig, out: Path, workers=1, stem="converge"):
    report = run_convergence(cfg, workers=workers)
    path = report.write(out, stem, dumps_config(cfg))
    for r in report.records:
        print(f"eps={r.epsilon:.6g} m={r.m} error={r.error_maxnorm:.6e} residual={r.residual_wiener:.6e}")
    if "error" in report.slopes:
        s = report.slopes["error"]
        print(f"{report.approximation} error slope {s.slope:.3f} (rms {s.rms:.3f})")
    else:
        print("fewer than three eps values: no slope fitted")
    print(f"wrote {path}")
    return report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        if args.command == "build":
            cmd_build(cfg, out, args.tau, not args.no_fields)
        elif args.command == "verify":
            cmd_verify(cfg, out)
        else:
            cmd_converge(cfg, out, args.workers, args.stem)
    except MFEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_VALIDATION, EXIT_ASSUMPTION, EXIT_BLOWUP) else 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
