"""Command-line front end: ``thermoray <command> [--config FILE] [--out DIR] ...``.

Exit status: 0 when every asserted check passes, 1 when one fails, 2 for a
bad config or a chart/identity combination that cannot be evaluated.
"""
from __future__ import annotations

import argparse
import sys

from . import experiments as ex
from .config import IDENTITIES, IDENTITY_ALIASES, ConfigError, IncompatibleError, canonical_identity, load
from .flow import FlowError
from .geometry import GeometryError
from .reports import Check, all_passed, write_report
from .riccati import NonConvergenceError, RiccatiBlowUp
from .tomography import OrbitNotFound, SolverDivergence

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(p):
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--out", metavar="DIR", default=".", help="directory for reports (default: .)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--tol", type=float, default=None, help="override every asserted tolerance")
    p.add_argument("--dump-orbit", action="store_true", help="write trajectories as CSV and JSON")


def build_parser():
    parser = argparse.ArgumentParser(prog="thermoray", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", help="frame and Pestov identity residuals")
    p.add_argument("--identity", choices=IDENTITIES + sorted(IDENTITY_ALIASES))
    _common(p)
    p = sub.add_parser("riccati", help="c^s, c^u and R_c along an orbit")
    p.add_argument("--chart", choices=["torus", "halfplane", "plane"])
    p.add_argument("--e-scale", type=float, help="homogeneous half-plane thermostat strength")
    _common(p)
    for name, text in (("flow", "integrate one orbit"), ("jacobi", "linearized flow vs Jacobi fields"),
                       ("decompose", "solenoidal decomposition"), ("xray", "X-ray kernel checks"),
                       ("adjoint-test", "d / delta adjointness")):
        _common(sub.add_parser(name, help=text))
    p = sub.add_parser("sweep", help="convergence sweeps to CSV")
    p.add_argument("--kind", choices=["flow", "spectral", "constant"])
    p.add_argument("--levels", type=float, nargs="+", help="step sizes (flow) or grid sizes")
    _common(p)
    return parser


def run(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
    except ConfigError as exc:
        print(f"thermoray: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    opt = ex.Options(seed=seed, tol=args.tol if args.tol is not None else cfg.get("tolerance"),
                     out=args.out, dump_orbit=args.dump_orbit)
    runner = ex.RUNNERS[args.command]
    kwargs = {}
    if args.command == "verify":
        kwargs["identity"] = canonical_identity(args.identity or cfg.get("identity", "pestov"))
    elif args.command == "riccati":
        kwargs.update(chart=args.chart, e_scale=args.e_scale)
    elif args.command == "sweep":
        kwargs.update(kind=args.kind, levels=args.levels)
    try:
        checks, extra, files = runner(cfg, opt, **kwargs)
    except (IncompatibleError, ConfigError, GeometryError) as exc:
        print(f"thermoray: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergenceError, RiccatiBlowUp, SolverDivergence, OrbitNotFound, FlowError) as exc:
        checks = [Check(f"{args.command}: {type(exc).__name__}", float("inf"), 0.0, {"error": str(exc)})]
        extra, files = {}, []
    name = args.command if args.command != "verify" else f"verify_{kwargs['identity']}"
    path = write_report(checks, opt.out, name, extra)
    for c in checks:
        print(c.line(), file=stdout)
    for f in [path] + files:
        print(f"wrote {f}", file=stdout)
    return EXIT_OK if all_passed(checks) else EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
