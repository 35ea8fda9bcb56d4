"""Command-line driver.

Every subcommand prints (or writes with ``--out``) one JSON document; CSV
traces go to ``--trace-dir`` or, with ``--out``, next to the report.  Exit
status: 0 completed, 1 usage error, 2 invalid input, 3 pipeline failure.  On
a nonzero status nothing is written to ``--out``; partial results go to
``<out>.partial`` instead.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from fractions import Fraction

from .cones import cone_around, generated_cone
from .convexity import surjectivity_report
from .hfunc import (
    VANISH_TOL,
    ProbeConfig,
    Subspace,
    estimate_sigma,
    estimate_sigma0,
    is_hypoelliptic_numeric,
)
from .localize import (
    default_schedule,
    localization_upper_bound,
    simple_characteristic_localization,
    verify_localization,
)
from .pipeline import PipelineError, PipelineSpec, build_paper_example
from .polycore import DimensionMismatch, ParseError, as_fraction, parse

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2, 3


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# flag parsing
# ---------------------------------------------------------------------------

def _vector(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(as_fraction(x.strip()) for x in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad vector {text!r}") from exc


def parse_subspace(text: str, dim: int) -> Subspace:
    """``e3``, ``e1,e2`` or ``;``-separated comma vectors such as ``1,1,0;0,0,1``."""
    text = text.strip()
    if text.lower() in ("", "0", "zero"):
        return Subspace.zero(dim)
    if text.lower() in ("full", "all"):
        return Subspace.full(dim)
    if all(part.strip().lower().startswith("e") for part in text.split(",")):
        try:
            idx = [int(part.strip()[1:]) for part in text.split(",")]
        except ValueError as exc:
            raise InputError(f"bad subspace {text!r}") from exc
        if any(not 1 <= i <= dim for i in idx):
            raise InputError(f"coordinate index out of range 1..{dim} in {text!r}")
        return Subspace.coordinate(dim, idx)
    vectors = [_vector(v) for v in text.split(";") if v.strip()]
    if any(len(v) != dim for v in vectors):
        raise InputError(f"subspace vectors must have {dim} coordinates")
    return Subspace.span([[float(x) for x in v] for v in vectors], dim)


def parse_cone(text: str, dim: int):
    """``axis=0,0,1;cos2=1/2`` (round) or ``gen=1,0;0,1`` (generated)."""
    fields = {}
    text = text.strip()
    if text.startswith("gen="):
        gens = [_vector(v) for v in text[4:].split(";") if v.strip()]
        if any(len(g) != dim for g in gens):
            raise InputError(f"generators must have {dim} coordinates")
        return generated_cone(gens)
    for part in text.split(";"):
        if "=" not in part:
            raise InputError(f"bad cone specification {text!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    if "axis" not in fields:
        raise InputError("round cone needs axis=...")
    axis = _vector(fields["axis"])
    if len(axis) != dim:
        raise InputError(f"cone axis must have {dim} coordinates")
    if "cos2" in fields:
        return cone_around(axis, cos2=as_fraction(fields["cos2"]))
    if "angle" in fields:
        return cone_around(axis, float(fields["angle"]))
    return cone_around(axis, cos2=Fraction(1, 2))


def _config(args) -> ProbeConfig:
    cfg = ProbeConfig(seed=args.seed)
    if getattr(args, "radii", None):
        parts = args.radii.split(",")
        try:
            if len(parts) == 1:
                cfg = replace(cfg, n_radii=int(parts[0]))
            elif len(parts) == 3:
                cfg = replace(cfg, r0=float(parts[0]), rho=float(parts[1]), n_radii=int(parts[2]))
            else:
                raise ValueError
        except ValueError as exc:
            raise InputError("--radii takes N or R0,RHO,N") from exc
    if getattr(args, "t_grid", None):
        try:
            cfg = replace(cfg, t_grid=tuple(float(x) for x in args.t_grid.split(",")))
        except ValueError as exc:
            raise InputError(f"bad --t-grid: {exc}") from exc
    if getattr(args, "xi", None) and args.command in ("sigma", "sigma0", "hypoelliptic"):
        cfg = cfg.with_directions(_vector(args.xi))
    return cfg


def _default_seed() -> int:
    env = os.environ.get("PCONVEX_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        return 0


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _trace_dir(args) -> str | None:
    if args.trace_dir:
        return args.trace_dir
    if args.out:
        return os.path.dirname(os.path.abspath(args.out))
    return None


def _emit(args, doc: dict, traces: dict[str, object]) -> None:
    """Write traces, then the JSON document."""
    directory = _trace_dir(args)
    if directory is not None and traces:
        os.makedirs(directory, exist_ok=True)
        for name, obj in sorted(traces.items()):
            obj.to_csv(os.path.join(directory, name))
    text = _dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _trace_names(args, names: list[str]) -> list[str] | None:
    return names if _trace_dir(args) is not None else None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _poly(args):
    return parse(args.poly, args.dim)


def cmd_sigma(args, zero_only: bool = False):
    p = _poly(args)
    v = parse_subspace(args.subspace, args.dim)
    cfg = _config(args)
    est = (estimate_sigma0 if zero_only else estimate_sigma)(p, v, cfg)
    tol = args.tol if args.tol is not None else VANISH_TOL
    name = "sigma0_trace.csv" if zero_only else "sigma_trace.csv"
    doc = {
        "command": args.command,
        "polynomial": p.format(),
        "subspace": v.to_json(),
        "config": cfg.to_json(),
        "estimate": est.to_json(),
        "tolerance": tol,
        "vanishes": bool(est.upper_bound < tol and est.decaying),
        "trace": (_trace_names(args, [name]) or [None])[0],
    }
    return doc, {name: est.trace}


def cmd_sigma0(args):
    return cmd_sigma(args, zero_only=True)


def cmd_localize(args):
    p = _poly(args)
    if not args.xi:
        raise InputError("localize needs --xi")
    xi = _vector(args.xi)
    cfg = _config(args)
    l = simple_characteristic_localization(p, xi)
    tol = args.tol if args.tol is not None else 1e-3
    report = verify_localization(p, xi, l, default_schedule(), cfg, tolerance=tol)
    doc = {
        "command": "localize",
        "polynomial": p.format(),
        "xi": [str(x) for x in xi],
        "localization": l.format(),
        "coefficients": [str(l.coefficient(tuple(int(i == j) for i in range(args.dim))))
                         for j in range(args.dim)],
        "convergence": report.to_json(),
        "trace": (_trace_names(args, ["localization_convergence.csv"]) or [None])[0],
    }
    if args.subspace:
        doc["localization_bound"] = localization_upper_bound(l, parse_subspace(args.subspace, args.dim)).to_json()
    return doc, {"localization_convergence.csv": report}


def cmd_hypoelliptic(args):
    p = _poly(args)
    cfg = _config(args)
    if args.tol is not None:
        cfg = replace(cfg, hypo_tol=args.tol)
    verdict = is_hypoelliptic_numeric(p, cfg)
    return {"command": "hypoelliptic", "polynomial": p.format(), "config": cfg.to_json(),
            **verdict.to_json()}, {}


def cmd_convexity(args):
    p = _poly(args)
    if not args.cone:
        raise InputError("convexity needs --cone")
    cone = parse_cone(args.cone, args.dim)
    cfg = _config(args)
    report = surjectivity_report(p, cone, cfg)
    doc = report.to_json()
    doc["command"] = "convexity"
    doc["config"] = cfg.to_json()
    if _trace_dir(args) is None:
        for c in doc["sigma0_checks"]:
            c["trace"] = None
    return doc, report.traces


def cmd_reproduce(args):
    cos2 = as_fraction(args.cos2) if args.cos2 else Fraction(1, 2)
    probe = _config(args)
    spec = PipelineSpec(dim=args.dim, r_text=args.r_poly, cos2=cos2, seed=args.seed, probe=probe)
    example = build_paper_example(spec)
    doc = example.to_json()
    doc["command"] = "reproduce-paper"
    doc["config"] = spec.config().to_json()
    names = sorted(example.report.traces)
    if _trace_dir(args) is None:
        for c in doc["sigma0_checks"]:
            c["trace"] = None
        doc["traces"] = None
    else:
        doc["traces"] = names
    return doc, example.report.traces


COMMANDS = {
    "sigma": cmd_sigma,
    "sigma0": cmd_sigma0,
    "localize": cmd_localize,
    "hypoelliptic": cmd_hypoelliptic,
    "convexity": cmd_convexity,
    "reproduce-paper": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pconvex", description="Ratio estimates, localizations and convexity verdicts "
                     "for constant-coefficient operators given by their symbols.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, poly=True):
        if poly:
            sp.add_argument("--poly", required=True, help='symbol, e.g. "x1^2-x2^2-x3^2"')
            sp.add_argument("--dim", type=int, required=True, help="number of variables")
        sp.add_argument("--seed", type=int, default=_default_seed(),
                        help="RNG seed (default: $PCONVEX_SEED or 0)")
        sp.add_argument("--radii", help="N or R0,RHO,N for the radius schedule R0*RHO^k")
        sp.add_argument("--t-grid", help="comma list of t values > 1")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--trace-dir", help="directory for CSV traces")

    for name in ("sigma", "sigma0"):
        sp = sub.add_parser(name, help=f"upper-bound estimate of {name}_P(V)")
        common(sp)
        sp.add_argument("--subspace", required=True, help="e3, e1,e2 or 1,1,0;0,0,1")
        sp.add_argument("--xi", help="extra probe direction")
        sp.add_argument("--tol", type=float, help="vanishing threshold (default 1e-3)")

    sp = sub.add_parser("localize", help="linear localization at a simple characteristic")
    common(sp)
    sp.add_argument("--xi", required=True, help="simple characteristic, comma list")
    sp.add_argument("--subspace", help="also report the localization bound on this subspace")
    sp.add_argument("--tol", type=float, help="residual tolerance (default 1e-3)")

    sp = sub.add_parser("hypoelliptic", help="numeric hypoellipticity probe")
    common(sp)
    sp.add_argument("--xi", help="extra probe direction")
    sp.add_argument("--tol", type=float, help="final-ratio threshold (default 1e-2)")

    sp = sub.add_parser("convexity", help="convexity verdicts and surjectivity report for a cone")
    common(sp)
    sp.add_argument("--cone", required=True, help="axis=0,0,1;cos2=1/2 or gen=1,0;0,1")

    sp = sub.add_parser("reproduce-paper", help="build and check the cone counterexample")
    common(sp, poly=False)
    sp.add_argument("--dim", type=int, default=3, help="dimension d >= 3 (default 3)")
    sp.add_argument("--r-poly", help="lower-order term R (default (x1^2+...+xd^2)^3)")
    sp.add_argument("--cos2", help="cos^2 of the cone half-angle (default 1/2)")
    return parser


def _write_partial(args, doc: dict) -> None:
    if args.out:
        with open(args.out + ".partial", "w", encoding="utf-8") as handle:
            handle.write(_dumps(doc))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "dim", 1) is not None and args.dim < 1:
        parser.error("--dim must be positive")
    try:
        doc, traces = COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"pconvex: {exc}", file=sys.stderr)
        _write_partial(args, {"error": str(exc), "exit_code": exc.code, "partial": exc.partial})
        return exc.code
    except (ParseError, DimensionMismatch, InputError, ValueError, ZeroDivisionError) as exc:
        print(f"pconvex: invalid input: {exc}", file=sys.stderr)
        _write_partial(args, {"error": str(exc), "exit_code": EXIT_INPUT})
        return EXIT_INPUT
    _emit(args, doc, traces)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
