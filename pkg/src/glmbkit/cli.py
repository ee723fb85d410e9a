"""Command-line entry point.

Subcommands::

    run SCENARIO [--override a.b=v]... [--seed S] [--jobs J] [--out DIR]
    validate SCENARIO [--override a.b=v]...
    oracle SUITE [--cases N] [--seed S]
    inspect DENSITY [--region SPEC]... [--divergence OTHER]

Exit status is 0 on success, 1 on a validation or usage error and 2 on a
runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import List, Optional, Sequence

from . import textio
from .divergence import cs_divergence
from .errors import ConfigError, GlmbError
from .experiment import audit_decisions, run_experiment, write_outputs
from .models import POSITION_DIMS
from .oracles import SUITES
from .regions import AxisBox, Disc, HalfSpace
from .rfs import cardinality_distribution, existence_probabilities
from .scenario import SCHEMA_VERSION, ScenarioConfig, load_config, validate
from .void import glmb_void_probability


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def schema_help() -> str:
    """Top-level scenario keys and their nested fields."""
    lines = [f"scenario schema version {SCHEMA_VERSION}; top-level keys:"]
    for f in dataclasses.fields(ScenarioConfig):
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        default = f.default
        if default is dataclasses.MISSING and f.default_factory is not dataclasses.MISSING:
            default = f.default_factory()
        if dataclasses.is_dataclass(default):
            sub = ", ".join(g.name for g in dataclasses.fields(default))
            lines.append(f"  {f.name}: {{{sub}}}")
        elif default is dataclasses.MISSING:
            lines.append(f"  {f.name}: {t} (required)")
        else:
            lines.append(f"  {f.name}: {t} = {default!r}")
    lines.append("overrides use dotted paths, e.g. --override sensor.eta=0.2")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="glmbkit", description="GLMB sensor-control toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario experiment")
    r.add_argument("scenario")
    r.add_argument("--override", action="append", default=[], metavar="PATH=VALUE")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="results")
    r.add_argument("--runs", type=int, default=None, help="override monte_carlo_runs")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.add_argument("--override", action="append", default=[], metavar="PATH=VALUE")

    o = sub.add_parser("oracle", help="run an oracle suite")
    o.add_argument("suite", choices=sorted(SUITES))
    o.add_argument("--cases", type=int, default=None)
    o.add_argument("--seed", type=int, default=0)

    i = sub.add_parser("inspect", help="summarize a serialized density")
    i.add_argument("density")
    i.add_argument("--region", action="append", default=[],
                   help="disc:x,y,r | box:x0,y0,x1,y1 | half:nx,ny,offset")
    i.add_argument("--divergence", metavar="OTHER", help="second density file")
    return p


def parse_region(spec: str, dims=POSITION_DIMS):
    try:
        kind, rest = spec.split(":", 1)
        v = [float(x) for x in rest.split(",")]
        if kind == "disc" and len(v) == 3:
            return Disc((v[0], v[1]), v[2], dims)
        if kind == "box" and len(v) == 4:
            return AxisBox((v[0], v[1]), (v[2], v[3]), dims)
        if kind == "half" and len(v) == 3:
            return HalfSpace((v[0], v[1]), v[2], dims)
    except ValueError as e:
        raise UsageError(f"bad region {spec!r}: {e}") from None
    raise UsageError(f"bad region {spec!r}")


def _load_density(path: str):
    with open(path) as fh:
        return textio.load(fh)


def _cmd_run(args) -> int:
    cfg = load_config(args.scenario, args.override)
    validate(cfg)
    result = run_experiment(cfg, jobs=args.jobs, seed=args.seed, runs=args.runs)
    write_outputs(result, args.out, args.override)
    for ctrl, (mean, se, done, aborted) in result.summary().items():
        print(f"{ctrl}: time-averaged OSPA {mean:.3f} (se {se:.3f}, {done} runs, {aborted} aborted)")
    bad = audit_decisions(result)
    print(f"constraint audit: {len(bad)} violation(s)")
    print(f"outputs written to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.scenario, args.override)
    validate(cfg)
    print(f"{args.scenario}: valid ({cfg.name}, {len(cfg.targets)} targets, {cfg.num_steps} steps)")
    return 0


def _cmd_oracle(args) -> int:
    kw = {"seed": args.seed}
    if args.cases is not None:
        kw["cases"] = args.cases
    rep = SUITES[args.suite](**kw)
    print(rep.summary())
    for f in rep.failures[:10]:
        print("  " + f)
    return 0 if rep.ok else 2


def _cmd_inspect(args) -> int:
    d = _load_density(args.density)
    card = cardinality_distribution(d)
    print(f"components {len(d)}  state_dim {d.state_dim}  hypervolume_unit {d.hypervolume_unit!r}")
    print(f"mean cardinality {card.mean():.6g}  MAP cardinality {card.map()}")
    for l, r in existence_probabilities(d).items():
        print(f"  label {l}: existence {r:.6g}")
    dims = POSITION_DIMS if d.state_dim == 4 else (0, 1)
    for spec in args.region:
        q = glmb_void_probability(d, parse_region(spec, dims))
        print(f"void probability {spec}: {q!r}")
    if args.divergence:
        print(f"cs divergence: {cs_divergence(d, _load_density(args.divergence))!r}")
    return 0


COMMANDS = {"run": _cmd_run, "validate": _cmd_validate, "oracle": _cmd_oracle,
            "inspect": _cmd_inspect}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        print(schema_help(), file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        print(schema_help(), file=sys.stderr)
        return 1
    except (GlmbError, OSError, ValueError, ArithmeticError) as e:
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
