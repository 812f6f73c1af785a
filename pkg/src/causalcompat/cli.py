"""Command-line entry point: derive, eval, noise-scan, optimize, show.

Orchestrates the library end to end with reproducible outputs.  Every
file-writing command also writes a manifest listing each output with its
content digest, the input digests, the tool version, the RNG seed, and the
wall clock.  Reruns with identical inputs and seed reproduce every output
byte for byte (only the manifest's wall-clock line varies).

Conventions:
- named built-ins are accepted wherever a file path is (structures:
  "triangle"/"bell"; inflations: "spiral"/"wagon-wheel"/"web";
  distributions: "fritz"/"uniform"; inequalities: "wagon-wheel");
- a config file of "key = value" lines overrides command-line flags;
- CAUSALCOMPAT_WORKERS names the worker count recorded for parallel
  sections (the pipelines here run serially and deterministically);
- exit status is nonzero whenever any validation or exact verification
  fails, so a zero exit certifies every internal check passed.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .events import Distribution
from .exact import format_exact
from .graphs import CausalStructure, builtin_structure, format_structure, parse_structure
from .inequalities import (
    NoisyFamily,
    PolynomialInequality,
    evaluate,
    format_inequality,
    fritz_distribution,
    noise_threshold,
    noisy_member,
    parse_inequality,
    uniform_triangle_distribution,
    wagon_wheel_inequality,
)
from .inflation import (
    Inflation,
    ai_expressible_sets,
    builtin_inflation,
    format_inflation,
    parse_inflation,
    test_compatibility,
)
from .io import (
    RunManifest,
    format_certificate,
    format_curve,
    format_distribution,
    format_strategy_params,
    parse_strategy_params,
    read_distribution,
    sha256_bytes,
    sha256_file,
    write_artifact,
)
from .lp import Feasible, IndeterminateError, Infeasible
from .marginals import MarginalScenario
from .optimize import OptimizerOptions, maximize_violation
from .quantum import QuantumStrategy, StrategyParams, fritz_strategy
from .symmetry import stabilizer_group, symmetrize_inflation, test_compatibility_symmetric

_WORKERS_ENV = "CAUSALCOMPAT_WORKERS"

_BUILTIN_STRUCTURES = ("triangle", "bell")
_BUILTIN_INFLATIONS = ("spiral", "wagon-wheel", "web")
_BUILTIN_DISTRIBUTIONS = ("fritz", "uniform")
_BUILTIN_INEQUALITIES = ("wagon-wheel",)


class CliError(Exception):
    """A validation failure that should become a nonzero exit."""


# -- input loading -----------------------------------------------------------------
#
# Each loader returns (value, manifest digest).  Built-in names digest their
# canonical text form; paths digest the file bytes.


def _load_structure(token: str) -> tuple[CausalStructure, str]:
    if token in _BUILTIN_STRUCTURES:
        s = builtin_structure(token)
        return s, sha256_bytes(format_structure(s).encode())
    path = Path(token)
    if not path.is_file():
        raise CliError(f"unknown structure {token!r} (not a built-in, not a file)")
    return parse_structure(path.read_text()), sha256_file(path)


def _load_inflation(token: str) -> tuple[Inflation, str]:
    if token in _BUILTIN_INFLATIONS:
        inf = builtin_inflation(token)
        return inf, sha256_bytes(format_inflation(inf).encode())
    path = Path(token)
    if not path.is_file():
        raise CliError(f"unknown inflation {token!r} (not a built-in, not a file)")
    return parse_inflation(path.read_text()), sha256_file(path)


def _load_distribution(token: str) -> tuple[Distribution, str]:
    if token == "fritz":
        d = fritz_distribution()
        return d, sha256_bytes(format_distribution(d).encode())
    if token == "uniform":
        d = uniform_triangle_distribution()
        return d, sha256_bytes(format_distribution(d).encode())
    path = Path(token)
    if not path.is_file():
        raise CliError(f"unknown distribution {token!r} (not a built-in, not a file)")
    try:
        return read_distribution(path), sha256_file(path)
    except ValueError as e:
        raise CliError(f"cannot read distribution {token!r}: {e}") from e


def _load_inequality(token: str) -> tuple[PolynomialInequality, str]:
    if token in _BUILTIN_INEQUALITIES:
        ineq = wagon_wheel_inequality()
        return ineq, sha256_bytes(format_inequality(ineq).encode())
    path = Path(token)
    if not path.is_file():
        raise CliError(f"unknown inequality {token!r} (not a built-in, not a file)")
    try:
        return parse_inequality(path.read_text()), sha256_file(path)
    except ValueError as e:
        raise CliError(f"cannot read inequality {token!r}: {e}") from e


def _load_seed_strategy(token: str, rng_seed: int) -> tuple[QuantumStrategy, str]:
    if token == "fritz":
        s = fritz_strategy()
        return s, sha256_bytes(b"builtin:fritz-strategy")
    if token == "random":
        p = StrategyParams.random(np.random.default_rng(rng_seed))
        return p.build(), sha256_bytes(format_strategy_params(p.vector).encode())
    path = Path(token)
    if not path.is_file():
        raise CliError(f"unknown seed {token!r} (not fritz/random, not a file)")
    try:
        params = StrategyParams(parse_strategy_params(path.read_text()))
        return params.build(), sha256_file(path)
    except ValueError as e:
        raise CliError(f"cannot read strategy seed {token!r}: {e}") from e


def _worker_count() -> Optional[int]:
    raw = os.environ.get(_WORKERS_ENV)
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"{_WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise CliError(f"{_WORKERS_ENV} must be >= 1, got {n}")
    return n


# -- output plumbing ---------------------------------------------------------------


class _Run:
    """Collects inputs/outputs and finishes by writing the manifest."""

    def __init__(self, argv: Sequence[str], out_dir: Path, rng_seed: Optional[int]):
        out_dir.mkdir(parents=True, exist_ok=True)
        self.argv = tuple(argv)
        self.out_dir = out_dir
        self.rng_seed = rng_seed
        self.inputs: list[tuple[str, str]] = []
        self.outputs: list[tuple[str, str]] = []
        self.started = time.monotonic()

    def add_input(self, label: str, digest: str) -> None:
        self.inputs.append((label, digest))

    def write(self, name: str, text: str) -> None:
        self.outputs.append((name, write_artifact(self.out_dir / name, text)))

    def finish(self) -> None:
        manifest = RunManifest(
            command=self.argv,
            version=__version__,
            rng_seed=self.rng_seed,
            wall_clock=time.monotonic() - self.started,
            inputs=tuple(self.inputs),
            outputs=tuple(self.outputs),
            workers=_worker_count(),
        )
        write_artifact(self.out_dir / "manifest.txt", manifest.to_text())


# -- derive -----------------------------------------------------------------------


def cmd_derive(args: argparse.Namespace, argv: Sequence[str]) -> int:
    structure, s_digest = _load_structure(args.structure)
    inflation, i_digest = _load_inflation(args.inflation)
    dist, d_digest = _load_distribution(args.distribution)
    if format_structure(inflation.original) != format_structure(structure):
        raise CliError(
            f"inflation {args.inflation!r} inflates a different structure "
            f"than {args.structure!r}"
        )

    run = _Run(argv, Path(args.out_dir), rng_seed=None)
    run.add_input(args.structure, s_digest)
    run.add_input(args.inflation, i_digest)
    run.add_input(args.distribution, d_digest)

    try:
        if args.symmetric:
            sym = symmetrize_inflation(inflation)
            report = test_compatibility_symmetric(dist, sym, tol=args.tol)
            contexts = [[str(m) for m in sorted(s.members)] for s in sym.sets]
            rows = "marginal-orbit-representatives"
        else:
            report = test_compatibility(dist, inflation, tol=args.tol)
            contexts = [[str(m) for m in sorted(s.members)] for s in report.sets]
            rows = "context-events"
    except IndeterminateError as e:
        print(f"derive: {e}", file=sys.stderr)
        return 2

    card = max(structure.cardinality(v) for v in structure.observables)
    lines = [
        f"structure: {structure.name or args.structure}",
        f"inflation: {inflation.name or args.inflation}",
        f"distribution: {args.distribution}",
        f"symmetric: {'yes' if args.symmetric else 'no'}",
        f"verdict: {report.verdict}",
    ]
    if args.symmetric:
        lines.append(f"group-order: {sym.group.order}")
        lines.append(f"symmetric-deflation: {'yes' if sym.deflation_ok else 'no'}")

    if report.witnessed:
        assert isinstance(report.result, Infeasible)
        value = report.value
        if float(value) >= 0:
            print("derive: certificate value is not negative; refusing to write",
                  file=sys.stderr)
            return 2
        if not args.symmetric:
            recheck = evaluate(report.inequality, dist)
            if float(recheck) >= 0:
                print("derive: deflated inequality does not witness the input",
                      file=sys.stderr)
                return 2
        lines.append(f"value: {format_exact(value)}")
        lines.append(f"inequality-terms: {len(report.inequality.terms)}")
        run.write("inequality.txt", format_inequality(report.inequality))
        run.write(
            "certificate.json",
            format_certificate(
                inflation_name=inflation.name or args.inflation,
                cardinality=card,
                contexts=contexts,
                rows=rows,
                coefficients=report.result.rational_certificate,
                value=value,
                inequality_text=format_inequality(report.inequality),
                symmetric=bool(args.symmetric),
            ),
        )
    else:
        assert isinstance(report.result, Feasible)
        witness = np.asarray(report.result.witness, dtype=np.float64)
        support = np.flatnonzero(witness > args.tol)
        lines.append(f"witness-columns: {witness.size}")
        lines.append(f"witness-support: {support.size}")
        body = ["witness", f"columns: {witness.size}"]
        body.extend(f"{int(i)} {repr(float(witness[i]))}" for i in support)
        run.write("witness.txt", "\n".join(body) + "\n")

    run.write("report.txt", "\n".join(lines) + "\n")
    run.finish()
    print(report.verdict)
    return 0


# -- eval -------------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace, argv: Sequence[str]) -> int:
    ineq, _ = _load_inequality(args.inequality)
    dist, _ = _load_distribution(args.distribution)
    space_vars = set(dist.space.variables)
    used = {v for _, factors in ineq.terms for f in factors for v in f.variables}
    if not used <= space_vars:
        missing = ", ".join(str(v) for v in sorted(used - space_vars))
        raise CliError(f"inequality references variables not in the distribution: {missing}")
    value = evaluate(ineq, dist)
    text = format_exact(value) if dist.is_exact else repr(float(value))
    print(f"value: {text}")
    print(f"violated: {'yes' if float(value) < 0 else 'no'}")
    return 0


# -- noise-scan ---------------------------------------------------------------------


def cmd_noise_scan(args: argparse.Namespace, argv: Sequence[str]) -> int:
    ineq, q_digest = _load_inequality(args.inequality)
    base = fritz_distribution()
    mixer = uniform_triangle_distribution()
    family = NoisyFamily(base.to_float(), mixer.to_float())

    base_value = float(evaluate(ineq, family.base))
    if base_value >= 0:
        raise CliError(
            f"the noiseless distribution does not violate the inequality "
            f"(value {base_value!r}); nothing to scan"
        )

    run = _Run(argv, Path(args.out_dir), rng_seed=None)
    run.add_input(args.inequality, q_digest)

    threshold = noise_threshold(ineq, family, tol=args.tol)
    grid_eps = args.grid_eps if args.grid_eps is not None else threshold

    eps_values = np.arange(0.0, 1.0 + args.eps_step / 2, args.eps_step)
    eps_values[-1] = min(float(eps_values[-1]), 1.0)
    samples = [
        (float(e), float(evaluate(ineq, noisy_member(family, float(e)))))
        for e in eps_values
    ]

    lines = [
        f"inequality: {args.inequality}",
        "family: fritz mixed toward uniform",
        f"threshold: {repr(threshold)}",
        f"tol: {repr(args.tol)}",
        f"base-value: {repr(base_value)}",
        f"grid-eps: {repr(float(grid_eps))}",
        f"curve-samples: {len(samples)}",
    ]
    run.write("report.txt", "\n".join(lines) + "\n")
    run.write("curve.txt", format_curve(samples))
    run.write(
        "noisy_grid.txt",
        format_distribution(noisy_member(family, float(grid_eps))),
    )
    run.finish()
    print(f"threshold: {repr(threshold)}")
    return 0


# -- optimize -----------------------------------------------------------------------


def cmd_optimize(args: argparse.Namespace, argv: Sequence[str]) -> int:
    ineq, q_digest = _load_inequality(args.inequality)
    seed, s_digest = _load_seed_strategy(args.seed, args.rng_seed)

    run = _Run(argv, Path(args.out_dir), rng_seed=args.rng_seed)
    run.add_input(args.inequality, q_digest)
    run.add_input(f"seed:{args.seed}", s_digest)

    opts = OptimizerOptions(
        budget=args.budget,
        hops=args.hops,
        step_size=args.step_size,
        temperature=args.temperature,
        rng_seed=args.rng_seed,
    )
    rep = maximize_violation(ineq, seed, opts)

    want = fritz_distribution()
    fritz_support = tuple(
        want.space.outcomes_of(i) for i, v in enumerate(want.values) if v != 0
    )
    matches = rep.support == fritz_support

    lines = [
        f"inequality: {args.inequality}",
        f"seed: {args.seed}",
        f"status: {rep.status}",
        f"violation: {repr(rep.violation)}",
        f"evaluations: {rep.evaluations}",
        f"budget: {args.budget}",
        f"hops: {args.hops}",
        f"support-events: {len(rep.support)}",
        f"matches-fritz-support: {'yes' if matches else 'no'}",
        "support:",
    ]
    lines.extend("  " + " ".join(str(o) for o in outs) for outs in rep.support)
    run.write("result.txt", "\n".join(lines) + "\n")
    run.write("distribution.txt", format_distribution(rep.distribution))
    run.write("strategy.txt", format_strategy_params(rep.params.vector))
    run.finish()
    print(f"violation: {repr(rep.violation)}")
    return 0


# -- show -------------------------------------------------------------------------


def _show_tables() -> str:
    lines = []
    for name in ("wagon-wheel", "web"):
        inf = builtin_inflation(name)
        sets = ai_expressible_sets(inf)
        lines.append(f"{name}: {len(sets)} maximal ai-expressible sets")
        for s in sets:
            members = "{" + ", ".join(str(m) for m in sorted(s.members)) + "}"
            lines.append(f"  {members}  blocks: {s}")
    return "\n".join(lines) + "\n"


def _show_web_generators() -> str:
    inf = builtin_inflation("web")
    sets = ai_expressible_sets(inf)
    scenario = MarginalScenario.of([s.members for s in sets])
    cards = {v: inf.original.cardinality(v.strip()) for v in scenario.joint_variables}
    group = stabilizer_group(scenario, cards)
    lines = [f"web scenario stabilizer: order {group.order}"]
    lines.extend(f"  {p}" for p in group.generators)
    return "\n".join(lines) + "\n"


def cmd_show(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.what == "fritz":
        sys.stdout.write(format_distribution(fritz_distribution()))
    elif args.what == "wagon-wheel-inequality":
        sys.stdout.write(format_inequality(wagon_wheel_inequality()))
    elif args.what == "tables":
        sys.stdout.write(_show_tables())
    elif args.what == "web-generators":
        sys.stdout.write(_show_web_generators())
    else:  # argparse choices make this unreachable
        raise CliError(f"nothing to show for {args.what!r}")
    return 0


# -- parser and dispatch --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalcompat",
        description="Derive, evaluate, and probe causal compatibility inequalities.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("derive", help="run the inflation pipeline on a distribution")
    p.add_argument("structure", help="built-in name (triangle, bell) or file")
    p.add_argument("inflation", help="built-in name (spiral, wagon-wheel, web) or file")
    p.add_argument("distribution", help="built-in name (fritz, uniform) or file")
    p.add_argument("--symmetric", action="store_true",
                   help="contract the marginal problem by its stabilizer group")
    p.add_argument("--tol", type=float, default=1e-8, help="LP tolerance")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--config", default=None, help="key=value file overriding flags")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("eval", help="evaluate an inequality on a distribution")
    p.add_argument("inequality", help="built-in name (wagon-wheel) or file")
    p.add_argument("distribution", help="built-in name (fritz, uniform) or file")
    p.add_argument("--config", default=None, help="key=value file overriding flags")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise-scan", help="noise threshold of an inequality on the "
                                          "fritz-toward-uniform family")
    p.add_argument("inequality", help="built-in name (wagon-wheel) or file")
    p.add_argument("--tol", type=float, default=1e-6, help="bisection tolerance")
    p.add_argument("--eps-step", type=float, default=0.01, help="curve sample spacing")
    p.add_argument("--grid-eps", type=float, default=None,
                   help="noise level for the grid export (default: the threshold)")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--config", default=None, help="key=value file overriding flags")
    p.set_defaults(func=cmd_noise_scan)

    p = sub.add_parser("optimize", help="search strategies maximizing a violation")
    p.add_argument("inequality", help="built-in name (wagon-wheel) or file")
    p.add_argument("--seed", default="fritz",
                   help="fritz, random, or a strategy parameter file")
    p.add_argument("--budget", type=int, default=20000,
                   help="objective evaluations per local minimization (0: just "
                        "evaluate the seed)")
    p.add_argument("--hops", type=int, default=50, help="basin-hopping rounds")
    p.add_argument("--step-size", type=float, default=0.3,
                   help="hop perturbation scale")
    p.add_argument("--temperature", type=float, default=0.05,
                   help="hop acceptance temperature")
    p.add_argument("--rng-seed", type=int, default=0, help="random number seed")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--config", default=None, help="key=value file overriding flags")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("show", help="pretty-print a built-in object")
    p.add_argument("what", choices=("fritz", "wagon-wheel-inequality", "tables",
                                    "web-generators"))
    p.add_argument("--config", default=None, help="key=value file overriding flags")
    p.set_defaults(func=cmd_show)

    return parser


def _apply_config(args: argparse.Namespace) -> None:
    """Overlay config-file values onto parsed flags (the file wins)."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        raise CliError(f"config file {args.config!r} not found")
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None:
            raise CliError(f"{args.config}:{lineno}: expected 'key = value'")
        key, _, value = line.partition(sep)
        dest = key.strip().replace("-", "_")
        value = value.strip()
        if not hasattr(args, dest) or dest in ("func", "subcommand", "config"):
            raise CliError(f"{args.config}:{lineno}: unknown option {key.strip()!r}")
        current = getattr(args, dest)
        if isinstance(current, bool):
            if value.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise CliError(f"{args.config}:{lineno}: bad boolean {value!r}")
            parsed = value.lower() in ("true", "yes", "1")
        elif isinstance(current, int) and not isinstance(current, bool):
            parsed = int(value)
        elif isinstance(current, float):
            parsed = float(value)
        elif current is None and dest in ("grid_eps",):
            parsed = float(value)
        else:
            parsed = value
        setattr(args, dest, parsed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        _worker_count()  # validate up front so a bad value fails fast
        return args.func(args, argv)
    except CliError as e:
        print(f"causalcompat: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"causalcompat: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
