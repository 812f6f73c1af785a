"""Plain-text artifact formats and the run manifest.

Every file the command-line layer writes goes through here: distributions,
certificates, strategy parameter vectors, scan curves, and the manifest that
ties a run's inputs to its outputs by content digest.  All writers emit
deterministic bytes for identical payloads, so a rerun with the same inputs
and seed reproduces every artifact byte for byte (the manifest's wall-clock
line is the single intentional exception).

Formats
-------
distribution:   header lines ("distribution", "variables:", "cards:",
                "values: exact|float"), then one row per joint event in
                event-space order: outcome digits followed by the
                probability (an exact literal or a float repr).  The rows
                double as plot-ready grid columns.
curve:          "# eps value" comment header, then two float columns.
strategy:       "strategy-params: <n>" then one float repr per line.
certificate:    JSON with the inflation name, cardinality, contexts, the
                row convention, exact coefficient literals in row order,
                the exact value against the tested distribution, and the
                deflated inequality text.
manifest:       "key: value" lines; inputs/outputs are "label sha256=hex".
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .events import Distribution, EventSpace
from .exact import Root2, format_exact
from .graphs import NodeId

__all__ = [
    "RunManifest",
    "format_distribution",
    "parse_distribution",
    "read_distribution",
    "write_distribution",
    "format_certificate",
    "format_curve",
    "format_strategy_params",
    "parse_strategy_params",
    "parse_manifest",
    "sha256_bytes",
    "sha256_file",
    "write_artifact",
]


# -- digests ----------------------------------------------------------------------


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Union[str, Path]) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_artifact(path: Union[str, Path], text: str) -> str:
    """Write text and hand back the content digest for the manifest."""
    data = text.encode("utf-8")
    Path(path).write_bytes(data)
    return sha256_bytes(data)


# -- distributions ----------------------------------------------------------------


def format_distribution(d: Distribution) -> str:
    """One row per joint event: outcome digits, then the probability."""
    lines = [
        "distribution",
        "variables: " + " ".join(str(v) for v in d.space.variables),
        "cards: " + " ".join(str(c) for c in d.space.cards),
        "values: " + ("exact" if d.is_exact else "float"),
    ]
    for i in range(d.space.size):
        outs = " ".join(str(o) for o in d.space.outcomes_of(i))
        v = d.values[i]
        lines.append(f"{outs} {format_exact(v) if d.is_exact else repr(float(v))}")
    return "\n".join(lines) + "\n"


def parse_distribution(text: str) -> Distribution:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines or lines[0] != "distribution":
        raise ValueError("not a distribution file (missing 'distribution' header)")
    header: dict[str, str] = {}
    body_start = 1
    for ln in lines[1:]:
        if ":" not in ln:
            break
        key, _, rest = ln.partition(":")
        header[key.strip()] = rest.strip()
        body_start += 1
    for key in ("variables", "cards", "values"):
        if key not in header:
            raise ValueError(f"distribution file lacks the '{key}:' header line")
    variables = tuple(NodeId.parse(tok) for tok in header["variables"].split())
    cards = tuple(int(tok) for tok in header["cards"].split())
    space = EventSpace(variables, cards)
    exact = header["values"] == "exact"

    seen = np.zeros(space.size, dtype=bool)
    values = (
        np.array([Fraction(0)] * space.size, dtype=object)
        if exact
        else np.zeros(space.size)
    )
    n = len(variables)
    for ln in lines[body_start:]:
        toks = ln.split()
        if len(toks) != n + 1:
            raise ValueError(f"malformed distribution row: {ln!r}")
        outs = tuple(int(t) for t in toks[:n])
        idx = space.index_of(outs)
        if seen[idx]:
            raise ValueError(f"duplicate event row: {ln!r}")
        seen[idx] = True
        if exact:
            v = Root2.parse(toks[-1])
            values[idx] = v.a if v.b == 0 else v
        else:
            values[idx] = float(toks[-1])
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ValueError(f"distribution file misses event {space.outcomes_of(missing)}")
    return Distribution(space, values)


def read_distribution(path: Union[str, Path]) -> Distribution:
    return parse_distribution(Path(path).read_text())


def write_distribution(path: Union[str, Path], d: Distribution) -> str:
    return write_artifact(path, format_distribution(d))


# -- certificates -----------------------------------------------------------------


def format_certificate(
    inflation_name: str,
    cardinality: int,
    contexts: Sequence[Sequence[str]],
    rows: str,
    coefficients: Sequence[Union[Fraction, Root2]],
    value,
    inequality_text: str,
    symmetric: bool,
) -> str:
    """Deterministic JSON for an exact infeasibility certificate."""
    payload = {
        "kind": "marginal-infeasibility-certificate",
        "inflation": inflation_name,
        "cardinality": cardinality,
        "symmetric": symmetric,
        "contexts": [list(c) for c in contexts],
        "rows": rows,
        "certificate": [format_exact(c) for c in coefficients],
        "value": format_exact(value),
        "inequality": inequality_text,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# -- scan curves ------------------------------------------------------------------


def format_curve(samples: Sequence[tuple[float, float]]) -> str:
    lines = ["# eps value"]
    lines.extend(f"{repr(float(e))} {repr(float(v))}" for e, v in samples)
    return "\n".join(lines) + "\n"


# -- strategy parameter vectors -----------------------------------------------------


def format_strategy_params(vector: np.ndarray) -> str:
    vec = np.asarray(vector, dtype=np.float64)
    lines = [f"strategy-params: {vec.size}"]
    lines.extend(repr(float(x)) for x in vec)
    return "\n".join(lines) + "\n"


def parse_strategy_params(text: str) -> np.ndarray:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines or not lines[0].startswith("strategy-params:"):
        raise ValueError("not a strategy parameter file")
    n = int(lines[0].partition(":")[2])
    if len(lines) - 1 != n:
        raise ValueError(f"expected {n} parameter lines, found {len(lines) - 1}")
    return np.array([float(ln) for ln in lines[1:]])


# -- run manifest -----------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    """What a command ran on and what it produced, digests included.

    Every output file a command writes is listed here with its content
    digest; inputs carry the digest of the file (or of the canonical text
    of a named built-in).  wall_clock is informational and is the only
    field that varies between identical reruns.
    """

    command: tuple[str, ...]
    version: str
    rng_seed: Optional[int]
    wall_clock: float
    inputs: tuple[tuple[str, str], ...]
    outputs: tuple[tuple[str, str], ...]
    workers: Optional[int] = None

    def to_text(self) -> str:
        lines = [
            "manifest-version: 1",
            "command: " + " ".join(self.command),
            f"tool-version: {self.version}",
            f"rng-seed: {'-' if self.rng_seed is None else self.rng_seed}",
        ]
        if self.workers is not None:
            lines.append(f"workers: {self.workers}")
        lines.append(f"wall-clock-seconds: {self.wall_clock:.3f}")
        for label, digest in self.inputs:
            lines.append(f"input: {label} sha256={digest}")
        for name, digest in sorted(self.outputs):
            lines.append(f"output: {name} sha256={digest}")
        return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> RunManifest:
    fields: dict[str, str] = {}
    inputs: list[tuple[str, str]] = []
    outputs: list[tuple[str, str]] = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        key, _, rest = ln.partition(":")
        key, rest = key.strip(), rest.strip()
        if key in ("input", "output"):
            label, _, digest = rest.rpartition(" sha256=")
            if not label or not digest:
                raise ValueError(f"malformed manifest line: {ln!r}")
            (inputs if key == "input" else outputs).append((label, digest))
        else:
            fields[key] = rest
    if fields.get("manifest-version") != "1":
        raise ValueError("unsupported or missing manifest version")
    seed = fields.get("rng-seed", "-")
    return RunManifest(
        command=tuple(fields.get("command", "").split()),
        version=fields.get("tool-version", ""),
        rng_seed=None if seed == "-" else int(seed),
        wall_clock=float(fields.get("wall-clock-seconds", "0")),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        workers=int(fields["workers"]) if "workers" in fields else None,
    )
