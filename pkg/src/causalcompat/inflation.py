"""Inflated causal structures and the marginal-problem compatibility test.

An inflation of a structure G is a DAG whose nodes are indexed copies of G's
nodes, wired so that every copy sees, for each original parent, exactly one
copy of that parent.  Distributions compatible with G induce, on suitable
sets of inflated observables, marginals that are products of marginals of the
observed distribution; collecting those sets yields a marginal problem whose
infeasibility witnesses incompatibility, and whose infeasibility certificates
deflate to polynomial inequalities on the original observables.

Key set notions, for S a set of inflated observables:
  * S is *injectable* when copy-stripping restricted to the ancestral
    subgraph of S is an isomorphism onto the ancestral subgraph of the
    stripped set in the original graph (no two nodes may share a base name).
  * Two sets are *ancestrally independent* when their ancestor closures are
    disjoint.
  * S is *ai-expressible* when it splits into ancestrally independent blocks
    each of which is injectable.  Then P(S) = prod_blocks P_observed(block
    stripped), which is exactly the product rule used to build the marginal
    model.  The canonical block partition is the partition of S into
    ancestry-overlap connected components (blocks of any witnessing
    partition are unions of components, and injectability passes to
    subsets, so the component partition works whenever any partition does).
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .events import Distribution, EventSpace, marginalize
from .exact import Root2
from .graphs import (
    CausalStructure,
    NodeId,
    _strip_isomorphic,
    ancestral_subgraph,
    triangle_structure,
)
from .inequalities import Factor, PolynomialInequality, parse_inequality
from .lp import FeasibilityProblem, Feasible, Infeasible, solve_feasibility
from .marginals import MarginalModel, MarginalScenario, incidence_matrix, marginal_vector

__all__ = [
    "Inflation",
    "AiExpressibleSet",
    "is_injectable",
    "injectable_sets",
    "ancestrally_independent",
    "ai_expressible_sets",
    "builtin_inflation",
    "inflated_marginal_model",
    "deflate_certificate",
    "FrozenCertificate",
    "wagon_wheel_certificate",
    "CompatibilityReport",
    "test_compatibility",
    "format_inflation",
    "parse_inflation",
]


@dataclass(frozen=True)
class Inflation:
    """A structure together with one of its inflations.

    Validated so that every inflated node is an indexed copy of an original
    node of the same kind (and cardinality), and the stripped parents of each
    copy are exactly the original parents, one copy each.
    """

    original: CausalStructure
    inflated: CausalStructure
    name: str = ""

    def __post_init__(self):
        for n in self.original.nodes:
            if n.copy is not None:
                raise ValueError(f"original node {n} must not carry a copy index")
        orig_obs = set(self.original.observables)
        for n in self.inflated.nodes:
            if n.copy is None:
                raise ValueError(f"inflated node {n} needs a copy index")
            base = n.strip()
            if base not in self.original.nodes:
                raise ValueError(f"inflated node {n} has no counterpart {base} in the original")
            n_is_obs = n not in self.inflated.latents
            if n_is_obs != (base in orig_obs):
                raise ValueError(f"{n} and {base} disagree on observable/latent kind")
            if n_is_obs and self.inflated.cardinality(n) != self.original.cardinality(base):
                raise ValueError(f"{n} has cardinality {self.inflated.cardinality(n)}, original has {self.original.cardinality(base)}")
            stripped_parents = sorted(q.strip() for q in self.inflated.parents(n))
            if stripped_parents != sorted(self.original.parents(base)):
                raise ValueError(
                    f"{n}: stripped parents {stripped_parents} do not replicate the original parents of {base}"
                )

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return (
            f"<Inflation{tag}: {len(self.inflated.observables)} observable copies"
            f" over {len(self.original.observables)} originals>"
        )


@dataclass(frozen=True)
class AiExpressibleSet:
    """A set of inflated observables with its canonical block partition."""

    members: frozenset[NodeId]
    blocks: tuple[frozenset[NodeId], ...]

    def __post_init__(self):
        merged = frozenset().union(*self.blocks) if self.blocks else frozenset()
        if merged != self.members or sum(len(b) for b in self.blocks) != len(self.members):
            raise ValueError("blocks must partition the member set")

    def __str__(self):
        return " | ".join("{" + ",".join(str(m) for m in sorted(b)) + "}" for b in self.blocks)


# -- set-level predicates -----------------------------------------------------


def is_injectable(inf: Inflation, members: Iterable[NodeId]) -> bool:
    """Strict strip-isomorphism of ancestral subgraphs; see module docstring."""
    ms = frozenset(members)
    if not ms:
        raise ValueError("injectability is about nonempty sets")
    unknown = [m for m in ms if m not in set(inf.inflated.observables)]
    if unknown:
        raise KeyError(f"not inflated observables: {sorted(unknown)}")
    stripped = [m.strip() for m in ms]
    if len(set(stripped)) != len(stripped):
        return False
    return _strip_isomorphic(
        ancestral_subgraph(inf.inflated, ms),
        ancestral_subgraph(inf.original, set(stripped)),
    )


def ancestrally_independent(inf: Inflation, s: Iterable[NodeId], t: Iterable[NodeId]) -> bool:
    """Disjoint ancestor closures in the inflated graph."""
    return not (inf.inflated.ancestors(s) & inf.inflated.ancestors(t))


class _AncestryIndex:
    """Bitmask machinery over the inflated observables for set enumeration."""

    def __init__(self, inf: Inflation):
        self.inf = inf
        self.obs = inf.inflated.observables  # canonical order
        self.anc = [inf.inflated.ancestors([v]) for v in self.obs]
        n = len(self.obs)
        self.adj = [0] * n  # ancestry-overlap graph
        for i in range(n):
            for j in range(i + 1, n):
                if self.anc[i] & self.anc[j]:
                    self.adj[i] |= 1 << j
                    self.adj[j] |= 1 << i
        self._injectable_cache: dict[int, bool] = {}

    def members(self, mask: int) -> frozenset[NodeId]:
        return frozenset(self.obs[i] for i in range(len(self.obs)) if mask >> i & 1)

    def injectable(self, mask: int) -> bool:
        hit = self._injectable_cache.get(mask)
        if hit is None:
            hit = is_injectable(self.inf, self.members(mask))
            self._injectable_cache[mask] = hit
        return hit

    def components(self, mask: int) -> list[int]:
        comps = []
        rest = mask
        while rest:
            comp = rest & -rest
            frontier = comp
            while frontier:
                grown = 0
                m = frontier
                while m:
                    low = m & -m
                    grown |= self.adj[low.bit_length() - 1] & mask
                    m ^= low
                grown &= ~comp
                comp |= grown
                frontier = grown
            comps.append(comp)
            rest &= ~comp
        return comps

    def block_partition(self, mask: int) -> Optional[list[int]]:
        """Component masks if every component is injectable, else None."""
        comps = self.components(mask)
        if all(self.injectable(c) for c in comps):
            return comps
        return None


def _maximal(masks: list[int]) -> list[int]:
    kept: list[int] = []
    for m in sorted(masks, key=lambda x: -bin(x).count("1")):
        if not any(m & k == m for k in kept):
            kept.append(m)
    return kept


def injectable_sets(inf: Inflation) -> tuple[frozenset[NodeId], ...]:
    """All maximal injectable sets, in canonical order."""
    idx = _AncestryIndex(inf)
    n = len(idx.obs)
    hits = [mask for mask in range(1, 1 << n) if idx.injectable(mask)]
    out = [idx.members(m) for m in _maximal(hits)]
    return tuple(sorted(out, key=lambda s: tuple(sorted(s))))


def ai_expressible_sets(inf: Inflation) -> tuple[AiExpressibleSet, ...]:
    """All maximal ai-expressible sets with their block partitions."""
    idx = _AncestryIndex(inf)
    n = len(idx.obs)
    hits: dict[int, list[int]] = {}
    for mask in range(1, 1 << n):
        blocks = idx.block_partition(mask)
        if blocks is not None:
            hits[mask] = blocks
    out = []
    for mask in _maximal(list(hits)):
        blocks = tuple(
            sorted((idx.members(b) for b in hits[mask]), key=lambda b: tuple(sorted(b)))
        )
        out.append(AiExpressibleSet(idx.members(mask), blocks))
    return tuple(sorted(out, key=lambda s: tuple(sorted(s.members))))


# -- built-in inflations of the triangle ----------------------------------------

_BUILTIN_WIRINGS: dict[str, dict[str, tuple[str, str]]] = {
    # two interlocking rings of copies
    "spiral": {
        "A_1": ("X_1", "Y_1"),
        "B_1": ("Y_1", "Z_1"),
        "C_1": ("Z_1", "X_1"),
        "A_2": ("X_1", "Y_2"),
        "B_2": ("Y_1", "Z_2"),
        "C_2": ("Z_1", "X_2"),
    },
    # one hub latent (Y_1) feeding both A's and both B's, C's around the rim
    "wagon-wheel": {
        "A_1": ("X_1", "Y_1"),
        "A_2": ("X_2", "Y_1"),
        "B_1": ("Y_1", "Z_1"),
        "B_2": ("Y_1", "Z_2"),
        "C_1": ("Z_2", "X_1"),
        "C_2": ("Z_2", "X_2"),
        "C_3": ("Z_1", "X_2"),
        "C_4": ("Z_1", "X_1"),
    },
    # two copies of every latent, observables for every parent combination
    "web": {
        "A_1": ("X_1", "Y_1"),
        "A_2": ("X_1", "Y_2"),
        "A_3": ("X_2", "Y_1"),
        "A_4": ("X_2", "Y_2"),
        "B_1": ("Y_1", "Z_1"),
        "B_2": ("Y_1", "Z_2"),
        "B_3": ("Y_2", "Z_1"),
        "B_4": ("Y_2", "Z_2"),
        "C_1": ("Z_1", "X_1"),
        "C_2": ("Z_1", "X_2"),
        "C_3": ("Z_2", "X_1"),
        "C_4": ("Z_2", "X_2"),
    },
}


def builtin_inflation(name: str, cardinality: int = 4) -> Inflation:
    key = name.strip().lower()
    wiring = _BUILTIN_WIRINGS.get(key)
    if wiring is None:
        raise KeyError(f"unknown built-in inflation {name!r}; have {sorted(_BUILTIN_WIRINGS)}")
    observables = {NodeId.parse(o): cardinality for o in wiring}
    latents = sorted({NodeId.parse(l) for ps in wiring.values() for l in ps})
    edges = [(NodeId.parse(l), NodeId.parse(o)) for o, ps in wiring.items() for l in ps]
    inflated = CausalStructure(observables, latents, edges, name=key)
    return Inflation(triangle_structure(cardinality), inflated, name=key)


# -- marginal model of an observed distribution ----------------------------------


def _check_observed(p: Distribution, inf: Inflation):
    want = {v: inf.original.cardinality(v) for v in inf.original.observables}
    have = dict(zip(p.space.variables, p.space.cards))
    if want != have:
        raise ValueError(
            f"distribution must cover the original observables {want}, got {have}"
        )


def inflated_marginal_model(
    p: Distribution,
    inf: Inflation,
    sets: Optional[Sequence[AiExpressibleSet]] = None,
) -> MarginalModel:
    """Marginals that p forces on the maximal ai-expressible sets.

    For a set with blocks B_1 | ... | B_k the induced distribution is
    P(e) = prod_j P_observed(stripped e restricted to B_j); exact inputs stay
    exact.  Any distribution compatible with the original structure yields a
    marginal model realizable by a joint distribution over the inflated
    observables, which is what the LP then tests.
    """
    _check_observed(p, inf)
    if sets is None:
        sets = ai_expressible_sets(inf)
    scenario = MarginalScenario.of([s.members for s in sets])
    by_context = {}
    for s in sets:
        space = EventSpace.over({m: inf.original.cardinality(m.strip()) for m in s.members})
        digits = space.digit_table()
        if p.is_exact:
            vals = np.empty(space.size, dtype=object)
            vals[:] = Fraction(1)
        else:
            vals = np.ones(space.size)
        for block in s.blocks:
            ms = sorted(block)
            pos = [space.variables.index(m) for m in ms]
            marg = marginalize(p, [m.strip() for m in ms])
            weights = np.asarray(marg.space.weights, dtype=np.int64)
            flat = digits[:, pos] @ weights
            vals = vals * marg.values[flat]
        by_context[s.members] = Distribution(space, vals)
    return MarginalModel.of(scenario, by_context)


# -- certificate deflation ---------------------------------------------------------


def deflate_certificate(
    sets: Sequence[AiExpressibleSet],
    certificate: Union[Infeasible, Sequence[Union[Fraction, Root2]]],
    cardinality: Union[int, Mapping[NodeId, int]] = 4,
    name: str = "",
) -> PolynomialInequality:
    """Turn a dual certificate into a polynomial inequality on the originals.

    Row (context, event) corresponds to the monomial
    prod_blocks P[stripped block](stripped event); summing the certificate
    coefficients against those monomials gives a polynomial that is
    nonnegative on every compatible distribution, and strictly negative on
    the distribution whose marginal vector the certificate separates.

    ``certificate`` is either an Infeasible result from solve_feasibility
    (its exact rational certificate is used) or a plain exact vector that
    has already been verified against the same row ordering.
    """
    if isinstance(certificate, Infeasible):
        coefs: Sequence[Union[Fraction, Root2]] = certificate.rational_certificate
    else:
        coefs = tuple(c if isinstance(c, Root2) else Fraction(c) for c in certificate)

    def card(m: NodeId) -> int:
        return cardinality[m] if isinstance(cardinality, Mapping) else cardinality

    spaces = [
        EventSpace.over({m: card(m) for m in s.members}) for s in sets
    ]
    total = sum(sp.size for sp in spaces)
    if len(coefs) != total:
        raise ValueError(f"certificate has {len(coefs)} rows, scenario has {total}")
    if all(c == 0 for c in coefs):
        raise ValueError("the zero vector certifies nothing")

    terms = []
    r = 0
    for s, sp in zip(sets, spaces):
        block_info = []
        for block in s.blocks:
            ms = sorted(block)
            pos = tuple(sp.variables.index(m) for m in ms)
            stripped = tuple(m.strip() for m in ms)
            block_info.append((pos, stripped))
        for e in range(sp.size):
            c = coefs[r]
            r += 1
            if c == 0:
                continue
            outcomes = sp.outcomes_of(e)
            factors = [
                Factor(stripped, tuple(outcomes[k] for k in pos))
                for pos, stripped in block_info
            ]
            terms.append((c, factors))
    return PolynomialInequality(terms, name=name)


# -- the frozen wagon-wheel certificate -------------------------------------------


@dataclass(frozen=True)
class FrozenCertificate:
    """A dual certificate shipped as package data, ready to re-verify.

    coefficients follow the row order of incidence_matrix over ``sets``;
    fritz_value / uniform_value are the exact evaluations recorded when the
    certificate was derived, and ``inequality`` is its deflation.
    """

    inflation: Inflation
    sets: tuple[AiExpressibleSet, ...]
    coefficients: tuple[Root2, ...]
    fritz_value: Fraction
    uniform_value: Root2
    inequality: PolynomialInequality


def wagon_wheel_certificate() -> FrozenCertificate:
    """The frozen certificate whose deflation is the built-in inequality.

    Loads the package-data JSON, rebuilds the wagon-wheel ai-expressible
    sets, and cross-checks that the recorded contexts still match the
    built-in wiring before handing anything back.
    """
    payload = json.loads(
        importlib.resources.files("causalcompat")
        .joinpath("data/wagon_wheel_certificate.json")
        .read_text()
    )
    inf = builtin_inflation("wagon-wheel", cardinality=payload["cardinality"])
    sets = ai_expressible_sets(inf)
    contexts = [[str(m) for m in sorted(s.members)] for s in sets]
    if contexts != payload["contexts"]:
        raise RuntimeError("frozen certificate contexts do not match the built-in wiring")
    return FrozenCertificate(
        inflation=inf,
        sets=sets,
        coefficients=tuple(Root2.parse(t) for t in payload["certificate"]),
        fritz_value=Fraction(payload["fritz_value"]),
        uniform_value=Root2.parse(payload["uniform_value"]),
        inequality=parse_inequality(payload["inequality"]),
    )


# -- the compatibility test -----------------------------------------------------


@dataclass(frozen=True)
class CompatibilityReport:
    """Outcome of the LP test of one distribution against one inflation.

    verdict is "witnessed-incompatible" (with the deflated inequality and its
    exact value on the tested distribution) or "compatible-at-inflation"
    (meaning: this inflation's marginal problem cannot rule the distribution
    out; it is not a proof of compatibility).
    """

    verdict: str
    result: Union[Feasible, Infeasible]
    inequality: Optional[PolynomialInequality]
    value: Optional[object]
    scenario: MarginalScenario
    sets: tuple[AiExpressibleSet, ...]

    @property
    def witnessed(self) -> bool:
        return self.verdict == "witnessed-incompatible"


def test_compatibility(
    p: Distribution,
    inf: Inflation,
    tol: float = 1e-8,
    snap_bound: int = 10**6,
) -> CompatibilityReport:
    """Run the full marginal-problem pipeline for one inflation.

    Builds the marginal model on the maximal ai-expressible sets, solves the
    feasibility LP over joint distributions of the inflated observables, and
    on infeasibility deflates the (exactly verified) certificate into a
    polynomial inequality.  Sized for inflations whose joint event space fits
    the solver directly; the symmetrized pipeline handles larger ones.
    """
    _check_observed(p, inf)
    sets = ai_expressible_sets(inf)
    model = inflated_marginal_model(p, inf, sets)
    card_map = {v: inf.original.cardinality(v.strip()) for v in model.scenario.joint_variables}
    matrix = incidence_matrix(model.scenario, card_map)
    rhs = marginal_vector(model)
    problem = FeasibilityProblem(matrix, rhs)
    result = solve_feasibility(problem, tol=tol, snap_bound=snap_bound)
    if isinstance(result, Infeasible):
        ineq = deflate_certificate(sets, result, cardinality=card_map, name=f"{inf.name or 'inflation'} witness")
        return CompatibilityReport(
            "witnessed-incompatible", result, ineq, result.value, model.scenario, sets
        )
    return CompatibilityReport(
        "compatible-at-inflation", result, None, None, model.scenario, sets
    )


# -- text format -----------------------------------------------------------------
#
# Two structure sections introduced by "original" / "inflated" header lines;
# the body of each section uses the structure text format.

def format_inflation(inf: Inflation) -> str:
    from .graphs import format_structure

    parts = []
    if inf.name:
        parts.append(f"name: {inf.name}")
    parts.append("original")
    parts.append(format_structure(inf.original).rstrip("\n"))
    parts.append("inflated")
    parts.append(format_structure(inf.inflated).rstrip("\n"))
    return "\n".join(parts) + "\n"


def parse_inflation(text: str) -> Inflation:
    from .graphs import parse_structure

    name = ""
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("name:"):
            name = line.split(":", 1)[1].strip()
            continue
        if line in ("original", "inflated"):
            if line in sections:
                raise ValueError(f"inflation file line {lineno}: duplicate section {line!r}")
            current = line
            sections[current] = []
            continue
        if current is None:
            raise ValueError(f"inflation file line {lineno}: content before any section header")
        sections[current].append(raw)
    missing = {"original", "inflated"} - set(sections)
    if missing:
        raise ValueError(f"inflation file is missing section(s): {sorted(missing)}")
    return Inflation(
        parse_structure("\n".join(sections["original"])),
        parse_structure("\n".join(sections["inflated"]), name=name),
        name=name,
    )
