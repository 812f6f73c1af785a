"""Directed acyclic causal structures with ancestry algebra.

A causal structure is a DAG over observable and latent nodes.  Nodes carry an
optional copy index (written ``A_2``) so that inflated graphs — which contain
several copies of each original node — live in the same type as the originals.
Two nodes are copy-equivalent when their base names match, copy index ignored.

Everything here is immutable after construction and all operations are pure,
so structures can be shared freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

__all__ = [
    "NodeId",
    "CausalStructure",
    "ancestral_subgraph",
    "graphs_copy_equivalent",
    "verify_full_compatibility",
    "triangle_structure",
    "bell_structure",
    "builtin_structure",
    "parse_structure",
    "format_structure",
]

_NODE_NAME_RE = re.compile(r"^(?P<base>.+?)_(?P<copy>[1-9]\d*)$")


@total_ordering
@dataclass(frozen=True)
class NodeId:
    """A node label: base name plus optional positive copy index."""

    base: str
    copy: Optional[int] = None

    def __post_init__(self):
        if not self.base:
            raise ValueError("NodeId base name must be nonempty")
        if self.copy is not None and self.copy < 1:
            raise ValueError(f"copy index must be positive, got {self.copy}")

    @staticmethod
    def parse(name: str) -> "NodeId":
        """Parse ``A`` or ``A_2``.  A trailing ``_<int>`` is the copy index."""
        m = _NODE_NAME_RE.match(name)
        if m:
            return NodeId(m.group("base"), int(m.group("copy")))
        return NodeId(name)

    def strip(self) -> "NodeId":
        """Drop the copy index (the '~' equivalence projection)."""
        return NodeId(self.base) if self.copy is not None else self

    def copy_equivalent(self, other: "NodeId") -> bool:
        return self.base == other.base

    def _key(self):
        return (self.base, self.copy if self.copy is not None else 0)

    def __lt__(self, other: "NodeId"):
        return self._key() < other._key()

    def __str__(self):
        return self.base if self.copy is None else f"{self.base}_{self.copy}"

    def __repr__(self):
        return f"NodeId({str(self)!r})"


class CausalStructure:
    """An immutable DAG partitioned into observable and latent nodes.

    Observable nodes carry an outcome cardinality; latents do not (their
    cardinality is never needed by the marginal-problem reduction).
    """

    def __init__(
        self,
        observables: Mapping[NodeId, int],
        latents: Iterable[NodeId],
        edges: Iterable[tuple[NodeId, NodeId]],
        name: str = "",
    ):
        obs = dict(observables)
        lat = frozenset(latents)
        overlap = lat & obs.keys()
        if overlap:
            raise ValueError(f"nodes cannot be both observable and latent: {sorted(overlap)}")
        for n, card in obs.items():
            if card < 1:
                raise ValueError(f"observable {n} needs cardinality >= 1, got {card}")
        nodes = frozenset(obs) | lat
        edge_set = frozenset((p, c) for p, c in edges)
        for p, c in edge_set:
            if p not in nodes or c not in nodes:
                raise ValueError(f"edge {p}->{c} has an endpoint outside the node set")

        self._observables = MappingProxyType(dict(sorted(obs.items())))
        self._latents = lat
        self._nodes = nodes
        self._edges = edge_set
        self.name = name

        parent_map: dict[NodeId, set[NodeId]] = {n: set() for n in nodes}
        child_map: dict[NodeId, set[NodeId]] = {n: set() for n in nodes}
        for p, c in edge_set:
            parent_map[c].add(p)
            child_map[p].add(c)
        self._parents = {n: frozenset(ps) for n, ps in parent_map.items()}
        self._children = {n: frozenset(cs) for n, cs in child_map.items()}
        self._assert_acyclic()

    def _assert_acyclic(self):
        # Kahn peeling; anything left over sits on a directed cycle.
        indeg = {n: len(self._parents[n]) for n in self._nodes}
        stack = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while stack:
            n = stack.pop()
            seen += 1
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        if seen != len(self._nodes):
            cyclic = sorted(n for n, d in indeg.items() if d > 0)
            raise ValueError(f"graph has a directed cycle through {cyclic}")

    # -- basic views ---------------------------------------------------------

    @property
    def nodes(self) -> frozenset[NodeId]:
        return self._nodes

    @property
    def edges(self) -> frozenset[tuple[NodeId, NodeId]]:
        return self._edges

    @property
    def observables(self) -> tuple[NodeId, ...]:
        """Observable nodes in canonical (lexicographic) order."""
        return tuple(self._observables)

    @property
    def latents(self) -> frozenset[NodeId]:
        return self._latents

    def cardinality(self, n: NodeId) -> int:
        try:
            return self._observables[n]
        except KeyError:
            raise KeyError(f"{n} is not an observable node") from None

    @property
    def cardinalities(self) -> Mapping[NodeId, int]:
        return self._observables

    def _check_known(self, ns: Iterable[NodeId]):
        unknown = [n for n in ns if n not in self._nodes]
        if unknown:
            raise KeyError(f"unknown node(s): {sorted(unknown)}")

    # -- ancestry algebra ----------------------------------------------------

    def parents(self, n: NodeId) -> frozenset[NodeId]:
        self._check_known([n])
        return self._parents[n]

    def children(self, n: NodeId) -> frozenset[NodeId]:
        self._check_known([n])
        return self._children[n]

    def ancestors(self, ns: Iterable[NodeId]) -> frozenset[NodeId]:
        """Smallest superset of ns closed under taking parents (includes ns)."""
        ns = list(ns)
        self._check_known(ns)
        out: set[NodeId] = set()
        stack = list(ns)
        while stack:
            n = stack.pop()
            if n in out:
                continue
            out.add(n)
            stack.extend(self._parents[n])
        return frozenset(out)

    def descendants(self, ns: Iterable[NodeId]) -> frozenset[NodeId]:
        """Mirror of ancestors on reversed edges (includes ns)."""
        ns = list(ns)
        self._check_known(ns)
        out: set[NodeId] = set()
        stack = list(ns)
        while stack:
            n = stack.pop()
            if n in out:
                continue
            out.add(n)
            stack.extend(self._children[n])
        return frozenset(out)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return (
            f"<CausalStructure{tag}: {len(self._observables)} observable,"
            f" {len(self._latents)} latent, {len(self._edges)} edges>"
        )


def ancestral_subgraph(g: CausalStructure, ns: Iterable[NodeId]) -> CausalStructure:
    """Induced subgraph on ancestors(g, ns)."""
    keep = g.ancestors(ns)
    return CausalStructure(
        observables={n: g.cardinality(n) for n in keep if n not in g.latents},
        latents=[n for n in keep if n in g.latents],
        edges=[(p, c) for p, c in g.edges if p in keep and c in keep],
    )


def _collapsed(g: CausalStructure) -> tuple[frozenset, frozenset]:
    nodes = frozenset(n.strip() for n in g.nodes)
    edges = frozenset((p.strip(), c.strip()) for p, c in g.edges)
    return nodes, edges


def graphs_copy_equivalent(g1: CausalStructure, g2: CausalStructure) -> bool:
    """True iff the two graphs agree after dropping copy indices.

    Copy-stripping identifies all copies of a base name with a single node,
    so multi-copies collapse; equality of the collapsed node and edge sets is
    exactly isomorphism under the identity map on base names.
    """
    return _collapsed(g1) == _collapsed(g2)


def _strip_isomorphic(g_infl: CausalStructure, g_orig: CausalStructure) -> bool:
    """Strict variant used for injectability: copy-stripping restricted to
    g_infl's nodes must be a bijection onto g_orig's nodes that carries the
    edge set over exactly.  Collapsing two copies of the same base name is
    what this check refuses."""
    stripped = [n.strip() for n in g_infl.nodes]
    if len(set(stripped)) != len(stripped):
        return False
    return _collapsed(g_infl) == (frozenset(g_orig.nodes), frozenset(g_orig.edges))


def verify_full_compatibility(g: CausalStructure, p, tol: float = 1e-9) -> bool:
    """Check the defining factorization P(N) = prod_n P(n | Pa(n)).

    ``p`` must be a Distribution over *every* node of g (latents included,
    with finite cardinalities implied by p's own event space).  Conditionals
    are computed from p itself; events whose conditioning set has probability
    zero are unconstrained and skipped.
    """
    from .events import marginalize  # local import to avoid a module cycle

    pvars = set(p.space.variables)
    if pvars != set(g.nodes):
        missing = sorted(set(g.nodes) - pvars)
        extra = sorted(pvars - set(g.nodes))
        raise ValueError(
            f"distribution must cover every node exactly; missing={missing} extra={extra}"
        )

    node_order = list(p.space.variables)
    marg_cache: dict[frozenset, object] = {}

    def marg(vs: frozenset):
        if vs not in marg_cache:
            marg_cache[vs] = marginalize(p, vs)
        return marg_cache[vs]

    for event, prob in p.items():
        expected = 1.0
        skip = False
        for n in node_order:
            pa = g.parents(n)
            fam = frozenset(pa | {n})
            num = marg(fam)[event.restrict(fam)]
            if pa:
                den = marg(frozenset(pa))[event.restrict(frozenset(pa))]
            else:
                den = 1.0
            if float(den) <= tol:
                if float(prob) > tol:
                    return False  # positive mass on a zero-probability parent event
                skip = True
                break
            expected *= float(num) / float(den)
        if skip:
            continue
        if abs(float(prob) - expected) > tol:
            return False
    return True


# -- built-in structures -------------------------------------------------------

def triangle_structure(cardinality: int = 4) -> CausalStructure:
    """Three observables A, B, C pairwise connected through latents X, Y, Z:
    A <- {X, Y}, B <- {Y, Z}, C <- {Z, X}."""
    A, B, C = NodeId("A"), NodeId("B"), NodeId("C")
    X, Y, Z = NodeId("X"), NodeId("Y"), NodeId("Z")
    return CausalStructure(
        observables={A: cardinality, B: cardinality, C: cardinality},
        latents=[X, Y, Z],
        edges=[(X, A), (Y, A), (Y, B), (Z, B), (Z, C), (X, C)],
        name="triangle",
    )


def bell_structure(outcomes: int = 2, settings: int = 2) -> CausalStructure:
    """Two-party Bell setup: observed settings S_A, S_B, shared latent lambda."""
    A, B = NodeId("A"), NodeId("B")
    SA, SB = NodeId("S_A"), NodeId("S_B")
    lam = NodeId("lambda")
    return CausalStructure(
        observables={A: outcomes, B: outcomes, SA: settings, SB: settings},
        latents=[lam],
        edges=[(SA, A), (lam, A), (SB, B), (lam, B)],
        name="bell",
    )


def builtin_structure(name: str, cardinality: int = 4) -> CausalStructure:
    """Look up a named structure.  The inflated graphs ("spiral",
    "wagon-wheel", "web") are the inflation module's built-ins; requesting
    them here returns the inflated graph itself."""
    key = name.strip().lower()
    if key == "triangle":
        return triangle_structure(cardinality)
    if key == "bell":
        return bell_structure()
    if key in ("spiral", "wagon-wheel", "web"):
        from .inflation import builtin_inflation

        return builtin_inflation(key, cardinality).inflated
    raise KeyError(f"unknown built-in structure {name!r}")


# -- text format ---------------------------------------------------------------
#
# One declaration per line, '#' comments allowed:
#     node <name> observable <cardinality>
#     node <name> latent
#     edge <parent> <child>
# Names with a trailing _<int> carry that copy index.

def parse_structure(text: str, name: str = "") -> CausalStructure:
    observables: dict[NodeId, int] = {}
    latents: list[NodeId] = []
    edges: list[tuple[NodeId, NodeId]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                node = NodeId.parse(parts[1])
                role = parts[2]
                if role == "observable":
                    observables[node] = int(parts[3])
                elif role == "latent":
                    if len(parts) > 3:
                        raise ValueError("latent nodes take no cardinality")
                    latents.append(node)
                else:
                    raise ValueError(f"role must be observable|latent, got {role!r}")
            elif parts[0] == "edge":
                edges.append((NodeId.parse(parts[1]), NodeId.parse(parts[2])))
            else:
                raise ValueError(f"unknown declaration {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"structure file line {lineno}: {exc}") from exc
    return CausalStructure(observables, latents, edges, name=name)


def format_structure(g: CausalStructure) -> str:
    lines = []
    for n in g.observables:
        lines.append(f"node {n} observable {g.cardinality(n)}")
    for n in sorted(g.latents):
        lines.append(f"node {n} latent")
    for p, c in sorted(g.edges):
        lines.append(f"edge {p} {c}")
    return "\n".join(lines) + "\n"
