"""Variable-permutation symmetry for marginal problems.

A permutation of the joint variables that maps every context of a marginal
scenario onto a context acts on marginal events and joint events alike.
Grouping events into orbits under such a group contracts the incidence matrix
to one row per marginal-event orbit and one column per joint-event orbit,
shrinking the LP by roughly the group order.  The contraction is sound both
ways: a feasible assignment orbit-sums to a feasible assignment of the
contracted problem, and a certificate of the contracted problem expands (one
value per orbit) to an exact certificate of the full problem.  Solving the
contracted problem also guarantees that the resulting inequality is symmetric
under the group, which is the point of the exercise.

Conventions:
* Permutations are stored as (domain, image) tuples over the sorted variable
  tuple; composition is (p @ q)(v) = p(q(v)).
* An event f transforms by (phi[f])(v) = f(phi^{-1}(v)): the permuted event
  assigns to each variable whatever f assigned to that variable's preimage.
* Orbit representatives are the lexicographically least events, which under
  the canonical mixed-radix encoding is simply the least code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .events import EventSpace
from .exact import Root2
from .graphs import NodeId
from .inequalities import Factor, PolynomialInequality
from .inflation import (
    AiExpressibleSet,
    Inflation,
    ai_expressible_sets,
    deflate_certificate,
    inflated_marginal_model,
)
from .lp import (
    FeasibilityProblem,
    Feasible,
    Infeasible,
    certificate_value,
    solve_feasibility,
)
from .marginals import MarginalScenario, SparseIncidence, incidence_matrix, marginal_vector

__all__ = [
    "Permutation",
    "PermGroup",
    "OrbitPartition",
    "stabilizer_group",
    "deflation_consistent",
    "joint_orbits",
    "marginal_orbits",
    "symmetric_incidence",
    "symmetric_vectors",
    "expand_certificate",
    "permute_inequality",
    "SymmetrizedScenario",
    "symmetrize_inflation",
    "SymmetricReport",
    "test_compatibility_symmetric",
]

_ORBIT_BLOCK = 1 << 18


# -- permutations ------------------------------------------------------------------


@dataclass(frozen=True)
class Permutation:
    """A bijection of a fixed, sorted variable tuple onto itself."""

    domain: tuple[NodeId, ...]
    image: tuple[NodeId, ...]

    def __post_init__(self):
        if tuple(sorted(self.domain)) != self.domain:
            raise ValueError("permutation domain must be the sorted variable tuple")
        if sorted(self.image) != list(self.domain):
            raise ValueError("image is not a permutation of the domain")

    @staticmethod
    def identity(domain: Iterable[NodeId]) -> "Permutation":
        dom = tuple(sorted(domain))
        return Permutation(dom, dom)

    @staticmethod
    def from_mapping(mapping: Mapping[NodeId, NodeId]) -> "Permutation":
        dom = tuple(sorted(mapping))
        return Permutation(dom, tuple(mapping[v] for v in dom))

    def as_dict(self) -> dict[NodeId, NodeId]:
        return dict(zip(self.domain, self.image))

    def apply(self, v: NodeId) -> NodeId:
        try:
            return self.image[self.domain.index(v)]
        except ValueError:
            raise KeyError(f"{v} is not in the permutation domain") from None

    def apply_set(self, vs: Iterable[NodeId]) -> frozenset[NodeId]:
        return frozenset(self.apply(v) for v in vs)

    def inverse(self) -> "Permutation":
        pairs = sorted(zip(self.image, self.domain))
        return Permutation(self.domain, tuple(v for _, v in pairs))

    def __matmul__(self, other: "Permutation") -> "Permutation":
        """Composition: (p @ q)(v) = p(q(v))."""
        if other.domain != self.domain:
            raise ValueError("cannot compose permutations over different domains")
        d = self.as_dict()
        return Permutation(self.domain, tuple(d[w] for w in other.image))

    @property
    def is_identity(self) -> bool:
        return self.domain == self.image

    def strip(self) -> Optional["Permutation"]:
        """Copy-index-free shadow of this permutation, or None.

        None when two copies of one base map to copies of different bases
        (no well-defined base map) or the base map fails to be a bijection.
        """
        base_map: dict[NodeId, NodeId] = {}
        for v, w in zip(self.domain, self.image):
            b, c = v.strip(), w.strip()
            if base_map.setdefault(b, c) != c:
                return None
        if len(set(base_map.values())) != len(base_map):
            return None
        return Permutation.from_mapping(base_map)

    def cycles(self) -> tuple[tuple[NodeId, ...], ...]:
        """Nontrivial cycles, each starting from its least element."""
        d = self.as_dict()
        seen: set[NodeId] = set()
        out = []
        for v in self.domain:
            if v in seen:
                continue
            cyc = [v]
            seen.add(v)
            w = d[v]
            while w != v:
                cyc.append(w)
                seen.add(w)
                w = d[w]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return tuple(out)

    def __str__(self):
        cycs = self.cycles()
        if not cycs:
            return "()"
        return "".join("(" + " ".join(str(v) for v in c) + ")" for c in cycs)

    def __repr__(self):
        return f"<Permutation {self}>"


def _dimino(domain: tuple[NodeId, ...], generators: tuple[Permutation, ...]) -> tuple[Permutation, ...]:
    """All elements of the generated group, by inductive coset enumeration."""
    e = Permutation.identity(domain)
    elements: set[Permutation] = {e}
    ordered: list[Permutation] = [e]

    def close_coset(subgroup: list[Permutation], rep: Permutation):
        for h in subgroup:
            t = h @ rep
            if t not in elements:
                elements.add(t)
                ordered.append(t)

    for i, g in enumerate(generators):
        if g in elements:
            continue
        subgroup = list(ordered)  # the group generated by the previous generators
        reps = [g]
        close_coset(subgroup, g)
        while reps:
            r = reps.pop()
            for s in generators[: i + 1]:
                t = r @ s
                if t not in elements:
                    reps.append(t)
                    close_coset(subgroup, t)
    return tuple(sorted(ordered, key=lambda p: p.image))


@dataclass(frozen=True)
class PermGroup:
    """A permutation group with its elements enumerated."""

    domain: tuple[NodeId, ...]
    generators: tuple[Permutation, ...]
    elements: tuple[Permutation, ...]

    def __post_init__(self):
        for p in self.generators + self.elements:
            if p.domain != self.domain:
                raise ValueError("group members must share the group domain")
        if Permutation.identity(self.domain) not in set(self.elements):
            raise ValueError("a group contains the identity")

    @staticmethod
    def from_generators(domain: Iterable[NodeId], generators: Iterable[Permutation]) -> "PermGroup":
        dom = tuple(sorted(domain))
        gens = tuple(generators)
        return PermGroup(dom, gens, _dimino(dom, gens))

    @property
    def order(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.elements)

    def __contains__(self, p: Permutation) -> bool:
        return p in set(self.elements)

    def stabilizes(self, sc: MarginalScenario) -> bool:
        """Every generator maps every context onto a context."""
        ctx_set = set(sc.contexts)
        return all(g.apply_set(ctx) in ctx_set for g in self.generators for ctx in sc.contexts)

    def __repr__(self):
        return f"<PermGroup order {self.order} on {len(self.domain)} variables>"


# -- scenario stabilizers -------------------------------------------------------------


def stabilizer_group(
    sc: MarginalScenario, cardinality: Optional[Mapping[NodeId, int]] = None
) -> PermGroup:
    """All joint-variable permutations mapping every context onto a context.

    When ``cardinality`` is given, only variables with equal outcome counts
    may be exchanged (the event action is ill-defined otherwise).  Found by
    backtracking over variable images with context-embedding pruning; the
    scenarios here are small (a dozen variables), so no heavy group machinery
    is warranted.  The returned group carries a reduced generating set.
    """
    variables = sc.joint_variables
    contexts = [frozenset(c) for c in sc.contexts]
    ctx_set = set(contexts)

    def card(v: NodeId) -> int:
        return 1 if cardinality is None else cardinality[v]

    signature = {
        v: (card(v), tuple(sorted(len(c) for c in contexts if v in c))) for v in variables
    }
    candidates = {v: [w for w in variables if signature[w] == signature[v]] for v in variables}
    by_var = {v: [c for c in contexts if v in c] for v in variables}

    image: dict[NodeId, NodeId] = {}
    used: set[NodeId] = set()
    found: list[Permutation] = []

    def partial_ok(v: NodeId) -> bool:
        for c in by_var[v]:
            part = {image[u] for u in c if u in image}
            if not any(len(d) == len(c) and part <= d for d in contexts):
                return False
        return True

    def dfs(k: int):
        if k == len(variables):
            found.append(Permutation(variables, tuple(image[v] for v in variables)))
            return
        v = variables[k]
        for w in candidates[v]:
            if w in used:
                continue
            image[v] = w
            used.add(w)
            if partial_ok(v):
                dfs(k + 1)
            del image[v]
            used.discard(w)

    dfs(0)
    elements = tuple(sorted(found, key=lambda p: p.image))

    gens: list[Permutation] = []
    generated: set[Permutation] = {Permutation.identity(variables)}
    for p in elements:
        if p in generated:
            continue
        gens.append(p)
        generated = set(_dimino(variables, tuple(gens)))
        if len(generated) == len(elements):
            break
    if len(generated) != len(elements):
        raise RuntimeError("stabilizer search produced a set not closed under composition")
    return PermGroup(variables, tuple(gens), elements)


def deflation_consistent(inflated_group: PermGroup, original_group: PermGroup) -> bool:
    """True iff copy-stripping the inflated group lands exactly on the original group.

    Each element must strip to a well-defined permutation of the base
    variables, and the set of stripped permutations must equal the original
    group.  This is the condition under which a certificate of the symmetric
    inflated problem deflates to an inequality symmetric under the original
    group.
    """
    stripped_domain = tuple(sorted({v.strip() for v in inflated_group.domain}))
    if original_group.domain != stripped_domain:
        return False
    stripped: set[Permutation] = set()
    for p in inflated_group.elements:
        s = p.strip()
        if s is None:
            return False
        stripped.add(s)
    return stripped == set(original_group.elements)


# -- orbits ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrbitPartition:
    """Partition of an indexed event set into group orbits.

    orbit_of[i] is the orbit index of event i; orbits are numbered by their
    representatives (least member index) in increasing order, so
    representatives is sorted and orbit_of[representatives[k]] == k.
    """

    orbit_of: np.ndarray
    representatives: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        if len(self.representatives) != len(self.sizes):
            raise ValueError("one size per representative")
        if int(self.sizes.sum()) != len(self.orbit_of):
            raise ValueError("orbit sizes must sum to the event count")

    @property
    def n_orbits(self) -> int:
        return len(self.representatives)

    def pairs(self) -> Iterator[tuple[int, int]]:
        """(event index, orbit index) pairs, for export."""
        for i, o in enumerate(self.orbit_of):
            yield i, int(o)

    def __repr__(self):
        return f"<OrbitPartition {self.n_orbits} orbits over {len(self.orbit_of)} events>"


def _digits_block(codes: np.ndarray, cards: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = np.empty((codes.size, len(cards)), dtype=np.int64)
    for t in range(len(cards)):
        out[:, t] = (codes // weights[t]) % cards[t]
    return out


def _partition_from_reps(rep: np.ndarray) -> OrbitPartition:
    reps, inverse, counts = np.unique(rep, return_inverse=True, return_counts=True)
    return OrbitPartition(
        orbit_of=inverse.astype(np.int32),
        representatives=reps.astype(np.int64),
        sizes=counts.astype(np.int64),
    )


def joint_orbits(space: EventSpace, group: PermGroup) -> OrbitPartition:
    """Orbits of the joint event space under the group, blockwise-vectorized."""
    if group.domain != space.variables:
        raise ValueError("group domain must equal the event-space variables")
    weights = np.asarray(space.weights, dtype=np.int64)
    cards = np.asarray(space.cards, dtype=np.int64)
    pos = {v: i for i, v in enumerate(space.variables)}
    sources = []
    for g in group.elements:
        if g.is_identity:
            continue
        inv = g.inverse()
        sources.append(np.array([pos[inv.apply(v)] for v in space.variables], dtype=np.int64))

    n = space.size
    rep = np.empty(n, dtype=np.int64)
    for lo in range(0, n, _ORBIT_BLOCK):
        hi = min(lo + _ORBIT_BLOCK, n)
        codes = np.arange(lo, hi, dtype=np.int64)
        best = codes.copy()
        if sources:
            digits = _digits_block(codes, cards, weights)
            for src in sources:
                np.minimum(best, digits[:, src] @ weights, out=best)
        rep[lo:hi] = best
    return _partition_from_reps(rep)


def marginal_orbits(
    sc: MarginalScenario, cardinality: Mapping[NodeId, int], group: PermGroup
) -> OrbitPartition:
    """Orbits of the stacked marginal events (incidence-matrix row order)."""
    if group.domain != sc.joint_variables:
        raise ValueError("group domain must equal the scenario's joint variables")
    spaces = [EventSpace.over({v: cardinality[v] for v in ctx}) for ctx in sc.contexts]
    offsets = np.concatenate([[0], np.cumsum([s.size for s in spaces])]).astype(np.int64)
    ctx_index = {frozenset(ctx): i for i, ctx in enumerate(sc.contexts)}

    rep = np.arange(int(offsets[-1]), dtype=np.int64)
    for g in group.elements:
        if g.is_identity:
            continue
        inv = g.inverse()
        for i, (ctx, sp_i) in enumerate(zip(sc.contexts, spaces)):
            j = ctx_index.get(g.apply_set(ctx))
            if j is None:
                raise ValueError(f"group element {g} does not stabilize the scenario")
            sp_j = spaces[j]
            src = np.array(
                [sp_i.variables.index(inv.apply(w)) for w in sp_j.variables], dtype=np.int64
            )
            codes = np.arange(sp_i.size, dtype=np.int64)
            digits = _digits_block(
                codes,
                np.asarray(sp_i.cards, dtype=np.int64),
                np.asarray(sp_i.weights, dtype=np.int64),
            )
            img = int(offsets[j]) + digits[:, src] @ np.asarray(sp_j.weights, dtype=np.int64)
            lo = int(offsets[i])
            np.minimum(rep[lo : lo + sp_i.size], img, out=rep[lo : lo + sp_i.size])
    return _partition_from_reps(rep)


# -- the orbit-contracted marginal problem ---------------------------------------------


def symmetric_incidence(
    m: SparseIncidence,
    g: PermGroup,
    partitions: Optional[tuple[OrbitPartition, OrbitPartition]] = None,
) -> SparseIncidence:
    """Contract an incidence matrix over a stabilizer group's orbits.

    Entry (row orbit Om, column orbit Oj) = sum over m' in Om of M[m', j0]
    at Oj's representative column j0 — an integer.  With orbit-summed vectors
    this is exactly the matrix of the contracted problem: it satisfies
    M_phi . (orbit sums of x) = (orbit sums of M x) for every x, so
    feasibility survives contraction, and certificates of the contracted
    problem expand orbit-constant to certificates of the full one.
    """
    if not m.is_lazy:
        raise ValueError("only scenario-defined incidence matrices can be contracted")
    sc = m.scenario
    if g.domain != sc.joint_variables:
        raise ValueError("group domain must equal the scenario's joint variables")
    if not g.stabilizes(sc):
        raise ValueError("group does not stabilize the marginal scenario")
    cards = dict(zip(m.joint_space.variables, m.joint_space.cards))
    if partitions is None:
        partitions = (joint_orbits(m.joint_space, g), marginal_orbits(sc, cards, g))
    jpart, mpart = partitions
    if len(jpart.orbit_of) != m.shape[1] or len(mpart.orbit_of) != m.shape[0]:
        raise ValueError("orbit partitions do not match the matrix dimensions")

    reps = jpart.representatives
    rows = m.column_rows(reps)  # (n_contexts, n_reps) global row indices
    orb_rows = mpart.orbit_of[rows]
    n_ctx, n_reps = orb_rows.shape
    cols = np.tile(np.arange(n_reps, dtype=np.int64), n_ctx)
    data = np.ones(n_ctx * n_reps, dtype=np.int64)
    mat = sp.coo_matrix(
        (data, (orb_rows.reshape(-1), cols)), shape=(mpart.n_orbits, n_reps)
    ).tocsr()
    return SparseIncidence(matrix=mat, row_labels=[int(r) for r in mpart.representatives])


def _orbit_sum(v: np.ndarray, part: OrbitPartition) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != part.orbit_of.shape:
        raise ValueError("vector length does not match the orbit partition")
    if v.dtype == object:
        acc = [Fraction(0)] * part.n_orbits
        for idx, val in zip(part.orbit_of, v):
            acc[idx] = acc[idx] + val
        out = np.empty(part.n_orbits, dtype=object)
        out[:] = acc
        return out
    return np.bincount(part.orbit_of, weights=v.astype(np.float64), minlength=part.n_orbits)


def symmetric_vectors(
    v_joint: Optional[np.ndarray],
    v_marg: Optional[np.ndarray],
    partitions: tuple[OrbitPartition, OrbitPartition],
) -> tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    """Orbit-summed joint and marginal vectors (either input may be None)."""
    jpart, mpart = partitions
    vj = None if v_joint is None else _orbit_sum(v_joint, jpart)
    vm = None if v_marg is None else _orbit_sum(v_marg, mpart)
    return vj, vm


def expand_certificate(y_phi: Sequence, part: OrbitPartition) -> np.ndarray:
    """Lift an orbit-indexed certificate to the full row space (orbit-constant)."""
    if len(y_phi) != part.n_orbits:
        raise ValueError("certificate length does not match the orbit count")
    values = np.empty(part.n_orbits, dtype=object)
    values[:] = list(y_phi)
    return values[part.orbit_of]


def _products_nonnegative(y: Sequence[Fraction], m: SparseIncidence) -> bool:
    """Exact y'M >= 0 over a lazy incidence matrix, streamed without
    materializing per-column Fractions (the column count may be huge)."""
    lcm = 1
    for f in y:
        d = f.denominator
        lcm = lcm * d // math.gcd(lcm, d)
        if lcm > 1 << 40:
            break
    n_ctx = len(m.scenario.contexts)
    if lcm <= 1 << 40:
        scaled = [int(f * lcm) for f in y]
        peak = max((abs(s) for s in scaled), default=0)
        if peak * n_ctx < 1 << 62:
            yi = np.array(scaled, dtype=np.int64)
            for _, rows in m.iter_column_blocks():
                acc = yi[rows[0]].copy()
                for i in range(1, rows.shape[0]):
                    acc += yi[rows[i]]
                if int(acc.min()) < 0:
                    return False
            return True
    yo = np.array(list(y), dtype=object)
    for _, rows in m.iter_column_blocks():
        acc = yo[rows[0]].copy()
        for i in range(1, rows.shape[0]):
            acc = acc + yo[rows[i]]
        if any(val < 0 for val in acc):
            return False
    return True


# -- the symmetrized compatibility pipeline ---------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetrizedScenario:
    """One inflation's orbit-contracted marginal problem, ready for reuse.

    Building this for large inflations costs minutes (orbit enumeration over
    the joint event space), so it is constructed once and shared across
    distributions.  deflation_ok records whether the stabilizer strips onto
    the original structure's stabilizer — the condition for deflated
    inequalities to be symmetric under the original variables.
    """

    inflation: Inflation
    sets: tuple[AiExpressibleSet, ...]
    scenario: MarginalScenario
    cardinality: dict[NodeId, int]
    group: PermGroup
    original_group: PermGroup
    deflation_ok: bool
    joint_part: OrbitPartition
    marginal_part: OrbitPartition
    matrix: SparseIncidence

    def __repr__(self):
        return (
            f"<SymmetrizedScenario {self.inflation.name or 'inflation'!r}:"
            f" group order {self.group.order},"
            f" {self.matrix.shape[0]}x{self.matrix.shape[1]}>"
        )


def symmetrize_inflation(inf: Inflation) -> SymmetrizedScenario:
    """Stabilizer, orbits, and contracted incidence matrix for one inflation."""
    sets = ai_expressible_sets(inf)
    scenario = MarginalScenario.of([s.members for s in sets])
    cards = {v: inf.original.cardinality(v.strip()) for v in scenario.joint_variables}
    group = stabilizer_group(scenario, cards)

    original_scenario = MarginalScenario.of([inf.original.observables])
    original_group = stabilizer_group(original_scenario, dict(inf.original.cardinalities))

    lazy = incidence_matrix(scenario, cards)
    jpart = joint_orbits(lazy.joint_space, group)
    mpart = marginal_orbits(scenario, cards, group)
    matrix = symmetric_incidence(lazy, group, partitions=(jpart, mpart))
    return SymmetrizedScenario(
        inflation=inf,
        sets=sets,
        scenario=scenario,
        cardinality=cards,
        group=group,
        original_group=original_group,
        deflation_ok=deflation_consistent(group, original_group),
        joint_part=jpart,
        marginal_part=mpart,
        matrix=matrix,
    )


@dataclass(frozen=True, eq=False)
class SymmetricReport:
    """Outcome of the symmetrized LP test of one distribution.

    Mirrors the unsymmetrized report: "witnessed-incompatible" carries the
    deflated inequality (symmetric when deflation_ok) and its exact value on
    the tested distribution; "compatible-at-inflation" means the contracted
    marginal problem cannot rule the distribution out.
    """

    verdict: str
    result: Union[Feasible, Infeasible]
    inequality: Optional[PolynomialInequality]
    value: Optional[object]
    expanded_certificate: Optional[tuple]
    sym: SymmetrizedScenario

    @property
    def witnessed(self) -> bool:
        return self.verdict == "witnessed-incompatible"


def test_compatibility_symmetric(
    p,
    sym: SymmetrizedScenario,
    tol: float = 1e-8,
    snap_bound: int = 10**6,
    verify_full: bool = True,
) -> SymmetricReport:
    """Run the orbit-contracted marginal-problem pipeline for one inflation.

    Solves the contracted LP; on infeasibility the orbit certificate is
    expanded to the full row space, re-verified exactly against the original
    (uncontracted) incidence matrix when verify_full is set, paired with the
    full marginal vector, and deflated into a polynomial inequality.
    """
    model = inflated_marginal_model(p, sym.inflation, sym.sets)
    v = marginal_vector(model)
    _, v_phi = symmetric_vectors(None, v, (sym.joint_part, sym.marginal_part))
    result = solve_feasibility(
        FeasibilityProblem(sym.matrix, v_phi), tol=tol, snap_bound=snap_bound
    )
    if isinstance(result, Infeasible):
        y = expand_certificate(result.rational_certificate, sym.marginal_part)
        if verify_full:
            full = incidence_matrix(sym.scenario, sym.cardinality)
            if not _products_nonnegative(tuple(y), full):
                raise RuntimeError(
                    "expanded certificate fails the exact full-matrix check; "
                    "orbit contraction is inconsistent with the scenario"
                )
        value = certificate_value(tuple(y), v)
        _check_pairings_agree(value, result.value)
        ineq = deflate_certificate(
            sym.sets,
            tuple(y),
            cardinality=sym.cardinality,
            name=f"{sym.inflation.name or 'inflation'} symmetric witness",
        )
        return SymmetricReport(
            "witnessed-incompatible", result, ineq, value, tuple(y), sym
        )
    return SymmetricReport("compatible-at-inflation", result, None, None, None, sym)


def _check_pairings_agree(full_value, contracted_value):
    """The expanded pairing must reproduce the contracted one."""
    exact = (Fraction, Root2)
    if isinstance(full_value, exact) and isinstance(contracted_value, exact):
        if Root2.coerce(full_value) != Root2.coerce(contracted_value):
            raise RuntimeError("expanded certificate value disagrees with the contracted LP")
    elif abs(float(full_value) - float(contracted_value)) > 1e-7:
        raise RuntimeError("expanded certificate value disagrees with the contracted LP")


# -- inequality relabeling ----------------------------------------------------------------


def permute_inequality(
    ineq: PolynomialInequality, mapping: Mapping[NodeId, NodeId]
) -> PolynomialInequality:
    """Relabel factor variables; canonical form makes invariance checks equality checks."""
    terms = []
    for coef, factors in ineq.terms:
        new_factors = []
        for f in factors:
            relabeled = {mapping.get(v, v): o for v, o in zip(f.variables, f.outcomes)}
            if len(relabeled) != len(f.variables):
                raise ValueError("mapping collapses distinct factor variables")
            new_factors.append(Factor.of(relabeled))
        terms.append((coef, new_factors))
    return PolynomialInequality(terms, name=ineq.name)
