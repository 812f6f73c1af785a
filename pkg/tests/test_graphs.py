"""Causal-structure basics.

Claims checked here:
  * NodeId parsing/printing round-trips and sorts lexicographically.
  * parents/ancestors/descendants behave on the triangle and bell graphs
    (ancestors of a set include the set itself).
  * ancestral_subgraph induces exactly the ancestor closure.
  * graphs_copy_equivalent ignores copy indices (multi-copies collapse).
  * cycles and malformed inputs are rejected at construction.
  * verify_full_compatibility accepts factorizing joints, rejects others,
    and skips zero-probability conditioning events.
  * the text format round-trips the built-ins.
"""

import numpy as np
import pytest

from causalcompat.events import Distribution, EventSpace
from causalcompat.graphs import (
    CausalStructure,
    NodeId,
    ancestral_subgraph,
    bell_structure,
    builtin_structure,
    format_structure,
    graphs_copy_equivalent,
    parse_structure,
    triangle_structure,
    verify_full_compatibility,
)

A, B, C = NodeId("A"), NodeId("B"), NodeId("C")
X, Y, Z = NodeId("X"), NodeId("Y"), NodeId("Z")


class TestNodeId:
    def test_parse_and_str(self):
        assert NodeId.parse("A") == NodeId("A")
        assert NodeId.parse("A_2") == NodeId("A", 2)
        assert str(NodeId("B_1x")) == "B_1x"  # not a copy suffix
        assert str(NodeId.parse("C_14")) == "C_14"

    def test_copy_semantics(self):
        a2 = NodeId("A", 2)
        assert a2.strip() == A
        assert a2.copy_equivalent(NodeId("A", 7))
        assert not a2.copy_equivalent(NodeId("B", 2))

    def test_ordering_lexicographic(self):
        ids = [NodeId("B"), NodeId("A", 2), NodeId("A"), NodeId("A", 1)]
        assert sorted(ids) == [NodeId("A"), NodeId("A", 1), NodeId("A", 2), NodeId("B")]

    def test_rejects_bad_copy_index(self):
        with pytest.raises(ValueError):
            NodeId("A", 0)


class TestStructure:
    def test_triangle_parents(self):
        tri = triangle_structure()
        assert tri.parents(A) == {X, Y}
        assert tri.parents(B) == {Y, Z}
        assert tri.parents(C) == {Z, X}
        assert tri.parents(X) == frozenset()
        assert tri.cardinality(A) == 4

    def test_ancestors_include_self(self):
        tri = triangle_structure()
        assert tri.ancestors([A]) == {A, X, Y}
        assert tri.ancestors([X]) == {X}
        assert tri.ancestors([A, B]) == {A, B, X, Y, Z}

    def test_descendants(self):
        tri = triangle_structure()
        assert tri.descendants([Y]) == {Y, A, B}
        assert tri.descendants([A]) == {A}

    def test_ancestral_subgraph(self):
        tri = triangle_structure()
        sub = ancestral_subgraph(tri, [A])
        assert sub.nodes == {A, X, Y}
        assert sub.edges == {(X, A), (Y, A)}
        assert sub.cardinality(A) == 4

    def test_cycle_rejected(self):
        with pytest.raises(ValueError, match="cycle"):
            CausalStructure({A: 2, B: 2}, [], [(A, B), (B, A)])

    def test_edge_endpoints_checked(self):
        with pytest.raises(ValueError):
            CausalStructure({A: 2}, [], [(A, B)])

    def test_observable_latent_disjoint(self):
        with pytest.raises(ValueError):
            CausalStructure({A: 2}, [A], [])

    def test_bell(self):
        bell = bell_structure()
        lam = NodeId("lambda")
        assert bell.parents(A) == {NodeId("S_A"), lam}
        assert bell.parents(B) == {NodeId("S_B"), lam}
        assert bell.latents == {lam}

    def test_builtin_lookup(self):
        assert builtin_structure("triangle").name == "triangle"
        with pytest.raises(KeyError):
            builtin_structure("pentagon")


class TestCopyEquivalence:
    def test_identity(self):
        tri = triangle_structure()
        assert graphs_copy_equivalent(tri, tri)

    def test_copies_collapse(self):
        # two copies of A hanging off the same latent collapse onto one
        g1 = CausalStructure({NodeId("A", 1): 2, NodeId("A", 2): 2}, [X], [(X, NodeId("A", 1)), (X, NodeId("A", 2))])
        g2 = CausalStructure({A: 2}, [X], [(X, A)])
        assert graphs_copy_equivalent(g1, g2)

    def test_distinct_graphs(self):
        g2 = CausalStructure({A: 2}, [X], [(X, A)])
        g3 = CausalStructure({A: 2}, [X, Y], [(X, A), (Y, A)])
        assert not graphs_copy_equivalent(g2, g3)


class TestFullCompatibility:
    def _chain(self):
        # X -> A -> B with X latent binary
        return CausalStructure({A: 2, B: 2}, [X], [(X, A), (A, B)])

    def _joint(self, g, table):
        space = EventSpace.over({A: 2, B: 2, X: 2})
        vals = np.zeros(space.size)
        for outcomes, p in table.items():
            vals[space.index_of(outcomes)] = p
        return Distribution(space, vals)

    def test_factorizing_joint_accepted(self):
        g = self._chain()
        rng = np.random.default_rng(7)
        px = rng.dirichlet([1, 1])
        pa = rng.dirichlet([1, 1], size=2)  # P(A|X)
        pb = rng.dirichlet([1, 1], size=2)  # P(B|A)
        table = {}
        for x in range(2):
            for a in range(2):
                for b in range(2):
                    table[(a, b, x)] = px[x] * pa[x][a] * pb[a][b]
        assert verify_full_compatibility(g, self._joint(g, table))

    def test_nonfactorizing_joint_rejected(self):
        g = self._chain()
        # B copies X while A is independent: violates B independent of X given A
        table = {(0, 0, 0): 0.25, (1, 0, 0): 0.25, (0, 1, 1): 0.25, (1, 1, 1): 0.25}
        assert not verify_full_compatibility(g, self._joint(g, table))

    def test_zero_probability_conditionals_skipped(self):
        g = self._chain()
        # X = 0 a.s.; conditionals at X = 1 are 0/0 and must not trip the check
        table = {(0, 0, 0): 1.0}
        assert verify_full_compatibility(g, self._joint(g, table))

    def test_wrong_variable_set_rejected(self):
        g = self._chain()
        space = EventSpace.over({A: 2, B: 2})
        with pytest.raises(ValueError):
            verify_full_compatibility(g, Distribution(space, np.full(4, 0.25)))


class TestTextFormat:
    def test_round_trip(self):
        for g in (triangle_structure(), bell_structure()):
            back = parse_structure(format_structure(g), name=g.name)
            assert back.nodes == g.nodes
            assert back.edges == g.edges
            assert dict(back.cardinalities) == dict(g.cardinalities)

    def test_copy_indices_survive(self):
        g = CausalStructure({NodeId("A", 2): 4}, [NodeId("X", 1)], [(NodeId("X", 1), NodeId("A", 2))])
        back = parse_structure(format_structure(g))
        assert back.nodes == g.nodes

    def test_parse_errors_carry_line_numbers(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_structure("node A observable 2\nnode B banana\n")

    def test_comments_and_blanks_ignored(self):
        g = parse_structure("# top\n\nnode A observable 2  # inline\nnode X latent\nedge X A\n")
        assert g.nodes == {A, X}
