"""Finite event spaces, distributions, and coarse-grainings.

Conventions used everywhere downstream:

* An event space orders its variables canonically (ascending NodeId) and
  encodes outcome tuples as mixed-radix integers, most significant variable
  first.  The ordering itself carries no meaning, but fixing it makes every
  fixture and exported vector reproducible bit-for-bit.
* Distributions are stored dense over their event space.  Values may be
  floats or exact field elements (Fraction / Root2); arithmetic stays exact
  until someone asks for floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .exact import Root2
from .graphs import NodeId

__all__ = [
    "EventSpace",
    "Event",
    "Distribution",
    "restrict",
    "marginalize",
    "bit_coarse_grain",
]

Value = Union[float, int, Fraction, Root2]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class EventSpace:
    """Ordered finite variables with outcome cardinalities."""

    variables: tuple[NodeId, ...]
    cards: tuple[int, ...]

    @staticmethod
    def over(cardinality: Mapping[NodeId, int]) -> "EventSpace":
        """Canonical space: variables sorted ascending, msb first."""
        vs = tuple(sorted(cardinality))
        return EventSpace(vs, tuple(cardinality[v] for v in vs))

    def __post_init__(self):
        if len(self.variables) != len(set(self.variables)):
            raise ValueError("duplicate variables in event space")
        if tuple(sorted(self.variables)) != self.variables:
            raise ValueError("variables must be in canonical (sorted) order")
        if any(c < 1 for c in self.cards):
            raise ValueError("cardinalities must be positive")

    @property
    def size(self) -> int:
        out = 1
        for c in self.cards:
            out *= c
        return out

    @property
    def weights(self) -> tuple[int, ...]:
        """Mixed-radix place values (most significant variable first)."""
        ws = [1] * len(self.cards)
        for i in range(len(self.cards) - 2, -1, -1):
            ws[i] = ws[i + 1] * self.cards[i + 1]
        return tuple(ws)

    def cardinality(self, v: NodeId) -> int:
        return self.cards[self.variables.index(v)]

    def index_of(self, outcomes: Sequence[int]) -> int:
        if len(outcomes) != len(self.variables):
            raise ValueError("outcome tuple length mismatch")
        idx = 0
        for o, c, w in zip(outcomes, self.cards, self.weights):
            if not 0 <= o < c:
                raise ValueError(f"outcome {o} out of range [0,{c})")
            idx += o * w
        return idx

    def outcomes_of(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise IndexError(index)
        out = []
        for w, c in zip(self.weights, self.cards):
            out.append((index // w) % c)
        return tuple(out)

    def event_at(self, index: int) -> "Event":
        return Event(tuple(zip(self.variables, self.outcomes_of(index))))

    def events(self) -> Iterator["Event"]:
        for i in range(self.size):
            yield self.event_at(i)

    def digit_table(self) -> np.ndarray:
        """(size, n_vars) int array of outcome digits for every event index."""
        idx = np.arange(self.size, dtype=np.int64)
        cols = [((idx // w) % c) for w, c in zip(self.weights, self.cards)]
        return np.stack(cols, axis=1)

    def __contains__(self, v: NodeId) -> bool:
        return v in self.variables


@dataclass(frozen=True)
class Event:
    """An assignment of outcomes to a finite set of variables."""

    assignment: tuple[tuple[NodeId, int], ...]

    @staticmethod
    def of(mapping: Mapping[NodeId, int]) -> "Event":
        return Event(tuple(sorted(mapping.items())))

    def __post_init__(self):
        vs = [v for v, _ in self.assignment]
        if vs != sorted(vs) or len(vs) != len(set(vs)):
            object.__setattr__(self, "assignment", tuple(sorted(dict(self.assignment).items())))

    @property
    def domain(self) -> frozenset[NodeId]:
        return frozenset(v for v, _ in self.assignment)

    def __getitem__(self, v: NodeId) -> int:
        for u, o in self.assignment:
            if u == v:
                return o
        raise KeyError(v)

    def restrict(self, w: Iterable[NodeId]) -> "Event":
        w = frozenset(w)
        missing = w - self.domain
        if missing:
            raise ValueError(f"cannot restrict onto unassigned variables {sorted(missing)}")
        return Event(tuple((v, o) for v, o in self.assignment if v in w))

    def outcomes(self) -> tuple[int, ...]:
        return tuple(o for _, o in self.assignment)

    def __str__(self):
        return "".join(str(o) for _, o in self.assignment)

    def __repr__(self):
        inner = ", ".join(f"{v}={o}" for v, o in self.assignment)
        return f"Event({inner})"


def restrict(s: Event, w: Iterable[NodeId]) -> Event:
    return s.restrict(w)


class Distribution:
    """Dense distribution over an EventSpace.

    ``values`` is a numpy vector indexed by the canonical event encoding;
    dtype float64 for numeric data or object for exact entries.  Mass must
    be 1 (within 1e-12 numerically; exact values are checked exactly).
    """

    def __init__(self, space: EventSpace, values: np.ndarray, validate: bool = True):
        values = np.asarray(values)
        if values.shape != (space.size,):
            raise ValueError(f"expected {space.size} values, got {values.shape}")
        self.space = space
        self.values = values
        if validate:
            self._validate()

    def _validate(self):
        if self.values.dtype == object:
            total = sum(self.values, Fraction(0))
            if isinstance(total, Root2):
                ok = total == Root2(1)
            else:
                ok = total == 1
            if not ok:
                raise ValueError(f"exact distribution has total mass {total}, not 1")
            if any(Root2.coerce(v).sign() < 0 if isinstance(v, Root2) else v < 0 for v in self.values):
                raise ValueError("negative probability in exact distribution")
        else:
            total = float(self.values.sum())
            if abs(total - 1.0) > _MASS_TOL:
                raise ValueError(f"distribution mass {total} differs from 1 beyond 1e-12")
            if self.values.min() < -_MASS_TOL:
                raise ValueError("negative probability beyond tolerance")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_mapping(
        cardinality: Mapping[NodeId, int],
        probs: Mapping[Event, Value],
        exact: bool = False,
    ) -> "Distribution":
        space = EventSpace.over(cardinality)
        vals = np.zeros(space.size, dtype=object if exact else np.float64)
        if exact:
            vals[:] = Fraction(0)
        for event, p in probs.items():
            if event.domain != frozenset(space.variables):
                raise ValueError(f"event {event!r} does not cover the declared variables")
            idx = space.index_of(tuple(event[v] for v in space.variables))
            vals[idx] = p if exact else float(p)
        return Distribution(space, vals)

    @staticmethod
    def uniform(cardinality: Mapping[NodeId, int], exact: bool = False) -> "Distribution":
        space = EventSpace.over(cardinality)
        if exact:
            vals = np.array([Fraction(1, space.size)] * space.size, dtype=object)
        else:
            vals = np.full(space.size, 1.0 / space.size)
        return Distribution(space, vals)

    @staticmethod
    def point_mass(cardinality: Mapping[NodeId, int], event: Event) -> "Distribution":
        space = EventSpace.over(cardinality)
        vals = np.zeros(space.size)
        vals[space.index_of(tuple(event[v] for v in space.variables))] = 1.0
        return Distribution(space, vals)

    # -- access ----------------------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return self.values.dtype == object

    def __getitem__(self, event: Event) -> Value:
        if event.domain != frozenset(self.space.variables):
            raise KeyError(f"event domain {sorted(event.domain)} != space variables")
        return self.values[self.space.index_of(tuple(event[v] for v in self.space.variables))]

    def prob(self, *outcomes: int) -> Value:
        return self.values[self.space.index_of(outcomes)]

    def items(self) -> Iterator[tuple[Event, Value]]:
        for i in range(self.space.size):
            yield self.space.event_at(i), self.values[i]

    def support(self, tol: float = 0.0) -> list[Event]:
        return [e for e, p in self.items() if float(p) > tol]

    def to_float(self) -> "Distribution":
        if not self.is_exact:
            return self
        return Distribution(self.space, self.values.astype(np.float64))

    def __repr__(self):
        kind = "exact" if self.is_exact else "float"
        return f"<Distribution over {len(self.space.variables)} vars, {self.space.size} events, {kind}>"


def marginalize(p: Distribution, w: Iterable[NodeId]) -> Distribution:
    """Sum out everything except w.  P[W](e) = Σ_{J∖W} P[J]."""
    w = frozenset(w)
    extra = w - set(p.space.variables)
    if extra:
        raise ValueError(f"marginalizing onto unknown variables {sorted(extra)}")
    keep = [i for i, v in enumerate(p.space.variables) if v in w]
    shaped = p.values.reshape(p.space.cards)
    drop = tuple(i for i in range(len(p.space.cards)) if i not in keep)
    if drop:
        summed = shaped.sum(axis=drop)
    else:
        summed = shaped
    sub = EventSpace(
        tuple(p.space.variables[i] for i in keep),
        tuple(p.space.cards[i] for i in keep),
    )
    return Distribution(sub, summed.reshape(sub.size), validate=False)


def _bit_name(v: NodeId, side: str) -> NodeId:
    return NodeId(f"{v}_{side}")


def bit_coarse_grain(p: Distribution) -> Distribution:
    """Split every 4-outcome variable v into bits (v_l, v_r) = (v div 2, v mod 2).

    Probabilities are transported unchanged; the map on events is a bijection.
    """
    if any(c != 4 for c in p.space.cards):
        raise ValueError("bit coarse-graining needs every variable to have 4 outcomes")
    new_card: dict[NodeId, int] = {}
    for v in p.space.variables:
        left, right = _bit_name(v, "l"), _bit_name(v, "r")
        if left in new_card or right in new_card:
            raise ValueError(f"bit-variable name collision for {v}")
        new_card[left] = 2
        new_card[right] = 2
    space = EventSpace.over(new_card)

    digits = p.space.digit_table()  # (size, n) outcomes of each source event
    pos = {v: k for k, v in enumerate(p.space.variables)}
    weights = dict(zip(space.variables, space.weights))
    new_index = np.zeros(p.space.size, dtype=np.int64)
    for v in p.space.variables:
        a = digits[:, pos[v]]
        new_index += (a // 2) * weights[_bit_name(v, "l")]
        new_index += (a % 2) * weights[_bit_name(v, "r")]

    vals = np.empty(space.size, dtype=p.values.dtype)
    if p.is_exact:
        vals[:] = Fraction(0)
    else:
        vals[:] = 0.0
    vals[new_index] = p.values
    return Distribution(space, vals, validate=False)
