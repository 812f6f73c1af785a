"""Marginal scenarios, marginal models, and sparse incidence matrices.

The incidence matrix M of a scenario has one row per marginal event (contexts
stacked in declaration order, events in canonical mixed-radix order inside
each block) and one column per joint event.  M[m, j] = 1 iff the joint event
j restricts to the marginal event m on m's context.

M is defined lazily from the scenario: a column's nonzero rows are computed
by digit arithmetic on the column index, so even the 4^12-column instances
can be streamed without ever materializing the full matrix.  Small instances
can be materialized to scipy CSR on request.  An explicit mode wraps
orbit-contracted matrices with general nonnegative integer entries behind
the same interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from .events import Distribution, Event, EventSpace
from .graphs import NodeId

__all__ = [
    "MarginalScenario",
    "MarginalModel",
    "SparseIncidence",
    "incidence_matrix",
    "marginal_vector",
]

_MATERIALIZE_LIMIT = 1 << 27  # refuse to materialize beyond ~134M nonzeros


@dataclass(frozen=True)
class MarginalScenario:
    """A family of maximal contexts (variable subsets) covering J."""

    contexts: tuple[frozenset[NodeId], ...]

    @staticmethod
    def of(contexts: Iterable[Iterable[NodeId]]) -> "MarginalScenario":
        return MarginalScenario(tuple(frozenset(c) for c in contexts))

    def __post_init__(self):
        if not self.contexts:
            raise ValueError("scenario needs at least one context")
        seen = set()
        for c in self.contexts:
            if not c:
                raise ValueError("empty context")
            key = frozenset(c)
            if key in seen:
                raise ValueError(f"duplicate context {sorted(key)}")
            seen.add(key)
        for c in self.contexts:
            for d in self.contexts:
                if c is not d and c < d:
                    raise ValueError(
                        f"context {sorted(c)} is contained in {sorted(d)}; only maximal contexts allowed"
                    )

    @property
    def joint_variables(self) -> tuple[NodeId, ...]:
        out: set[NodeId] = set()
        for c in self.contexts:
            out |= c
        return tuple(sorted(out))

    def __len__(self):
        return len(self.contexts)


@dataclass(frozen=True)
class MarginalModel:
    """Per-context distributions for a scenario."""

    scenario: MarginalScenario
    dists: tuple[Distribution, ...]  # aligned with scenario.contexts

    @staticmethod
    def of(scenario: MarginalScenario, by_context: Mapping[frozenset, Distribution]) -> "MarginalModel":
        return MarginalModel(scenario, tuple(by_context[c] for c in scenario.contexts))

    def __post_init__(self):
        if len(self.dists) != len(self.scenario.contexts):
            raise ValueError("one distribution per context required")
        for ctx, d in zip(self.scenario.contexts, self.dists):
            if frozenset(d.space.variables) != ctx:
                raise ValueError(
                    f"distribution variables {d.space.variables} do not match context {sorted(ctx)}"
                )
            # Distribution normalization (1e-12) is enforced at construction.

    def context_distribution(self, context: Iterable[NodeId]) -> Distribution:
        key = frozenset(context)
        for ctx, d in zip(self.scenario.contexts, self.dists):
            if ctx == key:
                return d
        raise KeyError(f"no context {sorted(key)} in scenario")

    @property
    def is_exact(self) -> bool:
        return any(d.is_exact for d in self.dists)


class SparseIncidence:
    """Row-sparse incidence matrix, lazy (scenario-defined 0/1) or explicit.

    Lazy mode answers column queries by arithmetic; explicit mode wraps a
    scipy CSR with nonnegative integer entries (used for orbit-contracted
    matrices).  Both expose the same matvec/rmatvec/streaming interface.
    """

    def __init__(
        self,
        *,
        scenario: Optional[MarginalScenario] = None,
        cardinality: Optional[Mapping[NodeId, int]] = None,
        matrix: Optional[sp.spmatrix] = None,
        row_labels: Optional[list] = None,
        col_labels: Optional[list] = None,
    ):
        if (scenario is None) == (matrix is None):
            raise ValueError("construct from either a scenario or an explicit matrix")
        self.scenario = scenario
        self.row_labels = row_labels
        self.col_labels = col_labels

        if scenario is not None:
            assert cardinality is not None, "cardinality map required with a scenario"
            joint_vars = scenario.joint_variables
            self.joint_space = EventSpace.over({v: cardinality[v] for v in joint_vars})
            self.context_spaces = tuple(
                EventSpace.over({v: cardinality[v] for v in ctx}) for ctx in scenario.contexts
            )
            sizes = [cs.size for cs in self.context_spaces]
            self.row_offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            self._shape = (int(self.row_offsets[-1]), self.joint_space.size)
            self._csr = None
            # joint-space weight/cardinality lookup per context, precomputed
            jw = dict(zip(self.joint_space.variables, self.joint_space.weights))
            jc = dict(zip(self.joint_space.variables, self.joint_space.cards))
            self._ctx_digits = []
            for cs in self.context_spaces:
                trip = [(jw[v], jc[v], lw) for v, lw in zip(cs.variables, cs.weights)]
                self._ctx_digits.append(trip)
        else:
            csr = sp.csr_matrix(matrix)
            if csr.nnz and csr.data.min() < 0:
                raise ValueError("incidence entries must be nonnegative")
            counts = np.diff(csr.indptr)
            if (counts == 0).any():
                raise ValueError("all-zero row in incidence matrix")
            self._csr = csr
            self._shape = csr.shape
            self.joint_space = None
            self.context_spaces = None
            self.row_offsets = None

    # -- structure ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def is_lazy(self) -> bool:
        return self._csr is None

    @property
    def nnz(self) -> int:
        if self._csr is not None:
            return self._csr.nnz
        return len(self.scenario.contexts) * self._shape[1]

    def row_label(self, r: int):
        """(context index, marginal Event) in lazy mode; stored label otherwise."""
        if self.row_labels is not None:
            return self.row_labels[r]
        if not self.is_lazy:
            raise ValueError("explicit matrix carries no derived row labels")
        i = int(np.searchsorted(self.row_offsets, r, side="right") - 1)
        local = r - int(self.row_offsets[i])
        return i, self.context_spaces[i].event_at(local)

    def restricted_codes(self, context_index: int, cols: np.ndarray) -> np.ndarray:
        """Local (in-context) event codes of each joint column index."""
        if not self.is_lazy:
            raise ValueError("only scenario-defined matrices support code queries")
        cols = np.asarray(cols, dtype=np.int64)
        out = np.zeros_like(cols)
        for jw, jc, lw in self._ctx_digits[context_index]:
            out += ((cols // jw) % jc) * lw
        return out

    def column_rows(self, cols: np.ndarray) -> np.ndarray:
        """(n_contexts, len(cols)) array of the global row hit in each context."""
        if not self.is_lazy:
            raise ValueError("only scenario-defined matrices support code queries")
        cols = np.asarray(cols, dtype=np.int64)
        rows = np.empty((len(self.scenario.contexts), len(cols)), dtype=np.int64)
        for i in range(len(self.scenario.contexts)):
            rows[i] = self.row_offsets[i] + self.restricted_codes(i, cols)
        return rows

    def iter_column_blocks(self, block: int = 1 << 16) -> Iterator[tuple[int, np.ndarray]]:
        """Yield (start, rows) for consecutive column ranges (lazy mode)."""
        n = self._shape[1]
        for start in range(0, n, block):
            cols = np.arange(start, min(start + block, n), dtype=np.int64)
            yield start, self.column_rows(cols)

    # -- linear algebra ------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """M @ x."""
        if self._csr is not None:
            x = np.asarray(x)
            if x.dtype == object:  # scipy cannot multiply exact vectors
                csr = self._csr
                out = np.empty(self._shape[0], dtype=object)
                for r in range(self._shape[0]):
                    lo, hi = csr.indptr[r], csr.indptr[r + 1]
                    out[r] = sum(
                        int(csr.data[k]) * x[csr.indices[k]] for k in range(lo, hi)
                    )
                return out
            return self._csr @ x
        x = np.asarray(x)
        out = np.zeros(self._shape[0], dtype=np.result_type(x.dtype, np.float64))
        for start, rows in self.iter_column_blocks():
            seg = x[start : start + rows.shape[1]]
            for i in range(rows.shape[0]):
                np.add.at(out, rows[i], seg)
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """M.T @ y."""
        if self._csr is not None:
            y = np.asarray(y)
            if y.dtype == object:  # scipy cannot multiply exact vectors
                csc = self._csr.tocsc()
                out = np.empty(self._shape[1], dtype=object)
                for c in range(self._shape[1]):
                    lo, hi = csc.indptr[c], csc.indptr[c + 1]
                    out[c] = sum(
                        int(csc.data[k]) * y[csc.indices[k]] for k in range(lo, hi)
                    )
                return out
            return self._csr.T @ y
        y = np.asarray(y)
        out = np.zeros(self._shape[1], dtype=np.result_type(y.dtype, np.float64))
        for start, rows in self.iter_column_blocks():
            acc = y[rows[0]].copy()
            for i in range(1, rows.shape[0]):
                acc += y[rows[i]]
            out[start : start + rows.shape[1]] = acc
        return out

    def tocsr(self) -> sp.csr_matrix:
        if self._csr is not None:
            return self._csr
        if self.nnz > _MATERIALIZE_LIMIT:
            raise MemoryError(
                f"incidence matrix with {self.nnz} nonzeros exceeds the materialization limit"
            )
        n_ctx = len(self.scenario.contexts)
        cols_all = []
        rows_all = []
        for start, rows in self.iter_column_blocks():
            width = rows.shape[1]
            cols_all.append(np.tile(np.arange(start, start + width, dtype=np.int64), n_ctx))
            rows_all.append(rows.reshape(-1))
        data = np.ones(self.nnz, dtype=np.int8)
        mat = sp.coo_matrix(
            (data, (np.concatenate(rows_all), np.concatenate(cols_all))), shape=self._shape
        )
        return mat.tocsr()

    def todense(self) -> np.ndarray:
        if self._shape[0] * self._shape[1] > (1 << 24):
            raise MemoryError("refusing to densify a matrix this large")
        return np.asarray(self.tocsr().todense())

    def to_coo_text(self) -> str:
        """Debug export: one 'row col value' line per nonzero."""
        csr = self.tocsr().tocoo()
        lines = [f"{r} {c} {int(v)}" for r, c, v in zip(csr.row, csr.col, csr.data)]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        mode = "lazy" if self.is_lazy else "explicit"
        return f"<SparseIncidence {self._shape[0]}x{self._shape[1]} ({mode}, nnz={self.nnz})>"


def incidence_matrix(sc: MarginalScenario, cardinality: Mapping[NodeId, int]) -> SparseIncidence:
    missing = [v for v in sc.joint_variables if v not in cardinality]
    if missing:
        raise ValueError(f"no cardinality for {missing}")
    return SparseIncidence(scenario=sc, cardinality=cardinality)


def marginal_vector(model: MarginalModel, exact: Optional[bool] = None) -> np.ndarray:
    """Stack the per-context probability vectors in scenario row order.

    Row order matches incidence_matrix on the same scenario: context blocks
    in declaration order, canonical event order inside each block.
    """
    if exact is None:
        exact = model.is_exact
    parts = []
    for d in model.dists:
        vals = d.values
        if exact and not d.is_exact:
            # Fraction(float) is the float's exact binary value — no rounding.
            vals = np.array([Fraction(float(x)) for x in vals], dtype=object)
        elif not exact and d.is_exact:
            vals = vals.astype(np.float64)
        parts.append(vals)
    if exact:
        return np.concatenate([np.asarray(p, dtype=object) for p in parts])
    return np.concatenate(parts)
