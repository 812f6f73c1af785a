"""Feasibility LP for the marginal problem, with exact certificate checking.

The primal question is whether some joint distribution x >= 0 satisfies
M x = v, where M is an incidence matrix and v a marginal vector.  Instead of
trusting a solver's infeasibility flag, the verdict is produced as follows:

* Solve the box-normalized dual  min y.v  s.t.  y'M >= 0,  -1 <= y <= 1.
  It is always feasible (y = 0); its optimum is < 0 exactly when a Farkas
  certificate of primal infeasibility exists (any certificate can be scaled
  into the box without changing signs).
* A negative dual optimum only *suggests* infeasibility.  The returned y is
  snapped to nearby rationals and y'M >= 0 is re-verified in exact rational
  arithmetic; y.v < 0 is checked exactly when v is exact.  Only a y passing
  this gate is reported as Infeasible.
* Otherwise a primal witness is computed and checked against its residual.

If neither branch can be verified at tolerance the solve raises an explicit
indeterminate error carrying both residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .exact import Root2, rationalize_vector
from .marginals import SparseIncidence

__all__ = [
    "FeasibilityProblem",
    "Feasible",
    "Infeasible",
    "FeasibilityResult",
    "IndeterminateError",
    "SnapVerificationError",
    "solve_feasibility",
    "verify_certificate",
    "certificate_value",
]

DUAL_NEGATIVITY_MARGIN = 1e-9
FEASIBILITY_RESIDUAL_TOL = 1e-8
SNAP_DENOMINATOR_BOUND = 10**6


class IndeterminateError(RuntimeError):
    """Neither branch verifiable at tolerance: carries both residuals."""

    def __init__(self, primal_residual: float, dual_objective: float, detail: str = ""):
        self.primal_residual = primal_residual
        self.dual_objective = dual_objective
        msg = (
            f"feasibility undecided: primal residual {primal_residual:.3e}, "
            f"dual objective {dual_objective:.3e}"
        )
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SnapVerificationError(RuntimeError):
    """Rational snapping destroyed y'M >= 0 even though floats looked fine."""


@dataclass(frozen=True)
class FeasibilityProblem:
    matrix: SparseIncidence
    rhs: np.ndarray  # float64 or object (exact) vector

    def __post_init__(self):
        rhs = np.asarray(self.rhs)
        object.__setattr__(self, "rhs", rhs)
        if rhs.shape != (self.matrix.shape[0],):
            raise ValueError(f"rhs length {rhs.shape} != row count {self.matrix.shape[0]}")
        if rhs.dtype == object:
            if any(Root2.coerce(v).sign() < 0 for v in rhs):
                raise ValueError("rhs must be nonnegative")
        elif rhs.size and float(rhs.min()) < -1e-12:
            raise ValueError("rhs must be nonnegative")

    @property
    def rhs_float(self) -> np.ndarray:
        if self.rhs.dtype == object:
            return np.array([float(v) for v in self.rhs])
        return self.rhs


@dataclass(frozen=True)
class Feasible:
    witness: np.ndarray
    residual: float

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Infeasible:
    certificate: np.ndarray  # float vector as returned by the solver
    rational_certificate: tuple[Fraction, ...]  # exact snapped form (verified)
    dual_objective: float
    value: Union[float, Fraction, Root2] = field(default=0.0)  # exact y.v when rhs exact

    def __bool__(self):
        return False


FeasibilityResult = Union[Feasible, Infeasible]


# -- exact arithmetic helpers ---------------------------------------------------

def _column_products_exact(y: Sequence[Fraction], m: SparseIncidence) -> np.ndarray:
    """y'M as an exact object vector, streamed column-block by column-block.

    Uses an integer fast path when all snapped entries share a modest common
    denominator; falls back to Fraction arithmetic otherwise.
    """
    n_rows, n_cols = m.shape
    dens = {f.denominator for f in y}
    lcm = 1
    for d in dens:
        lcm = lcm * d // math.gcd(lcm, d)
        if lcm > 1 << 40:
            break
    int_ok = lcm <= 1 << 40
    if int_ok:
        scaled = [int(f * lcm) for f in y]
        peak = max((abs(s) for s in scaled), default=0)
    if m.is_lazy:
        n_ctx = len(m.scenario.contexts)
        if int_ok and peak * n_ctx < 1 << 62:
            yi = np.array(scaled, dtype=np.int64)
            out = np.empty(n_cols, dtype=np.int64)
            for start, rows in m.iter_column_blocks():
                acc = yi[rows[0]].copy()
                for i in range(1, rows.shape[0]):
                    acc += yi[rows[i]]
                out[start : start + rows.shape[1]] = acc
            result = np.empty(n_cols, dtype=object)
            result[:] = [Fraction(int(v), lcm) for v in out]
            return result
        yo = np.array(list(y), dtype=object)
        out = np.empty(n_cols, dtype=object)
        for start, rows in m.iter_column_blocks():
            acc = yo[rows[0]].copy()
            for i in range(1, rows.shape[0]):
                acc = acc + yo[rows[i]]
            out[start : start + rows.shape[1]] = acc
        return out
    # explicit integer CSR: compute in integers when possible
    csc = m.tocsr().tocsc()
    data = csc.data.astype(np.int64)
    if int_ok:
        max_entry = int(abs(data).max()) if csc.nnz else 0
        max_terms = int(np.diff(csc.indptr).max()) if n_cols else 0
        if peak and max_entry and peak * max_entry * max(max_terms, 1) < 1 << 62:
            yi = np.array(scaled, dtype=np.int64)
            out = np.zeros(n_cols, dtype=np.int64)
            for j in range(n_cols):
                lo, hi = csc.indptr[j], csc.indptr[j + 1]
                out[j] = int(np.dot(yi[csc.indices[lo:hi]], data[lo:hi]))
            result = np.empty(n_cols, dtype=object)
            result[:] = [Fraction(int(v), lcm) for v in out]
            return result
    out = np.empty(n_cols, dtype=object)
    ylist = list(y)
    for j in range(n_cols):
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        acc = Fraction(0)
        for k in range(lo, hi):
            acc += ylist[csc.indices[k]] * int(data[k])
        out[j] = acc
    return out


def certificate_value(y: Sequence[Fraction], rhs: np.ndarray) -> Union[Fraction, Root2, float]:
    """y . rhs, exact whenever rhs entries are exact."""
    rhs = np.asarray(rhs)
    if rhs.dtype == object:
        total = Root2(0)
        for f, v in zip(y, rhs):
            total = total + Root2.coerce(v) * Root2(f)
        return total.rational_part() if total.is_rational() else total
    return float(np.dot([float(f) for f in y], rhs))


def verify_certificate(
    y: np.ndarray,
    m: SparseIncidence,
    rhs: np.ndarray,
    *,
    negativity_margin: float = DUAL_NEGATIVITY_MARGIN,
    snap_bound: int = SNAP_DENOMINATOR_BOUND,
    already_rational: Optional[Sequence[Fraction]] = None,
) -> bool:
    """Exact, solver-independent certificate check.

    True iff the snapped-rational y satisfies y'M >= 0 *exactly* and y.rhs < 0
    (exactly for exact rhs, with a small margin otherwise).  Raises
    SnapVerificationError when floating-point y'M looks nonnegative but the
    rational snap breaks it — a snapping failure, not a refutation.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (m.shape[0],):
        raise ValueError("certificate length does not match row count")
    y_rat = tuple(already_rational) if already_rational is not None else tuple(
        rationalize_vector(y, snap_bound)
    )
    products = _column_products_exact(y_rat, m)
    bad = [j for j, v in enumerate(products) if v < 0]
    if bad:
        floats = m.rmatvec(y)
        if float(floats.min()) >= -1e-7:
            raise SnapVerificationError(
                f"rational snap violates y'M >= 0 in {len(bad)} columns "
                f"(first: {bad[0]}) although the float check passed"
            )
        return False
    val = certificate_value(y_rat, rhs)
    if isinstance(val, (Fraction, Root2)):
        sign = val.sign() if isinstance(val, Root2) else (0 if val == 0 else (1 if val > 0 else -1))
        return sign < 0
    return val < -abs(negativity_margin)


# -- the solver -----------------------------------------------------------------

def _dual_matrix(m: SparseIncidence) -> sp.csr_matrix:
    """-M' as CSR, for the y'M >= 0 constraints written as (-M') y <= 0."""
    return (-(m.tocsr().T)).tocsr()


def solve_feasibility(
    problem: FeasibilityProblem,
    tol: float = FEASIBILITY_RESIDUAL_TOL,
    *,
    snap_bound: int = SNAP_DENOMINATOR_BOUND,
) -> FeasibilityResult:
    """Decide {x >= 0 : Mx = rhs} with a verified answer either way."""
    m = problem.matrix
    v = problem.rhs_float
    n_rows, n_cols = m.shape

    # Ask the solver for one digit more than we verify at, else a witness can
    # sit between the solver's default tolerance and ours (HiGHS floor: 1e-10).
    solver_tol = max(min(tol * 0.1, 1e-7), 1e-10)
    options = {
        "primal_feasibility_tolerance": solver_tol,
        "dual_feasibility_tolerance": solver_tol,
    }

    dual = linprog(
        c=v,
        A_ub=_dual_matrix(m),
        b_ub=np.zeros(n_cols),
        bounds=[(-1.0, 1.0)] * n_rows,
        method="highs",
        options=options,
    )
    if not dual.success:
        raise RuntimeError(f"dual LP solve failed: {dual.message}")
    dual_obj = float(dual.fun)

    if dual_obj < -abs(DUAL_NEGATIVITY_MARGIN):
        y = np.asarray(dual.x)
        y_rat = tuple(rationalize_vector(y, snap_bound))
        try:
            ok = verify_certificate(y, m, problem.rhs, snap_bound=snap_bound, already_rational=y_rat)
        except SnapVerificationError:
            ok = False
        if ok:
            return Infeasible(
                certificate=y,
                rational_certificate=y_rat,
                dual_objective=dual_obj,
                value=certificate_value(y_rat, problem.rhs),
            )
        # fall through: could not verify the certificate — try the primal

    primal = linprog(
        c=np.zeros(n_cols),
        A_eq=m.tocsr(),
        b_eq=v,
        bounds=[(0.0, None)] * n_cols,
        method="highs",
        options=options,
    )
    if primal.success:
        x = np.asarray(primal.x)
        residual = float(np.abs(m.matvec(x) - v).max()) if n_rows else 0.0
        if residual <= tol and float(x.min(initial=0.0)) >= -tol:
            return Feasible(witness=np.maximum(x, 0.0), residual=residual)
        raise IndeterminateError(residual, dual_obj, "primal witness exceeded tolerance")
    raise IndeterminateError(float("inf"), dual_obj, "no verifiable certificate and no primal witness")
