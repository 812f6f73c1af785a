"""Numerical search for inequality-violating quantum strategies.

Minimizers: a simplex method, a quasi-Newton method with finite-difference
gradients, and a basin-hopping loop (perturb, locally minimize, Metropolis
accept) on top of them.  The violation objective minimizes the inequality
value of the strategy's distribution, so a violation is a negative optimum;
candidate parameter vectors are wrapped modulo 2pi before evaluation (the
built strategy is periodic in every angle).

Every search records a best-so-far trace and is deterministic under a fixed
RNG seed.  Whether a random-seeded search saturates rather than violates a
given inequality is an empirical matter; nothing here asserts it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from .events import Distribution, EventSpace
from .graphs import NodeId
from .inequalities import PolynomialInequality, evaluate
from .quantum import (
    QuantumStrategy,
    StrategyParams,
    UnitaryParams,
    _state_index_map,
    _STATE_EIGEN_SLICES,
    _STATE_UNITARY_SLICES,
    _MEAS_UNITARY_SLICES,
    density_from_params,
    parameterize_strategy,
    spengler_unitary,
    triangle_distribution,
)

__all__ = [
    "OptimizerOptions",
    "OptResult",
    "OptimizationRun",
    "ViolationReport",
    "finite_difference_gradient",
    "nelder_mead",
    "bfgs_fd",
    "basin_hopping",
    "support_pattern",
    "maximize_violation",
]

_TWO_PI = 2 * math.pi


@dataclass
class OptimizerOptions:
    """Knobs shared by the optimizers.

    budget counts objective evaluations for one local minimization (the
    quasi-Newton budget is approximate: each finite-difference gradient
    spends 2n of them).  Basin hopping runs `hops` perturb/minimize rounds
    of Gaussian scale `step_size` with Metropolis temperature `temperature`,
    all driven by `rng_seed`.
    """

    budget: int = 20000
    xtol: float = 1e-9
    ftol: float = 1e-11
    fd_step: float = 1e-6
    gtol: float = 1e-8
    hops: int = 50
    step_size: float = 0.3
    temperature: float = 0.05
    rng_seed: int = 0
    support_threshold: float = 1e-6


@dataclass
class OptResult:
    """Outcome of one minimization: best point, value, and bookkeeping."""

    x: np.ndarray
    value: float
    trace: list[float]
    evaluations: int
    status: str
    skipped_hops: int = 0


class _Recorder:
    """Wraps an objective: counts calls, tracks the best point, and keeps a
    monotone best-so-far trace.  Non-finite values abort the search."""

    def __init__(self, f: Callable[[np.ndarray], float]):
        self._f = f
        self.evaluations = 0
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf
        self.trace: list[float] = []

    def __call__(self, x: np.ndarray) -> float:
        val = float(self._f(np.asarray(x, dtype=np.float64)))
        if not math.isfinite(val):
            raise ValueError(f"objective returned non-finite value {val} at {x!r}")
        self.evaluations += 1
        if val < self.best_f:
            self.best_f = val
            self.best_x = np.array(x, dtype=np.float64)
        self.trace.append(self.best_f)
        return val


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient with absolute step h."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (f(x + step) - f(x - step)) / (2 * h)
    return g


# -- local minimizers ------------------------------------------------------------


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    opts: Optional[OptimizerOptions] = None,
) -> OptResult:
    """Simplex search: stops on simplex diameter/value spread or budget."""
    opts = opts or OptimizerOptions()
    rec = _Recorder(f)
    x0 = np.asarray(x0, dtype=np.float64)
    rec(x0)  # aborts early and cleanly if the seed is non-finite
    res = scipy.optimize.minimize(
        rec,
        x0,
        method="Nelder-Mead",
        options=dict(
            xatol=opts.xtol,
            fatol=opts.ftol,
            maxfev=opts.budget,
            maxiter=10**9,
        ),
    )
    status = "converged" if res.status == 0 else "budget_exhausted"
    return OptResult(rec.best_x, rec.best_f, rec.trace, rec.evaluations, status)


def bfgs_fd(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    opts: Optional[OptimizerOptions] = None,
) -> OptResult:
    """Quasi-Newton minimization with finite-difference gradients.

    Gradients are central differences at opts.fd_step; the line search is
    the Wolfe search of the underlying implementation.  A failed line
    search returns the best point seen with status "line_search_failed".
    """
    opts = opts or OptimizerOptions()
    rec = _Recorder(f)
    x0 = np.asarray(x0, dtype=np.float64)
    rec(x0)
    per_iter = 2 * x0.size + 3
    res = scipy.optimize.minimize(
        rec,
        x0,
        method="BFGS",
        jac=lambda x: finite_difference_gradient(rec, x, opts.fd_step),
        options=dict(
            gtol=opts.gtol,
            maxiter=max(1, opts.budget // per_iter),
        ),
    )
    status = {
        0: "converged",
        1: "budget_exhausted",
        2: "line_search_failed",
    }.get(res.status, "failed")
    return OptResult(rec.best_x, rec.best_f, rec.trace, rec.evaluations, status)


def basin_hopping(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    opts: Optional[OptimizerOptions] = None,
    local: Callable[..., OptResult] = bfgs_fd,
) -> OptResult:
    """Perturb / locally minimize / Metropolis-accept, keeping the best.

    The chain state moves to a hop's local minimum when it improves the
    current value, or with probability exp(-increase/temperature) when it
    does not.  A hop whose local minimization raises is skipped and
    counted.  Zero perturbation scale degenerates to repeated local
    minimization from the same point.
    """
    opts = opts or OptimizerOptions()
    rng = np.random.default_rng(opts.rng_seed)
    x0 = np.asarray(x0, dtype=np.float64)

    first = local(f, x0, opts)
    trace = list(first.trace)
    evaluations = first.evaluations
    best_x, best_f = first.x, first.value
    cur_x, cur_f = first.x, first.value
    skipped = 0

    for _ in range(opts.hops):
        start = cur_x + rng.normal(0.0, opts.step_size, size=cur_x.size)
        try:
            hop = local(f, start, opts)
        except ValueError:
            skipped += 1
            continue
        evaluations += hop.evaluations
        trace.extend(min(v, best_f) for v in hop.trace)
        if hop.value < best_f:
            best_x, best_f = hop.x, hop.value
        accept = hop.value <= cur_f
        if not accept and opts.temperature > 0:
            accept = rng.random() < math.exp(-(hop.value - cur_f) / opts.temperature)
        if accept:
            cur_x, cur_f = hop.x, hop.value
    return OptResult(best_x, best_f, trace, evaluations, "complete", skipped)


# -- violation objective ---------------------------------------------------------


def _triangle_space() -> EventSpace:
    return EventSpace.over({NodeId.parse(x): 4 for x in ("A", "B", "C")})


def _strategy_values(vec: np.ndarray) -> np.ndarray:
    """Distribution values of a (wrapped) parameter vector, skipping the
    strategy validation — parameter-built matrices satisfy it by
    construction."""
    states = []
    for es, us in zip(_STATE_EIGEN_SLICES, _STATE_UNITARY_SLICES):
        u = UnitaryParams.from_flat(4, vec[us], enforce_ranges=False)
        states.append(density_from_params(vec[es], u))
    bases = []
    for sl in _MEAS_UNITARY_SLICES:
        u = UnitaryParams.from_flat(4, vec[sl], enforce_ranges=False)
        bases.append(spengler_unitary(u).conj().T)  # columns are the vectors
    rho = np.kron(np.kron(states[0], states[1]), states[2])
    jmap = _state_index_map()
    rho_meas = rho[np.ix_(jmap, jmap)]
    v = np.kron(np.kron(bases[0], bases[1]), bases[2])
    w = rho_meas @ v
    return np.einsum("ij,ij->j", v.conj(), w).real


def _compile_value(ineq: PolynomialInequality) -> Callable[[np.ndarray], float]:
    """Inequality value as vectorized marginal-table lookups.

    Only inequalities whose factors live on the 4-outcome triangle
    variables compile; anything else (e.g. bit-level factors) falls back
    to the generic evaluator.
    """
    space = _triangle_space()
    tri = set(space.variables)
    if any(v not in tri for _, fs in ineq.terms for f in fs for v in f.variables):
        return lambda vals: float(evaluate(ineq, Distribution(space, vals)))

    axes_of = {v: i for i, v in enumerate(space.variables)}
    subsets: dict[tuple, int] = {}
    offsets: list[int] = []
    total = 0
    for _, fs in ineq.terms:
        for f in fs:
            if f.variables not in subsets:
                subsets[f.variables] = len(offsets)
                offsets.append(total)
                total += 4 ** len(f.variables)
    pad = total  # one trailing slot holding 1.0
    degree = max((len(fs) for _, fs in ineq.terms), default=1)
    idx = np.full((len(ineq.terms), max(degree, 1)), pad, dtype=np.int64)
    coefs = np.empty(len(ineq.terms))
    for t, (coef, fs) in enumerate(ineq.terms):
        coefs[t] = float(coef)
        for k, f in enumerate(fs):
            flat = 0
            for o in f.outcomes:
                flat = flat * 4 + o
            idx[t, k] = offsets[subsets[f.variables]] + flat
    drop_axes = {
        vs: tuple(i for v, i in axes_of.items() if v not in vs) for vs in subsets
    }

    def value(vals: np.ndarray) -> float:
        cube = np.asarray(vals, dtype=np.float64).reshape(4, 4, 4)
        buf = np.empty(total + 1)
        buf[pad] = 1.0
        for vs, s in subsets.items():
            table = cube.sum(axis=drop_axes[vs]) if drop_axes[vs] else cube
            size = 4 ** len(vs)
            buf[offsets[s] : offsets[s] + size] = table.ravel()
        return float(coefs @ buf[idx].prod(axis=1))

    return value


@dataclass
class OptimizationRun:
    """One violation search: objective, seed vector, budget, and the
    monotone best-so-far violation trace."""

    objective: Callable[[np.ndarray], float]
    seed: np.ndarray
    budget: int
    trace: list[float] = field(default_factory=list)


@dataclass
class ViolationReport:
    """Best strategy found, its violation (-inequality value), its
    distribution, and the distribution's support pattern."""

    strategy: QuantumStrategy
    violation: float
    distribution: Distribution
    support: tuple[tuple[int, ...], ...]
    params: StrategyParams
    run: OptimizationRun
    evaluations: int
    status: str


def support_pattern(
    dist: Distribution, threshold: float = 1e-6
) -> tuple[tuple[int, ...], ...]:
    """Events carrying more than `threshold` probability, sorted."""
    out = []
    for i, v in enumerate(dist.values):
        if float(v) > threshold:
            out.append(dist.space.outcomes_of(i))
    return tuple(out)


def maximize_violation(
    ineq: PolynomialInequality,
    seed: QuantumStrategy,
    opts: Optional[OptimizerOptions] = None,
) -> ViolationReport:
    """Search strategy space for large violation of ineq, from a seed.

    The seed strategy is re-parameterized into the flat layout and basin
    hopping runs from there; the result is never worse than the seed.  A
    zero budget skips the search and just evaluates the seed.
    """
    opts = opts or OptimizerOptions()
    x0 = parameterize_strategy(seed).vector
    value_of = _compile_value(ineq)

    def objective(vec: np.ndarray) -> float:
        return value_of(_strategy_values(np.mod(vec, _TWO_PI)))

    if opts.budget == 0:
        seed_val = value_of(_strategy_values(np.mod(x0, _TWO_PI)))
        result = OptResult(np.array(x0), seed_val, [seed_val], 1, "seed_only")
    else:
        result = basin_hopping(objective, x0, opts)

    params = StrategyParams(np.mod(result.x, _TWO_PI))
    strategy = params.build()
    dist = triangle_distribution(strategy)
    run = OptimizationRun(
        objective=objective,
        seed=np.array(x0),
        budget=opts.budget,
        trace=[-v for v in result.trace],
    )
    return ViolationReport(
        strategy=strategy,
        violation=-result.value,
        distribution=dist,
        support=support_pattern(dist, opts.support_threshold),
        params=params,
        run=run,
        evaluations=result.evaluations,
        status=result.status,
    )
