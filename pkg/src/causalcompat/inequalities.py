"""Polynomial compatibility inequalities, reference distributions, noise scans.

An inequality here is a polynomial in marginal probabilities of the observed
variables (or of their bits, for 4-outcome variables read as two binary
digits).  The canonical orientation is "valid iff value >= 0": a negative
evaluation witnesses incompatibility.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

import numpy as np

from .exact import Root2, format_exact
from .events import Distribution, Event, EventSpace, bit_coarse_grain, marginalize
from .graphs import NodeId

__all__ = [
    "Factor",
    "PolynomialInequality",
    "evaluate",
    "fritz_distribution",
    "uniform_triangle_distribution",
    "wagon_wheel_inequality",
    "chsh_triangle",
    "ChshReport",
    "chsh_triangle_report",
    "NoisyFamily",
    "noisy_member",
    "noise_threshold",
    "format_inequality",
    "parse_inequality",
]

A, B, C = NodeId("A"), NodeId("B"), NodeId("C")

Exactish = Union[float, Fraction, Root2]
ExactCoef = Union[Fraction, Root2]


def _exact_coefficient(coef: Exactish) -> ExactCoef:
    """Exact coefficient, collapsed to Fraction whenever it is rational."""
    if isinstance(coef, Root2):
        return coef.rational_part() if coef.is_rational() else coef
    return Fraction(coef)


@dataclass(frozen=True)
class Factor:
    """One marginal probability P[variables](outcomes)."""

    variables: tuple[NodeId, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if tuple(sorted(self.variables)) != self.variables:
            raise ValueError("factor variables must be sorted")
        if len(self.variables) != len(self.outcomes):
            raise ValueError("one outcome per variable")

    @staticmethod
    def of(assignment: dict[NodeId, int]) -> "Factor":
        vs = tuple(sorted(assignment))
        return Factor(vs, tuple(assignment[v] for v in vs))

    def key(self):
        return (self.variables, self.outcomes)

    def __str__(self):
        vars_txt = ",".join(str(v) for v in self.variables)
        ev_txt = "".join(str(o) for o in self.outcomes)
        return f"P[{vars_txt}]({ev_txt})"


class PolynomialInequality:
    """Sum of coefficient * product-of-marginals terms; valid iff >= 0.

    Terms are canonicalized at construction: factors sorted within each
    monomial, identical monomials merged, zero coefficients dropped, terms
    sorted by monomial.  Construction is the only mutation point.
    """

    def __init__(self, terms: Iterable[tuple[Exactish, Iterable[Factor]]], name: str = ""):
        merged: dict[tuple, ExactCoef] = {}
        factors_by_key: dict[tuple, tuple[Factor, ...]] = {}
        for coef, factors in terms:
            fs = tuple(sorted(factors, key=Factor.key))
            key = tuple(f.key() for f in fs)
            merged[key] = merged.get(key, Fraction(0)) + _exact_coefficient(coef)
            factors_by_key[key] = fs
        self.terms: tuple[tuple[ExactCoef, tuple[Factor, ...]], ...] = tuple(
            (_exact_coefficient(merged[k]), factors_by_key[k])
            for k in sorted(merged)
            if merged[k] != 0
        )
        self.name = name

    @property
    def is_trivial(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((len(fs) for _, fs in self.terms), default=0)

    def negated(self) -> "PolynomialInequality":
        return PolynomialInequality([(-c, fs) for c, fs in self.terms], name=self.name)

    def variables(self) -> frozenset[NodeId]:
        return frozenset(v for _, fs in self.terms for f in fs for v in f.variables)

    def __eq__(self, other):
        return isinstance(other, PolynomialInequality) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __str__(self):
        return format_inequality(self)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<PolynomialInequality{tag}: {len(self.terms)} terms, degree {self.degree}>"


def evaluate(ineq: PolynomialInequality, p: Distribution) -> Exactish:
    """Value of the polynomial at p; negative means violated.

    Factors over p's own variables read marginals of p directly; factors over
    bit-variables (v_l / v_r) of 4-outcome variables read marginals of the
    bit coarse-graining.  Exact distributions give exact values.
    """
    base_vars = set(p.space.variables)
    bits: Optional[Distribution] = None
    marg_cache: dict[tuple[bool, tuple[NodeId, ...]], Distribution] = {}

    def factor_value(f: Factor) -> Exactish:
        nonlocal bits
        if set(f.variables) <= base_vars:
            src_is_bits = False
            src = p
        else:
            if bits is None:
                bits = bit_coarse_grain(p)
            if not set(f.variables) <= set(bits.space.variables):
                raise ValueError(f"factor {f} references unknown variables")
            src_is_bits = True
            src = bits
        key = (src_is_bits, f.variables)
        if key not in marg_cache:
            marg_cache[key] = marginalize(src, f.variables)
        return marg_cache[key][Event.of(dict(zip(f.variables, f.outcomes)))]

    exact = p.is_exact
    total: Exactish = Fraction(0) if exact else 0.0
    for coef, factors in ineq.terms:
        prod: Exactish = coef if exact else float(coef)
        for f in factors:
            v = factor_value(f)
            prod = prod * v if exact else prod * float(v)
        total = total + prod
    if exact and isinstance(total, Root2) and total.is_rational():
        return total.rational_part()
    return total


# -- reference distributions ---------------------------------------------------

_FRITZ_PLUS = ("000", "110", "021", "131", "202", "312", "233", "323")
_FRITZ_MINUS = ("010", "100", "031", "121", "212", "302", "223", "333")


def fritz_distribution() -> Distribution:
    """The 4-outcome tripartite quantum distribution embedding a CHSH test.

    16 events carry mass, split evenly between (2+sqrt2)/32 and (2-sqrt2)/32;
    stored exactly in rational-plus-sqrt2 arithmetic.
    """
    plus = Root2.parse("(2+sqrt2)/32")
    minus = Root2.parse("(2-sqrt2)/32")
    probs: dict[Event, Root2] = {}
    for text, val in [(t, plus) for t in _FRITZ_PLUS] + [(t, minus) for t in _FRITZ_MINUS]:
        a, b, c = (int(ch) for ch in text)
        probs[Event.of({A: a, B: b, C: c})] = val
    return Distribution.from_mapping({A: 4, B: 4, C: 4}, probs, exact=True)


def uniform_triangle_distribution(exact: bool = False) -> Distribution:
    return Distribution.uniform({A: 4, B: 4, C: 4}, exact=exact)


# -- the built-in wagon-wheel inequality -----------------------------------------

_WW_CACHE: Optional[PolynomialInequality] = None


def wagon_wheel_inequality() -> PolynomialInequality:
    """Built-in degree-2 triangle inequality, violated by Fritz at exactly -1/16.

    The polynomial is the deflation of a frozen dual certificate of the
    wagon-wheel marginal problem, shipped as package data: every term is a
    product P[A,B,C](abc) * P[C](c') with an exact rational-plus-sqrt2
    coefficient.  Nonnegativity on all triangle-compatible distributions
    follows from the certificate, which inflation.wagon_wheel_certificate()
    exposes for independent re-verification.  Stored in canonical >= 0
    orientation.
    """
    global _WW_CACHE
    if _WW_CACHE is None:
        payload = json.loads(
            importlib.resources.files("causalcompat")
            .joinpath("data/wagon_wheel_certificate.json")
            .read_text()
        )
        _WW_CACHE = parse_inequality(payload["inequality"])
    return _WW_CACHE


# -- CHSH recast ------------------------------------------------------------------

@dataclass(frozen=True)
class ChshReport:
    value: float
    correlators: tuple[float, float, float, float]  # conditioned on C = 0..3
    c_probs: tuple[float, float, float, float]
    settings_faithful: bool  # C_l = A_l and C_r = B_l almost surely


def chsh_triangle_report(p: Distribution, tol: float = 1e-12) -> ChshReport:
    """CHSH combination of right-bit correlators conditioned on C.

    <A_r B_r | C=c> with signs (+, +, +, -) over c = 0..3.  Only meaningful
    as a compatibility test when C's bits replicate A_l, B_l; the report
    carries that check instead of assuming it.
    """
    if set(p.space.variables) != {A, B, C} or any(c != 4 for c in p.space.cards):
        raise ValueError("chsh_triangle needs A,B,C with 4 outcomes each")
    pc = marginalize(p, [C])
    c_probs = tuple(float(pc.prob(c)) for c in range(4))
    if any(q <= tol for q in c_probs):
        raise ValueError(f"zero-probability conditioning event C={c_probs.index(min(c_probs))}")

    corr = []
    for c in range(4):
        e = 0.0
        for a in range(4):
            for b in range(4):
                sign = 1.0 if (a % 2) == (b % 2) else -1.0
                e += sign * float(p.prob(a, b, c))
        corr.append(e / c_probs[c])

    bits = bit_coarse_grain(p)
    Al, Bl = NodeId("A_l"), NodeId("B_l")
    Cl, Cr = NodeId("C_l"), NodeId("C_r")
    agree = marginalize(bits, [Al, Bl, Cl, Cr])
    mismatch = sum(
        float(q)
        for ev, q in agree.items()
        if ev[Cl] != ev[Al] or ev[Cr] != ev[Bl]
    )
    value = corr[0] + corr[1] + corr[2] - corr[3]
    return ChshReport(value, tuple(corr), c_probs, settings_faithful=mismatch <= tol)


def chsh_triangle(p: Distribution) -> float:
    return chsh_triangle_report(p).value


# -- noise robustness ---------------------------------------------------------------

@dataclass(frozen=True)
class NoisyFamily:
    """Convex mixtures (1-eps) * base + eps * mixer."""

    base: Distribution
    mixer: Distribution

    def __post_init__(self):
        if self.base.space != self.mixer.space:
            raise ValueError("base and mixer must share an event space")


def noisy_member(f: NoisyFamily, eps: Exactish) -> Distribution:
    if not 0 <= float(eps) <= 1:
        raise ValueError(f"eps must lie in [0,1], got {eps}")
    if f.base.is_exact and f.mixer.is_exact and isinstance(eps, (Fraction, int)):
        e = Fraction(eps)
        vals = np.array(
            [(1 - e) * pv + e * qv for pv, qv in zip(f.base.values, f.mixer.values)],
            dtype=object,
        )
        return Distribution(f.base.space, vals)
    e = float(eps)
    base = f.base.values.astype(np.float64) if f.base.is_exact else f.base.values
    mix = f.mixer.values.astype(np.float64) if f.mixer.is_exact else f.mixer.values
    return Distribution(f.base.space, (1 - e) * base + e * mix)


def noise_threshold(
    ineq: PolynomialInequality,
    f: NoisyFamily,
    tol: float = 1e-6,
    scan_step: float = 1e-3,
) -> float:
    """Largest eps* such that the inequality stays violated for all eps < eps*.

    The violation value is polynomial in eps but not assumed monotone: a
    forward scan locates the first sign change, then bisection refines it.
    """
    if ineq.is_trivial:
        raise ValueError("the zero inequality never violates anything")

    def value(eps: float) -> float:
        return float(evaluate(ineq, noisy_member(f, eps)))

    if value(0.0) >= 0:
        raise ValueError("family base does not violate the inequality")

    lo = 0.0
    hi = None
    steps = int(np.ceil(1.0 / scan_step))
    for k in range(1, steps + 1):
        eps = min(k * scan_step, 1.0)
        if value(eps) >= 0:
            hi = eps
            break
        lo = eps
    if hi is None:
        return 1.0  # violated across the whole family

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if value(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- text format ----------------------------------------------------------------
#
# One term per line:  "<coef> * P[v1,v2](outcomes) * P[...](...)"
# Pieces join with " * " (spaced); coefficients are any exact literal the
# Root2 parser accepts, e.g. "3/8" or "(1-2*sqrt2)/64".  A "name: <text>"
# line may lead.

def format_inequality(ineq: PolynomialInequality) -> str:
    lines = []
    if ineq.name:
        lines.append(f"name: {ineq.name}")
    for coef, factors in ineq.terms:
        coef_txt = str(coef)
        if coef > 0:
            coef_txt = f"+{coef_txt}"
        lines.append(" * ".join([coef_txt] + [str(f) for f in factors]))
    if not ineq.terms:
        lines.append("0")
    return "\n".join(lines) + "\n"


def parse_inequality(text: str) -> PolynomialInequality:
    import re

    factor_re = re.compile(r"^P\[(?P<vars>[^\]]+)\]\((?P<ev>\d+)\)$")
    name = ""
    terms = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line == "0":
            continue
        if line.startswith("name:"):
            name = line.split(":", 1)[1].strip()
            continue
        parts = [p.strip() for p in re.split(r"\s+\*\s+", line)]
        tok = parts[0][1:].strip() if parts[0].startswith("+") else parts[0]
        try:
            coef: Exactish = Fraction(tok)
        except ValueError:
            coef = Root2.parse(tok)
        factors = []
        for ftxt in parts[1:]:
            m = factor_re.match(ftxt)
            if not m:
                raise ValueError(f"bad factor {ftxt!r}")
            vs = [NodeId.parse(v.strip()) for v in m.group("vars").split(",")]
            outs = [int(ch) for ch in m.group("ev")]
            if len(vs) != len(outs):
                raise ValueError(f"factor {ftxt!r}: {len(vs)} variables, {len(outs)} digits")
            pairs = sorted(zip(vs, outs))
            factors.append(Factor(tuple(v for v, _ in pairs), tuple(o for _, o in pairs)))
        terms.append((coef, factors))
    return PolynomialInequality(terms, name=name)
