"""Derive and freeze the wagon-wheel certificate behind the built-in inequality.

The built-in triangle inequality shipped with the package is the deflation of
a dual certificate of the wagon-wheel marginal problem.  This script derives
that certificate from scratch and freezes it (plus the deflated polynomial)
into src/causalcompat/data/wagon_wheel_certificate.json, which the library
loads at run time.

A vector y indexed by the rows of the wagon-wheel incidence matrix M is a
valid certificate whenever y'M >= 0; its deflation is then a quadratic
polynomial in marginals of (A, B, C), nonnegative on every triangle-compatible
distribution.  The Fritz marginal vector splits as v_r + sqrt2 * v_s with
rational v_r, v_s, and v_r is itself a feasible marginal vector (it belongs to
the rational skeleton distribution obtained by averaging Fritz with its
sqrt2 -> -sqrt2 conjugate), so y . v_r >= 0 for every valid y: *no rational
certificate can take a negative rational value on Fritz*.  The exact target
value -1/16 therefore forces coefficients in the field Q[sqrt2]: y = u +
sqrt2 * w with rational u, w, validity (M'u) + sqrt2 (M'w) >= 0, and pins

    u.v_r + 2 w.v_s = -1/16        (rational part of the Fritz value)
    u.v_s +   w.v_r = 0            (sqrt2 part vanishes)

Derivation: (1) minimize the l1 norm of (u, w) subject to the pins, a small
fixed slack on every column product (room for snapping error), and a
uniform-value floor of 1/16, (2) snap u, w to dyadic rationals (coarsest grid
that verifies), (3) repair the two pins exactly through a well-conditioned
2x2 correction, (4) re-verify everything in exact arithmetic: every column
product nonnegative as a Q[sqrt2] sign check, pins exact, and the deflated
polynomial evaluating to exactly -1/16 on Fritz.  Only then is the JSON
written.  Deterministic: no randomness anywhere.

Run from the repository root:  python3 tools/derive_ww_certificate.py
"""

import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from causalcompat.exact import Root2, format_exact
from causalcompat.inequalities import (
    evaluate,
    format_inequality,
    fritz_distribution,
    uniform_triangle_distribution,
)
from causalcompat.inflation import (
    ai_expressible_sets,
    builtin_inflation,
    deflate_certificate,
    inflated_marginal_model,
)
from causalcompat.lp import _column_products_exact
from causalcompat.marginals import incidence_matrix, marginal_vector

OUT = Path(__file__).resolve().parent.parent / "src" / "causalcompat" / "data" / "wagon_wheel_certificate.json"

FRITZ_VALUE = Fraction(-1, 16)
UNIFORM_FLOOR = Fraction(1, 16)
SQRT2 = float(np.sqrt(2.0))


def exact_dot(y, vec):
    total = Fraction(0)
    for a, b in zip(y, vec):
        if a:
            total += a * b
    return total


def snap_dyadic(xs, k):
    scale = 1 << k
    return [Fraction(int(round(float(x) * scale)), scale) for x in xs]


def repair_pins(u, w, v_r, v_s):
    """Adjust two entries of u so both Fritz pins hold exactly."""
    rho1 = exact_dot(u, v_s) + exact_dot(w, v_r)
    rho2 = exact_dot(u, v_r) + 2 * exact_dot(w, v_s) - FRITZ_VALUE
    if rho1 == 0 and rho2 == 0:
        return u
    n = len(u)
    i = max(range(n), key=lambda t: abs(v_s[t]))
    j = max(range(n), key=lambda t: abs(v_r[t] * v_s[i] - v_s[t] * v_r[i]))
    det = v_s[i] * v_r[j] - v_s[j] * v_r[i]
    di = (-rho1 * v_r[j] + rho2 * v_s[j]) / det
    dj = (-rho2 * v_s[i] + rho1 * v_r[i]) / det
    u = list(u)
    u[i] += di
    u[j] += dj
    return u


def verify(u, w, v_r, v_s, matrix):
    """Exact validity + pins; returns the list of column products or None."""
    if exact_dot(u, v_s) + exact_dot(w, v_r) != 0:
        return None
    if exact_dot(u, v_r) + 2 * exact_dot(w, v_s) != FRITZ_VALUE:
        return None
    pu = _column_products_exact(np.array(u, dtype=object), matrix)
    pw = _column_products_exact(np.array(w, dtype=object), matrix)
    prods = [Root2(a, b) for a, b in zip(pu, pw)]
    if any(pr.sign() < 0 for pr in prods):
        return None
    return prods


def main():
    inf = builtin_inflation("wagon-wheel")
    sets = ai_expressible_sets(inf)
    fritz = fritz_distribution()
    uniform = uniform_triangle_distribution(exact=True)

    model = inflated_marginal_model(fritz, inf, sets)
    matrix = incidence_matrix(model.scenario, {v: 4 for v in inf.inflated.observables})
    csr = matrix.tocsr()
    n = csr.shape[0]

    v = [Root2.coerce(x) for x in marginal_vector(model)]
    v_r = [x.rational_part() for x in v]
    v_s = [x.sqrt2_part() for x in v]
    v_u = [Root2.coerce(x).rational_part()
           for x in marginal_vector(inflated_marginal_model(uniform, inf, sets))]
    fr = np.array([float(x) for x in v_r])
    fs = np.array([float(x) for x in v_s])
    fu = np.array([float(x) for x in v_u])

    mt = (-csr.T).tocsr()  # 65536 x n
    n_cols = mt.shape[0]
    margin = 1e-5

    # variables [u, w, t] with |u_i| <= t_i, |w_i| <= t_{n+i}; minimize sum(t)
    eye = sp.identity(2 * n, format="csr")
    a_ub = sp.vstack([
        sp.hstack([mt, SQRT2 * mt, sp.csr_matrix((n_cols, 2 * n))]),
        sp.hstack([sp.csr_matrix(np.concatenate([-fu, -SQRT2 * fu])[None, :]),
                   sp.csr_matrix((1, 2 * n))]),
        sp.hstack([eye, -eye]),
        sp.hstack([-eye, -eye]),
    ]).tocsr()
    b_ub = np.concatenate([
        np.full(n_cols, -margin), [-float(UNIFORM_FLOOR)], np.zeros(4 * n)])
    a_eq = np.zeros((2, 4 * n))
    a_eq[0, :n] = fs
    a_eq[0, n:2 * n] = fr
    a_eq[1, :n] = fr
    a_eq[1, n:2 * n] = 2.0 * fs
    b_eq = np.array([0.0, float(FRITZ_VALUE)])
    c = np.concatenate([np.zeros(2 * n), np.ones(2 * n)])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(-8, 8)] * (2 * n) + [(0, 8)] * (2 * n),
                  method="highs")
    if res.status != 0:
        print(f"l1 LP failed: {res.message}")
        return 1
    uf, wf = res.x[:n], res.x[n:2 * n]
    live = int((np.abs(res.x[:2 * n]) > 1e-9).sum())
    print(f"l1 certificate: |y|_1 = {res.fun:.4f}, {live} live entries at margin {margin}")

    for k in (16, 20, 24, 28, 32, 36, 40):
        u = snap_dyadic(uf, k)
        w = snap_dyadic(wf, k)
        u = repair_pins(u, w, v_r, v_s)
        prods = verify(u, w, v_r, v_s, matrix)
        if prods is None:
            print(f"grid 2^-{k}: exact verification failed, refining")
            continue
        print(f"grid 2^-{k}: certificate verified exactly")

        y = [Root2(a, b) for a, b in zip(u, w)]
        uniform_value = Root2(exact_dot(u, v_u), exact_dot(w, v_u))
        assert uniform_value - Fraction(1, 32) > 0
        ineq = deflate_certificate(sets, y, cardinality=4, name="wagon-wheel")
        assert evaluate(ineq, fritz) == FRITZ_VALUE
        assert evaluate(ineq, uniform) == uniform_value

        payload = {
            "description": "dual certificate of the wagon-wheel marginal problem; "
                           "its deflation is the built-in triangle inequality",
            "cardinality": 4,
            "contexts": [[str(m) for m in sorted(s.members)] for s in sets],
            "blocks": [[[str(m) for m in sorted(b)] for b in s.blocks] for s in sets],
            "certificate": [format_exact(c) for c in y],
            "fritz_value": str(FRITZ_VALUE),
            "uniform_value": format_exact(uniform_value),
            "inequality": format_inequality(ineq),
        }
        OUT.parent.mkdir(parents=True, exist_ok=True)
        OUT.write_text(json.dumps(payload, indent=1))
        nz = sum(1 for c in y if c)
        print(f"wrote {OUT}")
        print(f"  certificate: {nz}/{n} nonzero entries")
        print(f"  deflated polynomial: {len(ineq.terms)} terms, degree {ineq.degree}")
        print(f"  uniform value: {format_exact(uniform_value)} ~ {float(uniform_value):.6f}")
        return 0
    print("no dyadic grid verified exactly")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
