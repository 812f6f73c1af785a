"""Tests for polynomial inequalities, the Fritz distribution, CHSH, and noise scans.

Claims covered:
  * PolynomialInequality canonicalizes (merges, drops zeros, sorts) and round-trips
    through the text format.
  * evaluate() agrees with a direct numpy computation, on both the bit route and
    the direct-marginal route, exact and float.
  * fritz_distribution() has exactly 16 support events at (2 +/- sqrt2)/32, mass 1,
    and its C bits copy A_l, B_l almost surely.
  * The built-in wagon-wheel inequality evaluates to exactly -1/16 on Fritz,
    matches the uniform value recorded with the frozen certificate, and stays
    nonnegative on randomly sampled triangle-compatible distributions.
  * chsh_triangle hits 2*sqrt(2) on Fritz with correlators (1,1,1,-1)/sqrt2.
  * noise_threshold matches an independent dense-grid + exact-linear-solve oracle
    (the Fritz-to-uniform value is affine in eps; the root is irrational).
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from causalcompat.events import Distribution, Event, EventSpace, bit_coarse_grain, marginalize
from causalcompat.exact import Root2
from causalcompat.graphs import NodeId
from causalcompat.inflation import wagon_wheel_certificate
from causalcompat.inequalities import (
    Factor,
    NoisyFamily,
    PolynomialInequality,
    chsh_triangle,
    chsh_triangle_report,
    evaluate,
    format_inequality,
    fritz_distribution,
    noise_threshold,
    noisy_member,
    parse_inequality,
    uniform_triangle_distribution,
    wagon_wheel_inequality,
)

A, B, C = NodeId("A"), NodeId("B"), NodeId("C")


def random_triangle_distribution(rng) -> Distribution:
    vals = rng.dirichlet(np.ones(64))
    probs = {}
    space_vars = [A, B, C]
    i = 0
    for a in range(4):
        for b in range(4):
            for c in range(4):
                probs[Event.of({A: a, B: b, C: c})] = vals[i]
                i += 1
    return Distribution.from_mapping({A: 4, B: 4, C: 4}, probs)


def random_compatible_triangle(rng, latent_card: int = 4) -> Distribution:
    """Sample from the triangle model: independent latents, deterministic reads."""
    px, py, pz = (rng.dirichlet(np.ones(latent_card)) for _ in range(3))
    fa = rng.integers(0, 4, size=(latent_card, latent_card))
    fb = rng.integers(0, 4, size=(latent_card, latent_card))
    fc = rng.integers(0, 4, size=(latent_card, latent_card))
    joint = np.zeros((4, 4, 4))
    for x in range(latent_card):
        for y in range(latent_card):
            for z in range(latent_card):
                joint[fa[x, y], fb[y, z], fc[z, x]] += px[x] * py[y] * pz[z]
    return Distribution(EventSpace.over({A: 4, B: 4, C: 4}), joint.reshape(-1))


class TestPolynomialCanonicalization:
    def test_merge_and_drop(self):
        f = Factor((A,), (1,))
        g = Factor((B,), (0,))
        ineq = PolynomialInequality(
            [
                (Fraction(1, 2), [f, g]),
                (Fraction(1, 2), [g, f]),  # same monomial, different order
                (Fraction(3), [f]),
                (Fraction(-3), [f]),  # cancels to zero
            ]
        )
        assert len(ineq.terms) == 1
        coef, factors = ineq.terms[0]
        assert coef == 1
        assert factors == (f, g)
        assert ineq.degree == 2

    def test_factor_validation(self):
        with pytest.raises(ValueError):
            Factor((B, A), (0, 0))  # unsorted
        with pytest.raises(ValueError):
            Factor((A,), (0, 1))  # arity mismatch

    def test_negated(self):
        ineq = PolynomialInequality([(Fraction(2), [Factor((A,), (0,))])])
        neg = ineq.negated()
        assert neg.terms[0][0] == -2

    def test_round_trip(self):
        ineq = wagon_wheel_inequality()
        again = parse_inequality(format_inequality(ineq))
        assert again == ineq
        assert again.name == "wagon-wheel"

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_inequality("+1 * Q[A](0)\n")
        with pytest.raises(ValueError):
            parse_inequality("+1 * P[A,B](000)\n")  # digit count mismatch

    def test_trivial(self):
        zero = PolynomialInequality([])
        assert zero.is_trivial
        assert parse_inequality(format_inequality(zero)).is_trivial


class TestEvaluate:
    def test_against_direct_computation(self):
        # coef * P[A](2) * P[A,B](31) + coef2 * P[B](0), checked by hand on numpy
        rng = np.random.default_rng(7)
        p = random_triangle_distribution(rng)
        table = p.values.reshape(4, 4, 4)
        ineq = PolynomialInequality(
            [
                (Fraction(3, 4), [Factor((A,), (2,)), Factor((A, B), (3, 1))]),
                (Fraction(-2), [Factor((B,), (0,))]),
            ]
        )
        expected = 0.75 * table[2].sum() * table[3, 1].sum() - 2 * table[:, 0].sum()
        assert math.isclose(float(evaluate(ineq, p)), expected, rel_tol=0, abs_tol=1e-12)

    def test_bit_route_matches_manual_coarse_graining(self):
        rng = np.random.default_rng(8)
        p = random_triangle_distribution(rng)
        bits = bit_coarse_grain(p)
        Bl, Cr = NodeId("B_l"), NodeId("C_r")
        ineq = PolynomialInequality([(Fraction(1), [Factor((Bl, Cr), (1, 0))])])
        expected = float(marginalize(bits, [Bl, Cr]).prob(1, 0))
        assert math.isclose(float(evaluate(ineq, p)), expected, abs_tol=1e-14)

    def test_mixed_routes_in_one_term(self):
        rng = np.random.default_rng(9)
        p = random_triangle_distribution(rng)
        Al = NodeId("A_l")
        ineq = PolynomialInequality(
            [(Fraction(1), [Factor((Al,), (1,)), Factor((C,), (2,))])]
        )
        table = p.values.reshape(4, 4, 4)
        expected = table[2:].sum() * table[:, :, 2].sum()
        assert math.isclose(float(evaluate(ineq, p)), expected, abs_tol=1e-12)

    def test_exact_evaluation_returns_exact(self):
        p = uniform_triangle_distribution(exact=True)
        ineq = PolynomialInequality([(Fraction(1), [Factor((A,), (0,))])])
        v = evaluate(ineq, p)
        assert isinstance(v, Fraction)
        assert v == Fraction(1, 4)

    def test_unknown_variable_rejected(self):
        p = uniform_triangle_distribution()
        bad = PolynomialInequality([(Fraction(1), [Factor((NodeId("D_l"),), (0,))])])
        with pytest.raises(ValueError):
            evaluate(bad, p)


class TestFritzDistribution:
    def test_support_and_values(self):
        p = fritz_distribution()
        assert p.is_exact
        plus = Root2.parse("(2+sqrt2)/32")
        minus = Root2.parse("(2-sqrt2)/32")
        support = p.support()
        assert len(support) == 16
        n_plus = sum(1 for e in support if p[e] == plus)
        n_minus = sum(1 for e in support if p[e] == minus)
        assert (n_plus, n_minus) == (8, 8)

    def test_mass_exact(self):
        p = fritz_distribution()
        total = sum(p.values, Fraction(0))
        assert total == Root2(1)

    def test_c_bits_copy_a_left_b_left(self):
        bits = bit_coarse_grain(fritz_distribution())
        Al, Bl = NodeId("A_l"), NodeId("B_l")
        Cl, Cr = NodeId("C_l"), NodeId("C_r")
        m = marginalize(bits, [Al, Bl, Cl, Cr])
        for ev, q in m.items():
            if ev[Cl] != ev[Al] or ev[Cr] != ev[Bl]:
                assert q == 0
            else:
                assert q == Fraction(1, 4)

    def test_single_party_marginals_uniform(self):
        p = fritz_distribution()
        for v in (A, B, C):
            m = marginalize(p, [v])
            for ev, q in m.items():
                assert q == Fraction(1, 4)


class TestWagonWheelInequality:
    def test_shape_matches_frozen_data(self):
        # pinned to the shipped data file: a degree-2 polynomial whose terms
        # all pair a full (A,B,C) event with a single-C marginal
        ineq = wagon_wheel_inequality()
        assert len(ineq.terms) == 242
        assert ineq.degree == 2
        for _, factors in ineq.terms:
            assert sorted(len(f.variables) for f in factors) == [1, 3]

    def test_loader_caches(self):
        assert wagon_wheel_inequality() is wagon_wheel_inequality()

    def test_fritz_value_exact(self):
        v = evaluate(wagon_wheel_inequality(), fritz_distribution())
        assert isinstance(v, Fraction)
        assert v == Fraction(-1, 16)

    def test_uniform_value_matches_certificate_record(self):
        v = evaluate(wagon_wheel_inequality(), uniform_triangle_distribution(exact=True))
        assert v == wagon_wheel_certificate().uniform_value
        assert v > Fraction(1, 16)

    def test_float_evaluation_agrees(self):
        ineq = wagon_wheel_inequality()
        v = float(evaluate(ineq, fritz_distribution().to_float()))
        assert math.isclose(v, -1 / 16, abs_tol=1e-12)

    def test_nonnegative_on_compatible_samples(self):
        ineq = wagon_wheel_inequality()
        rng = np.random.default_rng(7)
        for _ in range(10):
            p = random_compatible_triangle(rng)
            assert float(evaluate(ineq, p)) >= -1e-10


class TestChshTriangle:
    def test_fritz_reaches_tsirelson(self):
        assert abs(chsh_triangle(fritz_distribution()) - 2 * math.sqrt(2)) < 1e-12

    def test_fritz_report(self):
        rep = chsh_triangle_report(fritz_distribution())
        s = 1 / math.sqrt(2)
        for got, want in zip(rep.correlators, (s, s, s, -s)):
            assert abs(got - want) < 1e-12
        assert rep.settings_faithful
        assert all(abs(q - 0.25) < 1e-12 for q in rep.c_probs)

    def test_uniform_not_settings_faithful(self):
        rep = chsh_triangle_report(uniform_triangle_distribution())
        assert not rep.settings_faithful
        assert abs(rep.value) < 1e-12  # every correlator vanishes

    def test_zero_probability_conditioning_rejected(self):
        probs = {Event.of({A: a, B: b, C: 0}): 1 / 16 for a in range(4) for b in range(4)}
        p = Distribution.from_mapping({A: 4, B: 4, C: 4}, probs)
        with pytest.raises(ValueError):
            chsh_triangle(p)

    def test_wrong_space_rejected(self):
        with pytest.raises(ValueError):
            chsh_triangle(Distribution.uniform({A: 2, B: 2, C: 2}))


class TestNoise:
    def test_member_endpoints_and_mixing(self):
        fam = NoisyFamily(fritz_distribution(), uniform_triangle_distribution(exact=True))
        mid = noisy_member(fam, Fraction(1, 2))
        assert mid.is_exact
        p0 = noisy_member(fam, Fraction(0))
        assert all(x == y for x, y in zip(p0.values, fam.base.values))
        v = mid[Event.of({A: 0, B: 0, C: 0})]
        expected = Root2.parse("(2+sqrt2)/32") * Fraction(1, 2) + Fraction(1, 128)
        assert v == expected

    def test_member_validation(self):
        fam = NoisyFamily(fritz_distribution(), uniform_triangle_distribution(exact=True))
        with pytest.raises(ValueError):
            noisy_member(fam, 1.5)
        with pytest.raises(ValueError):
            NoisyFamily(fritz_distribution(), Distribution.uniform({A: 2, B: 2, C: 2}))

    def test_threshold_matches_exact_and_grid_oracles(self):
        ineq = wagon_wheel_inequality()
        fam = NoisyFamily(fritz_distribution(), uniform_triangle_distribution(exact=True))

        # Exact oracle: every term's single-C factor is constant along the
        # family (both endpoints have uniform C-marginals), so the value is
        # affine in eps and the threshold solves v0 + (v1 - v0) * eps = 0.
        v0 = Root2.coerce(evaluate(ineq, noisy_member(fam, Fraction(0))))
        v1 = Root2.coerce(evaluate(ineq, noisy_member(fam, Fraction(1))))
        vh = evaluate(ineq, noisy_member(fam, Fraction(1, 2)))
        assert vh == (v0 + v1) * Fraction(1, 2)  # affine check
        root = -v0 / (v1 - v0)
        assert Fraction(0) < root < Fraction(1)

        # Grid oracle: first sign change on a dense eps grid brackets the root.
        fam_f = NoisyFamily(fam.base.to_float(), fam.mixer.to_float())
        grid = None
        for k in range(1, 10001):
            if float(evaluate(ineq, noisy_member(fam_f, k * 1e-4))) >= 0:
                grid = (k - 1) * 1e-4, k * 1e-4
                break
        assert grid is not None
        assert grid[0] <= float(root) <= grid[1]

        got = noise_threshold(ineq, fam, tol=1e-7)
        assert abs(got - float(root)) < 1e-6

    def test_threshold_preconditions(self):
        ineq = wagon_wheel_inequality()
        fam = NoisyFamily(uniform_triangle_distribution(exact=True), fritz_distribution())
        with pytest.raises(ValueError):
            noise_threshold(ineq, fam)  # base does not violate
        with pytest.raises(ValueError):
            noise_threshold(PolynomialInequality([]), fam)
