"""Parameterized quantum strategies on the triangle structure.

A strategy places one bipartite qubit state on each edge of the triangle
(AB, BC, CA) and gives each party a four-outcome projective measurement on
its two qubits.  The resulting distribution over (A, B, C) is

    P(abc) = <m_a m_b m_c| T' (rho_AB x rho_BC x rho_CA) T |m_a m_b m_c>

where T is the fixed permutation aligning the qubit tensor orders: states
are laid out source by source, measurements party by party.

Unitaries are parameterized by plane rotations and relative phases: one
rotation angle in [0, pi/2] and one phase in [0, 2pi] per basis-vector pair,
composed in a fixed order, plus per-vector global phases pinned to zero
(they cancel in every projector conjugation used here).  Every factor is a
closed-form matrix — a 2x2 rotation block or a single diagonal phase — so
no matrix exponentials are evaluated at runtime.  Density matrices combine
such a basis unitary with eigenvalues from a squared hyperspherical map;
PVMs are conjugated computational-basis projectors.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .events import Distribution, EventSpace
from .graphs import NodeId

__all__ = [
    "UnitaryParams",
    "spengler_unitary",
    "params_from_unitary",
    "hyperspherical_probabilities",
    "angles_from_probabilities",
    "density_from_params",
    "pvm_from_params",
    "QuantumStrategy",
    "StrategyParams",
    "parameterize_strategy",
    "alignment_permutation",
    "triangle_distribution",
    "fritz_strategy",
]

# Qubit tensor orders.  Sources ship one qubit to each neighbor; parties
# measure their two qubits together.  The alignment permutation converts
# between the two orders.
_STATE_QUBITS = ("A.y", "B.y", "B.z", "C.z", "C.x", "A.x")
_MEAS_QUBITS = ("A.y", "A.x", "B.y", "B.z", "C.z", "C.x")

_TRACE_TOL = 1e-12
_PVM_TOL = 1e-10


# -- unitary parameterization -----------------------------------------------------


@dataclass(frozen=True)
class UnitaryParams:
    """Rotation/phase angles for one d x d unitary.

    values[m, n] with m < n is the plane-rotation angle for the pair
    (m, n), declared range [0, pi/2]; values[n, m] is the relative phase
    for the same pair, range [0, 2pi]; values[l, l] is the global phase of
    basis vector l, range [0, 2pi], zero by default.  Range enforcement can
    be switched off (optimizers wrap angles modulo 2pi, which leaves the
    resulting matrix unitary but may exit the declared boxes).
    """

    dimension: int
    values: np.ndarray
    enforce_ranges: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.dimension, self.dimension):
            raise ValueError(
                f"parameter grid must be {self.dimension}x{self.dimension}, got {vals.shape}"
            )
        if not np.isfinite(vals).all():
            raise ValueError("parameters must be finite")
        if self.enforce_ranges:
            d = self.dimension
            for m in range(d):
                for n in range(d):
                    v = vals[m, n]
                    if m < n and not 0.0 <= v <= math.pi / 2 + 1e-12:
                        raise ValueError(
                            f"rotation angle ({m},{n}) = {v} outside [0, pi/2]"
                        )
                    if m >= n and not 0.0 <= v <= 2 * math.pi + 1e-12:
                        raise ValueError(
                            f"phase ({m},{n}) = {v} outside [0, 2pi]"
                        )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def zero(dimension: int) -> "UnitaryParams":
        return UnitaryParams(dimension, np.zeros((dimension, dimension)))

    @staticmethod
    def random(dimension: int, rng: np.random.Generator) -> "UnitaryParams":
        d = dimension
        vals = rng.uniform(0.0, 2 * math.pi, size=(d, d))
        for m in range(d):
            vals[m, m] = 0.0
            for n in range(m + 1, d):
                vals[m, n] = rng.uniform(0.0, math.pi / 2)
        return UnitaryParams(d, vals)

    @staticmethod
    def pair_count(dimension: int) -> int:
        """Free parameters: one rotation and one phase per pair."""
        return dimension * (dimension - 1)

    @staticmethod
    def free_count(dimension: int) -> int:
        """Flat length: pair parameters plus the per-vector phases."""
        return dimension * dimension

    def flat(self) -> np.ndarray:
        """Off-diagonal parameters as (rotation, phase) per pair, pairs in
        row-major order (0,1), (0,2), ..., (d-2,d-1), then the d per-vector
        phases.  The phases are genuinely part of the conjugation (they move
        the projectors U'|j><j|U), so a faithful flat form must carry them;
        they simply default to zero."""
        out = []
        d = self.dimension
        for m in range(d - 1):
            for n in range(m + 1, d):
                out.append(self.values[m, n])
                out.append(self.values[n, m])
        for l in range(d):
            out.append(self.values[l, l])
        return np.array(out)

    @staticmethod
    def from_flat(
        dimension: int, flat: Sequence[float], enforce_ranges: bool = True
    ) -> "UnitaryParams":
        d = dimension
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (UnitaryParams.free_count(d),):
            raise ValueError(
                f"expected {UnitaryParams.free_count(d)} parameters, got {flat.shape}"
            )
        vals = np.zeros((d, d))
        k = 0
        for m in range(d - 1):
            for n in range(m + 1, d):
                vals[m, n] = flat[k]
                vals[n, m] = flat[k + 1]
                k += 2
        for l in range(d):
            vals[l, l] = flat[k]
            k += 1
        return UnitaryParams(d, vals, enforce_ranges=enforce_ranges)


def _rotation_factor(d: int, m: int, n: int, angle: float) -> np.ndarray:
    """Closed form of the antisymmetric-generator exponential: a plane
    rotation by `angle` in span{|m>, |n>}."""
    out = np.eye(d, dtype=complex)
    c, s = math.cos(angle), math.sin(angle)
    out[m, m] = c
    out[m, n] = s
    out[n, m] = -s
    out[n, n] = c
    return out


def _phase_factor(d: int, l: int, angle: float) -> np.ndarray:
    """Closed form of the projector exponential: a single diagonal phase."""
    out = np.eye(d, dtype=complex)
    out[l, l] = cmath.exp(1j * angle)
    return out


def spengler_unitary(p: UnitaryParams) -> np.ndarray:
    """Compose the rotation/phase factors into a d x d unitary.

    Factor order: pairs (m, n) ascending in m then n, each contributing a
    relative phase on |n> followed by the (m, n) plane rotation; the global
    per-vector phases multiply on the right.  All factors are closed-form.
    """
    d = p.dimension
    v = p.values
    u = np.eye(d, dtype=complex)
    for m in range(d - 1):
        for n in range(m + 1, d):
            u = u @ _phase_factor(d, n, v[n, m]) @ _rotation_factor(d, m, n, v[m, n])
    for l in range(d):
        u = u @ _phase_factor(d, l, v[l, l])
    return u


def params_from_unitary(u: np.ndarray) -> UnitaryParams:
    """Invert the parameterization: angles whose composition rebuilds u.

    Works column by column: in the composed product, column m is reached
    only by the pair factors (m, n) with n > m and the global phase of
    |m>, so its entries determine those angles one by one from the bottom
    up.  Peeling the recovered factors off leaves the same problem one
    dimension down.  The reconstruction is exact up to floating point;
    rotation angles land in [0, pi/2] and phases in [0, 2pi) by
    construction.
    """
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d):
        raise ValueError("square matrix required")
    if np.abs(u.conj().T @ u - np.eye(d)).max() > 1e-9:
        raise ValueError("matrix is not unitary")

    vals = np.zeros((d, d))
    work = u.copy()
    for m in range(d - 1):
        col = work[:, m]
        # rotation angles from the entry magnitudes, bottom-up; the atan2 of
        # an entry against the norm of everything above it is numerically
        # stable even when the angle sits at the ends of [0, pi/2]
        mags = np.abs(col)
        rot = np.zeros(d)
        for n in range(d - 1, m, -1):
            above = math.sqrt(float(np.sum(mags[m:n] ** 2)))
            rot[n] = math.atan2(mags[n], above)
        # global phase of |m> from the diagonal entry, then pair phases
        lam_mm = cmath.phase(col[m]) % (2 * math.pi) if abs(col[m]) > 1e-13 else 0.0
        vals[m, m] = lam_mm
        block = np.eye(d, dtype=complex)
        for n in range(m + 1, d):
            vals[m, n] = rot[n]
            if abs(col[n]) > 1e-13:
                phase = (cmath.phase(-col[n]) - lam_mm) % (2 * math.pi)
            else:
                phase = 0.0
            vals[n, m] = phase
            block = block @ _phase_factor(d, n, phase) @ _rotation_factor(d, m, n, rot[n])
        work = block.conj().T @ work
        # strip the recovered global phase so the subproblem is clean
        work[:, m] *= cmath.exp(-1j * lam_mm)
        work[m, :] *= cmath.exp(-1j * lam_mm)
        work[m, m] *= cmath.exp(1j * lam_mm)
    last = work[d - 1, d - 1]
    vals[d - 1, d - 1] = cmath.phase(last) % (2 * math.pi) if abs(last) > 1e-13 else 0.0
    return UnitaryParams(d, vals)


# -- densities and measurements ------------------------------------------------------


def hyperspherical_probabilities(angles: Sequence[float]) -> np.ndarray:
    """Squared hyperspherical map: d-1 free angles to a probability d-vector.

    p_1 = cos^2(t_1), p_j = cos^2(t_j) prod_{k<j} sin^2(t_k), and the last
    entry takes the full sine product: nonnegative, sums to one, smooth and
    2pi-periodic in every angle.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 1 or angles.size < 1:
        raise ValueError("need at least one eigenvalue angle")
    d = angles.size + 1
    p = np.empty(d)
    sin_prod = 1.0
    for j, t in enumerate(angles):
        c, s = math.cos(t), math.sin(t)
        p[j] = (c * c) * sin_prod
        sin_prod *= s * s
    p[d - 1] = sin_prod
    return p


def angles_from_probabilities(p: Sequence[float]) -> np.ndarray:
    """Inverse of the squared hyperspherical map (angles in [0, pi/2])."""
    p = np.asarray(p, dtype=np.float64)
    if abs(float(p.sum()) - 1.0) > 1e-9 or float(p.min()) < -1e-12:
        raise ValueError("probabilities must be nonnegative and sum to one")
    angles = np.zeros(p.size - 1)
    remaining = 1.0
    for j in range(p.size - 1):
        if remaining < 1e-13:
            angles[j] = 0.0
            continue
        ratio = min(1.0, max(0.0, p[j] / remaining))
        angles[j] = math.acos(math.sqrt(ratio))
        remaining -= p[j]
    return angles


def density_from_params(angles: Sequence[float], u: UnitaryParams) -> np.ndarray:
    """rho = sum_j p_j U' |j><j| U for hyperspherical p and parameterized U."""
    p = hyperspherical_probabilities(angles)
    if p.size != u.dimension:
        raise ValueError("eigenvalue count must match the unitary dimension")
    mat = spengler_unitary(u)
    return mat.conj().T @ np.diag(p.astype(complex)) @ mat


def pvm_from_params(u: UnitaryParams) -> list[np.ndarray]:
    """The rank-1 projective measurement {U' |j><j| U}."""
    mat = spengler_unitary(u)
    basis = mat.conj().T  # column j is U'|j>
    return [np.outer(basis[:, j], basis[:, j].conj()) for j in range(u.dimension)]


def _projector_vector(proj: np.ndarray) -> np.ndarray:
    """Unit vector of a rank-1 projector (global phase arbitrary)."""
    diag = np.diag(proj).real
    j = int(np.argmax(diag))
    if diag[j] < 1e-10:
        raise ValueError("projector has no usable diagonal entry")
    return proj[:, j] / math.sqrt(diag[j])


# -- strategies ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """Three edge states plus three party measurements, validated.

    states = (rho on (A.y, B.y), rho on (B.z, C.z), rho on (C.x, A.x));
    measurements = (M_A, M_B, M_C), each a 4-outcome rank-1 PVM on the
    party's two qubits in measurement order.  The alignment between the two
    tensor orders is the module-level convention (alignment_permutation).
    """

    states: tuple[np.ndarray, ...]
    measurements: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        meas = tuple(
            tuple(np.asarray(p, dtype=complex) for p in pvm) for pvm in self.measurements
        )
        if len(states) != 3:
            raise ValueError("three edge states required")
        if len(meas) != 3:
            raise ValueError("three party measurements required")
        for s in states:
            if s.shape != (4, 4):
                raise ValueError("edge states are two-qubit (4x4) matrices")
            if np.abs(s - s.conj().T).max() > 1e-10:
                raise ValueError("state is not Hermitian")
            if abs(np.trace(s).real - 1.0) > _TRACE_TOL:
                raise ValueError("state trace must be 1")
            if float(np.linalg.eigvalsh(s).min()) < -1e-12:
                raise ValueError("state has a negative eigenvalue")
        eye = np.eye(4)
        for pvm in meas:
            if len(pvm) != 4:
                raise ValueError("each measurement has four outcomes")
            total = np.zeros((4, 4), dtype=complex)
            for p in pvm:
                if p.shape != (4, 4):
                    raise ValueError("projectors are 4x4")
                if np.abs(p @ p - p).max() > _PVM_TOL:
                    raise ValueError("measurement element is not idempotent")
                if abs(np.trace(p).real - 1.0) > 1e-9:
                    raise ValueError("measurement elements must be rank one")
                total += p
            if np.abs(total - eye).max() > _PVM_TOL:
                raise ValueError("measurement does not resolve the identity")
            for i in range(4):
                for j in range(i + 1, 4):
                    if np.abs(pvm[i] @ pvm[j]).max() > _PVM_TOL:
                        raise ValueError("measurement elements are not orthogonal")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "measurements", meas)


# layout of a flat strategy parameter vector (dimension 4 everywhere):
#   [0:9)     eigenvalue angles, 3 per state, state order AB, BC, CA
#   [9:57)    state basis-unitary parameters, 16 per state (12 pair + 4 phase)
#   [57:105)  measurement unitary parameters, 16 per party, order A, B, C
_UNITARY_PER_BLOCK = UnitaryParams.free_count(4)
_STATE_EIGEN_SLICES = [slice(3 * k, 3 * k + 3) for k in range(3)]
_STATE_UNITARY_SLICES = [slice(9 + 16 * k, 25 + 16 * k) for k in range(3)]
_MEAS_UNITARY_SLICES = [slice(57 + 16 * k, 73 + 16 * k) for k in range(3)]
STRATEGY_PARAM_DIM = 105


@dataclass(frozen=True, eq=False)
class StrategyParams:
    """Flat parameter vector for a full strategy (see layout above)."""

    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float64)
        if vec.shape != (STRATEGY_PARAM_DIM,):
            raise ValueError(f"strategy parameter vector has length {STRATEGY_PARAM_DIM}")
        if not np.isfinite(vec).all():
            raise ValueError("parameters must be finite")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @staticmethod
    def random(rng: np.random.Generator) -> "StrategyParams":
        """Uniform draw over the declared boxes, per-vector phases at their
        zero default."""
        vec = np.empty(STRATEGY_PARAM_DIM)
        for sl in _STATE_EIGEN_SLICES:
            vec[sl] = rng.uniform(0.0, 2 * math.pi, size=3)
        for sl in _STATE_UNITARY_SLICES + _MEAS_UNITARY_SLICES:
            vec[sl] = UnitaryParams.random(4, rng).flat()
        return StrategyParams(vec)

    def wrapped(self) -> "StrategyParams":
        """All angles reduced modulo 2pi (the build is 2pi-periodic)."""
        return StrategyParams(np.mod(self.vector, 2 * math.pi))

    def build(self, enforce_ranges: bool = False) -> QuantumStrategy:
        """Materialize states and measurements from the flat vector."""
        states = []
        for es, us in zip(_STATE_EIGEN_SLICES, _STATE_UNITARY_SLICES):
            u = UnitaryParams.from_flat(4, self.vector[us], enforce_ranges=enforce_ranges)
            states.append(density_from_params(self.vector[es], u))
        meas = []
        for sl in _MEAS_UNITARY_SLICES:
            u = UnitaryParams.from_flat(4, self.vector[sl], enforce_ranges=enforce_ranges)
            meas.append(tuple(pvm_from_params(u)))
        return QuantumStrategy(tuple(states), tuple(meas))


def parameterize_strategy(s: QuantumStrategy) -> StrategyParams:
    """Invert a strategy into the flat layout (build() reproduces it).

    Eigen-decomposes each state (eigenvalues descending) and inverts each
    basis unitary; measurement bases invert directly.  The per-vector
    global phases found by the inversion are dropped — they cancel in
    every projector conjugation, so the rebuilt strategy produces the
    same distribution.
    """
    vec = np.zeros(STRATEGY_PARAM_DIM)
    for k, rho in enumerate(s.states):
        w, q = np.linalg.eigh(rho)
        order = np.argsort(w)[::-1]
        w = np.clip(w[order], 0.0, None)
        w = w / w.sum()
        q = q[:, order]
        vec[_STATE_EIGEN_SLICES[k]] = angles_from_probabilities(w)
        params = params_from_unitary(q.conj().T)
        vec[_STATE_UNITARY_SLICES[k]] = params.flat()
    for k, pvm in enumerate(s.measurements):
        basis = np.column_stack([_projector_vector(p) for p in pvm])
        params = params_from_unitary(basis.conj().T)
        vec[_MEAS_UNITARY_SLICES[k]] = params.flat()
    return StrategyParams(vec)


# -- the distribution map ---------------------------------------------------------------


def _state_index_map() -> np.ndarray:
    """Measurement-order basis index -> state-order basis index (6 bits)."""
    state_pos = {q: i for i, q in enumerate(_STATE_QUBITS)}
    out = np.empty(64, dtype=np.int64)
    for i in range(64):
        j = 0
        for k, q in enumerate(_MEAS_QUBITS):
            bit = (i >> (5 - k)) & 1
            j |= bit << (5 - state_pos[q])
        out[i] = j
    return out


def alignment_permutation() -> np.ndarray:
    """The 64x64 permutation matrix T aligning states with measurements."""
    jmap = _state_index_map()
    t = np.zeros((64, 64))
    for i in range(64):
        t[jmap[i], i] = 1.0
    return t


def triangle_distribution(s: QuantumStrategy) -> Distribution:
    """Born probabilities of a strategy, as a distribution over A, B, C."""
    rho = np.kron(np.kron(s.states[0], s.states[1]), s.states[2])
    jmap = _state_index_map()
    rho_meas = rho[np.ix_(jmap, jmap)]  # T' rho T without forming T
    vecs = [
        np.column_stack([_projector_vector(p) for p in pvm]) for pvm in s.measurements
    ]
    v = np.kron(np.kron(vecs[0], vecs[1]), vecs[2])
    probs = np.einsum("ik,ij,jk->k", v.conj(), rho_meas, v).real
    if float(probs.min()) < -1e-10:
        raise ValueError(f"negative probability {probs.min():.3e} from strategy")
    probs = np.clip(probs, 0.0, None)
    space = EventSpace.over({NodeId.parse(x): 4 for x in ("A", "B", "C")})
    return Distribution(space, probs)


# -- the explicit CHSH-in-a-triangle strategy --------------------------------------------


def _bloch_vector(alpha: float, outcome: int) -> np.ndarray:
    """Qubit basis vector for the direction at angle alpha in the x-z plane:
    outcome 0 is the +1 eigenvector, outcome 1 the -1 eigenvector."""
    if outcome == 0:
        return np.array([math.cos(alpha / 2), math.sin(alpha / 2)], dtype=complex)
    return np.array([-math.sin(alpha / 2), math.cos(alpha / 2)], dtype=complex)


def fritz_strategy() -> QuantumStrategy:
    """The explicit realization behind the CHSH-embedding distribution.

    One edge carries a singlet, the other two carry perfectly correlated
    classical bits.  Each of A and B reads its shared bit as the left
    outcome bit and measures its singlet half in a basis selected by that
    bit (A: the z then x axes; B: the two diagonal axes, with outcome
    labels swapped to orient the CHSH combination positively).  C simply
    announces both of its bits, left bit from the CA edge, right bit from
    the BC edge.
    """
    singlet = np.zeros(4, dtype=complex)
    singlet[1] = 1 / math.sqrt(2)  # |01>
    singlet[2] = -1 / math.sqrt(2)  # |10>
    rho_ab = np.outer(singlet, singlet.conj())

    corr = np.zeros((4, 4), dtype=complex)
    corr[0, 0] = 0.5  # |00><00|
    corr[3, 3] = 0.5  # |11><11|

    ket = [np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)]

    # A's qubits: (A.y, A.x).  Left bit l reads A.x; right bit measures A.y
    # along z (l = 0) or x (l = 1).
    m_a = []
    for l in range(2):
        alpha = 0.0 if l == 0 else math.pi / 2
        for r in range(2):
            vec = np.kron(_bloch_vector(alpha, r), ket[l])
            m_a.append(np.outer(vec, vec.conj()))

    # B's qubits: (B.y, B.z).  Left bit reads B.z; right bit measures B.y
    # along (z+x)/sqrt2 (l = 0) or (z-x)/sqrt2 (l = 1), labels swapped.
    m_b = []
    for l in range(2):
        alpha = math.pi / 4 if l == 0 else -math.pi / 4
        for r in range(2):
            vec = np.kron(_bloch_vector(alpha, 1 - r), ket[l])
            m_b.append(np.outer(vec, vec.conj()))

    # C's qubits: (C.z, C.x).  Left outcome bit announces C.x, right bit
    # announces C.z.
    m_c = []
    for l in range(2):
        for r in range(2):
            vec = np.kron(ket[r], ket[l])
            m_c.append(np.outer(vec, vec.conj()))

    return QuantumStrategy(
        (rho_ab, corr, corr), (tuple(m_a), tuple(m_b), tuple(m_c))
    )
