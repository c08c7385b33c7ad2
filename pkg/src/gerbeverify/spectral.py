"""Circle-ordered spectral data of unitary matrices.

The space Y consists of pairs (z, g) with z in U(1) minus {1} and z not an
eigenvalue of g. Points of U(1) minus {1} are ordered by their argument in
(0, 2 pi). Projections onto sums of eigenspaces lying on an arc between two
such points give the spectral line bundle data; ``epsilon_i`` and ``log_branch``
are the scalar counterparts over the torus.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .lie_core import (
    InvariantError,
    ProjectionTuple,
    SpecialUnitary,
    TorusElement,
    _matrix,
    _new,
)

TOL_SPEC = 1e-8
TOL_ONE = 1e-10
TOL_RAY = 1e-10
CLUSTER_TOL = 1e-8

TWO_PI = 2.0 * np.pi


class SpectrumError(ValueError):
    """A point of U(1) coincides (within tolerance) with an eigenvalue."""


class BranchCutError(ValueError):
    """The argument of log_z lies on the closed ray through z."""


class DegenerateInputError(ValueError):
    """Arguments tie, so the circle ordering is undefined."""


def circle_arg(w) -> np.ndarray | float:
    """Argument of w in [0, 2 pi)."""
    return np.mod(np.angle(w), TWO_PI)


@dataclass(frozen=True, eq=False)
class ZPoint:
    """A point z of U(1) minus {1}, with its argument in (0, 2 pi)."""

    value: complex
    arg: float

    def __post_init__(self):
        v = complex(self.value)
        a = float(self.arg)
        if abs(abs(v) - 1.0) > 1e-12:
            raise InvariantError("z must have unit modulus")
        if abs(v - 1.0) <= TOL_ONE or not (0.0 < a < TWO_PI):
            raise InvariantError("z must differ from 1")
        if abs(np.exp(1j * a) - v) > 1e-12:
            raise InvariantError("arg does not match z")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "arg", a)

    @classmethod
    def from_arg(cls, arg: float) -> "ZPoint":
        return cls(np.exp(1j * arg), arg)

    @classmethod
    def from_value(cls, value: complex) -> "ZPoint":
        value = complex(value) / abs(value)
        return cls(value, float(circle_arg(value)))


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Distinct eigenvalues (after clustering) with their spectral projections."""

    eigenvalues: np.ndarray
    projections: np.ndarray

    @property
    def pairs(self):
        return list(zip(self.eigenvalues, self.projections))

    @property
    def multiplicities(self) -> np.ndarray:
        return np.rint(np.einsum("kii->k", self.projections).real).astype(int)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,kab->ab", self.eigenvalues, self.projections)


def _cluster(lams: np.ndarray, tol: float):
    """Group unit complex numbers whose circular distance is below tol."""
    order = np.argsort(circle_arg(lams))
    groups: list[list[int]] = []
    for idx in order:
        if groups and abs(lams[idx] - lams[groups[-1][-1]]) <= tol:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    if len(groups) > 1 and abs(lams[groups[0][0]] - lams[groups[-1][-1]]) <= tol:
        groups[0] = groups.pop() + groups[0]
    return groups


def eigen_circle(g, cluster_tol: float = CLUSTER_TOL) -> EigenDecomposition:
    """Spectral decomposition g = sum lambda E of a unitary matrix.

    Eigenvalues are snapped to the unit circle and those within
    ``cluster_tol`` of each other are merged, summing their projections. A
    ``TorusElement`` is decomposed exactly from its phases.
    """
    if isinstance(g, TorusElement):
        lams = g.p
        vecs = np.eye(g.n, dtype=complex)
    else:
        u = _matrix(g)
        n = u.shape[0]
        if np.max(np.abs(u.conj().T @ u - np.eye(n))) > 1e-10:
            raise InvariantError("eigen_circle needs a unitary matrix")
        # complex Schur form of a normal matrix is diagonal with orthonormal vectors
        tri, vecs = schur(u, output="complex")
        lams = np.diag(tri).copy()
    lams = lams / np.abs(lams)
    groups = _cluster(lams, cluster_tol)
    values = []
    projs = []
    for grp in groups:
        lam = lams[grp].mean()
        values.append(lam / abs(lam))
        v = vecs[:, grp]
        projs.append(v @ v.conj().T)
    return _new(EigenDecomposition, eigenvalues=np.array(values), projections=np.array(projs))


def _arg_of(w) -> float:
    if isinstance(w, ZPoint):
        return w.arg
    return float(circle_arg(w))


def between(lam, z1: ZPoint, z2: ZPoint, tol: float = TOL_SPEC) -> bool:
    """True iff lam lies on the arc between z1 and z2 that avoids 1.

    ``lam`` may be a ``ZPoint`` or a unit complex number (an eigenvalue, which
    may equal 1; it is then never between).
    """
    a = _arg_of(lam)
    a1, a2 = z1.arg, z2.arg
    if abs(np.exp(1j * a) - z1.value) <= tol or abs(np.exp(1j * a) - z2.value) <= tol:
        raise DegenerateInputError("lam coincides with z1 or z2")
    return min(a1, a2) < a < max(a1, a2)


class TripleClass(enum.IntEnum):
    NEGATIVE = -1
    NULL = 0
    POSITIVE = 1


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    """Point (z1, z2, g) of Y^[2] with its component label."""

    z1: ZPoint
    z2: ZPoint
    g: SpecialUnitary
    cls: TripleClass


def _check_off_spectrum(z: ZPoint, lams: np.ndarray, tol: float):
    if lams.size and np.min(np.abs(lams - z.value)) <= tol:
        raise SpectrumError(f"z = exp({z.arg}i) lies on the spectrum")


def _between_mask(lams: np.ndarray, z1: ZPoint, z2: ZPoint) -> np.ndarray:
    a = circle_arg(lams)
    lo, hi = min(z1.arg, z2.arg), max(z1.arg, z2.arg)
    return (a > lo) & (a < hi)


def classify_triple(z1: ZPoint, z2: ZPoint, g, tol: float = TOL_SPEC) -> SpectralTriple:
    """Label (z1, z2, g) positive, null or negative."""
    dec = eigen_circle(g)
    _check_off_spectrum(z1, dec.eigenvalues, tol)
    _check_off_spectrum(z2, dec.eigenvalues, tol)
    cls = TripleClass.NULL
    if np.any(_between_mask(dec.eigenvalues, z1, z2)):
        cls = TripleClass.POSITIVE if z1.arg > z2.arg else TripleClass.NEGATIVE
    gg = g if isinstance(g, SpecialUnitary) else SpecialUnitary.unchecked(_matrix(g))
    return SpectralTriple(z1, z2, gg, cls)


def spectral_projection(z1: ZPoint, z2: ZPoint, g, tol: float = TOL_SPEC) -> np.ndarray:
    """Projection onto the sum of eigenspaces of g strictly between z1 and z2.

    The arc is unordered, so negative triples give the projection of the
    swapped (positive) pair; null triples give the zero matrix.
    """
    dec = eigen_circle(g)
    _check_off_spectrum(z1, dec.eigenvalues, tol)
    _check_off_spectrum(z2, dec.eigenvalues, tol)
    mask = _between_mask(dec.eigenvalues, z1, z2)
    n = dec.projections.shape[1]
    if not np.any(mask):
        return np.zeros((n, n), dtype=complex)
    return dec.projections[mask].sum(axis=0)


def spectral_projection_derivative(z1: ZPoint, z2: ZPoint, g, xi, tol: float = TOL_SPEC) -> np.ndarray:
    """Derivative of spectral_projection(z1, z2, g exp(s xi)) at s = 0.

    From the resolvent, with A = g xi and S the eigenvalues between:
    dP = sum_{a in S, b not in S} (E_a A E_b + E_b A E_a) / (lambda_a - lambda_b).
    """
    dec = eigen_circle(g)
    _check_off_spectrum(z1, dec.eigenvalues, tol)
    _check_off_spectrum(z2, dec.eigenvalues, tol)
    mask = _between_mask(dec.eigenvalues, z1, z2)
    a_mat = _matrix(g) @ np.asarray(xi)
    n = a_mat.shape[0]
    out = np.zeros((n, n), dtype=complex)
    lams, es = dec.eigenvalues, dec.projections
    for a in np.flatnonzero(mask):
        for b in np.flatnonzero(~mask):
            out += (es[a] @ a_mat @ es[b] + es[b] @ a_mat @ es[a]) / (lams[a] - lams[b])
    return out


def epsilon_i(z1: ZPoint, z2: ZPoint, t: TorusElement, i: int, tol: float = TOL_SPEC) -> int:
    """+1 if z1 > p_i(t) > z2, -1 if z2 > p_i(t) > z1, else 0 (0-based i)."""
    p = t.p[i]
    if abs(p - z1.value) <= tol or abs(p - z2.value) <= tol:
        raise SpectrumError("p_i(t) coincides with z1 or z2")
    a = float(circle_arg(p))
    if z1.arg > a > z2.arg:
        return 1
    if z2.arg > a > z1.arg:
        return -1
    return 0


def ray_distance(zeta, z: complex):
    """Distance from zeta to the closed ray {r z : r >= 0}."""
    zeta = np.asarray(zeta, dtype=complex)
    w = zeta * np.conj(z)
    return np.where(w.real > 0, np.abs(w.imag), np.abs(w))


def log_branch(zeta, z: ZPoint, tol: float = TOL_RAY):
    """Branch log_z of the logarithm, cut along the ray through z.

    The imaginary part lies in (arg z - 2 pi, arg z), which makes
    log_z(1) = 0. Accepts a scalar or an array of points.
    """
    zeta_arr = np.asarray(zeta, dtype=complex)
    if np.any(ray_distance(zeta_arr, z.value) <= tol * np.maximum(1.0, np.abs(zeta_arr))):
        raise BranchCutError("log_z evaluated on its branch cut")
    out = _log_branch_unchecked(zeta_arr, z.arg)
    return complex(out) if out.ndim == 0 else out


def _log_branch_unchecked(zeta, argz: float):
    lo = argz - TWO_PI
    a = np.mod(np.angle(zeta) - lo, TWO_PI) + lo
    return np.log(np.abs(zeta)) + 1j * a


@dataclass(frozen=True, eq=False)
class PullbackPoint:
    """Point (F, t, z) of the pullback of Y along the Weyl map."""

    flag: ProjectionTuple
    t: TorusElement
    z: ZPoint

    def __post_init__(self):
        if self.t.n != self.flag.n:
            raise InvariantError("torus and flag must have the same n")
        if np.min(np.abs(self.t.p - self.z.value)) <= TOL_SPEC:
            raise SpectrumError("z lies on the spectrum of t")

    @property
    def n(self) -> int:
        return self.flag.n


@dataclass(frozen=True, eq=False)
class YPoint:
    """Point (z, g) of Y: z is not an eigenvalue of g."""

    z: ZPoint
    g: SpecialUnitary

    def __post_init__(self):
        lams = np.linalg.eigvals(self.g.entries)
        if np.min(np.abs(lams - self.z.value)) <= TOL_SPEC:
            raise SpectrumError("z lies on the spectrum of g")

    @property
    def n(self) -> int:
        return self.g.n


def random_zpoint(rng, avoid=(), margin: float = 1e-6) -> ZPoint:
    """Uniform random z in U(1) minus {1}, at distance > margin from ``avoid`` and 1."""
    avoid = np.append(np.asarray(list(avoid), dtype=complex).ravel(), 1.0)
    while True:
        a = rng.uniform(0.0, TWO_PI)
        v = np.exp(1j * a)
        if np.min(np.abs(avoid - v)) > margin:
            return ZPoint(v, a)
