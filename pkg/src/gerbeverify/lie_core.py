"""SU(n), its diagonal torus, flags as projection tuples, and the Weyl map.

Conventions
-----------
* Torus phases are stored in turns: the diagonal entry ``i`` of a torus
  element is ``exp(2*pi*i*x_i)`` and ``sum(x) == 0``.
* A point of the flag manifold SU(n)/T is stored as the ordered tuple of
  rank-one projections ``P_i = g O_i g^{-1}``.
* Tangent vectors carry blocks. ``xi`` is an element of su(n). At a flag it
  generates the curve ``P_i(s) = exp(s xi) P_i exp(-s xi)``; at a group
  element ``g`` it generates ``g exp(s xi)`` (body / left-invariant
  convention, so ``g^{-1} dg`` evaluates to ``xi``). ``xdot`` is the velocity
  of the torus phases (or of the lift ``x``) in turns, and ``zdot`` the
  velocity of ``arg z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

UNITARY_TOL = 1e-12
PROJECTION_TOL = 1e-12
SUM_TOL = 1e-12


class DimensionError(ValueError):
    """Raised for invalid or mismatched matrix dimensions."""


class InvariantError(ValueError):
    """Raised when a value violates the invariants of its type."""


def _maxabs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _new(cls, **fields):
    # construct a frozen dataclass without running validation (hot paths)
    obj = object.__new__(cls)
    for key, value in fields.items():
        object.__setattr__(obj, key, value)
    return obj


@dataclass(frozen=True, eq=False)
class SpecialUnitary:
    """An element of SU(n) stored as its complex matrix."""

    entries: np.ndarray

    def __post_init__(self):
        u = np.array(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 2:
            raise DimensionError(f"expected an n x n matrix with n >= 2, got shape {u.shape}")
        n = u.shape[0]
        if _maxabs(u.conj().T @ u - np.eye(n)) > UNITARY_TOL:
            raise InvariantError("matrix is not unitary")
        if abs(np.linalg.det(u) - 1.0) > UNITARY_TOL:
            raise InvariantError("determinant is not 1")
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @classmethod
    def unchecked(cls, entries) -> "SpecialUnitary":
        return _new(cls, entries=np.asarray(entries, dtype=complex))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def g(self) -> "SpecialUnitary":
        return self

    def inverse(self) -> "SpecialUnitary":
        return SpecialUnitary.unchecked(self.entries.conj().T)

    def __matmul__(self, other: "SpecialUnitary") -> "SpecialUnitary":
        return SpecialUnitary.unchecked(self.entries @ other.entries)


@dataclass(frozen=True, eq=False)
class TorusElement:
    """Diagonal element diag(exp(2 pi i x_1), ..., exp(2 pi i x_n)) of SU(n)."""

    phases: np.ndarray

    def __post_init__(self):
        x = np.array(self.phases, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise DimensionError("torus phases must be a vector of length >= 2")
        if abs(x.sum()) > SUM_TOL * max(1.0, _maxabs(x)):
            raise InvariantError("torus phases must sum to zero")
        x.setflags(write=False)
        object.__setattr__(self, "phases", x)

    @classmethod
    def unchecked(cls, phases) -> "TorusElement":
        return _new(cls, phases=np.asarray(phases, dtype=float))

    @property
    def n(self) -> int:
        return self.phases.size

    @property
    def p(self) -> np.ndarray:
        """The diagonal entries p_i(t) = exp(2 pi i x_i)."""
        return np.exp(2j * np.pi * self.phases)

    def as_matrix(self) -> SpecialUnitary:
        return SpecialUnitary.unchecked(np.diag(self.p))


@dataclass(frozen=True, eq=False)
class ProjectionTuple:
    """Ordered tuple of n orthogonal rank-one projections summing to I.

    ``projections`` is stored as an array of shape (n, n, n).
    """

    projections: np.ndarray

    def __post_init__(self):
        ps = np.array(self.projections, dtype=complex)
        if ps.ndim != 3 or ps.shape[1] != ps.shape[2] or ps.shape[0] != ps.shape[1]:
            raise DimensionError("expected n projections of size n x n")
        n = ps.shape[0]
        if n < 2:
            raise DimensionError("n must be at least 2")
        for i in range(n):
            p = ps[i]
            if _maxabs(p - p.conj().T) > PROJECTION_TOL:
                raise InvariantError(f"P_{i} is not Hermitian")
            if _maxabs(p @ p - p) > PROJECTION_TOL:
                raise InvariantError(f"P_{i} is not idempotent")
            if abs(np.trace(p) - 1.0) > PROJECTION_TOL:
                raise InvariantError(f"P_{i} does not have rank one")
            for j in range(i + 1, n):
                if _maxabs(p @ ps[j]) > PROJECTION_TOL:
                    raise InvariantError(f"P_{i} and P_{j} are not orthogonal")
        if _maxabs(ps.sum(axis=0) - np.eye(n)) > PROJECTION_TOL:
            raise InvariantError("projections do not sum to the identity")
        ps.setflags(write=False)
        object.__setattr__(self, "projections", ps)

    @classmethod
    def unchecked(cls, projections) -> "ProjectionTuple":
        return _new(cls, projections=np.asarray(projections, dtype=complex))

    @property
    def n(self) -> int:
        return self.projections.shape[0]

    @property
    def flag(self) -> "ProjectionTuple":
        return self

    def __getitem__(self, i: int) -> np.ndarray:
        return self.projections[i]

    def __len__(self) -> int:
        return self.n

    def conjugate(self, h) -> "ProjectionTuple":
        """The flag h.F = (h P_1 h^{-1}, ..., h P_n h^{-1})."""
        h = _matrix(h)
        return ProjectionTuple.unchecked(h @ self.projections @ h.conj().T)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector with an su(n) block, a torus block and an arg(z) block.

    Any block may be absent (``None`` / 0), which means it is zero. Vectors
    form a real vector space under ``+`` and scalar ``*``.
    """

    xi: np.ndarray | None = None
    xdot: np.ndarray | None = None
    zdot: float = 0.0

    def __post_init__(self):
        if self.xi is not None:
            xi = np.array(self.xi, dtype=complex)
            if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
                raise DimensionError("generator must be a square matrix")
            scale = max(1.0, _maxabs(xi))
            if _maxabs(xi + xi.conj().T) > UNITARY_TOL * scale:
                raise InvariantError("generator is not anti-Hermitian")
            if abs(np.trace(xi)) > UNITARY_TOL * scale:
                raise InvariantError("generator is not traceless")
            xi.setflags(write=False)
            object.__setattr__(self, "xi", xi)
        if self.xdot is not None:
            xd = np.array(self.xdot, dtype=float)
            if xd.ndim != 1:
                raise DimensionError("torus velocity must be a vector")
            if abs(xd.sum()) > SUM_TOL * max(1.0, _maxabs(xd)):
                raise InvariantError("torus velocity must sum to zero")
            xd.setflags(write=False)
            object.__setattr__(self, "xdot", xd)
        object.__setattr__(self, "zdot", float(self.zdot))

    @classmethod
    def unchecked(cls, xi=None, xdot=None, zdot=0.0) -> "TangentVector":
        return _new(cls, xi=xi, xdot=xdot, zdot=float(zdot))

    def generator(self, n: int) -> np.ndarray:
        return np.zeros((n, n), dtype=complex) if self.xi is None else self.xi

    def velocity(self, n: int) -> np.ndarray:
        return np.zeros(n) if self.xdot is None else self.xdot

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector.unchecked(
            _add_blocks(self.xi, other.xi),
            _add_blocks(self.xdot, other.xdot),
            self.zdot + other.zdot,
        )

    def __mul__(self, c: float) -> "TangentVector":
        c = float(c)
        return TangentVector.unchecked(
            None if self.xi is None else c * self.xi,
            None if self.xdot is None else c * self.xdot,
            c * self.zdot,
        )

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return self * -1.0

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return self + (-other)

    def conjugate(self, h) -> "TangentVector":
        """Push a flag-direction vector forward along F -> h.F."""
        if self.xi is None:
            return self
        h = _matrix(h)
        return TangentVector.unchecked(h @ self.xi @ h.conj().T, self.xdot, self.zdot)


def _add_blocks(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _matrix(g) -> np.ndarray:
    if isinstance(g, SpecialUnitary):
        return g.entries
    if isinstance(g, TorusElement):
        return np.diag(g.p)
    return np.asarray(g, dtype=complex)


@dataclass(frozen=True, eq=False)
class CupPoint:
    """Point (x, F) of R^{n-1} x SU(n)/T, with x in the hyperplane sum(x) = 0."""

    x: np.ndarray
    flag: ProjectionTuple

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 1 or x.size != self.flag.n:
            raise DimensionError("x and flag must have the same n")
        if abs(x.sum()) > SUM_TOL * max(1.0, _maxabs(x)):
            raise InvariantError("x must sum to zero")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def unchecked(cls, x, flag) -> "CupPoint":
        return _new(cls, x=np.asarray(x, dtype=float), flag=flag)

    @property
    def n(self) -> int:
        return self.flag.n

    @property
    def t(self) -> TorusElement:
        return self.torus_image()

    def torus_image(self) -> TorusElement:
        """The torus element diag(exp(2 pi i x_i)) with phases reduced mod 1."""
        r = self.x - np.floor(self.x)
        r[-1] -= np.round(r.sum())
        return TorusElement.unchecked(r)


@dataclass(frozen=True, eq=False)
class TorusFlagPoint:
    """Point (t, F) of T x SU(n)/T."""

    t: TorusElement
    flag: ProjectionTuple

    def __post_init__(self):
        if self.t.n != self.flag.n:
            raise DimensionError("torus and flag must have the same n")

    @property
    def n(self) -> int:
        return self.flag.n


def standard_flag(n: int) -> ProjectionTuple:
    """The coordinate projections (O_1, ..., O_n)."""
    if n < 2:
        raise DimensionError("n must be at least 2")
    ps = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        ps[i, i, i] = 1.0
    return ProjectionTuple.unchecked(ps)


def haar_sample(n: int, seed) -> SpecialUnitary:
    """Haar-random element of SU(n).

    QR decomposition of a complex Gaussian matrix, with the phases of the
    diagonal of R moved into Q, then divided by an n-th root of det(Q).
    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if n < 2:
        raise DimensionError("n must be at least 2")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    q = q / np.linalg.det(q) ** (1.0 / n)
    return SpecialUnitary(q)


def random_torus(n: int, rng, spread: float = 1.0) -> TorusElement:
    """Random torus element with phases uniform in [-spread/2, spread/2), recentred."""
    x = rng.uniform(-0.5, 0.5, n) * spread
    x -= x.mean()
    return TorusElement.unchecked(x)


def random_generator(n: int, rng) -> np.ndarray:
    """Random traceless anti-Hermitian matrix with Gaussian entries."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    xi = (a - a.conj().T) / 2.0
    return xi - np.trace(xi) / n * np.eye(n)


def random_velocity(n: int, rng) -> np.ndarray:
    v = rng.standard_normal(n)
    return v - v.mean()


def random_tangent(n: int, rng, xi: bool = True, xdot: bool = True, zdot: bool = False) -> TangentVector:
    """Random tangent vector with the requested blocks populated."""
    return TangentVector.unchecked(
        random_generator(n, rng) if xi else None,
        random_velocity(n, rng) if xdot else None,
        rng.standard_normal() if zdot else 0.0,
    )


def random_flag(n: int, rng) -> ProjectionTuple:
    return flag_of(haar_sample(n, rng))


def flag_of(g) -> ProjectionTuple:
    """The flag gT stored as (g O_1 g^{-1}, ..., g O_n g^{-1})."""
    u = _matrix(g)
    # P_i = u_i u_i^dagger for the columns u_i of g
    ps = np.einsum("ai,bi->iab", u, u.conj())
    return ProjectionTuple.unchecked(ps)


def weyl_map(t: TorusElement, F: ProjectionTuple) -> SpecialUnitary:
    """The Weyl map p(t, F) = sum_i p_i(t) P_i."""
    if t.n != F.n:
        raise DimensionError(f"torus has n={t.n} but flag has n={F.n}")
    return SpecialUnitary.unchecked(np.einsum("i,iab->ab", t.p, F.projections))


def weyl_pushforward(t: TorusElement, F: ProjectionTuple, v: TangentVector) -> TangentVector:
    """Differential of the Weyl map at (t, F).

    With G = sum p_i P_i, the derivative is
    dG = 2 pi i sum xdot_i p_i P_i + [xi, G]; the result is returned as the
    body generator G^{-1} dG at G.
    """
    if t.n != F.n:
        raise DimensionError(f"torus has n={t.n} but flag has n={F.n}")
    n = t.n
    if v.xi is not None and v.xi.shape != (n, n):
        raise DimensionError("tangent generator does not match the base dimension")
    if v.xdot is not None and v.xdot.size != n:
        raise DimensionError("torus velocity does not match the base dimension")
    if v.xi is None and v.xdot is None:
        return TangentVector.unchecked(np.zeros((n, n), dtype=complex))
    p = t.p
    body = np.zeros((n, n), dtype=complex)
    if v.xdot is not None:
        # G^{-1} (2 pi i sum xdot_i p_i P_i) = 2 pi i sum xdot_i P_i
        body += 2j * np.pi * np.einsum("i,iab->ab", v.xdot, F.projections)
    if v.xi is not None:
        G = np.einsum("i,iab->ab", p, F.projections)
        Ginv = G.conj().T
        body += Ginv @ v.xi @ G - v.xi
    return TangentVector.unchecked(body)


def flow_flag(F: ProjectionTuple, xi, s: float) -> ProjectionTuple:
    """Flow F along the generator xi for time s."""
    e = expm(s * np.asarray(xi))
    return F.conjugate(e)


def flow_group(g: SpecialUnitary, xi, s: float) -> SpecialUnitary:
    """The point g exp(s xi)."""
    return SpecialUnitary.unchecked(g.entries @ expm(s * np.asarray(xi)))


def flow_torus(t: TorusElement, xdot, s: float) -> TorusElement:
    return TorusElement.unchecked(t.phases + s * np.asarray(xdot))


def block_embed(a, n: int, pad: float = 1.0) -> np.ndarray:
    """Embed a k x k matrix in the top-left block of an n x n matrix.

    The complementary diagonal block is ``pad`` times the identity (use 1 for
    group elements and projections, 0 for generators).
    """
    a = np.asarray(a, dtype=complex)
    k = a.shape[0]
    out = pad * np.eye(n, dtype=complex)
    out[:k, :k] = a
    return out
