"""Pointwise evaluation of matrix-valued differential forms.

A k-form is represented by a ``FormEvaluator``: a function of a
``TangentFrame`` (a base point together with k tangent vectors) returning a
complex number. Forms read what they need from the base point (``.flag``,
``.t``, ``.x``, ``.z``, ``.g``) and from the blocks of the tangent vectors, so
a form on a factor is automatically pulled back to any product point that
carries that factor.

Wedge products use the determinant convention: for 1-forms
(a ^ b)(X, Y) = a(X) b(Y) - a(Y) b(X), with no 1/k! factors.

Points of the fibre products Y^[p] are tuples of p points over the same base;
their tangent vectors are tuples of p factor vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lie_core import ProjectionTuple, TangentVector, flow_flag


class BaseMismatchError(ValueError):
    """A form or tangent vector was applied at an incompatible base point."""


@dataclass(frozen=True, eq=False)
class TangentFrame:
    """A base point and an ordered list of tangent vectors at it."""

    base: object
    vectors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(self.vectors))

    @property
    def k(self) -> int:
        return len(self.vectors)

    def with_vectors(self, vectors) -> "TangentFrame":
        return TangentFrame(self.base, tuple(vectors))


class FormEvaluator:
    """A k-form given by a function from tangent frames to complex numbers."""

    def __init__(self, arity: int, fn: Callable[[TangentFrame], complex], name: str = ""):
        if arity < 0:
            raise ValueError("arity must be non-negative")
        self.arity = int(arity)
        self._fn = fn
        self.name = name

    def __call__(self, frame: TangentFrame) -> complex:
        if frame.k != self.arity:
            raise BaseMismatchError(f"{self.name or 'form'} of arity {self.arity} got {frame.k} vectors")
        return complex(self._fn(frame))

    def at(self, base, *vectors) -> complex:
        return self(TangentFrame(base, vectors))

    def __add__(self, other: "FormEvaluator") -> "FormEvaluator":
        _same_arity(self, other)
        return FormEvaluator(self.arity, lambda fr: self._fn(fr) + other._fn(fr), f"({self.name}+{other.name})")

    def __sub__(self, other: "FormEvaluator") -> "FormEvaluator":
        _same_arity(self, other)
        return FormEvaluator(self.arity, lambda fr: self._fn(fr) - other._fn(fr), f"({self.name}-{other.name})")

    def __neg__(self) -> "FormEvaluator":
        return FormEvaluator(self.arity, lambda fr: -self._fn(fr), f"-{self.name}")

    def __mul__(self, c) -> "FormEvaluator":
        """Multiply by a constant or by a function of the base point."""
        if callable(c):
            return FormEvaluator(self.arity, lambda fr: c(fr.base) * self._fn(fr), self.name)
        c = complex(c)
        return FormEvaluator(self.arity, lambda fr: c * self._fn(fr), self.name)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"FormEvaluator(arity={self.arity}, name={self.name!r})"


def _same_arity(a: FormEvaluator, b: FormEvaluator):
    if a.arity != b.arity:
        raise BaseMismatchError(f"cannot combine forms of arity {a.arity} and {b.arity}")


def zero_form(arity: int) -> FormEvaluator:
    return FormEvaluator(arity, lambda fr: 0.0, "0")


def flag_at(base) -> ProjectionTuple:
    """The flag carried by a base point."""
    if isinstance(base, ProjectionTuple):
        return base
    try:
        return base.flag
    except AttributeError:
        raise BaseMismatchError(f"{type(base).__name__} carries no flag") from None


def factor_frame(frame: TangentFrame, j: int) -> TangentFrame:
    """Project a frame on a fibre product (tuple base) onto factor j."""
    if isinstance(frame.base, tuple):
        return TangentFrame(frame.base[j], tuple(v[j] for v in frame.vectors))
    return frame


def dP(F: ProjectionTuple, i: int, v: TangentVector) -> np.ndarray:
    """Differential of P_i along v: the commutator [xi, P_i]."""
    P = flag_at(F)[i]
    if v.xi is None:
        return np.zeros_like(P)
    if v.xi.shape != P.shape:
        raise BaseMismatchError("tangent generator does not match the flag dimension")
    return v.xi @ P - P @ v.xi


def dP_all(F: ProjectionTuple, v: TangentVector) -> np.ndarray:
    """All differentials [xi, P_i] stacked with shape (n, n, n)."""
    ps = flag_at(F).projections
    if v.xi is None:
        return np.zeros_like(ps)
    return v.xi @ ps - ps @ v.xi


def dP_fd(F: ProjectionTuple, i: int, v: TangentVector, h: float = 1e-5) -> np.ndarray:
    """Central finite difference of P_i along the flow generated by v."""
    F = flag_at(F)
    if v.xi is None:
        return np.zeros_like(F[i])
    plus = flow_flag(F, v.xi, h)[i]
    minus = flow_flag(F, v.xi, -h)[i]
    return (plus - minus) / (2.0 * h)


def maurer_cartan(g, v: TangentVector) -> np.ndarray:
    """(g^{-1} dg)(v): the body generator of v."""
    n = g.n
    if v.xi is None:
        return np.zeros((n, n), dtype=complex)
    if v.xi.shape != (n, n):
        raise BaseMismatchError("tangent generator does not match the group dimension")
    return np.array(v.xi)


def trace_pdpdp(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> complex:
    """tr(P (A B - B A)) for matrices A = dQ(X), B = dQ(Y)."""
    return np.trace(P @ (A @ B - B @ A))


def two_form_trPdPdP(F=None, i: int = 0) -> FormEvaluator:
    """The 2-form tr(P_i dP_i dP_i) on the flag manifold.

    The flag is read from the frame's base point; ``F`` is accepted for
    signature compatibility and is not needed.
    """
    def fn(fr):
        flag = flag_at(fr.base)
        X, Y = fr.vectors
        return trace_pdpdp(flag[i], dP(flag, i, X), dP(flag, i, Y))

    return FormEvaluator(2, fn, f"tr(P{i}dP{i}dP{i})")


def two_form_trPidPkdPk(i: int, k: int) -> FormEvaluator:
    """The 2-form tr(P_i dP_k dP_k)."""
    def fn(fr):
        flag = flag_at(fr.base)
        X, Y = fr.vectors
        return trace_pdpdp(flag[i], dP(flag, k, X), dP(flag, k, Y))

    return FormEvaluator(2, fn, f"tr(P{i}dP{k}dP{k})")


def three_form_trdPidPkdPk(i: int, k: int) -> FormEvaluator:
    """The 3-form tr(dP_i dP_k dP_k) (sum over permutations with signs)."""
    def fn(fr):
        flag = flag_at(fr.base)
        a = [dP(flag, i, v) for v in fr.vectors]
        b = [dP(flag, k, v) for v in fr.vectors]
        return _alt3(lambda p, q, r: np.trace(a[p] @ b[q] @ b[r]))

    return FormEvaluator(3, fn, f"tr(dP{i}dP{k}dP{k})")


_PERM3 = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)]


def _alt3(f) -> complex:
    return sum(s * f(*p) for p, s in _PERM3)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for a in range(len(perm)):
        while perm[a] != a:
            b = perm[a]
            perm[a], perm[b] = perm[b], perm[a]
            sign = -sign
    return sign


def wedge(a: FormEvaluator, b: FormEvaluator) -> FormEvaluator:
    """Wedge product by signed shuffles, without 1/k! normalisation."""
    k1, k2 = a.arity, b.arity
    k = k1 + k2
    shuffles = []
    for first in itertools.combinations(range(k), k1):
        rest = tuple(j for j in range(k) if j not in first)
        shuffles.append((first, rest, _perm_sign(first + rest)))

    def fn(fr):
        vs = fr.vectors
        total = 0.0
        for first, rest, sign in shuffles:
            total += sign * a._fn(TangentFrame(fr.base, tuple(vs[j] for j in first))) * b._fn(
                TangentFrame(fr.base, tuple(vs[j] for j in rest))
            )
        return total

    return FormEvaluator(k, fn, f"({a.name}^{b.name})")


def trace_cube_mc(g=None) -> FormEvaluator:
    """The 3-form tr((g^{-1}dg)^3): sum over S_3 of sgn tr(xi_s1 xi_s2 xi_s3)."""
    def fn(fr):
        if any(v.xi is None for v in fr.vectors):
            return 0.0
        a, b, c = (v.xi for v in fr.vectors)
        # tr(abc) + tr(bca) + tr(cab) = 3 tr(abc), likewise for the odd ones
        return 3.0 * (np.trace(a @ b @ c) - np.trace(b @ a @ c))

    return FormEvaluator(3, fn, "tr(mc^3)")


def numerical_d(w: FormEvaluator, chart, h: float = 1e-5, richardson: bool = False) -> FormEvaluator:
    """Exterior derivative of the pullback of w to a chart, by central differences.

    The result is a (k+1)-form on the chart's parameter space: frames carry
    the parameter vector ``u`` as base and vectors in R^m. Components on
    coordinate fields are
    dw(e_J) = sum_a (-1)^a d/du_{j_a} w(e_{J minus j_a}),
    and a general frame is evaluated through minors of its vector matrix.
    With ``richardson`` the derivative is extrapolated from steps h and h/2.
    """
    m = chart.dim
    k = w.arity
    if k + 1 > m:
        raise ValueError("form degree exceeds the chart dimension")
    idx_sets = list(itertools.combinations(range(m), k + 1))

    def comp(u, J):
        tangents = chart.tangents(u)
        return w(TangentFrame(chart.point(u), tuple(tangents[j] for j in J)))

    def partial(u, j, J, step):
        e = np.zeros(m)
        e[j] = step
        return (comp(u + e, J) - comp(u - e, J)) / (2.0 * step)

    def deriv(u, j, J):
        if not richardson:
            return partial(u, j, J, h)
        return (4.0 * partial(u, j, J, h / 2.0) - partial(u, j, J, h)) / 3.0

    def fn(fr):
        u = np.asarray(fr.base, dtype=float)
        V = np.array([np.asarray(v, dtype=float) for v in fr.vectors]).T  # m x (k+1)
        total = 0.0
        for J in idx_sets:
            minor = np.linalg.det(V[list(J), :]) if k + 1 > 0 else 1.0
            if minor == 0.0:
                continue
            c = 0.0
            for a, j in enumerate(J):
                rest = J[:a] + J[a + 1 :]
                c += (-1) ** a * deriv(u, j, rest)
            total += c * minor
        return total

    return FormEvaluator(k + 1, fn, f"d{w.name}")


def pullback_to_chart(w: FormEvaluator, chart) -> FormEvaluator:
    """Pull w back to the chart's parameter space (same frame format as numerical_d)."""
    def fn(fr):
        u = np.asarray(fr.base, dtype=float)
        tangents = chart.tangents(u)
        vecs = []
        for v in fr.vectors:
            v = np.asarray(v, dtype=float)
            acc = None
            for c, t in zip(v, tangents):
                if c != 0.0:
                    acc = t * c if acc is None else acc + t * c
            vecs.append(acc if acc is not None else TangentVector.unchecked())
        return w(TangentFrame(chart.point(u), tuple(vecs)))

    return FormEvaluator(w.arity, fn, f"pullback({w.name})")


def simplicial_delta(w: FormEvaluator, p: int) -> FormEvaluator:
    """delta = sum_{i=1}^{p} (-1)^{i+1} pi_i^*, mapping forms on Y^[p-1] to Y^[p].

    ``pi_i`` omits the i-th factor, so for a function h on Y,
    delta(h)(y1, y2) = h(y2) - h(y1). Frames on Y^[p] have a tuple of p
    points as base and tuples of p factor vectors.
    """
    if p < 2:
        raise ValueError("simplicial_delta needs p >= 2")

    def omit(seq, j):
        out = tuple(seq[:j]) + tuple(seq[j + 1 :])
        return out[0] if len(out) == 1 else out

    def fn(fr):
        base = fr.base
        if not isinstance(base, tuple) or len(base) != p:
            raise BaseMismatchError(f"expected a point of a {p}-fold fibre product")
        total = 0.0
        for j in range(p):
            sub = TangentFrame(omit(base, j), tuple(omit(v, j) for v in fr.vectors))
            total += (-1) ** j * w._fn(sub)
        return total

    return FormEvaluator(w.arity, fn, f"delta({w.name})")
