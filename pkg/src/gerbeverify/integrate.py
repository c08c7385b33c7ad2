"""Charts, Gauss-Legendre quadrature and the global integrals.

The integral of a k-form over a k-dimensional chart is
sum_j w_j * orientation * w(point(u_j); d/du_1, ..., d/du_k). Values are
collected in node order and summed with ``numpy.sum`` (pairwise), so the
result does not depend on the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .forms import FormEvaluator, TangentFrame, trace_cube_mc, two_form_trPdPdP
from .gerbe import beta
from .lie_core import (
    CupPoint,
    ProjectionTuple,
    SpecialUnitary,
    TangentVector,
    TorusElement,
    TorusFlagPoint,
    block_embed,
)

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

DEFAULT_S2_GRID = (200, 400)
DEFAULT_SU2_GRID = 64

# Sign attached to the Euler chart (alpha, beta, gamma) so that the
# normalised WZW integral is +1; frozen once from the quadrature.
EULER_ORIENTATION = -1


@dataclass(frozen=True, eq=False)
class ChartMap:
    """Parametrisation of a manifold by a rectangle in R^dim.

    ``point(u)`` returns the base point and ``tangents(u)`` the coordinate
    tangent vectors d/du_a at it. ``orientation`` (+1 or -1) multiplies every
    integral over the chart.
    """

    dim: int
    domain: tuple
    point: Callable
    tangents: Callable
    orientation: int = 1
    name: str = ""

    def frame(self, u) -> TangentFrame:
        return TangentFrame(self.point(u), tuple(self.tangents(u)))

    def reversed(self) -> "ChartMap":
        return ChartMap(self.dim, self.domain, self.point, self.tangents, -self.orientation, self.name + "(reversed)")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product Gauss-Legendre nodes and weights on a rectangle."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple
    counts: tuple

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.domain]))


def gauss_legendre_grid(domain: Sequence[tuple], counts: Sequence[int]) -> QuadratureGrid:
    """Tensor Gauss-Legendre grid with counts[a] open nodes along axis a."""
    if len(domain) != len(counts):
        raise ValueError("domain and counts must have the same length")
    axes, ws = [], []
    for (lo, hi), m in zip(domain, counts):
        x, w = np.polynomial.legendre.leggauss(int(m))
        axes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*ws, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    return QuadratureGrid(nodes, weights, tuple(tuple(d) for d in domain), tuple(int(c) for c in counts))


def default_workers() -> int:
    """Worker count, capped by the GERBEVERIFY_THREADS environment variable."""
    cap = os.environ.get("GERBEVERIFY_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


def integrate_form(w: FormEvaluator, chart: ChartMap, grid: QuadratureGrid, workers: int = 1) -> complex:
    """Integral of a chart-dimensional form by quadrature."""
    if w.arity != chart.dim:
        raise ValueError(f"cannot integrate a {w.arity}-form over a {chart.dim}-dimensional chart")
    if grid.nodes.shape[1] != chart.dim:
        raise ValueError("grid dimension does not match the chart")
    nodes = grid.nodes

    def evaluate(block):
        return np.array([w._fn(chart.frame(u)) for u in nodes[block]], dtype=complex)

    if workers <= 1:
        vals = evaluate(slice(None))
    else:
        bounds = np.linspace(0, len(nodes), workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(evaluate, [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]))
        vals = np.concatenate(parts)
    return complex(chart.orientation * np.sum(grid.weights * vals))


# ---------------------------------------------------------------- charts


def bloch_projection(theta: float, phi: float) -> np.ndarray:
    """P = (I + n.sigma)/2 with n = (sin t cos f, sin t sin f, cos t)."""
    st = np.sin(theta)
    nx, ny, nz = st * np.cos(phi), st * np.sin(phi), np.cos(theta)
    return 0.5 * np.array([[1 + nz, nx - 1j * ny], [nx + 1j * ny, 1 - nz]], dtype=complex)


def _bloch_generators(theta: float, phi: float):
    # d/dtheta is generated by Ad_{Rz(phi)}(-i sigma_y / 2), d/dphi by -i sigma_z / 2
    xt = -0.5j * (-np.sin(phi) * SIGMA[0] + np.cos(phi) * SIGMA[1])
    xp = -0.5j * SIGMA[2]
    return xt, xp


def bloch_chart() -> ChartMap:
    """Chart of SU(2)/T = S^2 by (theta, phi) in (0, pi) x (0, 2 pi); flag (P, I - P)."""
    eye = np.eye(2, dtype=complex)

    def point(u):
        P = bloch_projection(u[0], u[1])
        return ProjectionTuple.unchecked(np.array([P, eye - P]))

    def tangents(u):
        xt, xp = _bloch_generators(u[0], u[1])
        return (TangentVector.unchecked(xt), TangentVector.unchecked(xp))

    return ChartMap(2, ((0.0, np.pi), (0.0, 2 * np.pi)), point, tangents, 1, "bloch")


def constant_flag_chart(F: ProjectionTuple) -> ChartMap:
    """A constant family of flags over the (theta, phi) rectangle."""
    zero = TangentVector.unchecked()
    return ChartMap(2, ((0.0, np.pi), (0.0, 2 * np.pi)), lambda u: F, lambda u: (zero, zero), 1, "constant")


def _su2_exp(axis: int, angle: float) -> np.ndarray:
    # exp(angle * i sigma_axis / 2)
    return np.cos(angle / 2) * np.eye(2) + 1j * np.sin(angle / 2) * SIGMA[axis]


def euler_element(alpha: float, beta_: float, gamma: float) -> np.ndarray:
    """g = exp(alpha e3) exp(beta e2) exp(gamma e3) with e_k = i sigma_k / 2."""
    return _su2_exp(2, alpha) @ _su2_exp(1, beta_) @ _su2_exp(2, gamma)


def euler_chart_su2(orientation: int = EULER_ORIENTATION) -> ChartMap:
    """Euler-angle chart of SU(2): alpha in (0,2pi), beta in (0,pi), gamma in (0,4pi).

    Tangent vectors are the exact body generators g^{-1} dg/du_a.
    """
    e2 = 0.5j * SIGMA[1]
    e3 = 0.5j * SIGMA[2]

    def point(u):
        return SpecialUnitary.unchecked(euler_element(*u))

    def tangents(u):
        _, b, c = u
        B = _su2_exp(1, b)
        C = _su2_exp(2, c)
        BC = B @ C
        xa = BC.conj().T @ e3 @ BC
        xb = C.conj().T @ e2 @ C
        return (TangentVector.unchecked(xa), TangentVector.unchecked(xb), TangentVector.unchecked(e3))

    domain = ((0.0, 2 * np.pi), (0.0, np.pi), (0.0, 4 * np.pi))
    return ChartMap(3, domain, point, tangents, orientation, "euler")


def euler_jacobian(u) -> float:
    """Determinant of the body generators in the basis i sigma_k / 2."""
    gens = euler_chart_su2().tangents(u)
    # coefficient of i sigma_k / 2 in xi is -i tr(sigma_k xi)
    M = np.array([[(-1j * np.trace(SIGMA[k] @ v.xi)).real for k in range(3)] for v in gens])
    return float(np.linalg.det(M))


def sigma_surface(n: int, t0: TorusElement | None = None) -> ChartMap:
    """The surface {t0} x S^2 in T x SU(n)/T, with S^2 block-embedded in the top-left 2x2 block.

    The default t0 has phases (1/8, -1/8, 0, ..., 0), i.e. p_1 = exp(i pi/4)
    and p_2 = p_1^{-1}.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if t0 is None:
        x = np.zeros(n)
        x[0], x[1] = 0.125, -0.125
        t0 = TorusElement(x)
    if t0.n != n:
        raise ValueError("t0 has the wrong dimension")
    base_flag = standard_flag_projections(n)

    def point(u):
        P = bloch_projection(u[0], u[1])
        ps = base_flag.copy()
        ps[0, :2, :2] = P
        ps[1, :2, :2] = np.eye(2) - P
        return TorusFlagPoint(t0, ProjectionTuple.unchecked(ps))

    def tangents(u):
        xt, xp = _bloch_generators(u[0], u[1])
        return (
            TangentVector.unchecked(block_embed(xt, n, pad=0.0)),
            TangentVector.unchecked(block_embed(xp, n, pad=0.0)),
        )

    return ChartMap(2, ((0.0, np.pi), (0.0, 2 * np.pi)), point, tangents, 1, f"sigma_{n}")


def standard_flag_projections(n: int) -> np.ndarray:
    ps = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        ps[i, i, i] = 1.0
    return ps


def local_chart(base, directions: Sequence[TangentVector]) -> ChartMap:
    """Chart u -> flow of ``base`` along directions by products of exponentials.

    Flags move as E(u) F E(u)^{-1} with E(u) = exp(u_1 A_1) ... exp(u_m A_m);
    group elements as g exp(u_1 A_1) ... exp(u_m A_m); lifts x and torus
    phases affinely along the xdot blocks. Coordinate fields are exact.
    Supported bases: ProjectionTuple, SpecialUnitary, CupPoint,
    TorusFlagPoint.
    """
    dirs = list(directions)
    m = len(dirs)
    n = base.n
    gens = [d.generator(n) for d in dirs]
    vels = [d.velocity(n) for d in dirs]
    group = isinstance(base, SpecialUnitary)

    def exps(u):
        return [expm(c * A) for c, A in zip(u, gens)]

    def point(u):
        es = exps(u)
        E = np.eye(n, dtype=complex)
        for e in es:
            E = E @ e
        shift = sum((c * v for c, v in zip(u, vels)), np.zeros(n))
        if group:
            return SpecialUnitary.unchecked(base.entries @ E)
        if isinstance(base, ProjectionTuple):
            return base.conjugate(E)
        if isinstance(base, CupPoint):
            return CupPoint.unchecked(base.x + shift, base.flag.conjugate(E))
        if isinstance(base, TorusFlagPoint):
            return TorusFlagPoint(TorusElement.unchecked(base.t.phases + shift), base.flag.conjugate(E))
        raise TypeError(f"unsupported base {type(base).__name__}")

    def tangents(u):
        es = exps(u)
        out = []
        for a in range(m):
            if group:
                # body generator: Ad_{(E_{a+1} ... E_m)^{-1}} A_a
                R = np.eye(n, dtype=complex)
                for e in es[a + 1:]:
                    R = R @ e
                xi = R.conj().T @ gens[a] @ R
            else:
                # spatial generator: Ad_{E_1 ... E_{a-1}} A_a
                L = np.eye(n, dtype=complex)
                for e in es[:a]:
                    L = L @ e
                xi = L @ gens[a] @ L.conj().T
            out.append(TangentVector.unchecked(xi, vels[a] if not group else None))
        return tuple(out)

    domain = tuple((-1.0, 1.0) for _ in range(m))
    return ChartMap(m, domain, point, tangents, 1, "local")


# ---------------------------------------------------------------- integrals


def chern_number(i: int = 0, chart: ChartMap | None = None, grid: QuadratureGrid | None = None,
                 workers: int = 1) -> float:
    """(i/2 pi) times the integral of tr(P_i dP_i dP_i) over a closed flag family.

    Defaults to the Bloch chart on a 200 x 400 Gauss-Legendre grid.
    """
    chart = bloch_chart() if chart is None else chart
    grid = gauss_legendre_grid(chart.domain, DEFAULT_S2_GRID) if grid is None else grid
    val = 1j / (2 * np.pi) * integrate_form(two_form_trPdPdP(None, i), chart, grid, workers)
    return float(val.real)


def wzw_normalization(chart: ChartMap | None = None, grid: QuadratureGrid | None = None,
                      workers: int = 1) -> float:
    """-(1/24 pi^2) times the integral of tr((g^{-1}dg)^3) over SU(2)."""
    chart = euler_chart_su2() if chart is None else chart
    if grid is None:
        grid = gauss_legendre_grid(chart.domain, (DEFAULT_SU2_GRID,) * 3)
    val = -1.0 / (24 * np.pi**2) * integrate_form(trace_cube_mc(), chart, grid, workers)
    return float(val.real)


def holonomy_obstruction(n: int, grid: QuadratureGrid | None = None, workers: int = 1):
    """Integral of beta over the surface sigma_surface(n) and its exponential."""
    chart = sigma_surface(n)
    grid = gauss_legendre_grid(chart.domain, DEFAULT_S2_GRID) if grid is None else grid
    integral = integrate_form(beta(), chart, grid, workers)
    return integral, complex(np.exp(integral))
