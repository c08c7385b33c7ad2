"""Connective data of the cup product and (pulled back) basic bundle gerbes.

All forms are ``FormEvaluator`` fields; they read their base data from the
frame. Index conventions are 0-based. Throughout, ``T_ik`` denotes the
2-form tr(P_i dP_k dP_k) and p_k^{-1} dp_k is evaluated as 2 pi i xdot_k on
the torus block of a tangent vector.

Sign conventions fixed by the simplicial map delta(h)(y1, y2) = h(y2) - h(y1):

* the cup product two-curvature is F_c = -sum_i d_i T_ii with d_i = y_i - x_i,
  so that delta(f_c) = F_c;
* the basic two-curvature is +tr(P dP dP) on positive triples and
  -tr(P dP dP) (P of the swapped pair) on negative ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .forms import (
    FormEvaluator,
    TangentFrame,
    dP_all,
    factor_frame,
    flag_at,
    trace_cube_mc,
    trace_pdpdp,
    two_form_trPdPdP,
    wedge,
)
from .lie_core import (
    InvariantError,
    ProjectionTuple,
    SpecialUnitary,
    TangentVector,
    TorusElement,
    weyl_map,
    weyl_pushforward,
)
from .spectral import (
    TOL_SPEC,
    SpectrumError,
    YPoint,
    ZPoint,
    _log_branch_unchecked,
    eigen_circle,
    log_branch,
    ray_distance,
    spectral_projection,
    spectral_projection_derivative,
)

INTEGRALITY_TOL = 1e-9
TWO_PI_I = 2j * np.pi


class FibreProductError(ValueError):
    """Two lifts do not lie over the same torus element."""


class MissingOverlapError(KeyError):
    """Cochain data missing on an overlap of the nerve."""


@dataclass(frozen=True, eq=False)
class FiberProductPoint:
    """Point (x, z, t, F) of (R^{n-1} x_T Y_T) x SU(n)/T."""

    x: np.ndarray
    z: ZPoint
    t: TorusElement
    flag: ProjectionTuple

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        n = self.flag.n
        if x.size != n or self.t.n != n:
            raise InvariantError("x, t and flag must have the same n")
        if abs(x.sum()) > 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            raise InvariantError("x must sum to zero")
        if np.max(np.abs(np.exp(2j * np.pi * x) - self.t.p)) > 1e-10:
            raise InvariantError("exp(2 pi i x_i) must equal p_i(t)")
        if np.min(np.abs(self.t.p - self.z.value)) <= TOL_SPEC:
            raise SpectrumError("z lies on the spectrum of t")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_lift(cls, x, z: ZPoint, flag: ProjectionTuple) -> "FiberProductPoint":
        """Build the point over the torus element determined by the lift x."""
        x = np.asarray(x, dtype=float)
        r = x - np.floor(x)
        r[-1] -= np.round(r.sum())
        return cls(x, z, TorusElement.unchecked(r), flag)

    @property
    def n(self) -> int:
        return self.flag.n


# ---------------------------------------------------------------- scalars


def d_i(x, y, i: int) -> int:
    """The integer y_i - x_i for two lifts of the same torus element."""
    diff = float(np.asarray(y)[i]) - float(np.asarray(x)[i])
    r = round(diff)
    if abs(diff - r) > INTEGRALITY_TOL:
        raise FibreProductError(f"y_{i} - x_{i} = {diff} is not an integer")
    return int(r)


def h_i_raw(P, i: int) -> complex:
    """x_i - (1/2 pi i) log_z p_i(t) before rounding."""
    return P.x[i] - log_branch(P.t.p[i], P.z) / TWO_PI_I


def h_i(P, i: int) -> int:
    """The integer-valued function x_i - (1/2 pi i) log_z p_i(t)."""
    raw = h_i_raw(P, i)
    r = round(raw.real)
    if abs(raw - r) > INTEGRALITY_TOL:
        raise InvariantError(f"h_{i} = {raw} is not an integer")
    return int(r)


# ---------------------------------------------------------------- building blocks


def dlog_p(i: int) -> FormEvaluator:
    """The 1-form p_i^{-1} dp_i = 2 pi i dx_i."""
    def fn(fr):
        v = fr.vectors[0]
        return 0.0 if v.xdot is None else TWO_PI_I * v.xdot[i]

    return FormEvaluator(1, fn, f"dlog p{i}")


def _pair_traces(flag: ProjectionTuple, X: TangentVector, Y: TangentVector) -> np.ndarray:
    """Matrix of T_ik(X, Y) = tr(P_i (dP_k(X) dP_k(Y) - dP_k(Y) dP_k(X)))."""
    ps = flag.projections
    a = dP_all(flag, X)
    b = dP_all(flag, Y)
    comm = a @ b - b @ a  # indexed by k
    return np.einsum("iab,kba->ik", ps, comm)


def _diag_traces(flag: ProjectionTuple, X: TangentVector, Y: TangentVector) -> np.ndarray:
    """Vector of T_ii(X, Y) = tr(P_i dP_i dP_i)(X, Y)."""
    ps = flag.projections
    a = dP_all(flag, X)
    b = dP_all(flag, Y)
    comm = a @ b - b @ a
    return np.einsum("iab,iba->i", ps, comm)


def _offdiag(c: np.ndarray) -> np.ndarray:
    c = np.array(c, dtype=complex)
    np.fill_diagonal(c, 0.0)
    return c


# ---------------------------------------------------------------- cup product gerbe


def curving_cup(P=None) -> FormEvaluator:
    """Curving f_c = -sum_i x_i tr(P_i dP_i dP_i) on R^{n-1} x SU(n)/T."""
    def fn(fr):
        X, Y = fr.vectors
        base = fr.base
        return -np.dot(base.x, _diag_traces(flag_at(base), X, Y))

    return FormEvaluator(2, fn, "f_c")


def two_curvature_cup(x, y, flag=None) -> FormEvaluator:
    """Two-curvature F_c = -sum_i d_i(x, y) tr(P_i dP_i dP_i) on the fibre product.

    The flag is taken from the frame (first factor when the base is a pair);
    ``flag`` is used only when the frame's base carries none.
    """
    n = len(np.asarray(x))
    d = np.array([d_i(x, y, i) for i in range(n)], dtype=float)

    def fn(fr):
        fr0 = factor_frame(fr, 0)
        has_flag = isinstance(fr0.base, ProjectionTuple) or hasattr(fr0.base, "flag")
        F = flag_at(fr0.base) if has_flag else flag
        X, Y = fr0.vectors
        return -np.dot(d, _diag_traces(F, X, Y))

    return FormEvaluator(2, fn, "F_c")


def three_curvature_cup(t=None, flag=None) -> FormEvaluator:
    """Three-curvature omega_c = -(1/2 pi i) sum_i p_i^{-1}dp_i ^ tr(P_i dP_i dP_i)."""
    def fn(fr):
        X, Y, Z = fr.vectors
        flag_ = flag_at(fr.base)
        n = flag_.n
        # (a ^ b)(X,Y,Z) = a(X) b(Y,Z) - a(Y) b(X,Z) + a(Z) b(X,Y); a_i = 2 pi i xdot_i
        total = (
            np.dot(X.velocity(n), _diag_traces(flag_, Y, Z))
            - np.dot(Y.velocity(n), _diag_traces(flag_, X, Z))
            + np.dot(Z.velocity(n), _diag_traces(flag_, X, Y))
        )
        return -total  # -(1/2 pi i) * 2 pi i

    return FormEvaluator(3, fn, "omega_c")


def three_curvature_cup_by_wedge(n: int) -> FormEvaluator:
    """omega_c assembled literally with ``wedge`` (slow; used as a cross-check)."""
    total = None
    for i in range(n):
        term = wedge(dlog_p(i), two_form_trPdPdP(None, i))
        total = term if total is None else total + term
    return total * (-1.0 / TWO_PI_I)


# ---------------------------------------------------------------- pullback of the basic gerbe


def _log_p(P) -> np.ndarray:
    return np.array([log_branch(pk, P.z) for pk in P.t.p])


def curving_pullback(P=None) -> FormEvaluator:
    """Curving of the pulled-back basic gerbe on p^{-1}(Y).

    f = (i/4 pi) sum_{i != k} (log_z p_i - log_z p_k + (p_k - p_i) p_k^{-1}) T_ik.
    """
    def fn(fr):
        base = fr.base
        X, Y = fr.vectors
        p = base.t.p
        lg = _log_p(base)
        coef = lg[:, None] - lg[None, :] + (p[None, :] - p[:, None]) / p[None, :]
        return 1j / (4 * np.pi) * np.sum(_offdiag(coef) * _pair_traces(flag_at(base), X, Y))

    return FormEvaluator(2, fn, "f_pb")


def beta(t=None, flag=None) -> FormEvaluator:
    """beta = -(i/4 pi) sum_{i != k} p_i p_k^{-1} tr(P_i dP_k dP_k) on T x SU(n)/T."""
    def fn(fr):
        base = fr.base
        X, Y = fr.vectors
        p = base.t.p
        coef = p[:, None] / p[None, :]
        return -1j / (4 * np.pi) * np.sum(_offdiag(coef) * _pair_traces(flag_at(base), X, Y))

    return FormEvaluator(2, fn, "beta")


def three_curvature_pullback(t=None, flag=None) -> FormEvaluator:
    """Three-curvature of the pulled-back basic gerbe on T x SU(n)/T.

    (i/4 pi) sum_{i != k} [(p_i^{-1}dp_i - p_k^{-1}dp_k - p_k^{-1}dp_i
    + p_k^{-1}dp_k p_k^{-1} p_i) ^ T_ik - p_i p_k^{-1} tr(dP_i dP_k dP_k)].
    """
    def fn(fr):
        base = fr.base
        vs = fr.vectors
        flag_ = flag_at(base)
        n = flag_.n
        p = base.t.p
        r = p[:, None] / p[None, :]  # p_i p_k^{-1}
        vel = [v.velocity(n) for v in vs]

        def one(a):
            # coefficient matrix of the 1-form part, evaluated on vs[a]
            w = TWO_PI_I * vel[a]
            return w[:, None] - w[None, :] - r * w[:, None] + r * w[None, :]

        def two(b, c):
            return _pair_traces(flag_, vs[b], vs[c])

        first = one(0) * two(1, 2) - one(1) * two(0, 2) + one(2) * two(0, 1)
        dps = [dP_all(flag_, v) for v in vs]
        third = np.zeros((n, n), dtype=complex)
        for perm, sign in [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)]:
            a, b, c = perm
            # tr(dP_i(X_a) dP_k(X_b) dP_k(X_c)) for all i, k
            third += sign * np.einsum("iab,kbc,kca->ik", dps[a], dps[b], dps[c])
        total = np.sum(_offdiag(first - r * third))
        return 1j / (4 * np.pi) * total

    return FormEvaluator(3, fn, "omega_pb")


def curvature_R(P=None) -> FormEvaluator:
    """Curvature of the trivialising bundle: sum_i h_i tr(P_i dP_i dP_i)."""
    def fn(fr):
        base = fr.base
        X, Y = fr.vectors
        h = np.array([h_i(base, i) for i in range(base.n)], dtype=float)
        return np.dot(h, _diag_traces(flag_at(base), X, Y))

    return FormEvaluator(2, fn, "F_R")


def verify_stable_iso_relation(P: FiberProductPoint, frame: TangentFrame) -> float:
    """|f_pb - f_c - F_R - beta| at a frame based at P."""
    if frame.base is not P:
        frame = TangentFrame(P, frame.vectors)
    val = curving_pullback()(frame) - curving_cup()(frame) - curvature_R()(frame) - beta()(frame)
    return abs(val)


# ---------------------------------------------------------------- basic gerbe on SU(n)


def _basic_coefficients(g: np.ndarray, X: np.ndarray, Y: np.ndarray, es: np.ndarray) -> np.ndarray:
    """c_ab = tr(E_a A E_b B) - tr(E_a B E_b A) with A = g xi_X, B = g xi_Y."""
    A = g @ X
    B = g @ Y
    EA = es @ A  # E_a A
    EB = es @ B
    t1 = np.einsum("aij,bji->ab", EA, EB)  # tr(E_a A E_b B)
    t2 = np.einsum("aij,bji->ab", EB, EA)  # tr(E_a B E_b A)
    return t1 - t2


def _basic_residue(z: ZPoint, g: np.ndarray, X: np.ndarray, Y: np.ndarray) -> complex:
    dec = eigen_circle(g)
    lams, es = dec.eigenvalues, dec.projections
    if np.min(np.abs(lams - z.value)) <= TOL_SPEC:
        raise SpectrumError("z lies on the spectrum of g")
    c = _basic_coefficients(g, X, Y, es)
    lg = _log_branch_unchecked(lams, z.arg)
    la, lb = lams[:, None], lams[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (lg[:, None] - lg[None, :]) / (la - lb) ** 2 + 1.0 / (lb * (lb - la))
    r = _offdiag(np.nan_to_num(r))
    return 1j / (4 * np.pi) * np.sum(c * r)


def contour_circles(lams: np.ndarray, z: ZPoint, nodes: int):
    """Circles (centre, radius, node count) around each eigenvalue cluster.

    Each radius is 0.4 times the distance to the nearest other eigenvalue
    and to the ray through z, so the circles are disjoint, avoid the branch
    cut, and each encloses exactly one cluster.
    """
    m = len(lams)
    per = max(16, int(nodes) // max(m, 1))
    circles = []
    for a in range(m):
        others = np.delete(lams, a)
        dist = float(ray_distance(lams[a], z.value))
        if others.size:
            dist = min(dist, float(np.min(np.abs(others - lams[a]))))
        if dist <= TOL_SPEC:
            raise SpectrumError("spectrum too close to the contour")
        circles.append((lams[a], 0.4 * dist, per))
    return circles


def _basic_contour(z: ZPoint, g: np.ndarray, X: np.ndarray, Y: np.ndarray, nodes: int) -> complex:
    dec = eigen_circle(g)
    n = g.shape[0]
    A = g @ X
    B = g @ Y
    total = 0.0
    for centre, radius, m in contour_circles(dec.eigenvalues, z, nodes):
        phi = 2 * np.pi * np.arange(m) / m
        e = radius * np.exp(1j * phi)
        zeta = centre + e
        R = np.linalg.inv(zeta[:, None, None] * np.eye(n) - g)
        R2 = R @ R
        # tr(R A R^2 B) - tr(R B R^2 A)
        integrand = np.einsum("kij,kji->k", R @ A, R2 @ B) - np.einsum("kij,kji->k", R @ B, R2 @ A)
        dzeta = 1j * e * (2 * np.pi / m)
        total += np.sum(_log_branch_unchecked(zeta, z.arg) * integrand * dzeta)
    return total / (8 * np.pi**2)


def curving_basic_contour(z: ZPoint | None = None, g: SpecialUnitary | None = None,
                          backend: str = "residue", nodes: int = 4096) -> FormEvaluator:
    """Curving of the basic gerbe on Y,

    f_b(z, g) = (1/8 pi^2) oint log_z(zeta) tr((zeta-g)^{-1} dg (zeta-g)^{-2} dg) dzeta,

    with dg = g xi on tangent vectors. ``backend`` selects exact residues at
    the eigenvalues ("residue") or the trapezoid rule on small circles around
    each eigenvalue cluster ("contour", ``nodes`` in total). Base points are
    read from the frame (``.z`` and ``.g``); ``z`` and ``g`` are defaults for
    frames whose base carries neither.
    """
    if backend not in ("residue", "contour"):
        raise ValueError(f"unknown backend {backend!r}")

    def fn(fr):
        base = fr.base
        zz = getattr(base, "z", z)
        gg = getattr(base, "g", g)
        if isinstance(base, SpecialUnitary):
            gg = base
        gm = gg.entries
        n = gm.shape[0]
        X, Y = (v.generator(n) for v in fr.vectors)
        if backend == "residue":
            return _basic_residue(zz, gm, X, Y)
        return _basic_contour(zz, gm, X, Y, nodes)

    return FormEvaluator(2, fn, f"f_b[{backend}]")


def basic_two_curvature() -> FormEvaluator:
    """F_b on Y^[2]: +tr(P dP dP) on positive triples, -tr(P dP dP) on negative ones.

    Frames have base (YPoint(z1, g), YPoint(z2, g)) and pair vectors; the
    first factor supplies the group direction.
    """
    def fn(fr):
        (y1, y2) = fr.base
        z1, z2, g = y1.z, y2.z, y1.g
        X, Y = (v[0].generator(g.n) for v in fr.vectors)
        Pm = spectral_projection(z1, z2, g)
        if not np.any(Pm):
            return 0.0
        sign = 1.0 if z1.arg > z2.arg else -1.0
        dX = spectral_projection_derivative(z1, z2, g, X)
        dY = spectral_projection_derivative(z1, z2, g, Y)
        return sign * trace_pdpdp(Pm, dX, dY)

    return FormEvaluator(2, fn, "F_b")


def basic_three_curvature() -> FormEvaluator:
    """The basic 3-form -(i/12 pi) tr((g^{-1}dg)^3)."""
    return trace_cube_mc() * (-1j / (12 * np.pi))


def weyl_pullback(w: FormEvaluator) -> FormEvaluator:
    """Pull a form on SU(n) or on Y back along the Weyl map (t, F) -> sum p_i P_i.

    Bases with a ``z`` attribute map to YPoint(z, G); others to G itself.
    """
    def fn(fr):
        base = fr.base
        t, F = base.t, flag_at(base)
        G = weyl_map(t, F)
        target = YPoint(base.z, G) if hasattr(base, "z") else G
        vecs = tuple(weyl_pushforward(t, F, v) for v in fr.vectors)
        return w._fn(TangentFrame(target, vecs))

    return FormEvaluator(w.arity, fn, f"p*{w.name}")


# ---------------------------------------------------------------- Deligne cocycles


@dataclass
class DeligneCochain:
    """Sampled Deligne 2-cochain (h, theta, nu) on a finite cover.

    All sampled quantities share S sample points of an m-dimensional chart.
    ``h[(a,b,c)]`` has shape (S,), ``theta[(a,b)]`` and ``dlog_h[(a,b,c)]``
    shape (S, m), ``nu[a]`` and ``dtheta[(a,b)]`` shape (S, m, m) (component
    matrices of 2-forms). Overlap keys are sorted index tuples.
    """

    nerve: list
    pairs: list
    triples: list
    h: dict = field(default_factory=dict)
    dlog_h: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    dtheta: dict = field(default_factory=dict)
    nu: dict = field(default_factory=dict)

    @property
    def quadruples(self):
        tri = set(map(tuple, self.triples))
        out = []
        for q in itertools.combinations(sorted(self.nerve), 4):
            if all(f in tri for f in itertools.combinations(q, 3)):
                out.append(q)
        return out


def _get(d: dict, key, what: str):
    try:
        return np.asarray(d[key])
    except KeyError:
        raise MissingOverlapError(f"missing {what} on overlap {key}") from None


def deligne_cocycle_check(c: DeligneCochain, tol: float = 1e-9):
    """Check the three Deligne cocycle equations on sampled data.

    Returns ``(ok, residuals)`` where residuals maps each equation to its
    maximal absolute residual:

    * ``"h"``: h_bcd h_acd^{-1} h_abd h_abc^{-1} - 1 over quadruples;
    * ``"theta"``: theta_bc - theta_ac + theta_ab + dlog h_abc over triples;
    * ``"nu"``: nu_b - nu_a - dtheta_ab over pairs.
    """
    res = {"h": 0.0, "theta": 0.0, "nu": 0.0}
    for a, b, cc, d in c.quadruples:
        prod = (
            _get(c.h, (b, cc, d), "h")
            / _get(c.h, (a, cc, d), "h")
            * _get(c.h, (a, b, d), "h")
            / _get(c.h, (a, b, cc), "h")
        )
        res["h"] = max(res["h"], float(np.max(np.abs(prod - 1.0))))
    for a, b, cc in c.triples:
        lhs = (
            _get(c.theta, (b, cc), "theta")
            - _get(c.theta, (a, cc), "theta")
            + _get(c.theta, (a, b), "theta")
            + _get(c.dlog_h, (a, b, cc), "dlog h")
        )
        res["theta"] = max(res["theta"], float(np.max(np.abs(lhs))))
    for a, b in c.pairs:
        lhs = _get(c.nu, b, "nu") - _get(c.nu, a, "nu") - _get(c.dtheta, (a, b), "dtheta")
        res["nu"] = max(res["nu"], float(np.max(np.abs(lhs))))
    ok = all(v <= tol for v in res.values())
    return ok, res


def full_nerve(k: int):
    """Nerve of a cover by k mutually overlapping sets."""
    idx = list(range(k))
    return idx, list(itertools.combinations(idx, 2)), list(itertools.combinations(idx, 3))


def coboundary_cochain(k: int, rng, samples: int = 64, dim: int = 2) -> DeligneCochain:
    """Deligne coboundary of random smooth data on k mutually overlapping sets.

    With g_ab = exp(i phi_ab) (phi quadratic) and 1-forms A_a (affine),
    h = delta g, theta_ab = -dlog g_ab + A_b - A_a, nu_a = dA_a; every
    derivative is exact, so the cocycle equations hold to rounding.
    """
    nerve, pairs, triples = full_nerve(k)
    u = rng.uniform(-1.0, 1.0, (samples, dim))
    phi, dphi = {}, {}
    for ab in pairs:
        c0 = rng.uniform(-np.pi, np.pi)
        c1 = rng.standard_normal(dim)
        q = rng.standard_normal((dim, dim))
        q = q + q.T
        phi[ab] = c0 + u @ c1 + np.einsum("si,ij,sj->s", u, q, u) / 2.0
        dphi[ab] = c1 + u @ q
    A, dA = {}, {}
    for a in nerve:
        b0 = rng.standard_normal(dim)
        M = rng.standard_normal((dim, dim))
        A[a] = b0 + u @ M.T  # A_k(u) = b0_k + sum_j M_kj u_j
        curl = M.T - M  # (dA)_jk = d_j A_k - d_k A_j = M_kj - M_jk
        dA[a] = np.broadcast_to(curl, (samples, dim, dim)).copy()
    c = DeligneCochain(nerve, pairs, triples)
    for a, b, cc in triples:
        c.h[(a, b, cc)] = np.exp(1j * (phi[(b, cc)] - phi[(a, cc)] + phi[(a, b)]))
        c.dlog_h[(a, b, cc)] = 1j * (dphi[(b, cc)] - dphi[(a, cc)] + dphi[(a, b)])
    for a, b in pairs:
        c.theta[(a, b)] = -1j * dphi[(a, b)] + A[b] - A[a]
        c.dtheta[(a, b)] = dA[b] - dA[a]
    for a in nerve:
        c.nu[a] = dA[a]
    return c
