"""Command-line verification suites with machine-readable reports.

    gerbeverify identities|curvings|invariants [options]

Each suite runs a list of checks. A check draws its samples from its own
generator seeded by (seed, check name, n), so results do not depend on the
order or concurrency in which checks run. The report is JSON with a fixed
key order; runtimes are only included with ``--timings`` so that reports
for identical configurations are byte-identical.

Exit codes: 0 if every check passes, 1 if any fails, 2 on configuration
errors.
"""

from __future__ import annotations

import argparse
import functools
import json
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .forms import (
    FormEvaluator,
    TangentFrame,
    flag_at,
    dP,
    dP_fd,
    numerical_d,
    simplicial_delta,
    trace_pdpdp,
    two_form_trPidPkdPk,
    wedge,
)
from .gerbe import (
    FiberProductPoint,
    basic_three_curvature,
    basic_two_curvature,
    beta,
    coboundary_cochain,
    curving_basic_contour,
    curving_cup,
    curving_pullback,
    d_i,
    deligne_cocycle_check,
    dlog_p,
    h_i,
    h_i_raw,
    three_curvature_cup,
    three_curvature_pullback,
    two_curvature_cup,
    verify_stable_iso_relation,
    weyl_pullback,
)
from .integrate import (
    EULER_ORIENTATION,
    bloch_chart,
    chern_number,
    constant_flag_chart,
    euler_chart_su2,
    gauss_legendre_grid,
    default_workers,
    holonomy_obstruction,
    local_chart,
    wzw_normalization,
)
from .lie_core import (
    CupPoint,
    TorusFlagPoint,
    haar_sample,
    random_flag,
    random_generator,
    random_tangent,
    random_torus,
    standard_flag,
)
from .spectral import (
    PullbackPoint,
    YPoint,
    epsilon_i,
    log_branch,
    random_zpoint,
    spectral_projection,
)
SCHEMA = 1

DEFAULT_TOLERANCES = {
    "trace_identity_distinct": 1e-9,
    "trace_identity_swap": 1e-9,
    "trace_identity_dlog": 1e-9,
    "trace_identities_fd": 1e-6,
    "epsilon_cocycle": 0.0,
    "branch_log_lemma": 1e-12,
    "h_integrality": 1e-9,
    "h_relation": 0.0,
    "d_cocycle": 0.0,
    "rank_additivity": 0.0,
    "delta_f_c": 1e-9,
    "delta_f_b": 1e-6,
    "contour_vs_residue": 1e-6,
    "weyl_pullback_f_b": 1e-6,
    "stable_iso_relation": 1e-7,
    "omega_decomposition": 1e-4,
    "omega_rearrangement": 1e-4,
    "omega_c_from_f_c": 1e-5,
    "omega_pb_weyl": 1e-5,
    "su_n_invariance": 1e-9,
    "curving_shift": 1e-9,
    "chern_tautological": 1e-3,
    "chern_complement": 1e-3,
    "chern_constant": 1e-3,
    "wzw_normalization": 1e-2,
    "wzw_reversed": 1e-2,
    "holonomy_oracle": 1e-3,
    "holonomy_nontrivial": 0.05,
    "grid_convergence": 1e-2,
    "deligne_coboundary": 1e-9,
    "deligne_perturbed": 1e-9,
}

DEFAULT_SAMPLES = {
    "trace_identity_distinct": 100,
    "trace_identity_swap": 100,
    "trace_identity_dlog": 100,
    "trace_identities_fd": 100,
    "epsilon_cocycle": 10000,
    "branch_log_lemma": 10000,
    "h_integrality": 10000,
    "h_relation": 10000,
    "d_cocycle": 10000,
    "rank_additivity": 10000,
    "delta_f_c": 1000,
    "delta_f_b": 1000,
    "contour_vs_residue": 100,
    "weyl_pullback_f_b": 100,
    "stable_iso_relation": 1000,
    "omega_decomposition": 100,
    "omega_rearrangement": 100,
    "omega_c_from_f_c": 100,
    "omega_pb_weyl": 100,
    "su_n_invariance": 100,
    "curving_shift": 1000,
    "deligne_coboundary": 64,
    "deligne_perturbed": 64,
}


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Settings shared by all suites."""

    n: tuple = (2, 3, 4)
    seed: int = 0
    samples: int | None = None
    grid: tuple = (200, 400)
    su2_grid: int = 64
    fd_step: float = 1e-5
    contour_nodes: int = 4096
    tolerances: dict = field(default_factory=dict)
    timings: bool = False

    def validate(self) -> "RunConfig":
        if not self.n or any(int(k) < 2 for k in self.n):
            raise ConfigError("every n must be >= 2")
        for name, tol in self.tolerances.items():
            if name != "all" and name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}")
            if not tol > 0:
                raise ConfigError(f"tolerance {name!r} must be positive")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("samples must be positive")
        if len(self.grid) != 2 or min(self.grid) < 2 or self.su2_grid < 2:
            raise ConfigError("grids need at least 2 nodes per axis")
        if not self.fd_step > 0:
            raise ConfigError("fd_step must be positive")
        if self.contour_nodes < 16:
            raise ConfigError("contour_nodes must be at least 16")
        return self

    def tolerance(self, name: str) -> float:
        if name in self.tolerances:
            return self.tolerances[name]
        if "all" in self.tolerances:
            return self.tolerances["all"]
        return DEFAULT_TOLERANCES[name]

    def count(self, name: str) -> int:
        return self.samples if self.samples is not None else DEFAULT_SAMPLES[name]


@dataclass
class CheckRecord:
    name: str
    anchor: str
    n: int | None
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    value: object = None
    runtime: float | None = None

    def as_dict(self, timings: bool) -> dict:
        out = {
            "name": self.name,
            "anchor": self.anchor,
            "n": self.n,
            "samples": self.samples,
            "max_residual": _num(self.max_residual),
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
        }
        if self.value is not None:
            out["value"] = _num(self.value)
        if timings:
            out["runtime"] = round(self.runtime or 0.0, 6)
        return out


def _num(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (list, tuple)):
        return [_num(a) for a in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass
class Report:
    """Outcome of one suite run."""

    suite: str
    config: RunConfig
    records: list
    conventions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        cfg = self.config
        return {
            "schema": SCHEMA,
            "suite": self.suite,
            "pass": self.passed,
            "environment": {
                "version": __version__,
                "seed": cfg.seed,
                "n": list(cfg.n),
                "grid": list(cfg.grid),
                "su2_grid": cfg.su2_grid,
                "fd_step": cfg.fd_step,
                "contour_nodes": cfg.contour_nodes,
                "samples": cfg.samples,
            },
            "conventions": self.conventions,
            "checks": [r.as_dict(cfg.timings) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"


# ---------------------------------------------------------------- check plumbing


@dataclass
class Check:
    name: str
    anchor: str
    n: int | None
    fn: Callable  # (rng, cfg, count) -> (max_residual, samples[, value])
    passes: Callable | None = None  # (residual, tol) -> bool


def _rng(cfg: RunConfig, name: str, n) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, zlib.crc32(name.encode()), 0 if n is None else n])


def _run_check(check: Check, cfg: RunConfig) -> CheckRecord:
    start = time.perf_counter()
    tol = cfg.tolerance(check.name)
    count = cfg.count(check.name) if check.name in DEFAULT_SAMPLES else 1
    out = check.fn(_rng(cfg, check.name, check.n), cfg, count)
    resid, samples = float(out[0]), int(out[1])
    value = out[2] if len(out) > 2 else None
    ok = check.passes(resid, tol) if check.passes else resid <= tol
    return CheckRecord(check.name, check.anchor, check.n, samples, resid, tol, bool(ok), value,
                       time.perf_counter() - start)


def run_checks(checks: list, cfg: RunConfig, suite: str, conventions=None) -> Report:
    workers = min(default_workers(), max(1, len(checks)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(lambda c: _run_check(c, cfg), checks))
    else:
        records = [_run_check(c, cfg) for c in checks]
    return Report(suite, cfg, records, conventions or {})


def _lift(n, rng, spread=6.0):
    x = rng.uniform(-0.5, 0.5, n) * spread
    return x - x.mean()


def _fibre_point(n, rng, x=None):
    x = _lift(n, rng) if x is None else x
    z = random_zpoint(rng, np.exp(2j * np.pi * x))
    return FiberProductPoint.from_lift(x, z, random_flag(n, rng))


# ---------------------------------------------------------------- identities


def _trace_distinct(rng, cfg, count, n, fd=False):
    worst = 0.0
    for _ in range(count):
        F = random_flag(n, rng)
        X, Y = random_tangent(n, rng, xdot=False), random_tangent(n, rng, xdot=False)
        der = (lambda i, v: dP_fd(F, i, v, cfg.fd_step)) if fd else (lambda i, v: dP(F, i, v))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if len({i, j, k}) < 3:
                        continue
                    val = np.trace(F[i] @ (der(j, X) @ der(k, Y) - der(j, Y) @ der(k, X)))
                    worst = max(worst, abs(val))
    return worst, count


def _trace_swap(rng, cfg, count, n, fd=False):
    worst = 0.0
    for _ in range(count):
        F = random_flag(n, rng)
        X, Y = random_tangent(n, rng, xdot=False), random_tangent(n, rng, xdot=False)
        der = (lambda i, v: dP_fd(F, i, v, cfg.fd_step)) if fd else (lambda i, v: dP(F, i, v))
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                a = trace_pdpdp(F[i], der(j, X), der(j, Y))
                b = trace_pdpdp(F[j], der(i, X), der(i, Y))
                worst = max(worst, abs(a + b))
    return worst, count


def _dlog_identity_forms(n):
    lhs = None
    rhs = None
    for i in range(n):
        for k in range(n):
            w = wedge(dlog_p(i), two_form_trPidPkdPk(i, k))
            if i != k:
                lhs = w if lhs is None else lhs + w
            else:
                rhs = w if rhs is None else rhs + w
    return lhs, rhs


def _trace_dlog(rng, cfg, count, n):
    lhs, rhs = _dlog_identity_forms(n)
    worst = 0.0
    for _ in range(count):
        base = TorusFlagPoint(random_torus(n, rng), random_flag(n, rng))
        fr = TangentFrame(base, tuple(random_tangent(n, rng) for _ in range(3)))
        worst = max(worst, abs(lhs(fr) - rhs(fr)))
    return worst, count


def _trace_fd(rng, cfg, count, n):
    a, _ = _trace_distinct(rng, cfg, count, n, fd=True)
    b, _ = _trace_swap(rng, cfg, count, n, fd=True)
    return max(a, b), count


def _epsilon_cocycle(rng, cfg, count, n):
    worst = 0
    for _ in range(count):
        t = random_torus(n, rng)
        z1, z2, z3 = (random_zpoint(rng, t.p) for _ in range(3))
        for i in range(n):
            r = epsilon_i(z2, z3, t, i) - epsilon_i(z1, z3, t, i) + epsilon_i(z1, z2, t, i)
            worst = max(worst, abs(r))
    return worst, count


def _branch_log(rng, cfg, count, n):
    worst = 0.0
    for _ in range(count):
        t = random_torus(n, rng)
        z, w = random_zpoint(rng, t.p), random_zpoint(rng, t.p)
        for i in range(n):
            raw = (log_branch(t.p[i], z) - log_branch(t.p[i], w)) / (2j * np.pi)
            worst = max(worst, abs(raw - epsilon_i(z, w, t, i)))
    return worst, count


def _h_integrality(rng, cfg, count, n):
    worst = 0.0
    for _ in range(count):
        P = _fibre_point(n, rng)
        for i in range(n):
            raw = h_i_raw(P, i)
            worst = max(worst, abs(raw - round(raw.real)))
    return worst, count


def _fibre_pair(n, rng):
    P = _fibre_point(n, rng)
    k = rng.integers(-3, 4, n)
    k[-1] = -k[:-1].sum()
    y = P.x + k
    w = random_zpoint(rng, P.t.p)
    Q = FiberProductPoint(y, w, P.t, P.flag)
    return P, Q


def _h_relation(rng, cfg, count, n):
    # corrected form: h_i(y, w) - h_i(x, z) = y_i - x_i + eps_i(z, w)
    worst = 0
    for _ in range(count):
        P, Q = _fibre_pair(n, rng)
        for i in range(n):
            lhs = h_i(Q, i) - h_i(P, i)
            rhs = d_i(P.x, Q.x, i) + epsilon_i(P.z, Q.z, P.t, i)
            worst = max(worst, abs(lhs - rhs))
    return worst, count


def _d_cocycle(rng, cfg, count, n):
    worst = 0
    for _ in range(count):
        x = _lift(n, rng)
        ks = [rng.integers(-3, 4, n) for _ in range(2)]
        for k in ks:
            k[-1] = -k[:-1].sum()
        y, z = x + ks[0], x + ks[0] + ks[1]
        for i in range(n):
            worst = max(worst, abs(d_i(y, z, i) - d_i(x, z, i) + d_i(x, y, i)))
    return worst, count


def _rank_additivity(rng, cfg, count, n):
    worst = 0
    for _ in range(count):
        g = haar_sample(n, rng)
        lam = np.linalg.eigvals(g.entries)
        zs = sorted((random_zpoint(rng, lam) for _ in range(3)), key=lambda z: -z.arg)
        r = [np.rint(np.trace(spectral_projection(a, b, g)).real) for a, b in
             ((zs[0], zs[1]), (zs[1], zs[2]), (zs[0], zs[2]))]
        worst = max(worst, abs(r[0] + r[1] - r[2]))
    return worst, count


def identity_checks(cfg: RunConfig) -> list:
    checks = []
    for n in cfg.n:
        if n >= 3:
            checks.append(Check("trace_identity_distinct", "tr(P_i dP_j dP_k) = 0 for distinct i, j, k", n,
                                lambda r, c, m, n=n: _trace_distinct(r, c, m, n)))
        checks.append(Check("trace_identity_swap", "tr(P_i dP_j dP_j) = -tr(P_j dP_i dP_i)", n,
                            lambda r, c, m, n=n: _trace_swap(r, c, m, n)))
        checks.append(Check("trace_identity_dlog", "sum_{i!=k} dlog p_i tr(P_i dP_k dP_k) = sum_i dlog p_i tr(P_i dP_i dP_i)", n,
                            lambda r, c, m, n=n: _trace_dlog(r, c, m, n)))
        checks.append(Check("trace_identities_fd", "trace identities with finite-difference dP", n,
                            lambda r, c, m, n=n: _trace_fd(r, c, m, n)))
        checks.append(Check("epsilon_cocycle", "delta(eps_i) = 0", n,
                            lambda r, c, m, n=n: _epsilon_cocycle(r, c, m, n)))
        checks.append(Check("branch_log_lemma", "eps_i(z,w,t) = (log_z p_i - log_w p_i)/(2 pi i)", n,
                            lambda r, c, m, n=n: _branch_log(r, c, m, n)))
        checks.append(Check("h_integrality", "x_i - log_z p_i/(2 pi i) is an integer", n,
                            lambda r, c, m, n=n: _h_integrality(r, c, m, n)))
        checks.append(Check("h_relation", "h_i(y,w) - h_i(x,z) = y_i - x_i + eps_i(z,w)", n,
                            lambda r, c, m, n=n: _h_relation(r, c, m, n)))
        checks.append(Check("d_cocycle", "delta(d_i) = 0", n,
                            lambda r, c, m, n=n: _d_cocycle(r, c, m, n)))
        checks.append(Check("rank_additivity", "rank P(z1,z2) + rank P(z2,z3) = rank P(z1,z3)", n,
                            lambda r, c, m, n=n: _rank_additivity(r, c, m, n)))
    return checks


def cmd_identities(cfg: RunConfig) -> Report:
    """Algebraic identities: trace lemmas, epsilon and h_i relations, rank additivity."""
    return run_checks(identity_checks(cfg.validate()), cfg, "identities")


# ---------------------------------------------------------------- curvings


def _delta_f_c(rng, cfg, count, n):
    df = simplicial_delta(curving_cup(), 2)
    worst = 0.0
    for _ in range(count):
        x = _lift(n, rng)
        k = rng.integers(-3, 4, n)
        k[-1] = -k[:-1].sum()
        y = x + k
        F = random_flag(n, rng)
        X, Y = random_tangent(n, rng), random_tangent(n, rng)
        fr = TangentFrame((CupPoint(x, F), CupPoint(y, F)), ((X, X), (Y, Y)))
        worst = max(worst, abs(df(fr) - two_curvature_cup(x, y)(fr)))
    return worst, count


def _yy_frame(n, rng):
    g = haar_sample(n, rng)
    lam = np.linalg.eigvals(g.entries)
    z1, z2 = random_zpoint(rng, lam), random_zpoint(rng, lam)
    X, Y = random_tangent(n, rng, xdot=False), random_tangent(n, rng, xdot=False)
    return TangentFrame((YPoint(z1, g), YPoint(z2, g)), ((X, X), (Y, Y)))


def _delta_f_b(rng, cfg, count, n):
    df = simplicial_delta(curving_basic_contour(backend="contour", nodes=cfg.contour_nodes), 2)
    Fb = basic_two_curvature()
    worst = 0.0
    for _ in range(count):
        fr = _yy_frame(n, rng)
        worst = max(worst, abs(df(fr) - Fb(fr)))
    return worst, count


def _contour_vs_residue(rng, cfg, count, n):
    a = curving_basic_contour(backend="residue")
    b = curving_basic_contour(backend="contour", nodes=cfg.contour_nodes)
    worst = 0.0
    for _ in range(count):
        g = haar_sample(n, rng)
        z = random_zpoint(rng, np.linalg.eigvals(g.entries))
        fr = TangentFrame(YPoint(z, g), (random_tangent(n, rng, xdot=False), random_tangent(n, rng, xdot=False)))
        worst = max(worst, abs(a(fr) - b(fr)))
    return worst, count


def _pullback_point(n, rng):
    t = random_torus(n, rng)
    return PullbackPoint(random_flag(n, rng), t, random_zpoint(rng, t.p))


def _weyl_pullback_f_b(rng, cfg, count, n):
    a = weyl_pullback(curving_basic_contour(backend="contour", nodes=cfg.contour_nodes))
    b = curving_pullback()
    worst = 0.0
    for _ in range(count):
        fr = TangentFrame(_pullback_point(n, rng), (random_tangent(n, rng), random_tangent(n, rng)))
        worst = max(worst, abs(a(fr) - b(fr)))
    return worst, count


def _stable_iso(rng, cfg, count, n):
    worst = 0.0
    for _ in range(count):
        P = _fibre_point(n, rng)
        fr = TangentFrame(P, (random_tangent(n, rng), random_tangent(n, rng)))
        worst = max(worst, verify_stable_iso_relation(P, fr))
    return worst, count


def _unit_frame():
    return TangentFrame(np.zeros(3), tuple(np.eye(3)))


def _omega_decomposition(rng, cfg, count, n):
    op, oc = three_curvature_pullback(), three_curvature_cup()
    worst = 0.0
    for _ in range(count):
        base = TorusFlagPoint(random_torus(n, rng), random_flag(n, rng))
        dirs = [random_tangent(n, rng) for _ in range(3)]
        chart = local_chart(base, dirs)
        db = numerical_d(beta(), chart, h=cfg.fd_step)(_unit_frame())
        fr = chart.frame(np.zeros(3))
        worst = max(worst, abs(op(fr) - oc(fr) - db))
    return worst, count


def _rearranged_omega(n):
    # (i/4 pi) [sum_{i!=k} dlog p_i ^ T_ik + sum_k dlog p_k ^ T_kk]
    lhs, rhs = _dlog_identity_forms(n)
    return (lhs + rhs) * (1j / (4 * np.pi))


def _omega_rearrangement(rng, cfg, count, n):
    op, first = three_curvature_pullback(), _rearranged_omega(n)
    worst = 0.0
    for _ in range(count):
        base = TorusFlagPoint(random_torus(n, rng), random_flag(n, rng))
        chart = local_chart(base, [random_tangent(n, rng) for _ in range(3)])
        db = numerical_d(beta(), chart, h=cfg.fd_step)(_unit_frame())
        fr = chart.frame(np.zeros(3))
        worst = max(worst, abs(op(fr) - first(fr) - db))
    return worst, count


def _omega_c_from_f_c(rng, cfg, count, n):
    oc = three_curvature_cup()
    worst = 0.0
    for _ in range(count):
        base = CupPoint(_lift(n, rng, 2.0), random_flag(n, rng))
        chart = local_chart(base, [random_tangent(n, rng) for _ in range(3)])
        dfc = numerical_d(curving_cup(), chart, h=cfg.fd_step)(_unit_frame())
        worst = max(worst, abs(dfc - oc(chart.frame(np.zeros(3)))))
    return worst, count


def _omega_pb_weyl(rng, cfg, count, n):
    a = three_curvature_pullback()
    b = weyl_pullback(basic_three_curvature())
    worst = 0.0
    for _ in range(count):
        base = TorusFlagPoint(random_torus(n, rng), random_flag(n, rng))
        fr = TangentFrame(base, tuple(random_tangent(n, rng) for _ in range(3)))
        worst = max(worst, abs(a(fr) - b(fr)))
    return worst, count


def _invariance(rng, cfg, count, n):
    forms2 = [curving_cup(), curving_pullback(), beta()]
    forms3 = [three_curvature_cup(), three_curvature_pullback()]
    worst = 0.0
    for _ in range(count):
        P = _fibre_point(n, rng)
        h = haar_sample(n, rng).entries
        Ph = FiberProductPoint(P.x, P.z, P.t, P.flag.conjugate(h))
        vs = [random_tangent(n, rng) for _ in range(3)]
        vh = [v.conjugate(h) for v in vs]
        for w in forms2:
            worst = max(worst, abs(w(TangentFrame(P, vs[:2])) - w(TangentFrame(Ph, vh[:2]))))
        for w in forms3:
            worst = max(worst, abs(w(TangentFrame(P, vs)) - w(TangentFrame(Ph, vh))))
    return worst, count


def _curving_shift(rng, cfg, count, n):
    worst = 0.0
    for _ in range(count):
        M = random_generator(n, rng)
        om = rng.standard_normal((n, n))
        om = om - om.T

        def phi(fr, M=M, om=om):
            # pullback of a 2-form on T x SU(n)/T: reads only the flag and torus blocks
            X, Y = fr.vectors
            P0 = flag_at(fr.base)[0]
            a = np.trace(M @ P0 @ (X.generator(n) @ Y.generator(n) - Y.generator(n) @ X.generator(n)))
            return a + X.velocity(n) @ om @ Y.velocity(n)

        f_shift = curving_cup() + FormEvaluator(2, phi, "phi")
        x = _lift(n, rng)
        k = rng.integers(-3, 4, n)
        k[-1] = -k[:-1].sum()
        F = random_flag(n, rng)
        X, Y = random_tangent(n, rng), random_tangent(n, rng)
        fr = TangentFrame((CupPoint(x, F), CupPoint(x + k, F)), ((X, X), (Y, Y)))
        a = simplicial_delta(f_shift, 2)(fr)
        b = simplicial_delta(curving_cup(), 2)(fr)
        worst = max(worst, abs(a - b))
    return worst, count


def curving_checks(cfg: RunConfig) -> list:
    checks = []
    for n in cfg.n:
        def add(name, anchor, fn, n=n):
            checks.append(Check(name, anchor, n, lambda r, c, m: fn(r, c, m, n)))

        add("delta_f_c", "delta(f_c) = F_c", _delta_f_c)
        add("delta_f_b", "delta(f_b) = +-tr(P dP dP) by component (contour)", _delta_f_b)
        if n <= 3:
            add("contour_vs_residue", "f_b residue backend = contour backend", _contour_vs_residue)
            add("weyl_pullback_f_b", "p*f_b = closed-form pullback curving", _weyl_pullback_f_b)
        add("stable_iso_relation", "f_pb - f_c = F_R + beta", _stable_iso)
        add("omega_decomposition", "omega_pb - omega_c = d beta (finite differences)", _omega_decomposition)
        add("omega_rearrangement", "omega_pb = (i/4pi)(sum_{i!=k} dlog p_i T_ik + sum_k dlog p_k T_kk) + d beta",
            _omega_rearrangement)
        add("omega_c_from_f_c", "d f_c = omega_c (finite differences)", _omega_c_from_f_c)
        add("omega_pb_weyl", "omega_pb = p*(-(i/12 pi) tr(g^-1 dg)^3)", _omega_pb_weyl)
        add("su_n_invariance", "f_c, omega_c, f_pb, omega_pb, beta are SU(n)-invariant", _invariance)
        add("curving_shift", "delta(f_c + pi*phi) = delta(f_c)", _curving_shift)
    return checks


def cmd_curvings(cfg: RunConfig) -> Report:
    """Curving and curvature relations of both gerbes and the stable isomorphism."""
    return run_checks(curving_checks(cfg.validate()), cfg, "curvings")


# ---------------------------------------------------------------- invariants


def _s2_grid(cfg, scale=1):
    return gauss_legendre_grid(bloch_chart().domain, (cfg.grid[0] // scale, cfg.grid[1] // scale))


@functools.lru_cache(maxsize=32)
def _chern_cached(grid: tuple, scale: int = 1) -> float:
    g = gauss_legendre_grid(bloch_chart().domain, (grid[0] // scale, grid[1] // scale))
    return chern_number(0, bloch_chart(), g)


@functools.lru_cache(maxsize=32)
def _wzw_cached(nodes: int) -> float:
    chart = euler_chart_su2()
    return wzw_normalization(chart, gauss_legendre_grid(chart.domain, (nodes,) * 3))


@functools.lru_cache(maxsize=32)
def _holonomy_cached(n: int, grid: tuple):
    return holonomy_obstruction(n, gauss_legendre_grid(bloch_chart().domain, grid))


def invariant_checks(cfg: RunConfig) -> list:
    checks = []

    def chern(target, chart_fn, i):
        def fn(rng, c, m):
            val = chern_number(i, chart_fn(), _s2_grid(c))
            return abs(val - target), c.grid[0] * c.grid[1], val
        return fn

    def tautological(rng, c, m):
        val = _chern_cached(tuple(c.grid))
        return abs(val + 1.0), c.grid[0] * c.grid[1], val

    checks.append(Check("chern_tautological", "(i/2pi) int tr(P dP dP) = -1", 2, tautological))
    checks.append(Check("chern_complement", "(i/2pi) int tr(Q dQ dQ) = +1, Q = I - P", 2, chern(1.0, bloch_chart, 1)))
    checks.append(Check("chern_constant", "constant family has Chern number 0", 2,
                        chern(0.0, lambda: constant_flag_chart(standard_flag(2)), 0)))

    def wzw(target, reverse):
        def fn(rng, c, m):
            if reverse:
                chart = euler_chart_su2().reversed()
                val = wzw_normalization(chart, gauss_legendre_grid(chart.domain, (c.su2_grid,) * 3))
            else:
                val = _wzw_cached(c.su2_grid)
            return abs(val - target), c.su2_grid**3, val
        return fn

    checks.append(Check("wzw_normalization", "-(1/24 pi^2) int tr(g^-1 dg)^3 = 1", 2, wzw(1.0, False)))
    checks.append(Check("wzw_reversed", "reversed orientation gives -1", 2, wzw(-1.0, True)))

    def oracle_value(c):
        # -(i/4 pi)(p^2 - p^-2) int tr(P dP dP), with the integral from the Chern number
        p = np.exp(1j * np.pi / 4)
        int_trpdpdp = _chern_cached(tuple(c.grid)) * 2 * np.pi / 1j
        return -1j / (4 * np.pi) * (p**2 - p**-2) * int_trpdpdp

    for n in cfg.n:
        def hol(rng, c, m, n=n):
            integral, _ = _holonomy_cached(n, tuple(c.grid))
            return abs(integral - oracle_value(c)), c.grid[0] * c.grid[1], integral

        def nontrivial(rng, c, m, n=n):
            _, ratio = _holonomy_cached(n, tuple(c.grid))
            return abs(ratio - 1.0), c.grid[0] * c.grid[1], ratio

        checks.append(Check("holonomy_oracle", "int_Sigma beta = -(i/4pi)(p^2-p^-2) int tr(P dP dP)", n, hol))
        checks.append(Check("holonomy_nontrivial", "|exp(int_Sigma beta) - 1| > 0.05", n, nontrivial,
                            passes=lambda r, tol: r > tol))

    def convergence(rng, c, m):
        full = _chern_cached(tuple(c.grid))
        half = _chern_cached(tuple(c.grid), 2)
        wf = _wzw_cached(c.su2_grid)
        wh = _wzw_cached(max(2, c.su2_grid // 2))
        return max(abs(full - half), abs(wf - wh)), 4, [full - half, wf - wh]

    checks.append(Check("grid_convergence", "grid halving changes integrals by less than the tolerance", None, convergence))

    def deligne_cob(rng, c, m):
        ok, res = deligne_cocycle_check(coboundary_cochain(4, rng, samples=m))
        return max(res.values()), m

    def deligne_pert(rng, c, m):
        cc = coboundary_cochain(4, rng, samples=m)
        key = cc.triples[0]
        cc.h[key] = cc.h[key] * np.exp(1j * 1e-3)
        ok, res = deligne_cocycle_check(cc)
        return res["h"], m

    checks.append(Check("deligne_coboundary", "Deligne coboundaries satisfy the cocycle equations", None, deligne_cob))
    checks.append(Check("deligne_perturbed", "a perturbed h violates the cocycle equation", None, deligne_pert,
                        passes=lambda r, tol: r > tol))
    return checks


def cmd_invariants(cfg: RunConfig) -> Report:
    """Chern numbers, WZW normalisation, holonomy obstruction and Deligne predicate."""
    conventions = {
        "wedge": "determinant convention, no 1/k!",
        "bloch_orientation": 1,
        "euler_orientation": EULER_ORIENTATION,
        "delta": "delta(h)(y1, y2) = h(y2) - h(y1)",
    }
    return run_checks(invariant_checks(cfg.validate()), cfg, "invariants", conventions)


COMMANDS = {"identities": cmd_identities, "curvings": cmd_curvings, "invariants": cmd_invariants}


# ---------------------------------------------------------------- argument handling


def _parse_n(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    if isinstance(text, int):
        return (text,)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"invalid n list {text!r}") from None


def _parse_grid(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"invalid grid {text!r}; expected e.g. 200x400") from None


def _parse_tol(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"invalid tolerance {item!r}; expected name=value")
        name, value = item.split("=", 1)
        name = name.strip()
        if name == "*":
            name = "all"
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"invalid tolerance value in {item!r}") from None
    return out


def _load_config_file(path: str) -> dict:
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    known = {"n", "seed", "samples", "grid", "su2_grid", "fd_step", "contour_nodes", "tolerances", "timings"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    values = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for key in ("n", "seed", "samples", "grid", "su2_grid", "fd_step", "contour_nodes"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    tols = dict(values.pop("tolerances", {}) or {})
    tols.update(_parse_tol(args.tol or []))
    try:
        if "n" in values:
            cfg = replace(cfg, n=_parse_n(values["n"]))
        if "grid" in values:
            cfg = replace(cfg, grid=_parse_grid(values["grid"]))
        for key, conv in (("seed", int), ("samples", int), ("su2_grid", int), ("fd_step", float),
                          ("contour_nodes", int)):
            if key in values:
                cfg = replace(cfg, **{key: conv(values[key])})
        cfg = replace(cfg, tolerances={k: float(v) for k, v in tols.items()},
                      timings=bool(args.timings or values.get("timings", False)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gerbeverify", description="Verify bundle gerbe identities numerically.")
    p.add_argument("suite", choices=sorted(COMMANDS))
    p.add_argument("--n", help="comma-separated dimensions, e.g. 2,3,4")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="sample count for every sampled check")
    p.add_argument("--grid", help="S^2 quadrature grid, e.g. 200x400")
    p.add_argument("--su2-grid", dest="su2_grid", type=int, help="nodes per axis for SU(2)")
    p.add_argument("--fd-step", dest="fd_step", type=float)
    p.add_argument("--contour-nodes", dest="contour_nodes", type=int)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance (name 'all' for every check)")
    p.add_argument("--report", help="write the JSON report here ('-' for stdout)")
    p.add_argument("--config", help="TOML file with default settings")
    p.add_argument("--timings", action="store_true", help="include per-check runtimes in the report")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"gerbeverify: configuration error: {exc}", file=sys.stderr)
        return 2
    report = COMMANDS[args.suite](cfg)
    for r in report.records:
        status = "PASS" if r.passed else "FAIL"
        n = "-" if r.n is None else r.n
        print(f"{status}  {r.name:<26} n={n:<2} residual={r.max_residual:.3e} tol={r.tolerance:.1e}")
    print(f"{args.suite}: {'PASS' if report.passed else 'FAIL'}")
    if args.report:
        text = report.to_json()
        if args.report == "-":
            sys.stdout.write(text)
        else:
            with open(args.report, "w") as fh:
                fh.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
