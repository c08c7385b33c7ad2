import numpy as np
import pytest
from hypothesis import given, strategies as st

from gerbeverify.lie_core import InvariantError, SpecialUnitary, TorusElement, flow_group, haar_sample, random_generator
from gerbeverify.spectral import (
    BranchCutError,
    DegenerateInputError,
    SpectrumError,
    TripleClass,
    YPoint,
    ZPoint,
    between,
    classify_triple,
    eigen_circle,
    epsilon_i,
    log_branch,
    random_zpoint,
    spectral_projection,
    spectral_projection_derivative,
)

Z = ZPoint.from_arg
PI = np.pi
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_zpoint_invariants():
    with pytest.raises(InvariantError):
        ZPoint(1.0, 0.0)
    with pytest.raises(InvariantError):
        ZPoint(2.0, 0.0)
    with pytest.raises(InvariantError):
        ZPoint(1j, 1.0)
    assert abs(Z(PI).value + 1) <= 1e-15


def test_eigen_circle_identity():
    dec = eigen_circle(np.eye(3))
    assert len(dec.pairs) == 1
    assert abs(dec.eigenvalues[0] - 1) <= 1e-12
    assert np.allclose(dec.projections[0], np.eye(3))


def test_eigen_circle_diagonal():
    dec = eigen_circle(np.diag([1j, -1j]))
    got = {complex(np.round(l, 12)): np.round(E.real, 12) for l, E in dec.pairs}
    assert np.array_equal(got[1j], np.diag([1.0, 0.0]))
    assert np.array_equal(got[-1j], np.diag([0.0, 1.0]))


def test_eigen_circle_reconstruction(rng):
    g = haar_sample(4, rng)
    dec = eigen_circle(g)
    assert np.max(np.abs(dec.reconstruct() - g.entries)) <= 1e-10
    assert dec.multiplicities.sum() == 4
    for a, Ea in enumerate(dec.projections):
        assert np.max(np.abs(Ea @ Ea - Ea)) <= 1e-10
        assert np.max(np.abs(Ea - Ea.conj().T)) <= 1e-10
        for b, Eb in enumerate(dec.projections):
            if a != b:
                assert np.max(np.abs(Ea @ Eb)) <= 1e-10


def test_eigen_circle_rejects_non_unitary():
    with pytest.raises(InvariantError):
        eigen_circle(np.diag([2.0, 0.5]))


def test_eigen_circle_torus_clusters():
    t = TorusElement([0.25, 0.25, -0.5])
    dec = eigen_circle(t)
    assert sorted(dec.multiplicities.tolist()) == [1, 2]
    for lam, E in dec.pairs:
        expect = np.diag((np.abs(t.p - lam) < 1e-8).astype(float))
        assert np.array_equal(E.real, expect)


def test_eigen_circle_clusters_degenerate_conjugate(rng):
    h = haar_sample(3, rng).entries
    g = h @ np.diag(np.exp(2j * PI * np.array([0.2, 0.2, -0.4]))) @ h.conj().T
    dec = eigen_circle(g)
    assert sorted(dec.multiplicities.tolist()) == [1, 2]
    assert np.max(np.abs(dec.reconstruct() - g)) <= 1e-10


def test_between_cases():
    assert between(Z(PI / 2), Z(PI), Z(PI / 4))
    assert not between(Z(3 * PI / 2), Z(PI), Z(PI / 4))
    with pytest.raises(DegenerateInputError):
        between(Z(PI), Z(PI), Z(PI / 4))


def test_between_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        lam, z1, z2 = (random_zpoint(rng) for _ in range(3))
        assert between(lam, z1, z2) == between(lam, z2, z1)


def test_classify_examples():
    g = -np.eye(2)
    assert classify_triple(Z(3 * PI / 2), Z(PI / 2), g).cls is TripleClass.POSITIVE
    assert classify_triple(Z(PI / 2), Z(3 * PI / 2), g).cls is TripleClass.NEGATIVE
    assert classify_triple(Z(PI / 3), Z(PI / 3), g).cls is TripleClass.NULL
    with pytest.raises(SpectrumError):
        classify_triple(Z(PI), Z(PI / 2), g)


def test_classify_swap():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        g = haar_sample(3, rng)
        lam = np.linalg.eigvals(g.entries)
        z1, z2 = random_zpoint(rng, lam), random_zpoint(rng, lam)
        assert classify_triple(z1, z2, g).cls == -classify_triple(z2, z1, g).cls


def test_spectral_projection_examples():
    g = np.diag([1j, -1j])
    assert not np.any(spectral_projection(Z(PI / 4), Z(PI / 3), g))
    P = spectral_projection(Z(PI), Z(PI / 4), g)
    assert np.array_equal(P.real, np.diag([1.0, 0.0]))
    assert np.array_equal(spectral_projection(Z(PI / 4), Z(PI), g), P)


def test_spectral_projection_rank_and_commutation(rng):
    g = haar_sample(5, rng)
    lam = np.linalg.eigvals(g.entries)
    z1, z2 = Z(0.1), Z(2 * PI - 0.1)
    P = spectral_projection(z1, z2, g)
    count = np.sum((np.angle(lam) % (2 * PI) > 0.1) & (np.angle(lam) % (2 * PI) < 2 * PI - 0.1))
    assert round(np.trace(P).real) == count
    assert np.max(np.abs(P @ g.entries - g.entries @ P)) <= 1e-10


def test_rank_additivity():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        g = haar_sample(4, rng)
        lam = np.linalg.eigvals(g.entries)
        z1, z2, z3 = sorted((random_zpoint(rng, lam) for _ in range(3)), key=lambda z: -z.arg)
        r12 = np.trace(spectral_projection(z1, z2, g)).real
        r23 = np.trace(spectral_projection(z2, z3, g)).real
        r13 = np.trace(spectral_projection(z1, z3, g)).real
        assert round(r12) + round(r23) == round(r13)


@given(seeds)
def test_spectral_projection_equivariant(seed):
    rng = np.random.default_rng(seed)
    g, h = haar_sample(3, rng).entries, haar_sample(3, rng).entries
    lam = np.linalg.eigvals(g)
    z1, z2 = random_zpoint(rng, lam, 1e-3), random_zpoint(rng, lam, 1e-3)
    lhs = spectral_projection(z1, z2, h @ g @ h.conj().T)
    rhs = h @ spectral_projection(z1, z2, g) @ h.conj().T
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_spectral_projection_derivative_matches_fd(rng):
    for n in (2, 3, 4, 5):
        g = haar_sample(n, rng)
        lam = np.linalg.eigvals(g.entries)
        z1, z2 = random_zpoint(rng, lam, 1e-2), random_zpoint(rng, lam, 1e-2)
        xi = random_generator(n, rng)
        h = 1e-5
        fd = (spectral_projection(z1, z2, flow_group(g, xi, h)) - spectral_projection(z1, z2, flow_group(g, xi, -h))) / (2 * h)
        exact = spectral_projection_derivative(z1, z2, g, xi)
        assert np.max(np.abs(fd - exact)) <= 1e-7


def test_epsilon_examples():
    t = TorusElement([0.25, -0.25])
    assert epsilon_i(Z(PI), Z(PI / 4), t, 0) == 1
    assert epsilon_i(Z(PI / 4), Z(PI), t, 0) == -1
    assert epsilon_i(Z(PI), Z(PI / 4), t, 1) == 0
    assert epsilon_i(Z(1.0), Z(1.0), t, 0) == 0
    with pytest.raises(SpectrumError):
        epsilon_i(Z(PI / 2), Z(1.0), t, 0)


def test_epsilon_cocycle():
    rng = np.random.default_rng(3)
    for n in (2, 3, 4, 5):
        for _ in range(2500):
            x = rng.uniform(-0.5, 0.5, n)
            t = TorusElement(x - x.mean())
            z1, z2, z3 = (random_zpoint(rng, t.p) for _ in range(3))
            for i in range(n):
                assert epsilon_i(z2, z3, t, i) - epsilon_i(z1, z3, t, i) + epsilon_i(z1, z2, t, i) == 0


def test_log_branch_examples():
    assert log_branch(1.0, Z(2.0)) == 0
    assert abs(log_branch(1j, Z(PI)) - 1j * PI / 2) <= 1e-15
    assert abs(log_branch(1j, Z(PI / 4)) + 3j * PI / 2) <= 1e-15


def test_log_branch_cut():
    with pytest.raises(BranchCutError):
        log_branch(2 * np.exp(1j * 0.7), Z(0.7))


@given(seeds)
def test_log_branch_window(seed):
    rng = np.random.default_rng(seed)
    z = random_zpoint(rng)
    zeta = rng.uniform(0.1, 3.0) * np.exp(1j * rng.uniform(0, 2 * PI))
    if abs(np.angle(zeta * np.conj(z.value))) < 1e-6:
        return
    w = log_branch(zeta, z)
    assert abs(np.exp(w) - zeta) <= 1e-12 * abs(zeta)
    assert z.arg - 2 * PI < w.imag < z.arg


def test_branch_log_lemma():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        n = int(rng.integers(2, 6))
        x = rng.uniform(-0.5, 0.5, n)
        t = TorusElement(x - x.mean())
        z, w = random_zpoint(rng, t.p), random_zpoint(rng, t.p)
        for i in range(n):
            raw = (log_branch(t.p[i], z) - log_branch(t.p[i], w)) / (2j * PI)
            assert abs(raw - epsilon_i(z, w, t, i)) <= 1e-12


def test_ypoint_rejects_spectrum():
    with pytest.raises(SpectrumError):
        YPoint(Z(PI / 2), SpecialUnitary(np.diag([1j, -1j])))
