import numpy as np
import pytest
from hypothesis import given, strategies as st

from gerbeverify.lie_core import (
    CupPoint,
    DimensionError,
    InvariantError,
    ProjectionTuple,
    SpecialUnitary,
    TangentVector,
    TorusElement,
    block_embed,
    flag_of,
    flow_flag,
    flow_group,
    flow_torus,
    haar_sample,
    random_flag,
    random_generator,
    random_tangent,
    random_torus,
    standard_flag,
    weyl_map,
    weyl_pushforward,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=5)


def test_haar_sample_det_one():
    u = haar_sample(2, 0)
    assert abs(np.linalg.det(u.entries) - 1.0) <= 1e-12


def test_haar_sample_deterministic():
    assert np.array_equal(haar_sample(2, 0).entries, haar_sample(2, 0).entries)


def test_haar_sample_rejects_small_n():
    with pytest.raises(DimensionError):
        haar_sample(1, 0)


def test_haar_moment():
    # for Haar measure on SU(2), E|U_11|^2 = 1/2
    rng = np.random.default_rng(7)
    vals = [abs(haar_sample(2, rng).entries[0, 0]) ** 2 for _ in range(100_000)]
    assert abs(np.mean(vals) - 0.5) <= 0.01


@given(seeds, dims)
def test_haar_sample_is_special_unitary(seed, n):
    u = haar_sample(n, seed).entries
    assert np.max(np.abs(u.conj().T @ u - np.eye(n))) <= 1e-12
    assert abs(np.linalg.det(u) - 1.0) <= 1e-12


def test_special_unitary_rejects_non_unitary():
    with pytest.raises(InvariantError):
        SpecialUnitary(np.array([[2.0, 0.0], [0.0, 0.5]]))
    with pytest.raises(InvariantError):
        SpecialUnitary(np.diag([1j, 1j]))


def test_torus_rejects_nonzero_sum():
    with pytest.raises(InvariantError):
        TorusElement([0.1, 0.2])


def test_projection_tuple_rejects_bad_input():
    ps = standard_flag(3).projections.copy()
    ps[0] = ps[0] * 2
    with pytest.raises(InvariantError):
        ProjectionTuple(ps)
    with pytest.raises(DimensionError):
        ProjectionTuple(np.zeros((2, 3, 3)))


def test_weyl_map_identity_coset():
    t = TorusElement([0.25, -0.25])
    g = weyl_map(t, standard_flag(2)).entries
    assert np.allclose(g, np.diag([1j, -1j]), atol=1e-15)


def test_weyl_map_is_conjugation(rng):
    g = haar_sample(3, rng)
    t = random_torus(3, rng)
    w = weyl_map(t, flag_of(g)).entries
    expect = g.entries @ np.diag(t.p) @ g.entries.conj().T
    assert np.max(np.abs(w - expect)) <= 1e-12


def test_weyl_map_equivariant(rng):
    t, F, h = random_torus(4, rng), random_flag(4, rng), haar_sample(4, rng).entries
    lhs = weyl_map(t, F.conjugate(h)).entries
    rhs = h @ weyl_map(t, F).entries @ h.conj().T
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_weyl_map_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        weyl_map(random_torus(2, rng), standard_flag(3))


def test_flag_of_identity_and_torus():
    assert np.array_equal(flag_of(np.eye(3)).projections, standard_flag(3).projections)
    F = flag_of(np.diag([1j, -1j]))
    assert np.allclose(F.projections, standard_flag(2).projections, atol=1e-15)


def test_flag_of_complete(rng):
    F = flag_of(haar_sample(3, rng))
    assert np.max(np.abs(F.projections.sum(axis=0) - np.eye(3))) <= 1e-12
    ProjectionTuple(F.projections)


def test_flag_of_coset_well_defined():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        g, t = haar_sample(n, rng), random_torus(n, rng)
        F1 = flag_of(g).projections
        F2 = flag_of(g.entries @ np.diag(t.p)).projections
        assert np.max(np.abs(F1 - F2)) <= 1e-12


@given(seeds, dims)
def test_weyl_conjugation_property(seed, n):
    rng = np.random.default_rng(seed)
    g, t = haar_sample(n, rng), random_torus(n, rng)
    w = weyl_map(t, flag_of(g)).entries
    assert np.max(np.abs(w - g.entries @ np.diag(t.p) @ g.entries.conj().T)) <= 1e-12


def test_weyl_pushforward_zero(rng):
    v = weyl_pushforward(random_torus(3, rng), random_flag(3, rng), TangentVector())
    assert not np.any(v.generator(3))


def test_weyl_pushforward_torus_direction():
    t = TorusElement([0.1, -0.1])
    xdot = np.array([0.3, -0.3])
    v = weyl_pushforward(t, standard_flag(2), TangentVector(xdot=xdot))
    G = np.diag(t.p)
    assert np.allclose(G @ v.xi, 2j * np.pi * np.diag(xdot) @ G, atol=1e-14)


def test_weyl_pushforward_matches_finite_difference(rng):
    n, h = 3, 1e-5
    t, F = random_torus(n, rng), random_flag(n, rng)
    v = random_tangent(n, rng)

    def curve(s):
        return weyl_map(flow_torus(t, v.xdot, s), flow_flag(F, v.xi, s)).entries

    fd = (curve(h) - curve(-h)) / (2 * h)
    exact = weyl_map(t, F).entries @ weyl_pushforward(t, F, v).xi
    assert np.max(np.abs(fd - exact)) <= 1e-7


def test_tangent_vector_invariants():
    with pytest.raises(InvariantError):
        TangentVector(xi=np.eye(2))
    with pytest.raises(InvariantError):
        TangentVector(xi=np.diag([1j, 1j]))
    with pytest.raises(InvariantError):
        TangentVector(xdot=[1.0, 1.0])


def test_tangent_vector_linear(rng):
    a, b = random_tangent(3, rng), random_tangent(3, rng)
    c = 2.0 * a - b
    assert np.allclose(c.xi, 2 * a.xi - b.xi)
    assert np.allclose(c.xdot, 2 * a.xdot - b.xdot)


def test_cup_point_torus_image():
    P = CupPoint([1.25, -1.25], standard_flag(2))
    t = P.torus_image()
    assert abs(t.phases.sum()) <= 1e-12
    assert np.allclose(t.p, np.exp(2j * np.pi * np.array([1.25, -1.25])))
    with pytest.raises(InvariantError):
        CupPoint([0.5, 0.1], standard_flag(2))


def test_flows_stay_on_manifolds(rng):
    g, F = haar_sample(4, rng), random_flag(4, rng)
    xi = random_generator(4, rng)
    SpecialUnitary(flow_group(g, xi, 0.7).entries)
    ProjectionTuple(flow_flag(F, xi, 0.7).projections)


def test_block_embed():
    a = np.array([[0, 1], [2, 3]])
    assert np.array_equal(block_embed(a, 3), np.array([[0, 1, 0], [2, 3, 0], [0, 0, 1]]))
    assert block_embed(a, 3, pad=0.0)[2, 2] == 0
