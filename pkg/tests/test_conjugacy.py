import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqbun import (
    AlgebraProjection,
    ObservableAlgebraElement,
    SymmetryType,
    algebra_check,
    build_torus,
    conjugator_from_isomorphisms,
    identity_morphism,
    lemma_converse,
    projection_to_bundles,
    stabilize_projection,
    unitarize,
    verify_morphism,
)
from eqbun.conjugacy import Conjugator, conjugacy_residual, projection_values
from eqbun.errors import Mismatch, NotAProjectionField, SingularInput
from eqbun.gallery import random_real_bundle
from eqbun.symmetry import equivariant_average, theta_block

from pairs import conjugate_pair, linear_map, random_unitary_field


def constant(kind, X, M):
    return ObservableAlgebraElement.from_vertex_values(kind, X, np.broadcast_to(M, (X.n_vertices,) + M.shape))


def constant_projection(kind, X, M):
    return AlgebraProjection.from_vertex_values(kind, X, np.broadcast_to(M, (X.n_vertices,) + M.shape))


# -- algebra ----------------------------------------------------------

def test_real_constant_real_matrix(circle):
    rep = algebra_check(constant("real", circle, np.array([[1.0, 2.0], [3.0, 4.0]])))
    assert rep.symmetry == 0 and rep.fixed_violations == []


def test_real_constant_i_fails_at_fixed_vertices(circle):
    rep = algebra_check(constant("real", circle, 1j * np.eye(2)))
    assert rep.symmetry == pytest.approx(2.0)
    fixed = {circle.vertices[v] for v in circle.fixed_vertices()}
    assert {s.split("*")[1] for s in rep.fixed_violations} == fixed


def test_real_i_with_sign_flip_on_free_circle(free_circle):
    X = free_circle
    vals = np.zeros((X.n_vertices, 1, 1), complex)
    done = set()
    for v in range(X.n_vertices):
        if v in done:
            continue
        vals[v], vals[X.tau[v]] = 1j, -1j
        done |= {v, X.tau[v]}
    rep = algebra_check(ObservableAlgebraElement.from_vertex_values("real", X, vals))
    assert rep.symmetry == 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_quaternionic_theta_passes(k, circle):
    rep = algebra_check(constant("quaternionic", circle, theta_block(k).astype(complex)))
    assert rep.symmetry == 0


def test_element_algebra(circle):
    a = constant("real", circle, np.array([[2.0, 1.0], [0.0, 1.0]]))
    assert np.allclose((a @ a.inverse()).values, np.eye(2))
    assert np.array_equal(a.adjoint().values[0], a.values[0].T)


def test_bad_projection_rejected(circle):
    with pytest.raises(NotAProjectionField):
        constant_projection("real", circle, np.diag([1.0, 0.5]))
    with pytest.raises(Mismatch):
        v = np.array([1, 1j]) / np.sqrt(2)
        constant_projection("real", circle, np.outer(v, v.conj()))


# -- projections and bundles ------------------------------------------

def test_diag_projection_bundles(circle):
    E, Ep = projection_to_bundles(constant_projection("real", circle, np.diag([1.0, 0.0])))
    assert (E.rank, Ep.rank) == (1, 1)
    assert np.array_equal(E.P[0], np.diag([1, 0])) and np.array_equal(Ep.P[0], np.diag([0, 1]))


def test_zero_projection(circle):
    E, Ep = projection_to_bundles(constant_projection("real", circle, np.zeros((3, 3))))
    assert (E.rank, Ep.rank) == (0, 3)


@pytest.mark.parametrize("seed", range(4))
def test_random_projection_ranks_sum(seed, circle):
    E0 = random_real_bundle(circle, 4, 2, seed=seed)
    E, Ep = projection_to_bundles(AlgebraProjection.from_vertex_values("real", circle, E0.P))
    assert E.rank + Ep.rank == 4
    assert np.allclose(E.P + Ep.P, np.eye(4))


# -- conjugators ------------------------------------------------------

def test_identity_conjugator(circle):
    p = constant_projection("real", circle, np.diag([1.0, 0.0]))
    E, Ep = projection_to_bundles(p)
    c = conjugator_from_isomorphisms(identity_morphism(E), identity_morphism(Ep))
    assert np.allclose(c.v.values, np.eye(2)) and c.residual() == 0


def test_swap_conjugator(circle):
    p = constant_projection("real", circle, np.diag([1.0, 0.0]))
    q = constant_projection("real", circle, np.diag([0.0, 1.0]))
    E, Ep = projection_to_bundles(p)
    F, Fp = projection_to_bundles(q)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    V = np.broadcast_to(swap, (circle.n_vertices, 2, 2))
    c = conjugator_from_isomorphisms(linear_map(E, F, V), linear_map(Ep, Fp, V))
    assert np.array_equal(c.v.values, np.broadcast_to(swap, c.v.values.shape))
    assert c.residual() == 0


def test_mismatched_isomorphisms(circle):
    p = constant_projection("real", circle, np.diag([1.0, 0.0]))
    E, Ep = projection_to_bundles(p)
    with pytest.raises(Mismatch):
        conjugator_from_isomorphisms(identity_morphism(E), identity_morphism(E))


@pytest.mark.parametrize("kind, n, k", [("real", 3, 1), ("real", 4, 2), ("quaternionic", 4, 2)])
def test_conjugator_round_trip(kind, n, k, torus2):
    p, q, (E, Ep, F, Fp), phi, phi_perp = conjugate_pair(kind, torus2, n, k, seed=7)
    assert verify_morphism(phi).is_isomorphism and verify_morphism(phi_perp).is_isomorphism
    c = conjugator_from_isomorphisms(phi, phi_perp)
    assert c.residual() < 1e-8
    assert algebra_check(c.v).symmetry < 1e-10
    u = unitarize(c)
    assert u.residual() < 1e-7 and u.unitarity() < 1e-12
    assert u.residual() <= c.residual() + 1e-9
    assert algebra_check(u.v).symmetry < 1e-10
    a, b = lemma_converse(c.v, E, Ep, F, Fp)
    assert verify_morphism(a).is_isomorphism and verify_morphism(b).is_isomorphism
    c2 = conjugator_from_isomorphisms(a, b)
    assert c2.residual() < 1e-8


# -- unitarize --------------------------------------------------------

def _conjugator(v):
    S = v.samples
    p = ObservableAlgebraElement(v.kind, v.size, S, np.zeros_like(v.values))
    return Conjugator(v, p, p, float(np.linalg.svd(v.values, compute_uv=False)[:, -1].min()))


def test_unitary_input_unchanged(circle):
    U = random_unitary_field("real", circle, 3, seed=0)
    v = ObservableAlgebraElement.from_vertex_values("real", circle, U)
    u = unitarize(_conjugator(v))
    assert np.abs(u.v.values - v.values).max() < 1e-13


def test_two_times_identity(circle):
    v = constant("real", circle, 2 * np.eye(2))
    assert np.abs(unitarize(_conjugator(v)).v.values - np.eye(2)).max() < 1e-15


def test_singular_input(circle):
    v = constant("real", circle, np.diag([1.0, 0.0]))
    with pytest.raises(SingularInput):
        unitarize(_conjugator(v))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["real", "quaternionic"]), st.integers(0, 10_000))
def test_unitarize_random_equivariant(kind, seed):
    X = build_torus(1)
    rng = np.random.default_rng(seed)
    n = 4
    G = rng.standard_normal((X.n_vertices, n, n)) + 1j * rng.standard_normal((X.n_vertices, n, n))
    G = 2 * np.eye(n) + equivariant_average(SymmetryType(kind, n), G, X) / 2
    v = ObservableAlgebraElement.from_vertex_values(kind, X, G)
    c = _conjugator(v)
    if c.margin < 1e-3:
        return
    u = unitarize(c)
    assert u.unitarity() < 1e-12
    assert algebra_check(u.v).ok(1e-10)


# -- stabilization ----------------------------------------------------

def test_pad_with_zero(circle):
    p = constant_projection("real", circle, np.diag([1.0, 0.0]))
    z = constant_projection("real", circle, np.zeros((1, 1)))
    s = stabilize_projection(p, z)
    assert np.array_equal(s.vertex_values()[0], np.diag([1, 0, 0]))


def test_p_plus_complement_has_full_rank(circle):
    E0 = random_real_bundle(circle, 3, 1, seed=2)
    p = AlgebraProjection.from_vertex_values("real", circle, E0.P)
    r = AlgebraProjection.from_vertex_values("real", circle, np.eye(3) - E0.P)
    s = stabilize_projection(p, r)
    E, _ = projection_to_bundles(s)
    assert E.rank == 3


def test_stable_conjugacy_by_blocks(torus2):
    p, q, (E, Ep, F, Fp), phi, phi_perp = conjugate_pair("real", torus2, 3, 1, seed=11)
    r = constant_projection("real", torus2, np.diag([1.0, 0.0]))
    ps, qs = stabilize_projection(p, r), stabilize_projection(q, r)
    Es, Esp = projection_to_bundles(ps)
    Fs, Fsp = projection_to_bundles(qs)
    g = random_unitary_field("real", torus2, 3, 12)
    G = np.zeros((torus2.n_vertices, 5, 5), complex)
    G[:, :3, :3] = g
    G[:, 3:, 3:] = np.eye(2)
    c = conjugator_from_isomorphisms(linear_map(Es, Fs, G), linear_map(Esp, Fsp, G))
    assert c.residual() < 1e-8


def test_projection_values_match_bundle(torus2):
    E = random_real_bundle(torus2, 3, 1, seed=1)
    S = E.samples()
    pv = projection_values(E, S)
    assert np.abs(pv.values - E.project(S)[0]).max() < 1e-14
    one = ObservableAlgebraElement("real", 3, S, np.broadcast_to(np.eye(3), pv.values.shape).copy())
    assert conjugacy_residual(one, pv, pv) == 0
