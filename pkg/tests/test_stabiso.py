import numpy as np
import pytest

from eqbun import (
    StableIsoWitness,
    build_torus,
    cylinder,
    direct_sum,
    identity_morphism,
    make_field,
    transport_isomorphism,
    trivial,
    unstabilize,
    validate_witness,
    verify_morphism,
)
from eqbun.bundles import BundleMorphism, morphism_from_rule, pullback_to_cylinder
from eqbun.errors import (
    BoundaryIncompatible,
    NotAnIsomorphism,
    RankBelowThreshold,
    RankMismatch,
    SymmetryMismatch,
)
from eqbun.gallery import random_quaternionic_bundle, random_real_bundle, stable_pair, stabilize_witness
from eqbun.samples import lattice
from eqbun.stabiso import boundary_residual, locate_many, restrict_morphism
from eqbun.z2complex import torus_angles

import oracle


def identity_witness(E, ell):
    W = direct_sum(E, trivial(E.kind, ell, E.base)) if ell else E
    return StableIsoWitness(ell, identity_morphism(W))


def rotation(a):
    c, s = np.cos(a), np.sin(a)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def rotation_witness(X, amplitude=np.pi / 3):
    """Equivariant automorphism of trivial(2) by an angle that is even in x and zero at (0, ..., 0)."""
    th = torus_angles(X)
    alpha_v = amplitude * (1 - np.cos(th)).sum(axis=1) / (2 * th.shape[1])
    W = trivial("real", 2, X)

    def rule(S):
        return rotation(S.combine(alpha_v)).astype(complex)

    return W, morphism_from_rule(W, W, rule)


# -- witnesses --------------------------------------------------------

def test_identity_witness_validates(circle):
    E = random_real_bundle(circle, 3, 1, seed=0)
    rep = validate_witness(E, E, identity_witness(E, 1))
    assert rep.psi.is_isomorphism and rep.boundary_residual == 0.0


def test_broken_boundary_detected():
    X = build_torus(2, marked=[[0]])
    pair = stable_pair(random_real_bundle(X, 3, 2, seed=1), seed=0)
    validate_witness(pair.E1, pair.E2, pair.witness)
    psi = pair.witness.psi
    F = psi.F.copy()
    i = int(psi.samples.vertex_sample[0])
    F[i] = F[i] @ np.diag([1, 1, 1, -1])
    bad = StableIsoWitness(1, BundleMorphism(psi.source, psi.target, psi.samples, F), pair.witness.phi_A)
    with pytest.raises(BoundaryIncompatible):
        validate_witness(pair.E1, pair.E2, bad)


def test_quaternionic_odd_ell(torus2):
    E = random_quaternionic_bundle(torus2, 4, 2, seed=0)
    W = direct_sum(E, trivial("quaternionic", 2, torus2))
    with pytest.raises(RankMismatch):
        validate_witness(E, E, StableIsoWitness(1, identity_morphism(W)))


def test_witness_symmetry_mismatch(torus2):
    E = random_real_bundle(torus2, 4, 2, seed=0)
    Q = random_quaternionic_bundle(torus2, 4, 2, seed=0)
    with pytest.raises(SymmetryMismatch):
        validate_witness(E, Q, identity_witness(E, 1))


def test_witness_rank_mismatch(torus2):
    E = random_real_bundle(torus2, 3, 1, seed=0)
    F = random_real_bundle(torus2, 3, 2, seed=0)
    with pytest.raises(RankMismatch):
        validate_witness(E, F, identity_witness(E, 1))


def test_degenerate_witness(circle):
    E = random_real_bundle(circle, 3, 1, seed=0)
    w = identity_witness(E, 1)
    psi = w.psi.scaled(0.0)
    with pytest.raises(NotAnIsomorphism):
        validate_witness(E, E, StableIsoWitness(1, psi))


# -- transport --------------------------------------------------------

def test_locate_many_agrees_with_locate(torus2):
    cyl = cylinder(build_torus(2, points=4), layers=3)
    S = lattice(cyl.X, 3)
    for t in (0.0, 0.2, 0.5, 0.91, 1.0):
        sup, w = locate_many(cyl, S.support, S.weights, t)
        for i in range(0, len(S), 7):
            ref_s, ref_w = cyl.locate(S.support[i][S.weights[i] > 0], S.weights[i][S.weights[i] > 0], t)
            got = {int(a): b for a, b in zip(sup[i], w[i]) if b > 1e-14}
            ref = {a: b for a, b in zip(ref_s, ref_w) if b > 0}
            assert got.keys() == ref.keys()
            assert all(abs(got[a] - ref[a]) < 1e-12 for a in got)


def test_transport_of_pullback_is_identity(circle):
    E = random_real_bundle(circle, 3, 2, seed=3)
    cyl = cylinder(circle, layers=2)
    T = transport_isomorphism(pullback_to_cylinder(E, cyl), cyl)
    P = E.project(T.samples)[0]
    assert np.abs(T.F - P).max() < 1e-10


def rotating_line(X, layers, total=np.pi / 4):
    cyl = cylinder(X, layers)
    V = X.n_vertices
    P = np.zeros((cyl.Y.n_vertices, 2, 2), complex)
    for level in range(layers + 1):
        u = np.array([np.cos(total * level / layers), np.sin(total * level / layers)])
        P[level * V:(level + 1) * V] = np.outer(u, u)
    return cyl, make_field("real", cyl.Y, P)


def test_rotation_transport_oracle(circle):
    cyl, E = rotating_line(circle, 4)
    T = transport_isomorphism(E, cyl, t_step=1 / 64)
    R = rotation(np.pi / 4)
    expected = R @ np.diag([1, 0])
    assert np.abs(T.F - expected).max() < 1e-6
    assert verify_morphism(T).is_isomorphism


def twisted_plane(X, layers):
    """Rank-2 real bundle in C^4 whose plane turns about two axes at different rates."""
    cyl = cylinder(X, layers)
    V = X.n_vertices
    P = np.zeros((cyl.Y.n_vertices, 4, 4), complex)
    for level in range(layers + 1):
        t = level / layers
        a, b = 0.9 * t, 0.5 * t
        B = np.array([[np.cos(a), 0], [0, np.cos(b)], [np.sin(a) * np.cos(b), np.sin(b) * np.sin(a)],
                      [np.sin(a) * np.sin(b), -np.sin(b) * np.cos(a)]])
        Q, _ = np.linalg.qr(B)
        P[level * V:(level + 1) * V] = Q @ Q.T
    return cyl, make_field("real", cyl.Y, P)


def test_transport_step_refinement(circle):
    cyl, E = twisted_plane(circle, 6)
    hs = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    Ts = [transport_isomorphism(E, cyl, t_step=h).F for h in hs]
    diffs = [np.abs(Ts[i] - Ts[i + 1]).max() for i in range(len(hs) - 1)]
    for h, d in zip(hs, diffs):
        assert d <= h
    assert diffs[-1] <= diffs[0]


def test_transport_dense_oracle(circle):
    cyl, E = twisted_plane(circle, 6)
    T = transport_isomorphism(E, cyl)
    dense = oracle.check_morphism(T, 6)
    assert dense["intertwining"] < 1e-6 and dense["equivariance"] < 1e-6
    assert dense["min_singular"] > 0.99


# -- unstabilize ------------------------------------------------------

def test_ell_zero_returns_psi(circle):
    E = random_real_bundle(circle, 3, 1, seed=0)
    w = identity_witness(E, 0)
    res = unstabilize("real", E, E, w)
    assert np.array_equal(res.phi.F, w.psi.F) and res.rounds == []


def test_trivial_line_with_rotation_witness():
    X = build_torus(2, marked=[[0]])
    W, psi = rotation_witness(X)
    L = trivial("real", 1, X)
    phi_A = restrict_morphism(identity_morphism(L))
    w = StableIsoWitness(1, psi, phi_A)
    validate_witness(L, L, w)
    res = unstabilize("real", L, L, w, seed=0)
    assert res.report.is_isomorphism and res.report.intertwining < 1e-9
    assert res.boundary_residual < 1e-10
    assert len(res.rounds) == 1


@pytest.mark.parametrize("kind, extra, rounds", [("real", 1, 2), ("quaternionic", 0, 1)])
def test_round_count(kind, extra, rounds, torus2):
    E1 = (random_real_bundle(torus2, 3, 2, seed=5) if kind == "real"
          else random_quaternionic_bundle(torus2, 6, 4, seed=5))
    pair = stabilize_witness(stable_pair(E1, seed=1), extra)
    res = unstabilize(kind, pair.E1, pair.E2, pair.witness, seed=0)
    assert len(res.rounds) == rounds
    assert [r["ell_after"] for r in res.rounds][-1] == 0
    assert res.report.is_isomorphism


def test_relative_unstabilize_extends_phi_A():
    X = build_torus(2, marked=[[0]])
    pair = stable_pair(random_real_bundle(X, 3, 2, seed=2), seed=3)
    res = unstabilize("real", pair.E1, pair.E2, pair.witness, seed=0)
    assert res.report.is_isomorphism
    assert res.boundary_residual < 1e-10


def test_unstabilize_below_k1():
    X = build_torus(3)
    E = random_real_bundle(X, 2, 1, seed=0)
    with pytest.raises(RankBelowThreshold):
        unstabilize("real", E, E, identity_witness(E, 1))


def test_unstabilize_dense_oracle(circle):
    pair = stable_pair(random_real_bundle(circle, 3, 1, seed=4), seed=2)
    res = unstabilize("real", pair.E1, pair.E2, pair.witness, seed=0)
    dense = oracle.check_morphism(res.phi, 6)
    assert dense["intertwining"] < 1e-6 and dense["equivariance"] < 1e-6
    assert dense["min_singular"] > 1e-6


def test_boundary_residual_of_identity():
    X = build_torus(1, marked=[[0]])
    E = random_real_bundle(X, 3, 1, seed=0)
    phi = identity_morphism(E)
    assert boundary_residual(phi, restrict_morphism(phi)) == 0.0


def test_layer_refinement_recovers_gap():
    # this seed loses the complement gap inside the prisms at the initial layer count
    X = build_torus(3, marked=[[0]])
    pair = stable_pair(random_real_bundle(X, 3, 2, seed=32), seed=2)
    res = unstabilize("real", pair.E1, pair.E2, pair.witness, seed=2)
    assert res.rounds[0]["layer_refinements"] >= 1
    assert res.report.is_isomorphism and res.boundary_residual < 1e-10
