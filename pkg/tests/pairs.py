"""Projection pairs conjugated by a known equivariant unitary field."""
import numpy as np

from eqbun import AlgebraProjection, SymmetryType, projection_to_bundles
from eqbun.bundles import morphism_from_rule
from eqbun.gallery import random_quaternionic_bundle, random_real_bundle
from eqbun.symmetry import equivariant_average


def linear_map(E, F, G_vertex):
    """Bundle map F.P G E.P with G interpolated from vertex values."""
    return morphism_from_rule(E, F, lambda S: F.project(S)[0] @ S.combine(G_vertex) @ E.project(S)[0])


def random_unitary_field(kind, X, n, seed, strength=0.6):
    rng = np.random.default_rng(seed)
    sym = SymmetryType(kind, n)
    G = rng.standard_normal((X.n_vertices, n, n)) + 1j * rng.standard_normal((X.n_vertices, n, n))
    G = np.eye(n) + strength * equivariant_average(sym, G, X) / np.sqrt(n)
    U, _, Vh = np.linalg.svd(G)
    return U @ Vh


def conjugate_pair(kind, X, n, k, seed):
    """p from a random bundle and q = g p g^*, with the isomorphisms of images induced by g."""
    E = random_real_bundle(X, n, k, seed=seed) if kind == "real" else random_quaternionic_bundle(X, n, k, seed=seed)
    g = random_unitary_field(kind, X, n, seed + 1)
    p = AlgebraProjection.from_vertex_values(kind, X, E.P)
    q = AlgebraProjection.from_vertex_values(kind, X, g @ E.P @ np.conj(np.swapaxes(g, -1, -2)))
    Ep, Epp = projection_to_bundles(p)
    Fq, Fqq = projection_to_bundles(q)
    return p, q, (Ep, Epp, Fq, Fqq), linear_map(Ep, Fq, g), linear_map(Epp, Fqq, g)
