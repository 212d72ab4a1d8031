"""Independent dense-sampling checker.

Everything here is recomputed from the raw vertex data with plain numpy
(its own barycentric enumeration, interpolation, eigen-decomposition and
structure maps), so that certificates produced by the package can be
re-verified without trusting its internals.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from eqbun.samples import SampleSet


def theta(n):
    T = np.zeros((n, n))
    for i in range(0, n, 2):
        T[i + 1, i] = 1.0
        T[i, i + 1] = -1.0
    return T


def conj_map(kind, M):
    """C(M) on a single nt x ns matrix, written out with explicit matrices."""
    if kind == "real":
        return np.conj(M)
    nt, ns = M.shape
    return theta(nt) @ np.conj(M) @ theta(ns).T


def J(v):
    return theta(len(v)).T @ np.conj(v)


def dense_keys(X, r):
    """Every barycentric point with denominator r on every simplex, keyed by positive weights."""
    keys = set()
    for s in X.simplices:
        for w in itertools.product(range(1, r + 1), repeat=len(s)):
            if sum(w) == r:
                keys.add(tuple(sorted((v, Fraction(a, r)) for v, a in zip(s, w))))
    return sorted(keys, key=lambda k: (len(k), k))


def dense_samples(X, r):
    return SampleSet(X, dense_keys(X, r), r)


def point_projection(E, key):
    H = sum(float(w) * E.P[v] for v, w in key)
    H = (H + H.conj().T) / 2
    ev, U = np.linalg.eigh(H)
    basis = U[:, E.n - E.rank:]
    gap = ev[E.n - E.rank] - 0.5 if E.rank else np.inf
    if E.rank < E.n:
        gap = min(gap, 0.5 - ev[E.n - E.rank - 1])
    return basis @ basis.conj().T, basis, gap


def partner(X, key):
    return tuple(sorted((X.tau[v], w) for v, w in key))


def check_bundle(E, r):
    X = E.base
    worst_gap = np.inf
    eqv = 0.0
    proj = {}
    for key in dense_keys(X, r):
        proj[key] = point_projection(E, key)
        worst_gap = min(worst_gap, proj[key][2])
    for key, (P, _, _) in proj.items():
        eqv = max(eqv, np.abs(conj_map(E.kind, proj[partner(X, key)][0]) - P).max())
    return {"gap": worst_gap, "equivariance": eqv}


def check_morphism(phi, r):
    """Resample ``phi`` on the dense lattice and re-verify it."""
    X = phi.source.base
    S = dense_samples(X, r)
    G = phi.resample(S)
    F = G.F
    inter = eqv = 0.0
    sigma = np.inf
    kind = phi.source.kind
    for i, key in enumerate(S.keys):
        Ps, Us, _ = point_projection(phi.source, key)
        Pt, _, _ = point_projection(phi.target, key)
        inter = max(inter, np.linalg.norm(Pt @ F[i] @ Ps - F[i], 2))
        j = S.index[partner(X, key)]
        eqv = max(eqv, np.linalg.norm(conj_map(kind, F[j]) - F[i], 2))
        if phi.source.rank:
            sigma = min(sigma, np.linalg.svd(F[i] @ Us, compute_uv=False)[-1])
    return {"intertwining": inter, "equivariance": eqv, "min_singular": sigma, "samples": len(S)}


def check_section_pairing(E, s1_vertex, r):
    """Pairing identity and pair margin of a quaternionic section at dense samples."""
    X = E.base
    vals = {}
    for key in dense_keys(X, r):
        P, _, _ = point_projection(E, key)
        vals[key] = P @ sum(float(w) * s1_vertex[v] for v, w in key)
    pair = 0.0
    sigma = np.inf
    for key, s1 in vals.items():
        P, _, _ = point_projection(E, key)
        s2 = P @ sum(float(w) * -J(s1_vertex[X.tau[v]]) for v, w in key)
        pair = max(pair, np.abs(s2 + J(vals[partner(X, key)])).max())
        sigma = min(sigma, np.linalg.svd(np.stack([s1, s2], axis=1), compute_uv=False)[-1])
    return {"pairing": pair, "pair_margin": sigma}
