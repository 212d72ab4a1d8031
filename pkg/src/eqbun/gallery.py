"""Deterministic example bundles, stable pairs and named scenarios."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .bundles import (
    BundleMorphism,
    EquivariantProjectionField,
    adjoint,
    direct_sum,
    make_field,
    spectral_projection_bundle,
    trivial,
)
from .errors import UnknownScenario
from .samples import SampleSet
from .stabiso import StableIsoWitness, restrict_morphism
from .symmetry import SymmetryType, equivariant_average, structure_vector
from .z2complex import InvolutiveComplex, build_torus, torus_angles


def _hermitian(rng, shape):
    """Random Hermitian matrices scaled so that the largest spectral norm is 1."""
    G = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    G = 0.5 * (G + adjoint(G))
    return G / np.linalg.norm(G, ord=2, axis=(-2, -1)).max()


def _unit_norm(M):
    s = np.linalg.norm(M, ord=2)
    return M / s if s > 0 else M


def random_real_bundle(X: InvolutiveComplex, n: int, k: int, seed: int = 0,
                       eps: float | None = None) -> EquivariantProjectionField:
    """Fermi projection of ``diag(-1_k, 1_{n-k})`` plus first Fourier modes with real coefficients.

    The modes have unit norm, so the perturbation is at most ``sqrt(2) d eps``
    and the default ``eps`` keeps the Fermi gap above 1/2.
    """
    rng = np.random.default_rng(seed)
    th = torus_angles(X)
    d = th.shape[1]
    eps = 0.35 / d if eps is None else eps
    H = np.diag([-1.0] * k + [1.0] * (n - k)).astype(complex)[None].repeat(X.n_vertices, 0)
    for a in range(d):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        A, B = _unit_norm(A + A.T), _unit_norm(B - B.T)
        # H(-theta) = conj H(theta) for real symmetric A and real skew B
        H = H + eps * (np.cos(th[:, a])[:, None, None] * A + 1j * np.sin(th[:, a])[:, None, None] * B)
    return spectral_projection_bundle(H, "real", X)


def random_quaternionic_bundle(X: InvolutiveComplex, n: int, k: int, seed: int = 0,
                               eps: float = 0.25) -> EquivariantProjectionField:
    """Fermi projection of ``diag(-1_k, 1_{n-k})`` plus a symmetrized random perturbation."""
    rng = np.random.default_rng(seed)
    sym = SymmetryType("quaternionic", n)
    H = np.diag([-1.0] * k + [1.0] * (n - k)) + eps * equivariant_average(
        sym, _hermitian(rng, (X.n_vertices, n, n)), X)
    return spectral_projection_bundle(H, sym, X)


def _reflection(t):
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, s], -1), np.stack([s, -c], -1)], -2)


def free_quaternionic_odd(d: int = 1, seed: int = 0, eps: float = 0.15) -> EquivariantProjectionField:
    """Rank-3 quaternionic bundle over the torus with the free half-period shift."""
    X = build_torus(d, "free_shift")
    th = torus_angles(X)
    V = X.n_vertices
    H = np.zeros((V, 6, 6), complex)
    H[:, :2, :2] = -np.eye(2)
    H[:, 2:4, 2:4] = _reflection(th[:, 0])
    H[:, 4:, 4:] = np.eye(2)
    if eps:
        sym = SymmetryType("quaternionic", 6)
        H = H + eps * equivariant_average(sym, _hermitian(np.random.default_rng(seed), (V, 6, 6)), X)
    return spectral_projection_bundle(H, "quaternionic", X)


def line_bundle(X: InvolutiveComplex, seed: int = 0) -> EquivariantProjectionField:
    """Real rank-1 bundle spanned by a random equivariant line field in C^2."""
    return random_real_bundle(X, 2, 1, seed, eps=0.3 / X.dim)


def smooth_frame(E: EquivariantProjectionField, count: int, seed: int = 0,
                 vertices=None) -> dict[int, np.ndarray]:
    """Equivariant orthonormal frames ``lowdin(P(v) C)`` for a constant ``C``."""
    rng = np.random.default_rng(seed)
    if E.kind == "real":
        C = rng.standard_normal((E.n, count)).astype(complex)
    else:
        c = rng.standard_normal((count // 2, E.n)) + 1j * rng.standard_normal((count // 2, E.n))
        cols = []
        for row in c:
            cols += [row, -structure_vector("quaternionic", row)]
        C = np.stack(cols, axis=-1)
    vs = range(E.base.n_vertices) if vertices is None else vertices
    return {v: _lowdin(E.P[v] @ C) for v in vs}


def _lowdin(Q: np.ndarray) -> np.ndarray:
    G = adjoint(Q) @ Q
    ev, U = np.linalg.eigh(G)
    return Q @ (U * ev[..., None, :] ** -0.5) @ adjoint(U)


# -- stable pairs -----------------------------------------------------

@dataclass
class StablePair:
    E1: EquivariantProjectionField
    E2: EquivariantProjectionField
    witness: StableIsoWitness


def _pair_columns(kind: str, w: np.ndarray) -> np.ndarray:
    if kind == "real":
        return w[:, None]
    return np.stack([w, -structure_vector("quaternionic", w)], axis=-1)


def stable_pair(E1: EquivariantProjectionField, seed: int = 0, alpha: float = np.pi / 4,
                twist: float = 0.7) -> StablePair:
    """``E2 = (E1 + e) - s`` with ``s = cos(a) e + sin(a) P_E1 w``, so ``E1 + e = E2 + s`` literally.

    The witness is ``[[P_E2], [s^*]] o g`` with ``g`` an equivariant rotation
    of ``E1 + e`` mixing ``e`` with another direction of ``E1``.  Both the
    tilt and the rotation vanish at marked vertices and ramp up over two
    edges, so over ``A`` the witness is ``id + id``.
    """
    kind = E1.kind
    X = E1.base
    r = 2 if kind == "quaternionic" else 1
    rng = np.random.default_rng(seed)
    n = E1.n
    W = direct_sum(E1, trivial(kind, r, X))
    N = W.n

    def embed(w):
        out = np.zeros(N, complex)
        out[:n] = w
        return out

    w1 = rng.standard_normal(n) + (1j * rng.standard_normal(n) if kind == "quaternionic" else 0)
    w2 = rng.standard_normal(n) + (1j * rng.standard_normal(n) if kind == "quaternionic" else 0)
    C1 = _pair_columns(kind, embed(w1))
    C2 = _pair_columns(kind, embed(w2))
    Ecols = np.eye(N)[:, n:].astype(complex)
    A = X.marked_vertices()
    on = _ramp_from(X, A)
    a_v, b_v = alpha * on, twist * on

    def frame(P, a):
        # P: (..., N, N) projection of W, a: (...,) tilt
        return np.cos(a)[..., None, None] * Ecols + np.sin(a)[..., None, None] * (P @ C1)

    Qv = _lowdin(frame(W.P, a_v))
    E2 = make_field(kind, X, W.P - Qv @ adjoint(Qv), E1.rank)

    def rotation(P, b):
        U = P @ C2
        K = U @ adjoint(Ecols) - Ecols @ adjoint(U)
        ev, V = np.linalg.eigh(1j * K)
        return (V * np.exp(-1j * b[..., None, None] * ev[..., None, :])) @ adjoint(V)

    src = direct_sum(E1, trivial(kind, r, X))
    dst = direct_sum(E2, trivial(kind, r, X))

    def rule(S: SampleSet) -> np.ndarray:
        PW = W.project(S)[0]
        P2 = E2.project(S)[0]
        a = S.combine(a_v)
        b = S.combine(b_v)
        Q = _lowdin(frame(PW, a))
        g = rotation(PW, b)
        return np.concatenate([P2, adjoint(Q)], axis=-2) @ PW @ g @ PW

    S = src.samples()
    psi = BundleMorphism(src, dst, S, rule(S), rule)
    phi_A = None
    if A:
        ident = BundleMorphism(E1, E2, S, _embed_rule(E1, E2)(S), _embed_rule(E1, E2))
        phi_A = restrict_morphism(ident)
    return StablePair(E1, E2, StableIsoWitness(r, psi, phi_A))


def _ramp_from(X: InvolutiveComplex, A, width: int = 2) -> np.ndarray:
    """Vertex weights rising from 0 on ``A`` to 1 at edge distance ``width``."""
    if not A:
        return np.ones(X.n_vertices)
    dist = np.full(X.n_vertices, width)
    nbrs = X.neighbours()
    front = set(A)
    for step in range(width):
        for v in front:
            dist[v] = min(dist[v], step)
        front = {u for v in front for u in nbrs[v] if dist[u] == width} - front
    return dist / width


def _embed_rule(E1, E2):
    n1, n2 = E1.n, E2.n

    def rule(S):
        F = np.zeros((len(S), n2, n1), complex)
        F[:, :n1, :n1] = np.eye(n1)
        return E2.project(S)[0] @ F @ E1.project(S)[0]
    return rule


def stabilize_witness(pair: StablePair, extra: int) -> StablePair:
    """Add ``extra`` more trivial summands to a witness (``psi + id``)."""
    if extra == 0:
        return pair
    psi = pair.witness.psi
    kind = pair.E1.kind
    src = direct_sum(psi.source, trivial(kind, extra, psi.source.base))
    dst = direct_sum(psi.target, trivial(kind, extra, psi.source.base))

    def rule(S, inner=psi.rule):
        F = inner(S)
        out = np.zeros((len(S), F.shape[1] + extra, F.shape[2] + extra), complex)
        out[:, :F.shape[1], :F.shape[2]] = F
        out[:, F.shape[1]:, F.shape[2]:] = np.eye(extra)
        return out

    S = psi.samples
    w = StableIsoWitness(pair.witness.ell + extra, BundleMorphism(src, dst, S, rule(S), rule),
                         pair.witness.phi_A)
    return StablePair(pair.E1, pair.E2, w)


# -- scenarios --------------------------------------------------------

@dataclass
class Scenario:
    name: str
    complex: InvolutiveComplex
    bundles: dict[str, EquivariantProjectionField]
    witness: StableIsoWitness | None = None
    expected: dict = field(default_factory=dict)


SCENARIOS = ("torus{d}-real-trivial (d = 1..4)", "torus2-real-line", "torus2-quat-rank2",
             "free-quat-rank3", "torus{d}-stable-pair (d = 2..4)")


def example_gallery(name: str) -> Scenario:
    m = re.fullmatch(r"torus([1-4])-real-trivial", name)
    if m:
        d = int(m.group(1))
        X = build_torus(d)
        E = trivial("real", 2, X)
        k0 = max(0, -(-(d - 1) // 2))
        return Scenario(name, X, {"E": E}, expected={"operation": "split", "m": 2 - min(k0, 2)})
    if name == "torus2-real-line":
        X = build_torus(2)
        return Scenario(name, X, {"E": line_bundle(X, seed=2)},
                        expected={"operation": "split", "m": 0, "rank": 1})
    if name == "torus2-quat-rank2":
        X = build_torus(2)
        return Scenario(name, X, {"E": random_quaternionic_bundle(X, 4, 2, seed=3)},
                        expected={"operation": "validate", "rank": 2})
    if name == "free-quat-rank3":
        E = free_quaternionic_odd(1)
        return Scenario(name, E.base, {"E": E},
                        expected={"operation": "split", "rank": 3, "m": 2, "parity_check": "pass"})
    m = re.fullmatch(r"torus([2-4])-stable-pair", name)
    if m:
        d = int(m.group(1))
        X = build_torus(d)
        pair = stable_pair(random_real_bundle(X, 3, 2, seed=10 + d), seed=d)
        return Scenario(name, X, {"E1": pair.E1, "E2": pair.E2}, pair.witness,
                        expected={"operation": "unstabilize", "rank": 2})
    raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")


__all__ = ["random_real_bundle", "random_quaternionic_bundle", "free_quaternionic_odd", "line_bundle",
           "smooth_frame", "StablePair", "stable_pair", "stabilize_witness", "Scenario",
           "example_gallery", "SCENARIOS"]
