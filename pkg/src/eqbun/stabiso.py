"""From stable isomorphisms to isomorphisms.

One round removes the last trivial summand (rank 1, or 2 in the
quaternionic case) of a stable isomorphism ``psi: E1' + e -> E2' + e``.
On the cylinder ``Y = X x I`` the bundle ``W = E1' + e`` carries the
trivial frame ``e`` on ``X x 0`` and ``A x I`` and the frame
``psi^{-1}(e)`` on ``X x 1``.  Extending that frame over ``Y`` and
transporting its complement from the bottom to the top gives
``E1' = W - e`` isomorphic to ``W - psi^{-1}(e)``, which ``psi`` maps onto
``E2'``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bundles import (
    BundleMorphism,
    EquivariantProjectionField,
    MorphismReport,
    direct_sum,
    make_field,
    pullback_to_cylinder,
    restrict,
    restrict_level,
    trivial,
    verify_morphism,
)
from .config import Config, resolve
from .errors import (
    BaseMismatch,
    BoundaryIncompatible,
    GapLost,
    NotAnIsomorphism,
    RankBelowThreshold,
    RankMismatch,
    SymmetryMismatch,
)
from .extension import split_trivial_summand, thresholds
from .samples import SampleSet, lattice
from .symmetry import normalize_kind
from .z2complex import CylinderPair, cylinder, dimensions, marked_subcomplex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StableIsoWitness:
    """``psi: E1 + trivial(ell) -> E2 + trivial(ell)`` and its restriction ``phi_A`` over ``A``."""
    ell: int
    psi: BundleMorphism
    phi_A: BundleMorphism | None = None


@dataclass
class WitnessReport:
    psi: MorphismReport
    phi_A: MorphismReport | None
    boundary_residual: float
    worst_boundary: str | None = None

    def as_dict(self) -> dict:
        return {"psi": self.psi.as_dict(),
                "phi_A": None if self.phi_A is None else self.phi_A.as_dict(),
                "boundary_residual": self.boundary_residual,
                "worst_boundary": self.worst_boundary}


def _stabilized(E: EquivariantProjectionField, ell: int) -> EquivariantProjectionField:
    return direct_sum(E, trivial(E.kind, ell, E.base)) if ell else E


def same_base(E1: EquivariantProjectionField, E2: EquivariantProjectionField) -> EquivariantProjectionField:
    """Return ``E2`` re-attached to ``E1.base`` when both bases describe the same complex."""
    if E2.base is E1.base:
        return E2
    if E2.base.to_raw() != E1.base.to_raw():
        raise BaseMismatch("bundles live over different complexes")
    return make_field(E2.symmetry, E1.base, E2.P, E2.rank, repair=False, resolution=E2.resolution)


def _blockdiag(F: np.ndarray, ell: int) -> np.ndarray:
    S, a, b = F.shape
    out = np.zeros((S, a + ell, b + ell), dtype=complex)
    out[:, :a, :b] = F
    out[:, a:, b:] = np.eye(ell)
    return out


def validate_witness(E1: EquivariantProjectionField, E2: EquivariantProjectionField,
                     w: StableIsoWitness, config: Config | None = None) -> WitnessReport:
    cfg = resolve(config)
    if E1.kind != E2.kind:
        raise SymmetryMismatch(f"{E1.kind} versus {E2.kind} bundle")
    E2 = same_base(E1, E2)
    if E1.rank != E2.rank:
        raise RankMismatch(f"ranks {E1.rank} and {E2.rank} differ")
    if w.ell < 0 or (E1.kind == "quaternionic" and w.ell % 2):
        raise RankMismatch(f"stabilization rank {w.ell} is not allowed for {E1.kind} bundles "
                           "(quaternionic trivial bundles have even rank)")
    psi = w.psi
    if psi.source.kind != E1.kind or psi.target.kind != E1.kind:
        raise SymmetryMismatch("witness has a different symmetry type")
    if (psi.source.n, psi.target.n) != (E1.n + w.ell, E2.n + w.ell) or \
            psi.source.rank != E1.rank + w.ell or psi.target.rank != E2.rank + w.ell:
        raise RankMismatch("witness maps between bundles of the wrong size")
    if psi.samples.base.to_raw() != E1.base.to_raw():
        raise BaseMismatch("witness is sampled on a different complex")
    psi_report = verify_morphism(psi, cfg)
    if not psi_report.is_isomorphism:
        raise NotAnIsomorphism(f"psi is not an isomorphism (min singular value "
                               f"{psi_report.min_singular:.3e} at {psi_report.worst_singular})")
    S = psi.samples
    marked = np.flatnonzero(S.in_marked)
    phi_report, resid, worst = None, 0.0, None
    if len(marked):
        n1, n2 = E1.n, E2.n
        if w.phi_A is None:
            expected = _blockdiag(psi.F[marked][:, :n2, :n1], w.ell)
        else:
            phi_report = verify_morphism(w.phi_A, cfg)
            if not phi_report.is_isomorphism:
                raise NotAnIsomorphism("phi_A is not an isomorphism")
            lookup = {w.phi_A.samples.id_key(j): j for j in range(len(w.phi_A.samples))}
            try:
                j = np.array([lookup[S.id_key(i)] for i in marked])
            except KeyError as exc:
                raise BoundaryIncompatible(f"phi_A is not sampled at {exc}") from None
            expected = _blockdiag(w.phi_A.F[j], w.ell)
        dev = np.linalg.norm(psi.F[marked] - expected, ord=2, axis=(-2, -1))
        resid = float(dev.max())
        worst = S.describe(int(marked[np.argmax(dev)]))
        if resid > cfg.repair_tol:
            raise BoundaryIncompatible(
                f"psi deviates from phi_A + id over A by {resid:.3e} at {worst}")
    return WitnessReport(psi_report, phi_report, resid, worst)


# -- transport --------------------------------------------------------

def locate_many(cyl: CylinderPair, support: np.ndarray, weights: np.ndarray, t: float):
    """Vectorized staircase point location of ``(x, t)`` for rows of samples of ``X``."""
    M = cyl.layers
    level = min(int(t * M), M - 1)
    s = t * M - level
    key = np.array([cyl.X.orbit_key(v) for v in range(cyl.X.n_vertices)])
    order = np.argsort(key[support] + np.where(weights > 0, 0, key.max() + 1), axis=1, kind="stable")
    sup = np.take_along_axis(support, order, axis=1)
    lam = np.take_along_axis(weights, order, axis=1)
    tail = np.cumsum(lam[:, ::-1], axis=1)[:, ::-1] - lam          # sum of later weights
    top = np.clip(s - tail, 0.0, lam)
    bottom = lam - top
    V = cyl.X.n_vertices
    out_sup = np.concatenate([sup + level * V, sup + (level + 1) * V], axis=1)
    out_w = np.concatenate([bottom, top], axis=1)
    return out_sup, out_w


def _polar_partial(A: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    U, s, Vh = np.linalg.svd(A)
    return U[..., :k] @ Vh[..., :k, :], s[..., k - 1] if k else np.ones(len(A))


def _transport_rule(E: EquivariantProjectionField, cyl: CylinderPair, h: float, cfg: Config):
    k = E.rank

    def rule(S: SampleSet) -> np.ndarray:
        K = max(1, math.ceil(round(1.0 / h, 9)))
        sup, w = locate_many(cyl, S.support, S.weights, 0.0)
        P0, _, gap = E.project_points(sup, w)
        G = P0.copy()
        Pprev = P0
        min_sv, min_gap = np.inf, float(gap.min()) if len(gap) else 0.5
        for i in range(1, K + 1):
            sup, w = locate_many(cyl, S.support, S.weights, i / K)
            P, _, gap = E.project_points(sup, w)
            min_gap = min(min_gap, float(gap.min()) if len(gap) else 0.5)
            U, sv = _polar_partial(P @ Pprev, k)
            min_sv = min(min_sv, float(sv.min()) if len(sv) else 1.0)
            G = U @ G
            Pprev = P
        rule.min_step_singular = min_sv
        rule.min_gap = min_gap
        return G

    return rule


def transport_isomorphism(E: EquivariantProjectionField, cyl: CylinderPair,
                          samples: SampleSet | None = None, config: Config | None = None,
                          t_step: float | None = None) -> BundleMorphism:
    """Isomorphism ``E|X x 0 -> E|X x 1`` by composing polar parts of ``P(t+h) P(t)``."""
    cfg = resolve(config)
    if E.base is not cyl.Y:
        raise BaseMismatch("field does not live on this cylinder")
    src = restrict_level(E, cyl, 0, cfg)
    dst = restrict_level(E, cyl, cyl.layers, cfg)
    S = samples or lattice(cyl.X, E.resolution)
    h = t_step or cfg.t_step
    for attempt in range(cfg.max_refine + 1):
        rule = _transport_rule(E, cyl, h, cfg)
        F = rule(S)
        if rule.min_gap < cfg.gap_min:
            raise GapLost(f"spectral gap {rule.min_gap:.3e} along the cylinder is below {cfg.gap_min}")
        if rule.min_step_singular >= 0.5:
            log.info("transport: step %.4g, min step singular value %.4f", h, rule.min_step_singular)
            return BundleMorphism(src, dst, S, F, rule)
        h /= 2
    raise GapLost(f"transport steps stay degenerate (min singular value "
                  f"{rule.min_step_singular:.3e}) after {cfg.max_refine} refinements")


# -- unstabilization --------------------------------------------------

@dataclass
class UnstabilizeResult:
    phi: BundleMorphism
    report: MorphismReport
    rounds: list = field(default_factory=list)
    boundary_residual: float = 0.0

    def summary(self) -> dict:
        return {"rounds": self.rounds, "certificate": self.report.as_dict(),
                "boundary_residual": self.boundary_residual}


def _round(kind: str, E1: EquivariantProjectionField, E2: EquivariantProjectionField,
           psi: BundleMorphism, ell: int, r: int, rng, cfg: Config, index: int):
    X = E1.base
    E1p, E2p = _stabilized(E1, ell - r), _stabilized(E2, ell - r)
    W = direct_sum(E1p, trivial(kind, r, X))
    nW, nT = W.n, psi.target.n
    S = psi.samples
    e_src = np.eye(nW)[:, nW - r:].astype(complex)
    e_dst = np.eye(nT)[:, nT - r:].astype(complex)
    A = X.marked_vertices()
    if (S.vertex_sample < 0).any():
        raise NotAnIsomorphism("psi is not sampled at every vertex")
    top = np.linalg.pinv(psi.F[S.vertex_sample]) @ e_dst            # psi^{-1}(e) at each vertex
    # the frame has to turn from e to psi^{-1}(e) across the layers; keep each step below 45 degrees
    turn = np.arccos(np.clip(np.real(np.einsum("vij,ij->v", top, np.conj(e_src))) / r, -1.0, 1.0))
    M = max(cfg.cylinder_layers, int(np.ceil(turn.max() / (np.pi / 4) - 1e-9)) if len(turn) else 1)
    for attempt in range(cfg.max_refine + 1):
        cyl = cylinder(X, M)
        WY = pullback_to_cylinder(W, cyl, cfg)
        frame: dict[int, np.ndarray] = {}
        for v in range(X.n_vertices):
            frame[cyl.vertex(v, 0)] = e_src
            if v in A:
                for level in range(1, M + 1):
                    frame[cyl.vertex(v, level)] = e_src
            else:
                frame[cyl.vertex(v, M)] = top[v]
        try:
            split = split_trivial_summand(kind, WY, frame, count=r, rng=rng, config=cfg)
            T = transport_isomorphism(split.E0, cyl, S, cfg)
            break
        except GapLost as exc:
            if attempt == cfg.max_refine:
                raise GapLost(f"{exc} (after {attempt} layer refinements, {M} layers)") from None
            log.info("round %d: %s; retrying with %d layers", index, exc, 2 * M)
            M *= 2
    psi_F = psi.F
    psi_rule = psi.rule
    Tr = T.rule
    n1p, n2p = E1p.n, E2p.n

    def rule(S2: SampleSet) -> np.ndarray:
        if S2 is not S and psi_rule is None:
            raise ValueError("witness has no evaluation rule; cannot resample")
        PF = psi_F if S2 is S else psi_rule(S2)
        TF = T.F if S2 is S else Tr(S2)
        P1 = E1p.project(S2)[0]
        P2 = E2p.project(S2)[0]
        return P2 @ PF[:, :n2p, :] @ TF[:, :, :n1p] @ P1

    phi = BundleMorphism(E1p, E2p, S, rule(S), rule)
    rep = verify_morphism(phi, cfg)
    info = {"round": index, "ell_before": ell, "ell_after": ell - r,
            "layers": M, "layer_refinements": attempt,
            "split_min_singular": split.report.min_singular,
            "transport_min_singular": verify_morphism(T, cfg).min_singular,
            "min_singular": rep.min_singular, "intertwining": rep.intertwining,
            "equivariance": rep.equivariance}
    if not rep.is_isomorphism:
        raise NotAnIsomorphism(f"round {index}: composite is not an isomorphism "
                               f"(min singular value {rep.min_singular:.3e})")
    return phi, rep, info


def unstabilize(kind: str, E1: EquivariantProjectionField, E2: EquivariantProjectionField,
                w: StableIsoWitness, config: Config | None = None,
                rng: np.random.Generator | None = None, seed: int | None = None,
                force: bool = False) -> UnstabilizeResult:
    """Isomorphism ``E1 -> E2`` extending ``phi_A``, obtained by removing trivial summands of ``psi``."""
    cfg = resolve(config)
    kind = normalize_kind(kind)
    if E1.kind != kind:
        raise SymmetryMismatch(f"bundles are {E1.kind}, requested {kind}")
    E2 = same_base(E1, E2)
    wrep = validate_witness(E1, E2, w, cfg)
    th = thresholds(kind, dimensions(E1.base))
    if E1.rank < th.k1 and not force:
        raise RankBelowThreshold(f"rank {E1.rank} is below the threshold k1 = {th.k1}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    r = 2 if kind == "quaternionic" else 1
    psi, ell = w.psi, w.ell
    psi = BundleMorphism(_stabilized(E1, ell), _stabilized(E2, ell), psi.samples, psi.F, psi.rule)
    rounds = []
    rep = wrep.psi
    index = 0
    while ell > 0:
        index += 1
        try:
            psi, rep, info = _round(kind, E1, E2, psi, ell, r, rng, cfg, index)
        except Exception as exc:
            if exc.args and isinstance(exc.args[0], str) and not exc.args[0].startswith("round"):
                exc.args = (f"round {index}: {exc.args[0]}",) + exc.args[1:]
            raise
        log.info("round %d: min singular value %.4f", index, rep.min_singular)
        rounds.append(info)
        ell -= r
    resid = boundary_residual(psi, w.phi_A) if w.phi_A is not None else wrep.boundary_residual
    return UnstabilizeResult(psi, rep, rounds, resid)


def boundary_residual(phi: BundleMorphism, phi_A: BundleMorphism) -> float:
    """Largest deviation of ``phi`` from ``phi_A`` at samples of the marked subcomplex."""
    S = phi.samples
    lookup = {phi_A.samples.id_key(j): j for j in range(len(phi_A.samples))}
    pairs = [(i, lookup.get(S.id_key(i))) for i in np.flatnonzero(S.in_marked)]
    pairs = [(i, j) for i, j in pairs if j is not None]
    if not pairs:
        return 0.0
    i, j = map(np.array, zip(*pairs))
    return float(np.linalg.norm(phi.F[i] - phi_A.F[j], ord=2, axis=(-2, -1)).max())


def restrict_morphism(phi: BundleMorphism) -> BundleMorphism:
    """Restriction of a morphism to the marked subcomplex of its base."""
    X = phi.source.base
    A, keep = marked_subcomplex(X)
    src, dst = restrict(phi.source, A), restrict(phi.target, A)
    SA = lattice(A, phi.samples.resolution or phi.source.resolution)
    lookup = {phi.samples.id_key(i): i for i in range(len(phi.samples))}
    idx = np.array([lookup[SA.id_key(j)] for j in range(len(SA))], dtype=np.int64)
    return BundleMorphism(src, dst, SA, phi.F[idx] if len(idx) else phi.F[:0])


__all__ = ["StableIsoWitness", "WitnessReport", "validate_witness", "transport_isomorphism",
           "locate_many", "unstabilize", "UnstabilizeResult", "boundary_residual",
           "restrict_morphism", "same_base"]
