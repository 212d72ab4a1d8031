"""Bundles as equivariant projection fields inside a trivial ambient bundle.

A field stores one Hermitian projection per vertex.  Inside a simplex the
projections are interpolated linearly and the bundle is the spectral
subspace above 1/2; the distance of the interpolated spectrum from 1/2 at
the sample points is the certified gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import Config, resolve
from .errors import (
    BaseMismatch,
    DimensionMismatch,
    GapLost,
    GaplessHamiltonian,
    MarginTooSmall,
    NotAProjectionField,
    NotASubcomplex,
    NotEquivariant,
    OddRankQuaternionic,
    SymmetryMismatch,
)
from .samples import SampleSet, lattice
from .symmetry import (
    SymmetryType,
    check_rank_parity,
    conjugate_morphism,
    eigen_rank,
    equivariance_residual,
    equivariant_average,
    normalize_kind,
    structure_vector,
)
from .z2complex import CylinderPair, InvolutiveComplex


def adjoint(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def spectral_top(H: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Projection onto the top ``rank`` eigenvectors, an orthonormal basis, and the gap at 1/2."""
    H = 0.5 * (H + adjoint(H))
    ev, U = np.linalg.eigh(H)
    n = H.shape[-1]
    basis = U[..., n - rank:]
    proj = basis @ adjoint(basis)
    gap = np.full(H.shape[:-2], np.inf)
    if rank > 0:
        gap = np.minimum(gap, ev[..., n - rank] - 0.5)
    if rank < n:
        gap = np.minimum(gap, 0.5 - ev[..., n - rank - 1])
    return proj, basis, gap


def projector_residuals(P: np.ndarray) -> tuple[float, float]:
    if P.size == 0:
        return 0.0, 0.0
    idem = np.linalg.norm(P @ P - P, ord=2, axis=(-2, -1)).max()
    herm = np.linalg.norm(P - adjoint(P), ord=2, axis=(-2, -1)).max()
    return float(idem), float(herm)


@dataclass(frozen=True, eq=False)
class EquivariantProjectionField:
    symmetry: SymmetryType
    base: InvolutiveComplex
    P: np.ndarray
    rank: int
    gap: float
    resolution: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.symmetry.ambient_dim

    @property
    def kind(self) -> str:
        return self.symmetry.kind

    def project(self, samples: SampleSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(projections, orthonormal bases, gaps) at every sample."""
        hit = self._cache.get(id(samples))
        if hit is not None and hit[0] is samples:
            return hit[1]
        if samples.base is not self.base:
            raise BaseMismatch("samples belong to a different complex")
        out = spectral_top(samples.combine(self.P), self.rank)
        self._cache[id(samples)] = (samples, out)
        return out

    def project_points(self, support: np.ndarray, weights: np.ndarray):
        Pint = (weights[..., None, None] * self.P[support]).sum(axis=-3)
        return spectral_top(Pint, self.rank)

    def samples(self, resolution: int | None = None) -> SampleSet:
        return lattice(self.base, resolution or self.resolution)

    def residuals(self) -> dict:
        idem, herm = projector_residuals(self.P)
        eqv = equivariance_residual(self.symmetry, self.P, np.asarray(self.base.tau))
        return {"idempotent": idem, "hermitian": herm,
                "equivariance": float(eqv.max()) if eqv.size else 0.0}

    def gap_bound(self) -> float:
        """Lower bound for the gap at every point of every simplex, not only at samples.

        Each point is within barycentric distance ``floor((m+1)/2)/r`` (sum of the
        positive coordinate changes) of a lattice point of its m-simplex, so by
        Weyl's inequality the spectrum moves by at most that times the largest
        difference of vertex projections on the simplex.
        """
        worst = 0.0
        by_len: dict[int, list] = {}
        for s in self.base.maximal_simplices():
            by_len.setdefault(len(s), []).append(s)
        for m, group in by_len.items():
            idx = np.array(group)
            D = np.zeros(len(group))
            for i in range(m):
                for j in range(i + 1, m):
                    diff = self.P[idx[:, i]] - self.P[idx[:, j]]
                    D = np.maximum(D, np.linalg.norm(diff, ord=2, axis=(-2, -1)))
            if len(D):
                worst = max(worst, (m // 2) / self.resolution * float(D.max()))
        return self.gap - worst


def make_field(symmetry: SymmetryType | str, base: InvolutiveComplex, P, rank: int | None = None,
               config: Config | None = None, repair: bool = True,
               resolution: int | None = None) -> EquivariantProjectionField:
    """Validate a vertex-indexed projection field and certify its gap."""
    cfg = resolve(config)
    P = np.asarray(P, dtype=complex)
    if P.ndim != 3 or P.shape[0] != base.n_vertices or P.shape[1] != P.shape[2]:
        raise DimensionMismatch(f"projection field has shape {P.shape}, base has "
                                f"{base.n_vertices} vertices")
    n = P.shape[1]
    if isinstance(symmetry, str):
        symmetry = SymmetryType(symmetry, n)
    if symmetry.ambient_dim != n:
        raise DimensionMismatch("ambient dimension does not match matrix size")
    idem, herm = projector_residuals(P)
    if max(idem, herm) > cfg.repair_tol:
        raise NotAProjectionField(f"not a Hermitian projection field (residuals {idem:.2e}, {herm:.2e})")
    ranks = eigen_rank(P) if len(P) else np.zeros(0, dtype=int)
    if len(ranks) and (ranks != ranks[0]).any():
        raise NotAProjectionField("rank is not constant over the vertices")
    k = int(ranks[0]) if len(ranks) else (rank or 0)
    if rank is not None and rank != k:
        raise NotAProjectionField(f"declared rank {rank} but eigenvalue count gives {k}")
    probe = EquivariantProjectionField(symmetry, base, P, k, 0.0, 1)
    check_rank_parity(symmetry, probe)
    tau = np.asarray(base.tau)
    if P.size:
        eqv = equivariance_residual(symmetry, P, tau).max()
        if eqv > (cfg.repair_tol if repair else cfg.eqv_tol):
            raise NotEquivariant(f"projection field violates equivariance by {eqv:.3e}")
        if repair and (eqv > cfg.eqv_tol or max(idem, herm) > cfg.proj_tol):
            P = spectral_top(equivariant_average(symmetry, 0.5 * (P + adjoint(P)), base), k)[0]
    r = resolution or cfg.resolution
    E = EquivariantProjectionField(symmetry, base, P, k, 0.0, r)
    gaps = E.project(lattice(base, r))[2]
    gap = float(gaps.min()) if gaps.size else 0.5
    gap = min(gap, 0.5)
    if gap < cfg.gap_min:
        raise GapLost(f"interpolated field has gap {gap:.3e} < {cfg.gap_min} at resolution {r}; "
                      "refine the triangulation")
    object.__setattr__(E, "gap", gap)
    return E


@dataclass(frozen=True)
class TrivialBundleSpec:
    symmetry: str
    rank: int
    base: InvolutiveComplex
    ambient_dim: int | None = None


def trivial_bundle(spec: TrivialBundleSpec, config: Config | None = None) -> EquivariantProjectionField:
    kind = normalize_kind(spec.symmetry)
    if kind == "quaternionic" and spec.rank % 2:
        raise OddRankQuaternionic(f"trivial quaternionic bundles have even rank, got {spec.rank}")
    n = spec.rank if spec.ambient_dim is None else spec.ambient_dim
    sym = SymmetryType(kind, n)
    if spec.rank > n:
        raise DimensionMismatch("rank exceeds ambient dimension")
    d = np.zeros(n)
    d[: spec.rank] = 1.0
    P = np.broadcast_to(np.diag(d).astype(complex), (spec.base.n_vertices, n, n)).copy()
    return make_field(sym, spec.base, P, spec.rank, config, repair=False)


def trivial(kind: str, rank: int, base: InvolutiveComplex, config: Config | None = None):
    return trivial_bundle(TrivialBundleSpec(kind, rank, base), config)


def direct_sum(E: EquivariantProjectionField, F: EquivariantProjectionField,
               config: Config | None = None) -> EquivariantProjectionField:
    if E.base is not F.base:
        raise BaseMismatch("direct sum of bundles over different complexes")
    if E.kind != F.kind:
        raise SymmetryMismatch(f"cannot add a {E.kind} and a {F.kind} bundle")
    V, n, m = E.base.n_vertices, E.n, F.n
    P = np.zeros((V, n + m, n + m), dtype=complex)
    P[:, :n, :n] = E.P
    P[:, n:, n:] = F.P
    out = EquivariantProjectionField(SymmetryType(E.kind, n + m), E.base, P,
                                     E.rank + F.rank, min(E.gap, F.gap), max(E.resolution, F.resolution))
    return out


# -- sections ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampledSection:
    """A section given by vertex values, evaluated at samples by the interpolation rule.

    In the quaternionic case only ``s1`` is stored; its partner
    ``s2(x) = -J s1(tau x)`` is always derived.
    """
    bundle: EquivariantProjectionField
    s1: np.ndarray

    @property
    def quaternionic(self) -> bool:
        return self.bundle.symmetry.quaternionic

    def vertex_s2(self) -> np.ndarray:
        tau = np.asarray(self.bundle.base.tau)
        return -structure_vector("quaternionic", self.s1[tau])

    def vertex_frame(self) -> np.ndarray:
        if self.quaternionic:
            return np.stack([self.s1, self.vertex_s2()], axis=-1)
        return self.s1[..., None]

    def values(self, samples: SampleSet) -> np.ndarray:
        """Frame values at samples, shape (S, n, 1) or (S, n, 2)."""
        P = self.bundle.project(samples)[0]
        return P @ samples.combine(self.vertex_frame())

    def margin(self, samples: SampleSet) -> float:
        v = self.values(samples)[..., 0]
        return float(np.linalg.norm(v, axis=-1).min()) if len(v) else np.inf

    def pair_margin(self, samples: SampleSet) -> float:
        if not self.quaternionic:
            return self.margin(samples)
        sv = np.linalg.svd(self.values(samples), compute_uv=False)
        return float(sv[:, -1].min()) if len(sv) else np.inf

    def pairing_residual(self, samples: SampleSet) -> float:
        """max ||s2(x) + J s1(tau x)|| over samples (quaternionic)."""
        vals = self.values(samples)
        if not self.quaternionic:
            return float(np.abs(vals[samples.tau_index, :, 0] - np.conj(vals[:, :, 0])).max())
        s1, s2 = vals[..., 0], vals[..., 1]
        return float(np.abs(s2 + structure_vector("quaternionic", s1[samples.tau_index])).max())


# -- morphisms --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BundleMorphism:
    source: EquivariantProjectionField
    target: EquivariantProjectionField
    samples: SampleSet
    F: np.ndarray
    rule: Callable[[SampleSet], np.ndarray] | None = None

    def resample(self, samples: SampleSet) -> "BundleMorphism":
        if self.rule is None:
            raise ValueError("morphism has no evaluation rule; cannot resample")
        return BundleMorphism(self.source, self.target, samples, self.rule(samples), self.rule)

    def scaled(self, c: complex) -> "BundleMorphism":
        rule = None if self.rule is None else (lambda S, r=self.rule: c * r(S))
        return BundleMorphism(self.source, self.target, self.samples, c * self.F, rule)


@dataclass
class MorphismReport:
    intertwining: float
    equivariance: float
    min_singular: float
    worst_intertwining: str | None
    worst_equivariance: str | None
    worst_singular: str | None
    source_rank: int
    target_rank: int
    is_isomorphism: bool

    def ok(self, tol: float = 1e-8, sigma: float = 1e-8) -> bool:
        return (self.intertwining < tol and self.equivariance < tol
                and self.min_singular > sigma and self.source_rank == self.target_rank)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def morphism_from_rule(source, target, rule, samples: SampleSet | None = None) -> BundleMorphism:
    samples = samples or source.samples()
    return BundleMorphism(source, target, samples, rule(samples), rule)


def verify_morphism(phi: BundleMorphism, config: Config | None = None) -> MorphismReport:
    cfg = resolve(config)
    S = phi.samples
    Ps, Us, _ = phi.source.project(S)
    Pt, _, _ = phi.target.project(S)
    F = phi.F
    kind = phi.source.kind
    inter = np.linalg.norm(Pt @ F @ Ps - F, ord=2, axis=(-2, -1))
    eqv = np.linalg.norm(conjugate_morphism(kind, F[S.tau_index]) - F, ord=2, axis=(-2, -1))
    if phi.source.rank:
        sv = np.linalg.svd(F @ Us, compute_uv=False)[:, -1]
    else:
        sv = np.full(len(S), np.inf)
    def worst(a, pick):
        return S.describe(int(pick(a))) if len(a) else None
    ms = float(sv.min()) if len(sv) else np.inf
    return MorphismReport(
        float(inter.max()) if len(inter) else 0.0,
        float(eqv.max()) if len(eqv) else 0.0,
        ms,
        worst(inter, np.argmax), worst(eqv, np.argmax), worst(sv, np.argmin),
        phi.source.rank, phi.target.rank,
        bool(ms > cfg.iso_tol and phi.source.rank == phi.target.rank),
    )


def identity_morphism(E: EquivariantProjectionField, samples: SampleSet | None = None) -> BundleMorphism:
    return morphism_from_rule(E, E, lambda S: E.project(S)[0].copy(), samples)


def splitting_certificate(E: EquivariantProjectionField, E0: EquivariantProjectionField,
                          frame: np.ndarray, samples: SampleSet | None = None) -> BundleMorphism:
    """Isomorphism E0 + trivial(m) -> E built from the complement and the trivial frame.

    ``frame`` holds the images of the trivial basis vectors at each vertex, shape (V, n, m).
    """
    m = frame.shape[-1]
    src = direct_sum(E0, trivial(E.kind, m, E.base)) if m else E0

    def rule(S: SampleSet) -> np.ndarray:
        PE = E.project(S)[0]
        P0 = E0.project(S)[0]
        T = PE @ S.combine(frame) if m else np.zeros((len(S), E.n, 0))
        return PE @ np.concatenate([P0, T], axis=-1)

    return morphism_from_rule(src, E, rule, samples)


def _complement(E: EquivariantProjectionField, frame: np.ndarray, config: Config | None):
    Q, _ = np.linalg.qr(frame)
    P0 = E.P - Q @ adjoint(Q)
    return make_field(E.symmetry, E.base, P0, E.rank - frame.shape[-1], config,
                      resolution=E.resolution)


def orthogonal_complement_of_section(s: SampledSection, config: Config | None = None):
    """Split off the trivial summand spanned by ``s`` (and its partner).

    Returns ``(E0, certificate)`` where the certificate is an isomorphism
    ``E0 + trivial -> E``.
    """
    cfg = resolve(config)
    E = s.bundle
    S = E.samples()
    if s.quaternionic:
        sigma = s.pair_margin(S)
        if not sigma >= cfg.pair_margin_min:
            raise MarginTooSmall(f"pair margin {sigma:.3e} below {cfg.pair_margin_min}")
    else:
        eps = s.margin(S)
        if not eps >= cfg.margin_min:
            raise MarginTooSmall(f"section margin {eps:.3e} below {cfg.margin_min}")
    frame = s.vertex_frame()
    E0 = _complement(E, frame, cfg)
    return E0, splitting_certificate(E, E0, frame)


# -- restriction and pullback -----------------------------------------

def restrict(E: EquivariantProjectionField, sub: InvolutiveComplex,
             config: Config | None = None) -> EquivariantProjectionField:
    if sub is E.base:
        return E
    try:
        idx = [E.base.index(v) for v in sub.vertices]
    except KeyError as exc:
        raise NotASubcomplex(f"vertex {exc} not in the base") from None
    for s in sub.simplices:
        if tuple(sorted(idx[v] for v in s)) not in E.base.simplices:
            raise NotASubcomplex(f"simplex {sub.names(s)} is not a simplex of the base")
    if any(idx[sub.tau[i]] != E.base.tau[idx[i]] for i in range(sub.n_vertices)):
        raise NotASubcomplex("involution does not restrict")
    return make_field(E.symmetry, sub, E.P[idx], E.rank, config, repair=False,
                      resolution=E.resolution)


def restrict_level(E: EquivariantProjectionField, cyl: CylinderPair, level: int,
                   config: Config | None = None) -> EquivariantProjectionField:
    """Restriction of a field on the cylinder to ``X x {level}``, as a field on ``X``."""
    return make_field(E.symmetry, cyl.X, E.P[cyl.level_vertices(level)], E.rank, config,
                      repair=False, resolution=E.resolution)


def pullback_to_cylinder(E: EquivariantProjectionField, cyl: CylinderPair,
                         config: Config | None = None) -> EquivariantProjectionField:
    if cyl.X is not E.base:
        raise BaseMismatch("cylinder was not built on the bundle's base")
    P = np.concatenate([E.P] * (cyl.layers + 1), axis=0)
    return make_field(E.symmetry, cyl.Y, P, E.rank, config, repair=False, resolution=E.resolution)


# -- Hamiltonians -----------------------------------------------------

def spectral_projection_bundle(H, symmetry: SymmetryType | str, base: InvolutiveComplex,
                               fermi_level: float = 0.0,
                               config: Config | None = None) -> EquivariantProjectionField:
    """Fermi projection (spectrum below ``fermi_level``) of a vertex-indexed Hamiltonian."""
    cfg = resolve(config)
    H = np.asarray(H, dtype=complex)
    if H.ndim != 3 or H.shape[0] != base.n_vertices:
        raise DimensionMismatch("Hamiltonian must be a vertex-indexed field of square matrices")
    n = H.shape[-1]
    if isinstance(symmetry, str):
        symmetry = SymmetryType(symmetry, n)
    scale = max(1.0, float(np.abs(H).max()))
    herm = float(np.abs(H - adjoint(H)).max())
    if herm > cfg.repair_tol * scale:
        raise NotEquivariant(f"Hamiltonian is not Hermitian (residual {herm:.2e})")
    eqv = equivariance_residual(symmetry, H, np.asarray(base.tau)).max()
    if eqv > cfg.repair_tol * scale:
        raise NotEquivariant(f"Hamiltonian violates the symmetry by {eqv:.2e}")
    H = equivariant_average(symmetry, 0.5 * (H + adjoint(H)), base)
    ev, U = np.linalg.eigh(H)
    dist = np.abs(ev - fermi_level).min()
    if dist < cfg.spectral_delta:
        raise GaplessHamiltonian(f"eigenvalue within {dist:.2e} of the Fermi level")
    below = (ev < fermi_level).sum(axis=-1)
    if (below != below[0]).any():
        raise GaplessHamiltonian("number of occupied bands changes over the base")
    k = int(below[0])
    occ = U[..., :k]
    P = occ @ adjoint(occ)
    return make_field(symmetry, base, P, k, cfg)
