"""Matrix-valued observables, their projections, and conjugators built from bundle isomorphisms.

An observable is a matrix function ``f`` on the base with
``C(f(x)) = f(tau x)``; it is stored by its values on a sample set.  A
projection ``p`` corresponds to the pair of bundles ``(im p, im (1 - p))``,
and isomorphisms of those pairs assemble into invertible ``v`` with
``v p v^{-1} = q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import (
    BundleMorphism,
    EquivariantProjectionField,
    adjoint,
    make_field,
    verify_morphism,
)
from .config import Config, resolve
from .errors import BaseMismatch, DimensionMismatch, Mismatch, NotAProjectionField, SingularInput
from .samples import SampleSet, lattice
from .symmetry import conjugate_morphism, normalize_kind
from .z2complex import InvolutiveComplex


@dataclass(frozen=True, eq=False)
class ObservableAlgebraElement:
    """Values of an observable on a sample set; ``size`` counts quaternionic pairs as one."""
    kind: str
    size: int
    samples: SampleSet
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        n = self.n
        if self.values.shape != (len(self.samples), n, n):
            raise DimensionMismatch(f"expected values of shape {(len(self.samples), n, n)}, "
                                    f"got {self.values.shape}")

    @property
    def n(self) -> int:
        return 2 * self.size if self.kind == "quaternionic" else self.size

    @property
    def base(self) -> InvolutiveComplex:
        return self.samples.base

    @classmethod
    def from_vertex_values(cls, kind: str, base: InvolutiveComplex, values) -> "ObservableAlgebraElement":
        values = np.asarray(values, dtype=complex)
        n = values.shape[-1]
        size = n // 2 if normalize_kind(kind) == "quaternionic" else n
        S = lattice(base, 1)
        order = np.array([k[0][0] for k in S.keys])
        return cls(kind, size, S, values[order])

    def vertex_values(self) -> np.ndarray:
        idx = self.samples.vertex_sample
        if (idx < 0).any():
            raise Mismatch("element is not sampled at every vertex")
        return self.values[idx]

    def _like(self, values) -> "ObservableAlgebraElement":
        return ObservableAlgebraElement(self.kind, self.size, self.samples, values)

    def adjoint(self) -> "ObservableAlgebraElement":
        return self._like(adjoint(self.values))

    def __matmul__(self, other: "ObservableAlgebraElement") -> "ObservableAlgebraElement":
        _compatible(self, other)
        return self._like(self.values @ other.values)

    def inverse(self) -> "ObservableAlgebraElement":
        return self._like(np.linalg.inv(self.values))


def _compatible(a: ObservableAlgebraElement, b: ObservableAlgebraElement):
    if a.kind != b.kind:
        raise Mismatch(f"{a.kind} versus {b.kind} observables")
    if a.n != b.n:
        raise Mismatch(f"matrix sizes {a.n} and {b.n} differ")
    if a.samples is not b.samples and a.samples.keys != b.samples.keys:
        raise BaseMismatch("observables are sampled differently")


@dataclass
class AlgebraReport:
    symmetry: float
    worst_symmetry: str | None
    fixed_violations: list
    idempotent: float | None = None
    selfadjoint: float | None = None

    def ok(self, tol: float) -> bool:
        vals = [self.symmetry] + [v for v in (self.idempotent, self.selfadjoint) if v is not None]
        return max(vals) <= tol

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def algebra_check(f: ObservableAlgebraElement, projection: bool = False,
                  config: Config | None = None) -> AlgebraReport:
    """Residuals of ``C(f(tau x)) = f(x)`` and, for projections, of ``p^2 = p = p^*``."""
    cfg = resolve(config)
    S = f.samples
    res = np.linalg.norm(conjugate_morphism(f.kind, f.values[S.tau_index]) - f.values,
                         ord=2, axis=(-2, -1))
    worst = S.describe(int(np.argmax(res))) if len(res) else None
    fixed = [S.describe(i) for i in range(len(S))
             if S.tau_index[i] == i and len(S.keys[i]) == 1 and res[i] > cfg.eqv_tol]
    rep = AlgebraReport(float(res.max()) if len(res) else 0.0, worst, fixed)
    if projection:
        P = f.values
        rep.idempotent = float(np.abs(P @ P - P).max()) if P.size else 0.0
        rep.selfadjoint = float(np.abs(P - adjoint(P)).max()) if P.size else 0.0
    return rep


@dataclass(frozen=True, eq=False)
class AlgebraProjection:
    """A projection ``p`` of the observable algebra, given by its vertex values."""
    element: ObservableAlgebraElement

    @classmethod
    def from_vertex_values(cls, kind: str, base: InvolutiveComplex, values,
                           config: Config | None = None) -> "AlgebraProjection":
        p = cls(ObservableAlgebraElement.from_vertex_values(kind, base, values))
        p.validate(config)
        return p

    @property
    def kind(self) -> str:
        return self.element.kind

    @property
    def base(self) -> InvolutiveComplex:
        return self.element.base

    def validate(self, config: Config | None = None) -> AlgebraReport:
        cfg = resolve(config)
        rep = algebra_check(self.element, projection=True, config=cfg)
        if rep.idempotent > cfg.repair_tol or rep.selfadjoint > cfg.repair_tol:
            raise NotAProjectionField(f"not a projection (idempotence {rep.idempotent:.2e}, "
                                      f"self-adjointness {rep.selfadjoint:.2e})")
        if rep.symmetry > cfg.repair_tol:
            raise Mismatch(f"projection violates the symmetry by {rep.symmetry:.2e} at {rep.worst_symmetry}")
        return rep

    def vertex_values(self) -> np.ndarray:
        return self.element.vertex_values()


def projection_to_bundles(p: AlgebraProjection, config: Config | None = None
                          ) -> tuple[EquivariantProjectionField, EquivariantProjectionField]:
    """Image bundles of ``p`` and ``1 - p``."""
    P = p.vertex_values()
    n = P.shape[-1]
    E = make_field(p.kind, p.base, P, config=config)
    Eperp = make_field(p.kind, p.base, np.eye(n) - P, config=config)
    return E, Eperp


def projection_values(E: EquivariantProjectionField, samples: SampleSet) -> ObservableAlgebraElement:
    n = E.n
    size = n // 2 if E.kind == "quaternionic" else n
    return ObservableAlgebraElement(E.kind, size, samples, E.project(samples)[0])


@dataclass(frozen=True, eq=False)
class Conjugator:
    v: ObservableAlgebraElement
    p: ObservableAlgebraElement
    q: ObservableAlgebraElement
    margin: float

    def residual(self) -> float:
        return conjugacy_residual(self.v, self.p, self.q)

    def unitarity(self) -> float:
        V = self.v.values
        return float(np.abs(adjoint(V) @ V - np.eye(V.shape[-1])).max()) if V.size else 0.0

    def summary(self) -> dict:
        return {"margin": self.margin, "conjugacy_residual": self.residual(),
                "unitarity": self.unitarity(),
                "symmetry": algebra_check(self.v).symmetry}


def conjugacy_residual(v: ObservableAlgebraElement, p: ObservableAlgebraElement,
                       q: ObservableAlgebraElement) -> float:
    """max over samples of ||v p v^{-1} - q||."""
    V = v.values
    R = V @ p.values @ np.linalg.inv(V) - q.values
    return float(np.linalg.norm(R, ord=2, axis=(-2, -1)).max()) if len(R) else 0.0


def _margin(V: np.ndarray) -> float:
    return float(np.linalg.svd(V, compute_uv=False)[:, -1].min()) if len(V) else np.inf


def conjugator_from_isomorphisms(phi: BundleMorphism, phi_perp: BundleMorphism,
                                 config: Config | None = None) -> Conjugator:
    """``v = phi + phi_perp`` for ``phi: E -> F`` and ``phi_perp: E^perp -> F^perp``."""
    cfg = resolve(config)
    kinds = {phi.source.kind, phi.target.kind, phi_perp.source.kind, phi_perp.target.kind}
    if len(kinds) != 1:
        raise Mismatch("isomorphisms mix symmetry types")
    n = phi.source.n
    if {phi.target.n, phi_perp.source.n, phi_perp.target.n} != {n}:
        raise Mismatch("all four bundles must sit in the same trivial bundle")
    if phi.samples.keys != phi_perp.samples.keys:
        raise Mismatch("isomorphisms are sampled differently")
    for a, b, what in ((phi.source, phi_perp.source, "sources"), (phi.target, phi_perp.target, "targets")):
        if a.base.to_raw() != b.base.to_raw():
            raise Mismatch(f"{what} live over different complexes")
        dev = np.abs(a.P + b.P - np.eye(n)).max()
        if dev > cfg.repair_tol:
            raise Mismatch(f"{what} are not complementary (deviation {dev:.2e})")
    for m in (phi, phi_perp):
        rep = verify_morphism(m, cfg)
        if not rep.is_isomorphism:
            raise Mismatch(f"input is not an isomorphism (min singular value {rep.min_singular:.2e})")
    S = phi.samples
    V = phi.F + phi_perp.F
    size = n // 2 if phi.source.kind == "quaternionic" else n
    v = ObservableAlgebraElement(phi.source.kind, size, S, V)
    p = projection_values(phi.source, S)
    q = projection_values(phi.target, S)
    return Conjugator(v, p, q, _margin(V))


def _polar(V: np.ndarray) -> np.ndarray:
    ev, U = np.linalg.eigh(adjoint(V) @ V)
    return V @ (U * ev[..., None, :] ** -0.5) @ adjoint(U)


def unitarize(c: Conjugator, config: Config | None = None) -> Conjugator:
    """Polar part ``u = v (v^* v)^{-1/2}``, computed samplewise."""
    cfg = resolve(config)
    if not c.margin > cfg.iso_tol:
        raise SingularInput(f"conjugator is singular (min singular value {c.margin:.2e})")
    v = c.v
    U = _polar(v.values)
    u = v._like(U)
    if algebra_check(u, config=cfg).symmetry > cfg.eqv_tol / 2:
        S = v.samples
        U = _polar(0.5 * (U + conjugate_morphism(v.kind, U[S.tau_index])))
        u = v._like(U)
    return Conjugator(u, c.p, c.q, _margin(U))


def lemma_converse(v: ObservableAlgebraElement, E: EquivariantProjectionField,
                   Eperp: EquivariantProjectionField, F: EquivariantProjectionField,
                   Fperp: EquivariantProjectionField) -> tuple[BundleMorphism, BundleMorphism]:
    """Restrictions ``q v p: E -> F`` and ``(1-q) v (1-p): E^perp -> F^perp`` of a conjugator."""
    S = v.samples
    if S.base is not E.base:
        raise BaseMismatch("conjugator and bundles live over different complexes")
    V = v.values

    def restriction(src, dst):
        def rule(S2, V=V):
            if S2 is not S:
                raise ValueError("conjugator is only known on its own samples")
            return dst.project(S2)[0] @ V @ src.project(S2)[0]
        return BundleMorphism(src, dst, S, rule(S), rule)

    return restriction(E, F), restriction(Eperp, Fperp)


def stabilize_projection(p: AlgebraProjection, r: AlgebraProjection) -> AlgebraProjection:
    """Block-diagonal projection ``p + r``."""
    if p.kind != r.kind:
        raise Mismatch(f"{p.kind} versus {r.kind} projections")
    if p.base.to_raw() != r.base.to_raw():
        raise Mismatch("projections live over different complexes")
    P, R = p.vertex_values(), r.vertex_values()
    V, a, b = P.shape[0], P.shape[-1], R.shape[-1]
    out = np.zeros((V, a + b, a + b), dtype=complex)
    out[:, :a, :a] = P
    out[:, a:, a:] = R
    return AlgebraProjection(ObservableAlgebraElement.from_vertex_values(p.kind, p.base, out))


__all__ = ["ObservableAlgebraElement", "AlgebraReport", "algebra_check", "AlgebraProjection",
           "projection_to_bundles", "projection_values", "Conjugator", "conjugacy_residual",
           "conjugator_from_isomorphisms", "unitarize", "lemma_converse", "stabilize_projection"]
