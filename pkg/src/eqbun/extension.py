"""Rank thresholds, nonvanishing section extension, and trivial-summand splitting.

Sections are built vertex by vertex.  A vertex value is the apex of a cone
over the already-assigned part of its star, so choosing it is the disk
extension problem: the apex direction has to miss the antipodes of the
boundary values.  Fixed vertices are handled first with values in the
real form (real case) or with the automatically independent pair
``(s1, -J s1)`` (quaternionic case); free vertices come in orbits, the
partner value being forced by equivariance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bundles import (
    BundleMorphism,
    EquivariantProjectionField,
    SampledSection,
    identity_morphism,
    orthogonal_complement_of_section,
    splitting_certificate,
    verify_morphism,
)
from .config import Config, resolve
from .errors import (
    DimensionBoundViolated,
    MarginTooSmall,
    Mismatch,
    NoMissedDirectionFound,
    NotEquivariant,
    RankBelowThreshold,
)
from .symmetry import normalize_kind, structure_vector
from .z2complex import DimensionProfile, dimensions

log = logging.getLogger(__name__)


def _ceil_half(a: int) -> int:
    return -((-a) // 2)


@dataclass(frozen=True)
class Thresholds:
    k0: int
    k1: int


def thresholds(kind: str, profile: DimensionProfile) -> Thresholds:
    d0, d1 = profile.d0, profile.d1
    if normalize_kind(kind) == "real":
        k0 = max(d0, _ceil_half(d1 - 1))
        k1 = max(d0 + 1, _ceil_half(d1))
    else:
        k0 = max(_ceil_half(d0 - 3), _ceil_half(d1 - 1))
        k1 = max(_ceil_half(d0 - 2), _ceil_half(d1))
    return Thresholds(max(k0, 0), max(k1, 0))


def split_rank(kind: str, k: int, k0: int) -> int:
    """Rank of the trivial summand guaranteed above the threshold."""
    if k < k0:
        return 0
    if normalize_kind(kind) == "real":
        return k - k0
    return 2 * ((k - k0) // 2)


@dataclass(frozen=True)
class FieldSelector:
    field: str

    @property
    def c(self) -> int:
        return {"R": 1, "C": 2, "H": 4}[self.field]

    def max_cell_dim(self, rank: int) -> int:
        """Largest cell dimension over which a nonvanishing section extends (d <= c k - 1)."""
        return self.c * rank - 1


# -- missed directions and disks --------------------------------------

def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def angular_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between unit vectors of C^k seen as R^{2k}."""
    re = np.real(np.sum(np.conj(a) * b, axis=-1))
    return np.arccos(np.clip(re, -1.0, 1.0))


def find_missed_direction(antipodes: np.ndarray, rng: np.random.Generator, mu: float,
                          n_retry: int, first: np.ndarray | None = None,
                          real: bool = False) -> tuple[np.ndarray, int]:
    """Unit vector at angle >= mu from every row of ``antipodes``; returns (direction, draws)."""
    k = antipodes.shape[-1]
    cands = []
    if first is not None and np.linalg.norm(first) > 1e-12:
        cands.append(_unit(first))
    for tries in range(n_retry + len(cands)):
        if tries < len(cands):
            v = cands[tries]
        else:
            g = rng.standard_normal(k) if real else rng.standard_normal(k) + 1j * rng.standard_normal(k)
            v = _unit(g.astype(complex))
        if len(antipodes) == 0 or angular_distance(antipodes, v[None, :]).min() >= mu:
            return v, tries + 1
    raise NoMissedDirectionFound(f"no direction missed the boundary image after {n_retry} draws")


@dataclass
class DiskExtension:
    direction: np.ndarray
    rho: float
    t: np.ndarray
    values: np.ndarray      # (len(t), m, k); values[-1] are the boundary values
    margin: float
    draws: int


def extend_nonvanishing_over_disk(boundary_values, j: int, k: int | None = None,
                                  rng: np.random.Generator | None = None,
                                  config: Config | None = None,
                                  t: np.ndarray | None = None,
                                  direction: np.ndarray | None = None) -> DiskExtension:
    """Cone extension s(t x) = (1 - t) rho v + t s(x) of a map from the boundary sphere."""
    cfg = resolve(config)
    b = np.asarray(boundary_values, dtype=complex)
    if b.ndim == 1:
        b = b[None, :]
    k = b.shape[-1] if k is None else k
    if b.shape[-1] != k:
        raise ValueError("boundary values do not live in C^k")
    if j > 2 * k - 1:
        raise DimensionBoundViolated(f"cannot extend over a {j}-disk into C^{k}\\0 (needs j <= {2 * k - 1})")
    norms = np.linalg.norm(b, axis=-1)
    if len(norms) and norms.min() <= 0:
        raise MarginTooSmall("boundary values must be nonzero")
    rng = rng or np.random.default_rng()
    antipodes = -_unit(b)
    if direction is None:
        mean = _unit(b).mean(axis=0) if len(b) else np.zeros(k)
        v, draws = find_missed_direction(antipodes, rng, cfg.mu, cfg.n_retry, first=mean)
    else:
        v, draws = _unit(np.asarray(direction, dtype=complex)), 0
    rho = float(norms.mean()) if len(norms) else 1.0
    t = np.linspace(0.0, 1.0, 17) if t is None else np.asarray(t, dtype=float)
    vals = (1 - t)[:, None, None] * rho * v[None, None, :] + t[:, None, None] * b[None, :, :]
    if len(t) and t[-1] == 1.0:
        vals[-1] = b
    margin = float(np.linalg.norm(vals, axis=-1).min()) if vals.size else np.inf
    return DiskExtension(v, rho, t, vals, margin, draws)


# -- section extension over a complex ---------------------------------

@dataclass
class ExtensionLog:
    cells: list = field(default_factory=list)

    def add(self, **kw):
        self.cells.append(kw)


def _check_bounds(E: EquivariantProjectionField, profile: DimensionProfile, fixed_only=False):
    k = E.rank
    if E.symmetry.quaternionic:
        fixed_bound, free_bound = FieldSelector("H").max_cell_dim(k // 2), 2 * k - 3
    else:
        fixed_bound, free_bound = FieldSelector("R").max_cell_dim(k), FieldSelector("C").max_cell_dim(k)
    if profile.d0 > fixed_bound:
        raise DimensionBoundViolated(
            f"fixed cells of dimension {profile.d0} exceed {fixed_bound} for rank {k}")
    if not fixed_only and profile.d1 > free_bound:
        raise DimensionBoundViolated(
            f"free cells of dimension {profile.d1} exceed {free_bound} for rank {k}")


class _Extender:
    """Greedy vertex-by-vertex construction of an equivariant section of ``E``."""

    def __init__(self, E: EquivariantProjectionField, given: Mapping[int, np.ndarray],
                 rng: np.random.Generator, cfg: Config, xlog: ExtensionLog, tag=None):
        self.E, self.rng, self.cfg, self.log, self.tag = E, rng, cfg, xlog, tag
        X = E.base
        self.X = X
        self.tau = np.asarray(X.tau)
        self.quat = E.symmetry.quaternionic
        self.S = E.samples()
        self.Pt = E.project(self.S)[0]
        self.s1 = np.zeros((X.n_vertices, E.n), dtype=complex)
        self.s2 = np.zeros_like(self.s1)
        self.assigned = np.zeros(X.n_vertices, dtype=bool)
        self.nbrs = X.neighbours()
        for v, val in given.items():
            self.s1[v] = val
            self.assigned[v] = True
        if self.quat:
            idx = np.flatnonzero(self.assigned)
            self.s2[idx] = -structure_vector("quaternionic", self.s1[self.tau[idx]])
        self.h1 = self._harmonic(self.s1)
        self.h2 = self._harmonic(self.s2) if self.quat else None
        # one reference vector per run, so that vertices without assigned
        # neighbours (the first fixed points) start from coherent values
        self.ref = rng.standard_normal(E.n) + (1j * rng.standard_normal(E.n) if self.quat else 0)

    def _harmonic(self, vals: np.ndarray, iters: int = 200) -> np.ndarray:
        """Projected neighbour averaging of the prescribed values, used as the first candidate."""
        if not self.assigned.any() or self.assigned.all():
            return vals.copy()
        I = np.array([u for u in range(len(self.nbrs)) for _ in self.nbrs[u]], dtype=np.int64)
        J = np.array([w for u in range(len(self.nbrs)) for w in self.nbrs[u]], dtype=np.int64)
        deg = np.maximum(np.bincount(I, minlength=len(self.nbrs)), 1)[:, None]
        free = ~self.assigned
        Pf = self.E.P[free]
        h = vals.copy()
        for _ in range(iters):
            avg = np.zeros_like(h)
            np.add.at(avg, I, h[J])
            h[free] = np.einsum("vij,vj->vi", Pf, avg[free] / deg[free])
        return h

    # sample evaluation ------------------------------------------------
    def _completed(self, v: int) -> np.ndarray:
        idx = self.S.containing(v)
        sup = self.S.support[idx]
        w = self.S.weights[idx]
        ok = self.assigned[sup] | (sup == v) | (w == 0)
        return idx[ok.all(axis=1)]

    def _eval(self, idx: np.ndarray, vals: np.ndarray, skip: int | None = None) -> np.ndarray:
        sup = self.S.support[idx]
        w = self.S.weights[idx].copy()
        if skip is not None:
            w[sup == skip] = 0.0
        comb = (w[..., None] * vals[sup]).sum(axis=1)
        return np.einsum("sij,sj->si", self.Pt[idx], comb)

    def _weight_of(self, idx: np.ndarray, v: int) -> np.ndarray:
        sup = self.S.support[idx]
        return (self.S.weights[idx] * (sup == v)).sum(axis=1)

    # candidates -------------------------------------------------------
    def _neighbour_mean(self, v: int, vals: np.ndarray) -> np.ndarray:
        nb = [u for u in self.nbrs[v] if self.assigned[u]]
        return vals[nb].sum(axis=0) if nb else np.zeros(self.E.n, dtype=complex)

    def _choose(self, v: int, proj: np.ndarray, vals: np.ndarray, prior: np.ndarray,
                real: bool, check) -> tuple[np.ndarray, int]:
        """Find a unit vector in the range of ``proj`` passing the cone test and ``check``."""
        cfg = self.cfg
        done = self._completed(v)
        b = self._eval(done, vals, skip=v) if len(done) else np.zeros((0, self.E.n))
        b = b @ proj.T                                     # into the fiber at v
        bn = np.linalg.norm(b, axis=-1)
        antipodes = -_unit(b[bn > 1e-12])
        firsts = [proj @ prior[v], proj @ self._neighbour_mean(v, vals), proj @ self.ref]
        firsts = [(f.real if real else f) for f in firsts]
        firsts = [_unit(f.astype(complex)) for f in firsts if np.linalg.norm(f) > 1e-12]
        draws = 0
        for attempt in range(cfg.n_retry + len(firsts)):
            if attempt < len(firsts):
                w = firsts[attempt]
            else:
                g = self.rng.standard_normal(self.E.n)
                if not real:
                    g = g + 1j * self.rng.standard_normal(self.E.n)
                w = proj @ g
                if real:
                    w = w.real
                if np.linalg.norm(w) < 1e-12:
                    continue
                w = _unit(w.astype(complex))
            draws += 1
            if len(antipodes) and angular_distance(antipodes, w[None, :]).min() < cfg.mu:
                continue
            if check(w, done):
                return w, draws
        raise NoMissedDirectionFound(
            f"no admissible value at vertex {self.X.vertices[v]!r} after {cfg.n_retry} draws"
            + (f" ({self.tag})" if self.tag else "") + "; refine the sample grid or triangulation")

    def _norm_check(self, v: int, vals: np.ndarray):
        def check(w, done):
            if not len(done):
                return True
            old = vals[v].copy()
            vals[v] = w
            ok = np.linalg.norm(self._eval(done, vals), axis=-1).min() >= self.cfg.margin_min
            vals[v] = old
            return ok
        return check

    def _pair_check(self, v: int, partner_s2_from_s1: bool):
        def check(w, done):
            if not len(done):
                return True
            old1, old2 = self.s1[v].copy(), self.s2[v].copy()
            if partner_s2_from_s1:
                self.s1[v] = w
                self.s2[v] = -structure_vector("quaternionic", w)
            else:
                self.s2[v] = w
            pair = np.stack([self._eval(done, self.s1), self._eval(done, self.s2)], axis=-1)
            ok = np.linalg.svd(pair, compute_uv=False)[:, -1].min() >= self.cfg.pair_margin_min
            self.s1[v], self.s2[v] = old1, old2
            return ok
        return check

    # phases -----------------------------------------------------------
    def _order(self, pool: set[int]):
        while pool:
            v = max(pool, key=lambda u: (sum(self.assigned[x] for x in self.nbrs[u]), -self.X.orbit_key(u), -u))
            yield v
            pool.discard(v)
            pool.discard(int(self.tau[v]))

    def run(self) -> np.ndarray:
        X = self.X
        fixed = {v for v in X.fixed_vertices() if not self.assigned[v]}
        for v in self._order(fixed):
            self._assign_fixed(v)
        free = {v for v in range(X.n_vertices) if not self.assigned[v]}
        for v in self._order(free):
            self._assign_free(v)
        return self.s1

    def _assign_fixed(self, v: int):
        P = self.E.P[v]
        if self.quat:
            w, draws = self._choose(v, P, self.s1, self.h1, real=False, check=self._pair_check(v, True))
            self.s1[v] = w
            self.s2[v] = -structure_vector("quaternionic", w)
        else:
            w, draws = self._choose(v, P.real, self.s1, self.h1, real=True, check=self._norm_check(v, self.s1))
            self.s1[v] = w.real
        self.assigned[v] = True
        self.log.add(vertex=self.X.vertices[v], kind="fixed", draws=draws)

    def _assign_free(self, v: int):
        tv = int(self.tau[v])
        P = self.E.P[v]
        w, draws = self._choose(v, P, self.s1, self.h1, real=False, check=self._norm_check(v, self.s1))
        self.s1[v] = w
        if self.quat:
            Pperp = P - np.outer(w, np.conj(w))
            w2, d2 = self._choose(v, Pperp, self.s2, self.h2, real=False, check=self._pair_check(v, False))
            self.s2[v] = w2
            self.s1[tv] = structure_vector("quaternionic", w2)
            self.s2[tv] = -structure_vector("quaternionic", w)
            draws += d2
        else:
            self.s1[tv] = np.conj(w)
        self.assigned[v] = self.assigned[tv] = True
        self.log.add(vertex=self.X.vertices[v], partner=self.X.vertices[tv], kind="free", draws=draws)


def extend_equivariant_section(E: EquivariantProjectionField, given: Mapping[int, np.ndarray] | None = None,
                               rng: np.random.Generator | None = None, config: Config | None = None,
                               xlog: ExtensionLog | None = None, check_bounds: bool = True,
                               tag: str | None = None) -> SampledSection:
    """Extend an equivariant section given on the marked subcomplex to all of ``E.base``."""
    cfg = resolve(config)
    if check_bounds:
        _check_bounds(E, dimensions(E.base))
    ext = _Extender(E, given or {}, rng or np.random.default_rng(), cfg, xlog or ExtensionLog(), tag)
    return SampledSection(E, ext.run().copy())


def extend_section_fixed_locus(kind: str, E: EquivariantProjectionField,
                               given: Mapping[int, np.ndarray] | None = None,
                               rng: np.random.Generator | None = None,
                               config: Config | None = None,
                               check_bounds: bool = True) -> SampledSection:
    """Extend a section from ``A^tau`` over a complex on which the involution is trivial.

    With ``check_bounds=False`` the construction is attempted outside the
    dimension range where it is guaranteed; a failure then surfaces as
    NoMissedDirectionFound instead of DimensionBoundViolated.
    """
    if normalize_kind(kind) != E.kind:
        raise Mismatch("symmetry kind does not match the bundle")
    X = E.base
    if any(X.tau[v] != v for v in range(X.n_vertices)):
        raise Mismatch("extend_section_fixed_locus needs a bundle over a fixed complex")
    if check_bounds:
        _check_bounds(E, dimensions(X), fixed_only=True)
    return extend_equivariant_section(E, given, rng, config, check_bounds=False)


# -- splitting --------------------------------------------------------

@dataclass
class SplitResult:
    E0: EquivariantProjectionField
    certificate: BundleMorphism
    m: int
    frame: np.ndarray
    report: object
    peels: list = field(default_factory=list)
    cells: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"m": self.m, "rank_E0": self.E0.rank, "gap_E0": self.E0.gap,
                "certificate": self.report.as_dict(), "peels": self.peels}


def frame_from_morphism(phi: BundleMorphism, E: EquivariantProjectionField, m: int) -> dict[int, np.ndarray]:
    """Vertex frame (images of the last ``m`` source coordinates) of a splitting over ``A``."""
    out = {}
    S = phi.samples
    for v_sub in range(S.base.n_vertices):
        i = S.vertex_sample[v_sub]
        if i < 0:
            continue
        F = phi.F[i]
        v = E.base.index(S.base.vertices[v_sub])
        out[v] = F[:, F.shape[1] - m:]
    return out


def _validate_given(E, frame: Mapping[int, np.ndarray], m: int, cfg: Config):
    A = E.base.marked_vertices()
    missing = [E.base.vertices[v] for v in A if v not in frame]
    if missing:
        raise Mismatch(f"prescribed splitting misses marked vertices {missing[:4]}")
    tau = E.base.tau
    for v in A:
        t = np.asarray(frame[v])
        if t.shape != (E.n, m):
            raise Mismatch(f"prescribed frame at {E.base.vertices[v]!r} has shape {t.shape}")
        if np.abs(E.P[v] @ t - t).max() > cfg.repair_tol:
            raise Mismatch(f"prescribed frame leaves the bundle at {E.base.vertices[v]!r}")
        if np.linalg.svd(t, compute_uv=False)[-1] <= cfg.iso_tol if m else False:
            raise MarginTooSmall(f"prescribed frame is degenerate at {E.base.vertices[v]!r}")
        tt = np.asarray(frame[tau[v]])
        if E.kind == "real":
            res = np.abs(tt - np.conj(t)).max() if m else 0.0
        else:
            # columns (2i, 2i+1) are (s1, s2) with s2(x) = -J s1(tau x)
            res = np.abs(t[:, 1::2] + structure_vector("quaternionic", tt[:, 0::2].T).T).max() if m else 0.0
        if res > cfg.repair_tol:
            raise NotEquivariant(f"prescribed frame is not equivariant at {E.base.vertices[v]!r}")


def split_trivial_summand(kind: str, E: EquivariantProjectionField,
                          given_splitting_on_A: Mapping | BundleMorphism | None = None,
                          count: int | None = None, force: bool = False,
                          rng: np.random.Generator | None = None, seed: int | None = None,
                          config: Config | None = None) -> SplitResult:
    """Split ``E = E0 + trivial(m)`` extending a splitting prescribed on the marked subcomplex.

    ``count`` is the rank of the trivial summand to split (default: the
    largest one the threshold guarantees).  ``force`` allows attempts below
    the threshold; they carry no guarantee.
    """
    cfg = resolve(config)
    kind = normalize_kind(kind)
    if kind != E.kind:
        raise Mismatch(f"bundle is {E.kind}, requested {kind}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    X = E.base
    profile = dimensions(X)
    th = thresholds(kind, profile)
    k = E.rank
    step = 2 if kind == "quaternionic" else 1
    m_max = split_rank(kind, k, th.k0)
    if k < th.k0 and not force:
        raise RankBelowThreshold(f"rank {k} is below the threshold k0 = {th.k0} for {profile}")
    if count is None:
        count = m_max if (m_max or not force) else step
    if count % step:
        raise Mismatch("quaternionic trivial summands have even rank")
    if count > m_max and not force:
        raise RankBelowThreshold(f"splitting rank {count} exceeds the guaranteed {m_max} "
                                 f"(k = {k}, k0 = {th.k0})")
    if count > k:
        raise RankBelowThreshold(f"cannot split rank {count} from a rank-{k} bundle")

    A = X.marked_vertices()
    if isinstance(given_splitting_on_A, BundleMorphism):
        given = frame_from_morphism(given_splitting_on_A, E, count)
    elif given_splitting_on_A is None:
        given = {}
    else:
        given = {(X.index(v) if isinstance(v, str) else int(v)): np.asarray(t, complex)
                 for v, t in given_splitting_on_A.items()}
    if A or given:
        _validate_given(E, given, count, cfg)

    frame = np.zeros((X.n_vertices, E.n, count), dtype=complex)
    for v in A:
        frame[v] = given[v]
    cur = E
    peels, xlog = [], ExtensionLog()
    offA = np.array([v not in A for v in range(X.n_vertices)])
    for j in range(count // step):
        cols = slice(step * j, step * (j + 1))
        seed_vals = {v: cur.P[v] @ frame[v][:, step * j] for v in A}
        try:
            s = extend_equivariant_section(cur, seed_vals, rng, cfg, xlog, tag=f"peel {j + 1}")
            S = cur.samples()
            eps, sigma = s.margin(S), s.pair_margin(S)
            nxt, _ = orthogonal_complement_of_section(s, cfg)
        except Exception as exc:
            exc.args = (f"peel {j + 1}/{count // step}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        vf = s.vertex_frame()
        frame[offA, :, cols] = vf[offA]
        peels.append({"peel": j + 1, "rank_before": cur.rank, "margin": eps,
                      "pair_margin": sigma if cur.symmetry.quaternionic else None,
                      "gap_after": nxt.gap})
        log.info("peel %d: rank %d -> %d, margin %.3e", j + 1, cur.rank, nxt.rank, eps)
        cur = nxt
    if count:
        cert = splitting_certificate(E, cur, frame)
    else:
        cert = identity_morphism(E)
    report = verify_morphism(cert, cfg)
    if not report.is_isomorphism:
        raise MarginTooSmall(f"splitting certificate is not an isomorphism "
                             f"(min singular value {report.min_singular:.3e} at {report.worst_singular})")
    return SplitResult(cur, cert, count, frame, report, peels, xlog.cells)


def agreement_on_marked(result: SplitResult, given: Mapping[int, np.ndarray]) -> float:
    """Largest deviation, over samples in the marked subcomplex, of the certificate's
    trivial columns from the prescribed frame evaluated by the same interpolation rule."""
    E = result.certificate.target
    S = result.certificate.samples
    m = result.m
    if not S.in_marked.any() or m == 0:
        return 0.0
    F = result.certificate.F[S.in_marked][:, :, E.n:]
    pres = np.zeros((E.base.n_vertices, E.n, m), dtype=complex)
    for v, t in given.items():
        pres[v] = t
    Pm = E.project(S)[0][S.in_marked]
    expected = Pm @ S.combine(pres)[S.in_marked]
    return float(np.abs(F - expected).max())


__all__ = [
    "Thresholds", "thresholds", "split_rank", "FieldSelector", "DiskExtension",
    "extend_nonvanishing_over_disk", "find_missed_direction", "extend_equivariant_section",
    "extend_section_fixed_locus", "split_trivial_summand", "SplitResult", "frame_from_morphism",
    "agreement_on_marked", "angular_distance",
]
