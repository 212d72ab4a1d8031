"""Finite simplicial complexes with a simplicial involution.

A complex is stored by vertex index; ``simplices`` holds every simplex
(all faces included) as a sorted tuple of indices.  The free-orbit
condition is enforced at construction time: a simplex that is mapped to
itself by the involution must be fixed pointwise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    MixedOrbitSimplex,
    NonInvolutive,
    NotASubcomplex,
    NotSimplicial,
    ParseError,
    SubcomplexInvalid,
    UnsupportedDimension,
)

Simplex = tuple[int, ...]


def _closure(simplices: Iterable[Sequence[int]]) -> frozenset[Simplex]:
    out: set[Simplex] = set()
    for s in simplices:
        s = tuple(sorted(set(s)))
        if not s or s in out:
            continue
        for r in range(1, len(s) + 1):
            out.update(itertools.combinations(s, r))
    return frozenset(out)


@dataclass(frozen=True)
class DimensionProfile:
    d0: int
    d1: int

    def shifted(self) -> "DimensionProfile":
        return DimensionProfile(self.d0 + 1 if self.d0 >= 0 else -1,
                                self.d1 + 1 if self.d1 >= 0 else -1)


@dataclass(frozen=True, eq=False)
class InvolutiveComplex:
    vertices: tuple[str, ...]
    simplices: frozenset[Simplex]
    tau: tuple[int, ...]
    marked: frozenset[Simplex] = frozenset()
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})
        self._validate()

    # -- construction -------------------------------------------------
    @classmethod
    def from_maximal(cls, vertices: Sequence[str], maximal: Iterable[Sequence[str]],
                     involution: Mapping[str, str],
                     subcomplex: Iterable[Sequence[str]] = ()) -> "InvolutiveComplex":
        vertices = tuple(str(v) for v in vertices)
        index = {v: i for i, v in enumerate(vertices)}
        if len(index) != len(vertices):
            raise ParseError("duplicate vertex ids")
        try:
            tau = tuple(index[str(involution[v])] for v in vertices)
        except KeyError as exc:
            raise NonInvolutive(f"involution undefined or leaves the vertex set at {exc}") from None
        try:
            simp = [[index[str(v)] for v in s] for s in maximal]
            simp += [[i] for i in range(len(vertices))]
            marked = [[index[str(v)] for v in s] for s in subcomplex]
        except KeyError as exc:
            raise ParseError(f"unknown vertex {exc}") from None
        return cls(vertices, _closure(simp), tau, _closure(marked))

    def _validate(self) -> None:
        n = len(self.vertices)
        if len(self.tau) != n or any(not 0 <= t < n for t in self.tau):
            raise NonInvolutive("involution is not a map on the vertex set")
        for i, t in enumerate(self.tau):
            if self.tau[t] != i:
                raise NonInvolutive(f"tau^2 != id at vertex {self.vertices[i]!r}")
        for s in self.simplices:
            img = self.image(s)
            if img not in self.simplices:
                raise NotSimplicial(f"image of simplex {self.names(s)} is not a simplex")
            if img == s and any(self.tau[v] != v for v in s):
                raise MixedOrbitSimplex(
                    f"simplex {self.names(s)} is tau-invariant but not fixed pointwise; "
                    "subdivide the complex first")
        for s in self.marked:
            if s not in self.simplices:
                raise SubcomplexInvalid(f"marked simplex {self.names(s)} is not in the complex")
            if self.image(s) not in self.marked:
                raise SubcomplexInvalid(f"marked subcomplex is not tau-invariant at {self.names(s)}")

    # -- queries ------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def dim(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    def index(self, vid: str) -> int:
        return self._index[vid]

    def names(self, s: Simplex) -> list[str]:
        return [self.vertices[v] for v in s]

    def image(self, s: Simplex) -> Simplex:
        return tuple(sorted(self.tau[v] for v in s))

    def is_fixed(self, s: Simplex) -> bool:
        return all(self.tau[v] == v for v in s)

    def orbit_key(self, v: int) -> int:
        return min(v, self.tau[v])

    def ordered(self, s: Simplex) -> Simplex:
        """Vertices of ``s`` in an order that the involution preserves."""
        return tuple(sorted(s, key=self.orbit_key))

    def maximal_simplices(self) -> list[Simplex]:
        by_vertex: dict[int, list[Simplex]] = {}
        for s in self.simplices:
            for v in s:
                by_vertex.setdefault(v, []).append(s)
        out = []
        for s in self.simplices:
            ss = set(s)
            if not any(len(t) > len(s) and ss.issubset(t) for t in by_vertex[s[0]]):
                out.append(s)
        return sorted(out, key=lambda s: (len(s), s))

    def marked_vertices(self) -> set[int]:
        return {s[0] for s in self.marked if len(s) == 1}

    def fixed_vertices(self) -> list[int]:
        return [i for i, t in enumerate(self.tau) if t == i]

    def neighbours(self) -> list[set[int]]:
        nb: list[set[int]] = [set() for _ in self.vertices]
        for s in self.simplices:
            if len(s) == 2:
                nb[s[0]].add(s[1])
                nb[s[1]].add(s[0])
        return nb

    def to_raw(self) -> dict:
        ids = self.vertices
        marked = _maximal_of(self.marked)
        return {
            "vertices": list(ids),
            "maximal_simplices": [[ids[v] for v in s] for s in self.maximal_simplices()],
            "involution": {ids[i]: ids[t] for i, t in enumerate(self.tau)},
            "subcomplex_A": [[ids[v] for v in s] for s in marked],
        }

    def with_marked(self, simplices: Iterable[Sequence[int]]) -> "InvolutiveComplex":
        return InvolutiveComplex(self.vertices, self.simplices, self.tau, _closure(simplices))


def _maximal_of(simplices: frozenset[Simplex]) -> list[Simplex]:
    out = [s for s in simplices
           if not any(len(t) > len(s) and set(s) <= set(t) for t in simplices)]
    return sorted(out, key=lambda s: (len(s), s))


def validate_complex(raw: Mapping) -> InvolutiveComplex:
    """Build and validate a complex from its JSON-style description."""
    try:
        vertices = raw["vertices"]
        maximal = raw.get("maximal_simplices", [])
        involution = raw["involution"]
        sub = raw.get("subcomplex_A", [])
    except (KeyError, AttributeError, TypeError) as exc:
        raise ParseError(f"complex description lacks field {exc}") from None
    return InvolutiveComplex.from_maximal(vertices, maximal, involution, sub)


def dimensions(X: InvolutiveComplex) -> DimensionProfile:
    d0 = d1 = -1
    for s in X.simplices:
        if s in X.marked:
            continue
        if X.is_fixed(s):
            d0 = max(d0, len(s) - 1)
        else:
            d1 = max(d1, len(s) - 1)
    return DimensionProfile(d0, d1)


def subcomplex(X: InvolutiveComplex, keep: Iterable[int], marked=None) -> tuple[InvolutiveComplex, list[int]]:
    """Full subcomplex on the vertex set ``keep``; returns it and the old indices."""
    keep = sorted(set(keep))
    pos = {v: i for i, v in enumerate(keep)}
    if any(X.tau[v] not in pos for v in keep):
        raise NotASubcomplex("vertex set is not tau-invariant")
    simp = [tuple(pos[v] for v in s) for s in X.simplices if all(v in pos for v in s)]
    src_marked = X.marked if marked is None else marked
    mk = [tuple(pos[v] for v in s) for s in src_marked if all(v in pos for v in s)]
    Y = InvolutiveComplex(tuple(X.vertices[v] for v in keep), _closure(simp),
                          tuple(pos[X.tau[v]] for v in keep), _closure(mk))
    return Y, keep


def marked_subcomplex(X: InvolutiveComplex) -> tuple[InvolutiveComplex, list[int]]:
    """The marked subcomplex ``A`` as a complex of its own; returns it and the old indices."""
    keep = sorted(X.marked_vertices())
    pos = {v: i for i, v in enumerate(keep)}
    simp = frozenset(tuple(pos[v] for v in s) for s in X.marked)
    A = InvolutiveComplex(tuple(X.vertices[v] for v in keep), simp,
                          tuple(pos[X.tau[v]] for v in keep), frozenset())
    return A, keep


def fixed_subcomplex(X: InvolutiveComplex) -> InvolutiveComplex:
    keep = X.fixed_vertices()
    pos = {v: i for i, v in enumerate(keep)}
    simp = [tuple(pos[v] for v in s) for s in X.simplices if X.is_fixed(s)]
    mk = [tuple(pos[v] for v in s) for s in X.marked if X.is_fixed(s)]
    return InvolutiveComplex(tuple(X.vertices[v] for v in keep), _closure(simp),
                             tuple(range(len(keep))), _closure(mk))


def subdivide(X: InvolutiveComplex) -> InvolutiveComplex:
    """Barycentric subdivision; vertices are the simplices of ``X``."""
    simplices = sorted(X.simplices, key=lambda s: (len(s), s))
    pos = {s: i for i, s in enumerate(simplices)}
    ids = tuple("[" + ",".join(X.names(s)) + "]" for s in simplices)
    tau = tuple(pos[X.image(s)] for s in simplices)

    maxi = X.maximal_simplices()
    all_faces = list(X.simplices)
    simp = []
    for top in maxi:
        faces = [f for f in all_faces if set(f) <= set(top)]
        simp.extend(chains_of(top, faces, pos))
    marked_faces = list(X.marked)
    mk = []
    for top in _maximal_of(X.marked):
        faces = [f for f in marked_faces if set(f) <= set(top)]
        mk.extend(chains_of(top, faces, pos))
    return InvolutiveComplex(ids, _closure(simp), tau, _closure(mk))


def chains_of(top: Simplex, faces: list[Simplex], pos: dict) -> list[tuple[int, ...]]:
    out = []
    stack = [[top]]
    while stack:
        ch = stack.pop()
        low = ch[-1]
        if len(low) == 1:
            out.append(tuple(pos[f] for f in ch))
            continue
        for f in faces:
            if len(f) == len(low) - 1 and set(f) <= set(low):
                stack.append(ch + [f])
    return out


@dataclass(frozen=True, eq=False)
class CylinderPair:
    """``Y = X x [0, 1]`` cut into ``layers`` prisms, with ``B`` marked on ``Y``."""
    Y: InvolutiveComplex
    X: InvolutiveComplex
    layers: int

    @property
    def B(self) -> frozenset[Simplex]:
        return self.Y.marked

    def vertex(self, v: int, level: int) -> int:
        return level * self.X.n_vertices + v

    def level_vertices(self, level: int) -> list[int]:
        V = self.X.n_vertices
        return list(range(level * V, (level + 1) * V))

    def locate(self, support: Sequence[int], weights: Sequence[float], t: float):
        """Express the point ``(sum w_i v_i, t)`` in barycentric coordinates of ``Y``."""
        M = self.layers
        level = min(int(t * M), M - 1)
        s = t * M - level
        order = sorted(range(len(support)), key=lambda i: self.X.orbit_key(support[i]))
        vs = [support[i] for i in order]
        lam = [float(weights[i]) for i in order]
        pts: dict[int, float] = {}
        tail = 0.0
        for i in range(len(vs) - 1, -1, -1):
            if tail <= s + 1e-15 and s <= tail + lam[i] + 1e-15 or i == 0:
                beta = min(max(s - tail, 0.0), lam[i])
                for l in range(i):
                    pts[self.vertex(vs[l], level)] = lam[l]
                if lam[i] - beta > 0:
                    pts[self.vertex(vs[i], level)] = lam[i] - beta
                if beta > 0:
                    pts[self.vertex(vs[i], level + 1)] = beta
                for l in range(i + 1, len(vs)):
                    pts[self.vertex(vs[l], level + 1)] = lam[l]
                break
            tail += lam[i]
        return list(pts.keys()), list(pts.values())


def cylinder(X: InvolutiveComplex, layers: int = 2) -> CylinderPair:
    """Staircase prism triangulation of ``X x I`` with ``I`` cut into ``layers`` pieces."""
    if layers < 1:
        raise ValueError("layers must be positive")
    V = X.n_vertices
    ids = tuple(f"{v}@{l}" for l in range(layers + 1) for v in X.vertices)
    tau = tuple(l * V + X.tau[v] for l in range(layers + 1) for v in range(V))
    simp = []
    for s in X.maximal_simplices():
        o = X.ordered(s)
        for l in range(layers):
            for i in range(len(o)):
                simp.append([l * V + v for v in o[: i + 1]] + [(l + 1) * V + v for v in o[i:]])
    marked = [[v] for v in range(V)] + [[layers * V + v] for v in range(V)]
    marked += [list(s) for s in X.simplices]
    marked += [[layers * V + v for v in s] for s in X.simplices]
    for s in _maximal_of(X.marked):
        o = X.ordered(s)
        for l in range(layers):
            for i in range(len(o)):
                marked.append([l * V + v for v in o[: i + 1]] + [(l + 1) * V + v for v in o[i:]])
    Y = InvolutiveComplex(ids, _closure(simp), tau, _closure(marked))
    return CylinderPair(Y, X, layers)


def build_torus(d: int, involution: str = "conjugation", points: int | None = None,
                marked: Iterable[Sequence[int]] = ()) -> InvolutiveComplex:
    """Kuhn triangulation of the d-torus with ``points`` vertices per circle.

    ``conjugation`` sends each angle to its negative, ``free_shift`` moves the
    first angle by half a period.
    """
    if not 1 <= d <= 4:
        raise UnsupportedDimension(f"torus dimension {d} outside 1..4")
    if points is None:
        points = 8 if d <= 2 else 4
    if points < 4 or points % 2:
        raise UnsupportedDimension("need an even number of at least 4 points per circle")
    N = points
    grid = list(itertools.product(range(N), repeat=d))
    pos = {g: i for i, g in enumerate(grid)}
    ids = tuple(",".join(map(str, g)) for g in grid)
    if involution == "conjugation":
        tau = tuple(pos[tuple((-c) % N for c in g)] for g in grid)
    elif involution == "free_shift":
        tau = tuple(pos[((g[0] + N // 2) % N,) + g[1:]] for g in grid)
    else:
        raise ValueError(f"unknown involution {involution!r}")
    simp = []
    for g in grid:
        for perm in itertools.permutations(range(d)):
            cur = list(g)
            verts = [pos[tuple(cur)]]
            for axis in perm:
                cur[axis] = (cur[axis] + 1) % N
                verts.append(pos[tuple(cur)])
            simp.append(verts)
    return InvolutiveComplex(ids, _closure(simp), tau, _closure(marked))


def torus_angles(X: InvolutiveComplex) -> np.ndarray:
    """Angles (V, d) of the torus vertices built by :func:`build_torus`."""
    coords = np.array([[int(c) for c in v.split(",")] for v in X.vertices])
    N = coords.max() + 1
    return 2 * np.pi * coords / N
