"""Barycentric sample lattices on a complex.

A sample is a point of some simplex with rational barycentric weights.
Its key is the sorted tuple of ``(vertex, weight)`` pairs with positive
weight, so the same geometric point gets the same key at every
resolution that contains it.
"""
from __future__ import annotations

import functools
import itertools
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .z2complex import InvolutiveComplex

SampleKey = tuple[tuple[int, Fraction], ...]


def _compositions(total: int, parts: int):
    """Positive integer compositions of ``total`` into ``parts`` summands."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        prev = 0
        out = []
        for c in cuts + (total,):
            out.append(c - prev)
            prev = c
        yield out


def lattice_keys(X: InvolutiveComplex, resolution: int) -> list[SampleKey]:
    keys = []
    for s in sorted(X.simplices, key=lambda s: (len(s), s)):
        if len(s) > resolution:
            continue
        for comp in _compositions(resolution, len(s)):
            keys.append(tuple((v, Fraction(a, resolution)) for v, a in zip(s, comp)))
    return keys


class SampleSet:
    """Samples of ``base`` stored as padded support/weight arrays."""

    def __init__(self, base: InvolutiveComplex, keys: Sequence[SampleKey], resolution: int | None = None):
        self.base = base
        self.keys = list(keys)
        self.resolution = resolution
        self.index = {k: i for i, k in enumerate(self.keys)}
        if len(self.index) != len(self.keys):
            raise ValueError("duplicate sample keys")
        D = max((len(k) for k in self.keys), default=1)
        S = len(self.keys)
        self.support = np.zeros((S, D), dtype=np.int64)
        self.weights = np.zeros((S, D))
        for i, k in enumerate(self.keys):
            for j, (v, w) in enumerate(k):
                self.support[i, j] = v
                self.weights[i, j] = float(w)
        tau = base.tau
        try:
            self.tau_index = np.array(
                [self.index[tuple(sorted((tau[v], w) for v, w in k))] for k in self.keys],
                dtype=np.int64)
        except KeyError:
            raise ValueError("sample set is not closed under the involution") from None
        marked = base.marked
        self.in_marked = np.array([tuple(v for v, _ in k) in marked for k in self.keys], dtype=bool)
        self.vertex_sample = np.full(base.n_vertices, -1, dtype=np.int64)
        for i, k in enumerate(self.keys):
            if len(k) == 1:
                self.vertex_sample[k[0][0]] = i
        self._containing: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.keys)

    def containing(self, v: int) -> np.ndarray:
        """Indices of the samples whose support contains vertex ``v``."""
        if self._containing is None:
            lists: list[list[int]] = [[] for _ in range(self.base.n_vertices)]
            for i, k in enumerate(self.keys):
                for u, _ in k:
                    lists[u].append(i)
            self._containing = [np.array(l, dtype=np.int64) for l in lists]
        return self._containing[v]

    def id_key(self, i: int) -> tuple[tuple[str, Fraction], ...]:
        names = self.base.vertices
        return tuple(sorted((names[v], w) for v, w in self.keys[i]))

    def describe(self, i: int) -> str:
        return " + ".join(f"{w}*{n}" for n, w in self.id_key(i))

    def combine(self, vertex_values: np.ndarray) -> np.ndarray:
        """Barycentric combination of per-vertex arrays at every sample."""
        vals = vertex_values[self.support]          # (S, D, ...)
        w = self.weights.reshape(self.weights.shape + (1,) * (vals.ndim - 2))
        return (w * vals).sum(axis=1)


@functools.lru_cache(maxsize=64)
def lattice(base: InvolutiveComplex, resolution: int) -> SampleSet:
    return SampleSet(base, lattice_keys(base, resolution), resolution)


def from_id_keys(base: InvolutiveComplex, id_keys: Iterable[Sequence[tuple[str, Fraction]]]) -> SampleSet:
    keys = [tuple(sorted((base.index(n), Fraction(w)) for n, w in k)) for k in id_keys]
    return SampleSet(base, keys)


def transfer_index(src: SampleSet, dst: SampleSet) -> np.ndarray:
    """For each sample of ``src``, its index in ``dst`` (matched by vertex ids), or -1."""
    lookup = {dst.id_key(i): i for i in range(len(dst))}
    return np.array([lookup.get(src.id_key(i), -1) for i in range(len(src))], dtype=np.int64)
