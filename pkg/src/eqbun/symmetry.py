"""The two antilinear symmetry types and their structure maps.

Real:         C(M) = conj(M),                       J(v) = conj(v)
Quaternionic: C(M) = T conj(M) T^{-1},              J(v) = T^t conj(v)

where T is the block sum of copies of [[0, -1], [1, 0]].  With this J the
trivial quaternionic structure sends (l1, l2, ...) to (conj l2, -conj l1, ...)
and squares to -1, while C squares to the identity on matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionMismatch, OddAmbientQuaternionic, OddRankOnFixedLocus

Kind = Literal["real", "quaternionic"]
KINDS = ("real", "quaternionic")

THETA0 = np.array([[0.0, -1.0], [1.0, 0.0]])


def normalize_kind(kind: str) -> Kind:
    k = kind.lower()
    if k in ("real", "r"):
        return "real"
    if k in ("quaternionic", "quat", "q", "h"):
        return "quaternionic"
    raise ValueError(f"unknown symmetry kind {kind!r}")


def theta_block(m: int) -> np.ndarray:
    """Block-diagonal sum of ``m`` copies of THETA0."""
    return np.kron(np.eye(m), THETA0)


@dataclass(frozen=True)
class SymmetryType:
    kind: Kind
    ambient_dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.kind == "quaternionic" and self.ambient_dim % 2:
            raise OddAmbientQuaternionic(f"quaternionic ambient dimension {self.ambient_dim} is odd")

    @property
    def quaternionic(self) -> bool:
        return self.kind == "quaternionic"

    def theta(self) -> np.ndarray:
        if self.quaternionic:
            return theta_block(self.ambient_dim // 2)
        return np.eye(self.ambient_dim)

    def J(self, v: np.ndarray) -> np.ndarray:
        """Action on (stacks of) vectors, last axis the fiber coordinate."""
        return structure_vector(self.kind, v)


def structure_vector(kind: Kind, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if kind == "real":
        return np.conj(v)
    n = v.shape[-1]
    if n % 2:
        raise OddAmbientQuaternionic("vector length is odd")
    w = np.conj(v).reshape(v.shape[:-1] + (n // 2, 2))
    out = np.empty_like(w)
    out[..., 0] = w[..., 1]
    out[..., 1] = -w[..., 0]
    return out.reshape(v.shape)


def structure_vector_rows(M: np.ndarray, n: int) -> np.ndarray:
    """Left multiplication by T on the second-to-last axis."""
    w = M.reshape(M.shape[:-2] + (n // 2, 2, M.shape[-1]))
    out = np.empty_like(w)
    out[..., 0, :] = -w[..., 1, :]
    out[..., 1, :] = w[..., 0, :]
    return out.reshape(M.shape)


def conjugate_morphism(kind: Kind, F: np.ndarray) -> np.ndarray:
    """C(F) = T_t conj(F) T_s^{-1} for (stacks of) nt x ns matrices."""
    F = np.asarray(F)
    if kind == "real":
        return np.conj(F)
    nt, ns = F.shape[-2:]
    if nt % 2 or ns % 2:
        raise OddAmbientQuaternionic("quaternionic matrices need even dimensions")
    G = structure_vector_rows(np.conj(F), nt)                    # T conj(F)
    # right multiplication by T^t = (T G^t)^t
    G = np.swapaxes(structure_vector_rows(np.swapaxes(G, -1, -2), ns), -1, -2)
    return G


def structure_conjugation(sym: SymmetryType, M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    n = sym.ambient_dim
    if M.shape[-2:] != (n, n):
        raise DimensionMismatch(f"expected {n}x{n} matrices, got {M.shape[-2:]}")
    return conjugate_morphism(sym.kind, M)


def equivariant_average(sym: SymmetryType, field: np.ndarray, X) -> np.ndarray:
    """x -> (f(x) + C(f(tau x))) / 2 on a vertex-indexed field."""
    field = np.asarray(field)
    if field.shape[0] != X.n_vertices:
        raise DimensionMismatch("field must assign one matrix to each vertex")
    tau = np.asarray(X.tau)
    return 0.5 * (field + structure_conjugation(sym, field[tau]))


def equivariance_residual(sym: SymmetryType, field: np.ndarray, tau_index: np.ndarray) -> np.ndarray:
    """Per-entry residual ||C(f(tau x)) - f(x)|| (spectral norm)."""
    diff = structure_conjugation(sym, field[tau_index]) - field
    return np.linalg.norm(diff, ord=2, axis=(-2, -1)) if diff.size else np.zeros(0)


def is_equivariant(sym: SymmetryType, field: np.ndarray, X, tol: float = 1e-10) -> bool:
    res = equivariance_residual(sym, np.asarray(field), np.asarray(X.tau))
    return bool(res.size == 0 or res.max() <= tol)


def eigen_rank(P: np.ndarray) -> np.ndarray:
    """Number of eigenvalues above 1/2 of each Hermitian matrix in a stack."""
    ev = np.linalg.eigvalsh(0.5 * (P + np.conj(np.swapaxes(P, -1, -2))))
    return (ev > 0.5).sum(axis=-1)


def check_rank_parity(sym: SymmetryType, E) -> None:
    """Quaternionic fields must have even rank wherever the base has fixed points."""
    if not sym.quaternionic:
        return
    fixed = E.base.fixed_vertices()
    if not fixed:
        return
    ranks = eigen_rank(np.asarray(E.P)[fixed])
    odd = [E.base.vertices[v] for v, r in zip(fixed, ranks) if r % 2]
    if odd:
        raise OddRankOnFixedLocus(
            f"quaternionic bundle has odd rank {int(ranks[0])} at fixed vertices {odd[:4]}")
