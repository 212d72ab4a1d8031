"""Tight-binding Hamiltonians given by Fourier coefficients, sampled on the torus grid."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bundles import EquivariantProjectionField, adjoint, spectral_projection_bundle
from .config import Config, resolve
from .errors import ParseError, SymmetryViolation
from .symmetry import SymmetryType, conjugate_morphism, normalize_kind
from .z2complex import InvolutiveComplex, build_torus, torus_angles


@dataclass(frozen=True)
class FourierHamiltonian:
    """``H(theta) = sum_m H_m exp(i m . theta)`` on the d-torus."""
    dimension: int
    bands: int
    coefficients: Mapping[tuple[int, ...], np.ndarray]
    kind: str = "real"

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        coeffs = {}
        for m, H in self.coefficients.items():
            m = tuple(int(c) for c in m)
            H = np.asarray(H, dtype=complex)
            if len(m) != self.dimension:
                raise ParseError(f"lattice vector {m} does not have {self.dimension} entries")
            if H.shape != (self.bands, self.bands):
                raise ParseError(f"coefficient at {m} has shape {H.shape}, expected "
                                 f"{(self.bands, self.bands)}")
            coeffs[m] = H
        object.__setattr__(self, "coefficients", coeffs)

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """Values at angles ``theta`` of shape (..., d)."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape[:-1] + (self.bands, self.bands), dtype=complex)
        for m, H in self.coefficients.items():
            phase = np.exp(1j * (theta @ np.array(m, dtype=float)))
            out += phase[..., None, None] * H
        return out

    def hermiticity_residual(self) -> float:
        worst = 0.0
        for m, H in self.coefficients.items():
            partner = self.coefficients.get(tuple(-c for c in m), np.zeros_like(H))
            worst = max(worst, float(np.abs(partner - adjoint(H)).max()))
        return worst

    def symmetry_residual(self) -> float:
        """max over coefficients of ||C(H_m) - H_m||, equivalent to C(H(theta)) = H(-theta)."""
        worst = 0.0
        for H in self.coefficients.values():
            worst = max(worst, float(np.abs(conjugate_morphism(self.kind, H) - H).max()))
        return worst


def check_hamiltonian(h: FourierHamiltonian, X: InvolutiveComplex, config: Config | None = None) -> None:
    cfg = resolve(config)
    scale = max([1.0] + [float(np.abs(H).max()) for H in h.coefficients.values()])
    tol = cfg.eqv_tol * scale
    if h.kind == "quaternionic" and h.bands % 2:
        raise SymmetryViolation("quaternionic models need an even number of bands")
    if h.hermiticity_residual() > tol:
        raise SymmetryViolation(f"H(-m) != H(m)^* (residual {h.hermiticity_residual():.2e})")
    if h.symmetry_residual() > tol:
        raise SymmetryViolation(f"coefficients violate the {h.kind} constraint "
                                f"(residual {h.symmetry_residual():.2e})")
    th = torus_angles(X)
    H = h.evaluate(th)
    Hbar = H[np.asarray(X.tau)]
    res = np.abs(conjugate_morphism(h.kind, H) - Hbar).max() if len(H) else 0.0
    if res > tol:
        raise SymmetryViolation(f"C(H(z)) != H(conj z) on the grid (residual {res:.2e})")


def ingest_hamiltonian(source, fermi_level: float = 0.0, grid_resolution: int | None = None,
                       config: Config | None = None) -> EquivariantProjectionField:
    """Fermi projection of a Fourier Hamiltonian sampled on a ``grid_resolution``-point torus grid."""
    if isinstance(source, (str, os.PathLike)):
        from .io import read_document
        source = hamiltonian_from_json(read_document(source))
    elif isinstance(source, Mapping):
        source = hamiltonian_from_json(source)
    h: FourierHamiltonian = source
    X = build_torus(h.dimension, "conjugation", points=grid_resolution)
    check_hamiltonian(h, X, config)
    H = h.evaluate(torus_angles(X))
    H = 0.5 * (H + adjoint(H))
    return spectral_projection_bundle(H, SymmetryType(h.kind, h.bands), X, fermi_level, config)


def hamiltonian_to_json(h: FourierHamiltonian) -> dict:
    from .io import matrix_to_json
    return {"type": "hamiltonian", "symmetry": h.kind, "dimension": h.dimension, "bands": h.bands,
            "coefficients": [{"m": list(m), "H": matrix_to_json(H)}
                             for m, H in sorted(h.coefficients.items())]}


def hamiltonian_from_json(doc: Mapping) -> FourierHamiltonian:
    from .io import matrix_from_json
    try:
        d, n = int(doc["dimension"]), int(doc["bands"])
        coeffs = {}
        for entry in doc["coefficients"]:
            m = tuple(int(c) for c in entry["m"])
            if m in coeffs:
                raise ParseError(f"lattice vector {m} appears twice")
            coeffs[m] = matrix_from_json(entry["H"], (n, n))
        return FourierHamiltonian(d, n, coeffs, doc.get("symmetry", "real"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed Hamiltonian document ({exc})") from None
