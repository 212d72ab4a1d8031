"""Numerical tolerances and sampling defaults, kept in one place."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Config:
    # residual tolerances
    eqv_tol: float = 1e-10
    proj_tol: float = 1e-9
    iso_tol: float = 1e-8
    repair_tol: float = 1e-6
    # certified lower bounds
    gap_min: float = 0.02
    margin_min: float = 1e-3
    pair_margin_min: float = 1e-3
    spectral_delta: float = 1e-6
    # sampling
    resolution: int = 3
    # missed-direction search
    mu: float = 0.1
    n_retry: int = 64
    # cylinder transport
    t_step: float = 1.0 / 64
    max_refine: int = 3
    cylinder_layers: int = 2

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)


DEFAULT = Config()


def resolve(config: Config | None) -> Config:
    return DEFAULT if config is None else config
