"""Command line interface ``eqbun``.

Exit status is 0 on success, 2 when a request is refused because a rank or
dimension hypothesis fails, and 1 on any other error.  Reports go to
stdout as JSON (or into ``--out``), logs to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bundles import EquivariantProjectionField, BundleMorphism, verify_morphism
from .config import Config
from .errors import EqbunError, ParseError, Refusal
from .z2complex import DimensionProfile, InvolutiveComplex, dimensions

log = logging.getLogger("eqbun")


def _config(args) -> Config:
    cfg = Config()
    if getattr(args, "tol", None) is not None:
        cfg = cfg.with_(iso_tol=args.tol)
    if getattr(args, "resolution", None) is not None:
        cfg = cfg.with_(resolution=args.resolution)
    return cfg


def _emit(report: dict, args, name: str = "report.json") -> None:
    text = io.dumps(report)
    if getattr(args, "out", None):
        io.write_document(Path(args.out) / name, report)
    sys.stdout.write(text)


def _load_bundle(path, cfg) -> EquivariantProjectionField:
    obj = io.load_any(path, cfg)
    if not isinstance(obj, EquivariantProjectionField):
        raise ParseError(f"{path} is not a bundle document")
    return obj


# -- subcommands ------------------------------------------------------

def cmd_validate(args, cfg) -> dict:
    obj = io.load_any(args.file, cfg)
    if isinstance(obj, InvolutiveComplex):
        p = dimensions(obj)
        return {"type": "complex", "vertices": obj.n_vertices, "simplices": len(obj.simplices),
                "dim": obj.dim, "d0": p.d0, "d1": p.d1,
                "fixed_vertices": [obj.vertices[v] for v in obj.fixed_vertices()],
                "marked_simplices": len(obj.marked)}
    if isinstance(obj, EquivariantProjectionField):
        return {"type": "bundle", "symmetry": obj.kind, "rank": obj.rank, "ambient_dim": obj.n,
                "gap": obj.gap, "gap_bound": obj.gap_bound(), "resolution": obj.resolution,
                "residuals": obj.residuals()}
    if isinstance(obj, BundleMorphism):
        return {"type": "morphism", "report": verify_morphism(obj, cfg).as_dict()}
    from .conjugacy import ObservableAlgebraElement, algebra_check
    from .gallery import Scenario
    from .hamiltonian import FourierHamiltonian
    from .stabiso import StableIsoWitness
    if isinstance(obj, ObservableAlgebraElement):
        return {"type": "observable", "report": algebra_check(obj, config=cfg).as_dict()}
    if isinstance(obj, StableIsoWitness):
        return {"type": "witness", "ell": obj.ell, "psi": verify_morphism(obj.psi, cfg).as_dict()}
    if isinstance(obj, FourierHamiltonian):
        return {"type": "hamiltonian", "dimension": obj.dimension, "bands": obj.bands,
                "hermiticity": obj.hermiticity_residual(), "symmetry": obj.symmetry_residual()}
    if isinstance(obj, Scenario):
        return {"type": "scenario", "name": obj.name, "bundles": sorted(obj.bundles),
                "expected": obj.expected}
    raise ParseError("nothing to validate")


def cmd_thresholds(args, cfg) -> dict:
    from .extension import thresholds
    t = thresholds(args.kind, DimensionProfile(args.d0, args.d1))
    return {"kind": args.kind, "d0": args.d0, "d1": args.d1, "k0": t.k0, "k1": t.k1}


def cmd_split(args, cfg) -> dict:
    from .extension import split_trivial_summand
    E = _load_bundle(args.bundle, cfg)
    given, count = None, args.count
    if args.rel:
        m, given = io.frame_from_json(io.read_document(args.rel), E)
        count = m if count is None else count
    res = split_trivial_summand(E.kind, E, given, count=count, force=args.force,
                                seed=args.seed, config=cfg)
    report = {"operation": "split", **res.summary(), "cells": res.cells}
    if args.out:
        io.write_document(Path(args.out) / f"certificate{io.SUFFIX}",
                          io.morphism_to_json(res.certificate, res.report.as_dict()))
        io.write_document(Path(args.out) / f"complement{io.SUFFIX}", io.bundle_to_json(res.E0))
    return report


def cmd_unstabilize(args, cfg) -> dict:
    from .stabiso import unstabilize
    E1 = _load_bundle(args.E1, cfg)
    E2 = _load_bundle(args.E2, cfg)
    w = io.witness_from_json(io.read_document(args.witness), cfg, E1.base)
    res = unstabilize(E1.kind, E1, E2, w, cfg, seed=args.seed, force=args.force)
    if args.out:
        io.write_document(Path(args.out) / f"isomorphism{io.SUFFIX}",
                          io.morphism_to_json(res.phi, res.report.as_dict()))
    return {"operation": "unstabilize", **res.summary()}


def cmd_conjugate(args, cfg) -> dict:
    from .conjugacy import conjugator_from_isomorphisms, projection_to_bundles, unitarize
    p = io.projection_from_json(io.read_document(args.p), cfg)
    q = io.projection_from_json(io.read_document(args.q), cfg, p.base)
    phi = io.morphism_from_json(io.read_document(args.via[0]), cfg, p.base)
    phi_perp = io.morphism_from_json(io.read_document(args.via[1]), cfg, p.base)
    E, Ep = projection_to_bundles(p, cfg)
    F, Fp = projection_to_bundles(q, cfg)
    for a, b, what in ((phi.source, E, "source of phi"), (phi.target, F, "target of phi"),
                       (phi_perp.source, Ep, "source of phi-perp"), (phi_perp.target, Fp, "target of phi-perp")):
        if a.n != b.n or np.abs(a.P - b.P).max() > cfg.repair_tol:
            raise EqbunError(f"{what} is not the image bundle of the given projection")
    c = conjugator_from_isomorphisms(phi, phi_perp, cfg)
    report = {"operation": "conjugate", "conjugator": c.summary()}
    u = unitarize(c, cfg)
    report["unitary"] = u.summary()
    if args.out:
        io.write_document(Path(args.out) / f"conjugator{io.SUFFIX}", io.observable_to_json(c.v))
        io.write_document(Path(args.out) / f"unitary{io.SUFFIX}", io.observable_to_json(u.v))
    return report


def cmd_ingest(args, cfg) -> dict:
    from .hamiltonian import ingest_hamiltonian
    E = ingest_hamiltonian(args.hamiltonian, args.fermi, args.grid, cfg)
    if args.out:
        io.write_document(Path(args.out) / f"bundle{io.SUFFIX}", io.bundle_to_json(E))
    return {"operation": "ingest", "symmetry": E.kind, "rank": E.rank, "ambient_dim": E.n,
            "gap": E.gap, "vertices": E.base.n_vertices}


def cmd_gallery(args, cfg) -> dict:
    from .gallery import SCENARIOS, example_gallery
    if args.name == "list":
        return {"scenarios": list(SCENARIOS)}
    sc = example_gallery(args.name)
    if args.out:
        io.write_document(Path(args.out) / f"{sc.name}{io.SUFFIX}", io.scenario_to_json(sc))
        for key, E in sc.bundles.items():
            io.write_document(Path(args.out) / f"{key}{io.SUFFIX}", io.bundle_to_json(E))
        if sc.witness is not None:
            io.write_document(Path(args.out) / f"witness{io.SUFFIX}", io.witness_to_json(sc.witness))
    return {"name": sc.name, "bundles": {k: {"symmetry": E.kind, "rank": E.rank, "gap": E.gap}
                                         for k, E in sc.bundles.items()},
            "witness": sc.witness is not None, "expected": sc.expected}


# -- parser -----------------------------------------------------------

def _globals(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--tol", type=float, default=default, help="isomorphism tolerance")
    p.add_argument("--seed", type=int, default=default, help="seed for the direction search")
    p.add_argument("--resolution", type=int, default=default, help="barycentric sample resolution")
    p.add_argument("-v", "--verbose", action="count", default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqbun", description=__doc__.splitlines()[0])
    _globals(parser, None)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate any document")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("thresholds", parents=[common], help="rank thresholds k0, k1")
    p.add_argument("--kind", choices=["real", "quat", "quaternionic"], required=True)
    p.add_argument("--d0", type=int, required=True)
    p.add_argument("--d1", type=int, required=True)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("split", parents=[common], help="split off a trivial summand")
    p.add_argument("bundle")
    p.add_argument("--rel", help="frame (or morphism) document prescribing the splitting on A")
    p.add_argument("--count", type=int, help="rank of the trivial summand")
    p.add_argument("--force", action="store_true", help="attempt even below the rank threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("unstabilize", parents=[common], help="isomorphism from a stable isomorphism")
    p.add_argument("E1")
    p.add_argument("E2")
    p.add_argument("witness")
    p.add_argument("--force", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_unstabilize)

    p = sub.add_parser("conjugate", parents=[common], help="conjugator from isomorphisms of images")
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("--via", nargs=2, metavar=("PHI", "PHI_PERP"), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_conjugate)

    p = sub.add_parser("ingest", parents=[common], help="Fermi projection of a Fourier Hamiltonian")
    p.add_argument("hamiltonian")
    p.add_argument("--fermi", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=None, help="points per circle")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gallery", parents=[common], help="build a named example scenario ('list' to enumerate)")
    p.add_argument("name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gallery)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose or 0, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
        report = args.func(args, cfg)
        _emit(report, args)
        return 0
    except Refusal as exc:
        _error(exc)
        return 2
    except EqbunError as exc:
        _error(exc)
        return 1
    except (OSError, ValueError) as exc:
        _error(exc)
        return 1


def _error(exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "refusal": isinstance(exc, Refusal)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
