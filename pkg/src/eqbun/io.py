"""Canonical JSON documents (``.eqb.json``).

Documents are written with sorted keys and every float in ``.17g`` format
so that serialization is deterministic and reading back reproduces the
same doubles.  Complex matrices are row-major nested lists of ``[re, im]``
pairs.  Sample points are keyed by strings such as ``"1/3*a + 2/3*b"``;
a vertex sample is keyed by the bare vertex id.
"""
from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bundles import BundleMorphism, EquivariantProjectionField, make_field
from .config import Config
from .errors import EqbunError, ParseError
from .samples import SampleSet, from_id_keys
from .z2complex import InvolutiveComplex, validate_complex

SUFFIX = ".eqb.json"


# -- canonical emitter ------------------------------------------------

def _emit(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            out.append(json.dumps(str(x)))
            return
        s = format(x, ".17g")
        # keep floats (and the sign of zero) distinguishable from integers on reading
        out.append(s if any(c in s for c in ".en") else s + ".0")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, Mapping):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(sep)
            out.append(pad)
            out.append(json.dumps(str(key), ensure_ascii=False) + ": ")
            _emit(obj[key], out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        flat = all(not isinstance(x, (list, tuple, Mapping)) for x in obj)
        out.append("[")
        for i, x in enumerate(obj):
            if i:
                out.append(", " if flat or not indent else sep)
            if not flat:
                out.append(pad)
            _emit(x, out, indent, level + 1)
        out.append((end if not flat else "") + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 1) -> str:
    out: list[str] = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None


def read_document(path: str | os.PathLike) -> dict:
    p = Path(path)
    try:
        doc = loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{p}: top level must be an object")
    doc.setdefault("__dir__", str(p.parent))
    return doc


def write_document(path: str | os.PathLike, doc: Mapping) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps({k: v for k, v in doc.items() if k != "__dir__"}), encoding="utf-8")
    return p


# -- matrices and sample keys -----------------------------------------

def matrix_to_json(M: np.ndarray) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def matrix_from_json(obj, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        A = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("matrix must be a nested list of [re, im] pairs") from None
    if A.ndim == 2 and A.shape[0] == 0:
        A = A.reshape(0, 0, 2)
    if A.ndim != 3 or A.shape[-1] != 2:
        raise ParseError(f"matrix must be rows of [re, im] pairs, got array of shape {A.shape}")
    M = A[..., 0] + 1j * A[..., 1]
    if shape is not None and M.shape != shape:
        raise ParseError(f"expected a {shape[0]}x{shape[1]} matrix, got {M.shape[0]}x{M.shape[1]}")
    return M


def sample_key_to_str(id_key) -> str:
    if len(id_key) == 1 and id_key[0][1] == 1:
        return id_key[0][0]
    return " + ".join(f"{w}*{n}" for n, w in id_key)


def sample_key_from_str(s: str) -> tuple[tuple[str, Fraction], ...]:
    if "*" not in s:
        return ((s, Fraction(1)),)
    out = []
    for part in s.split(" + "):
        w, _, name = part.partition("*")
        try:
            out.append((name, Fraction(w)))
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"bad sample key {s!r}") from None
    if sum(w for _, w in out) != 1:
        raise ParseError(f"sample weights in {s!r} do not sum to 1")
    return tuple(sorted(out))


# -- complexes --------------------------------------------------------

def complex_to_json(X: InvolutiveComplex) -> dict:
    return X.to_raw()


def _resolve_ref(obj, doc_dir: str | None):
    if isinstance(obj, str):
        path = Path(doc_dir or ".") / obj
        return read_document(path)
    return obj


def complex_from_json(obj, doc_dir: str | None = None) -> InvolutiveComplex:
    obj = _resolve_ref(obj, doc_dir)
    if not isinstance(obj, Mapping):
        raise ParseError("complex must be an object or a file reference")
    missing = [k for k in ("vertices", "maximal_simplices", "involution") if k not in obj]
    if missing:
        raise ParseError(f"complex document misses fields {missing}")
    return validate_complex(obj)


class BaseCache:
    """Reuse one complex object for identical base descriptions within a session."""

    def __init__(self):
        self._seen: dict[str, InvolutiveComplex] = {}

    def get(self, obj, doc_dir: str | None = None) -> InvolutiveComplex:
        obj = _resolve_ref(obj, doc_dir)
        key = dumps({k: v for k, v in obj.items() if k != "__dir__"}, indent=0)
        if key not in self._seen:
            self._seen[key] = complex_from_json(obj)
        return self._seen[key]


_BASES = BaseCache()


# -- bundles ----------------------------------------------------------

def bundle_to_json(E: EquivariantProjectionField) -> dict:
    names = E.base.vertices
    return {
        "type": "bundle",
        "symmetry": E.kind,
        "ambient_dim": E.n,
        "rank": E.rank,
        "gap": E.gap,
        "resolution": E.resolution,
        "base": complex_to_json(E.base),
        "projections": {names[v]: matrix_to_json(E.P[v]) for v in range(E.base.n_vertices)},
    }


def bundle_from_json(doc: Mapping, config: Config | None = None,
                     base: InvolutiveComplex | None = None) -> EquivariantProjectionField:
    for key in ("symmetry", "ambient_dim", "base", "projections"):
        if key not in doc:
            raise ParseError(f"bundle document misses field {key!r}")
    X = base or _BASES.get(doc["base"], doc.get("__dir__"))
    n = int(doc["ambient_dim"])
    proj = doc["projections"]
    missing = [v for v in X.vertices if v not in proj]
    if missing:
        raise ParseError(f"bundle has no projection at vertices {missing[:4]}")
    extra = [v for v in proj if v not in set(X.vertices)]
    if extra:
        raise ParseError(f"projections given at unknown vertices {extra[:4]}")
    P = np.stack([matrix_from_json(proj[v], (n, n)) for v in X.vertices]) if X.vertices else np.zeros((0, n, n))
    E = make_field(doc["symmetry"], X, P, doc.get("rank"), config, resolution=doc.get("resolution"))
    return E


# -- morphisms --------------------------------------------------------

def samples_to_json(S: SampleSet) -> list[str]:
    return [sample_key_to_str(S.id_key(i)) for i in range(len(S))]


def samples_from_json(keys, X: InvolutiveComplex, resolution: int | None = None) -> SampleSet:
    try:
        S = from_id_keys(X, [sample_key_from_str(k) for k in keys])
    except KeyError as exc:
        raise ParseError(f"sample refers to unknown vertex {exc}") from None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    S.resolution = resolution
    return S


def morphism_to_json(phi: BundleMorphism, report: Mapping | None = None) -> dict:
    doc = {
        "type": "morphism",
        "source": bundle_to_json(phi.source),
        "target": bundle_to_json(phi.target),
        "resolution": phi.samples.resolution,
        "samples": samples_to_json(phi.samples),
        "values": [matrix_to_json(F) for F in phi.F],
    }
    if report is not None:
        doc["report"] = dict(report)
    return doc


def morphism_from_json(doc: Mapping, config: Config | None = None,
                       base: InvolutiveComplex | None = None) -> BundleMorphism:
    for key in ("source", "target", "samples", "values"):
        if key not in doc:
            raise ParseError(f"morphism document misses field {key!r}")
    d = doc.get("__dir__")
    src_doc = dict(doc["source"], __dir__=d) if isinstance(doc["source"], Mapping) else read_document(Path(d or ".") / doc["source"])
    dst_doc = dict(doc["target"], __dir__=d) if isinstance(doc["target"], Mapping) else read_document(Path(d or ".") / doc["target"])
    src = bundle_from_json(src_doc, config, base)
    dst = bundle_from_json(dst_doc, config, src.base)
    if len(doc["samples"]) != len(doc["values"]):
        raise ParseError("morphism has different numbers of samples and values")
    S = samples_from_json(doc["samples"], src.base, doc.get("resolution"))
    F = np.stack([matrix_from_json(m, (dst.n, src.n)) for m in doc["values"]]) if len(S) \
        else np.zeros((0, dst.n, src.n), complex)
    return BundleMorphism(src, dst, S, F)


# -- witnesses --------------------------------------------------------

def witness_to_json(w) -> dict:
    return {"type": "witness", "ell": w.ell, "psi": morphism_to_json(w.psi),
            "phi_A": None if w.phi_A is None else morphism_to_json(w.phi_A)}


def witness_from_json(doc: Mapping, config: Config | None = None,
                      base: InvolutiveComplex | None = None):
    from .stabiso import StableIsoWitness
    if "ell" not in doc or "psi" not in doc:
        raise ParseError("witness document needs 'ell' and 'psi'")
    d = doc.get("__dir__")
    psi = morphism_from_json(dict(doc["psi"], __dir__=d), config, base)
    phi_A = None
    if doc.get("phi_A") is not None:
        phi_A = morphism_from_json(dict(doc["phi_A"], __dir__=d), config)
    return StableIsoWitness(int(doc["ell"]), psi, phi_A)


# -- frames on A ------------------------------------------------------

def frame_to_json(E: EquivariantProjectionField, frame: Mapping[int, np.ndarray]) -> dict:
    names = E.base.vertices
    m = next(iter(frame.values())).shape[-1] if frame else 0
    return {"type": "frame", "count": m,
            "frame": {names[v]: matrix_to_json(t) for v, t in sorted(frame.items())}}


def frame_from_json(doc: Mapping, E: EquivariantProjectionField) -> tuple[int, dict[int, np.ndarray]]:
    if doc.get("type") == "morphism":
        from .extension import frame_from_morphism
        phi = morphism_from_json(doc)
        m = phi.source.n - E.n if phi.source.n > E.n else int(doc.get("count", 0))
        return m, {E.base.index(phi.samples.base.vertices[v]): t
                   for v, t in frame_from_morphism(phi, phi.target, m).items()}
    if "frame" not in doc or "count" not in doc:
        raise ParseError("frame document needs 'count' and 'frame'")
    m = int(doc["count"])
    out = {}
    for vid, mat in doc["frame"].items():
        try:
            v = E.base.index(vid)
        except KeyError:
            raise ParseError(f"frame given at unknown vertex {vid!r}") from None
        out[v] = matrix_from_json(mat, (E.n, m)) if m else np.zeros((E.n, 0), complex)
    return m, out


# -- observables ------------------------------------------------------

def observable_to_json(f) -> dict:
    f = getattr(f, "element", f)
    S = f.samples
    return {"type": "observable", "symmetry": f.kind, "size": f.size,
            "base": complex_to_json(f.base),
            "values": {sample_key_to_str(S.id_key(i)): matrix_to_json(f.values[i]) for i in range(len(S))}}


def observable_from_json(doc: Mapping, base: InvolutiveComplex | None = None):
    from .conjugacy import ObservableAlgebraElement
    for key in ("symmetry", "size", "base", "values"):
        if key not in doc:
            raise ParseError(f"observable document misses field {key!r}")
    X = base or _BASES.get(doc["base"], doc.get("__dir__"))
    kind = doc["symmetry"]
    size = int(doc["size"])
    n = 2 * size if kind.startswith("q") else size
    keys = list(doc["values"])
    S = samples_from_json(keys, X)
    vals = np.stack([matrix_from_json(doc["values"][k], (n, n)) for k in keys])
    return ObservableAlgebraElement(kind, size, S, vals)


def projection_from_json(doc: Mapping, config: Config | None = None, base=None):
    from .conjugacy import AlgebraProjection
    f = observable_from_json(doc, base)
    if (f.samples.vertex_sample < 0).any():
        raise ParseError("projection documents must give a value at every vertex")
    return AlgebraProjection.from_vertex_values(f.kind, f.base, f.vertex_values(), config)


# -- scenarios --------------------------------------------------------

def scenario_to_json(sc) -> dict:
    return {"type": "scenario", "name": sc.name, "complex": complex_to_json(sc.complex),
            "bundles": {k: bundle_to_json(E) for k, E in sc.bundles.items()},
            "witness": None if sc.witness is None else witness_to_json(sc.witness),
            "expected": dict(sc.expected)}


def scenario_from_json(doc: Mapping, config: Config | None = None):
    from .gallery import Scenario
    X = complex_from_json(doc["complex"], doc.get("__dir__"))
    bundles = {k: bundle_from_json(b, config, X) for k, b in doc.get("bundles", {}).items()}
    w = doc.get("witness")
    witness = None if w is None else witness_from_json(w, config, X)
    return Scenario(doc.get("name", ""), X, bundles, witness, dict(doc.get("expected", {})))


def load_any(path: str | os.PathLike, config: Config | None = None):
    """Read a document, dispatching on its ``type`` field (or its shape)."""
    doc = read_document(path)
    kind = doc.get("type")
    try:
        if kind == "bundle" or (kind is None and "projections" in doc):
            return bundle_from_json(doc, config)
        if kind == "morphism":
            return morphism_from_json(doc, config)
        if kind == "witness" or (kind is None and "psi" in doc):
            return witness_from_json(doc, config)
        if kind == "observable" or (kind is None and "size" in doc and "values" in doc):
            return observable_from_json(doc)
        if kind == "scenario":
            return scenario_from_json(doc, config)
        if kind == "hamiltonian" or (kind is None and "coefficients" in doc):
            from .hamiltonian import hamiltonian_from_json
            return hamiltonian_from_json(doc)
        if kind is None and "maximal_simplices" in doc:
            return complex_from_json(doc)
    except EqbunError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed document ({exc})") from None
    raise ParseError(f"{path}: unrecognized document type {kind!r}")
