import json
import math

import numpy as np
import pytest

from eqbun import io
from eqbun.cli import main
from eqbun.errors import ParseError, SymmetryViolation, UnknownScenario
from eqbun.gallery import SCENARIOS, example_gallery, random_quaternionic_bundle, random_real_bundle
from eqbun.hamiltonian import (
    FourierHamiltonian,
    hamiltonian_from_json,
    hamiltonian_to_json,
    ingest_hamiltonian,
)
from eqbun.symmetry import conjugate_morphism

ALL_SCENARIOS = [f"torus{d}-real-trivial" for d in range(1, 5)] + [
    "torus2-real-line", "torus2-quat-rank2", "free-quat-rank3"] + [
    pytest.param(f"torus{d}-stable-pair", marks=[pytest.mark.slow] if d == 4 else []) for d in range(2, 5)]


def two_band(m=2.0):
    """(m + cos t) sz + sin t sy."""
    sz = np.diag([1.0, -1.0])
    H1 = sz / 2 + np.array([[0.0, -0.5], [0.5, 0.0]])
    return FourierHamiltonian(1, 2, {(0,): m * sz, (1,): H1, (-1,): H1.conj().T})


def kramers(seed=0, d=1):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H1 = 0.1 * (A + conjugate_morphism("quaternionic", A))
    coeffs = {(0,) * d: np.diag([-1.0, -1.0, 1.0, 1.0])}
    for a in range(d):
        e = tuple(int(i == a) for i in range(d))
        coeffs[e] = H1
        coeffs[tuple(-c for c in e)] = H1.conj().T
    return FourierHamiltonian(d, 4, coeffs, "quaternionic")


# -- serialization ----------------------------------------------------

@pytest.mark.parametrize("value", [0.1, 1 / 3, -0.0, 1e-300, 2.0 ** 0.5, 123456789.123456789])
def test_float_round_trip_bit_exact(value):
    back = io.loads(io.dumps({"x": value}))["x"]
    assert back == value and math.copysign(1, back) == math.copysign(1, value)


def test_dumps_sorted_and_deterministic():
    a = io.dumps({"b": 1, "a": [1.5, "s"]})
    assert a == io.dumps({"a": [1.5, "s"], "b": 1})
    assert a.index('"a"') < a.index('"b"')


def test_nonfinite_floats_are_strings():
    assert json.loads(io.dumps({"x": float("inf")}))["x"] == "inf"


def test_invalid_json():
    with pytest.raises(ParseError):
        io.loads("{")


def test_matrix_codec():
    M = np.array([[1 + 2j, 0.1], [1 / 3, -1j]])
    back = io.matrix_from_json(io.loads(io.dumps(io.matrix_to_json(M))))
    assert np.array_equal(back, M)
    with pytest.raises(ParseError):
        io.matrix_from_json([[1, 2]])
    with pytest.raises(ParseError):
        io.matrix_from_json(io.matrix_to_json(M), (3, 3))


@pytest.mark.parametrize("name", ALL_SCENARIOS)
def test_gallery_scenario_round_trip(name):
    sc = example_gallery(name)
    text = io.dumps(io.scenario_to_json(sc))
    sc2 = io.scenario_from_json(io.loads(text))
    assert io.dumps(io.scenario_to_json(sc2)) == text
    for key, E in sc.bundles.items():
        assert np.array_equal(sc2.bundles[key].P, E.P)
    if sc.witness is not None:
        assert np.array_equal(sc2.witness.psi.F, sc.witness.psi.F)


def test_bundle_file_round_trip(tmp_path, torus2):
    for E in (random_real_bundle(torus2, 3, 1, seed=4), random_quaternionic_bundle(torus2, 4, 2, seed=4)):
        path = io.write_document(tmp_path / "E.eqb.json", io.bundle_to_json(E))
        E2 = io.load_any(path)
        assert E2.kind == E.kind and E2.rank == E.rank and np.array_equal(E2.P, E.P)


def test_bundle_missing_vertex(torus2):
    doc = io.bundle_to_json(random_real_bundle(torus2, 2, 1))
    doc["projections"].pop(next(iter(doc["projections"])))
    with pytest.raises(ParseError):
        io.bundle_from_json(doc)


def test_sample_keys():
    key = io.sample_key_from_str("1/3*a + 2/3*b")
    assert dict(key) == {"a": pytest.approx(1 / 3), "b": pytest.approx(2 / 3)}
    with pytest.raises(ParseError):
        io.sample_key_from_str("1/2*a + 1/3*b")


def test_unknown_document(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"type": "teapot"}')
    with pytest.raises(ParseError):
        io.load_any(p)
    p.write_text("[1]")
    with pytest.raises(ParseError):
        io.load_any(p)


# -- hamiltonians -----------------------------------------------------

def test_constant_hamiltonian_rank():
    h = FourierHamiltonian(1, 2, {(0,): np.diag([-1.0, 1.0])})
    E = ingest_hamiltonian(h, grid_resolution=8)
    assert (E.kind, E.rank, E.n) == ("real", 1, 2)
    assert np.allclose(E.P, np.diag([1, 0]))


@pytest.mark.parametrize("m", [0.5, 2.0])
def test_two_band_model(m):
    E = ingest_hamiltonian(two_band(m), grid_resolution=12)
    assert E.rank == 1 and E.gap > 0.02
    assert max(E.residuals().values()) < 1e-10


def test_two_band_gap_closing():
    from eqbun.errors import GaplessHamiltonian
    with pytest.raises(GaplessHamiltonian):
        ingest_hamiltonian(two_band(1.0), grid_resolution=12)


@pytest.mark.parametrize("d", [1, 2])
def test_kramers_model(d):
    E = ingest_hamiltonian(kramers(d=d), grid_resolution=8)
    assert (E.kind, E.rank) == ("quaternionic", 2)


def test_symmetry_violation():
    h = FourierHamiltonian(1, 2, {(0,): np.array([[1.0, 1j], [-1j, -1.0]])})
    with pytest.raises(SymmetryViolation):
        ingest_hamiltonian(h)
    h = FourierHamiltonian(1, 2, {(1,): np.eye(2)})
    with pytest.raises(SymmetryViolation):
        ingest_hamiltonian(h)
    with pytest.raises(SymmetryViolation):
        ingest_hamiltonian(FourierHamiltonian(1, 3, {(0,): np.eye(3)}, "quaternionic"))


def test_hamiltonian_doc_round_trip():
    h = kramers(seed=3)
    text = io.dumps(hamiltonian_to_json(h))
    h2 = hamiltonian_from_json(io.loads(text))
    assert io.dumps(hamiltonian_to_json(h2)) == text
    assert h2.kind == "quaternionic"


def test_hamiltonian_parse_errors():
    doc = hamiltonian_to_json(two_band())
    with pytest.raises(ParseError):
        hamiltonian_from_json({k: v for k, v in doc.items() if k != "bands"})
    bad = dict(doc, coefficients=doc["coefficients"] + doc["coefficients"][:1])
    with pytest.raises(ParseError):
        hamiltonian_from_json(bad)
    with pytest.raises(ParseError):
        FourierHamiltonian(2, 2, {(0,): np.eye(2)})


# -- gallery ----------------------------------------------------------

def test_gallery_unknown():
    with pytest.raises(UnknownScenario):
        example_gallery("torus9-real-trivial")


def test_gallery_expectations():
    assert example_gallery("torus2-real-trivial").expected["m"] == 1
    assert example_gallery("free-quat-rank3").bundles["E"].rank == 3
    assert len(SCENARIOS) == 5


# -- command line -----------------------------------------------------

def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_cli_thresholds(capsys):
    code, rep, _ = run(capsys, "thresholds", "--kind", "real", "--d0", "1", "--d1", "2")
    assert code == 0 and (rep["k0"], rep["k1"]) == (1, 2)
    code, rep, _ = run(capsys, "thresholds", "--kind", "quat", "--d0", "4", "--d1", "3")
    assert code == 0 and (rep["k0"], rep["k1"]) == (1, 2)


def test_cli_gallery_list_and_unknown(capsys):
    code, rep, _ = run(capsys, "gallery", "list")
    assert code == 0 and rep["scenarios"] == list(SCENARIOS)
    code, _, err = run(capsys, "gallery", "nope")
    assert code == 1 and json.loads(err)["error"] == "UnknownScenario"


def test_cli_gallery_split_validate(capsys, tmp_path):
    code, rep, _ = run(capsys, "gallery", "torus2-real-trivial", "--out", str(tmp_path))
    assert code == 0
    code, rep, _ = run(capsys, "validate", str(tmp_path / "E.eqb.json"))
    assert code == 0 and rep["type"] == "bundle" and rep["rank"] == 2
    code, rep, _ = run(capsys, "--seed", "5", "split", str(tmp_path / "E.eqb.json"), "--out", str(tmp_path))
    assert code == 0 and rep["m"] == 1
    assert (tmp_path / "certificate.eqb.json").exists() and (tmp_path / "complement.eqb.json").exists()
    code, rep, _ = run(capsys, "validate", str(tmp_path / "certificate.eqb.json"))
    assert code == 0 and rep["report"]["is_isomorphism"]
    code, rep, _ = run(capsys, "validate", str(tmp_path / "torus2-real-trivial.eqb.json"))
    assert code == 0 and rep["type"] == "scenario"


def test_cli_global_flags_either_side(capsys, tmp_path):
    run(capsys, "gallery", "torus1-real-trivial", "--out", str(tmp_path))
    f = str(tmp_path / "E.eqb.json")
    _, a, _ = run(capsys, "--seed", "3", "--resolution", "2", "split", f)
    _, b, _ = run(capsys, "split", f, "--seed", "3", "--resolution", "2")
    assert a == b


def test_cli_refusal_exit_code(capsys, tmp_path):
    run(capsys, "gallery", "torus2-real-line", "--out", str(tmp_path))
    code, _, err = run(capsys, "split", str(tmp_path / "E.eqb.json"), "--count", "1")
    assert code == 2
    e = json.loads(err)
    assert e["refusal"] and e["error"] == "RankBelowThreshold"


def test_cli_errors_exit_one(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "validate", str(p))
    assert code == 1 and json.loads(err)["error"] == "ParseError"
    code, _, _ = run(capsys, "validate", str(tmp_path / "missing.json"))
    assert code == 1


def test_cli_ingest(capsys, tmp_path):
    h = tmp_path / "h.json"
    io.write_document(h, hamiltonian_to_json(kramers()))
    code, rep, _ = run(capsys, "ingest", str(h), "--grid", "8", "--out", str(tmp_path))
    assert code == 0 and rep["rank"] == 2 and rep["symmetry"] == "quaternionic"
    assert io.load_any(tmp_path / "bundle.eqb.json").rank == 2
    io.write_document(h, hamiltonian_to_json(two_band(1.0)))
    code, _, _ = run(capsys, "ingest", str(h), "--grid", "12")
    assert code == 2


def test_cli_unstabilize(capsys, tmp_path):
    run(capsys, "gallery", "torus2-stable-pair", "--out", str(tmp_path))
    d = str(tmp_path)
    code, rep, _ = run(capsys, "unstabilize", f"{d}/E1.eqb.json", f"{d}/E2.eqb.json", f"{d}/witness.eqb.json",
                       "--out", d)
    assert code == 0
    phi = io.load_any(tmp_path / "isomorphism.eqb.json")
    from eqbun import verify_morphism
    assert verify_morphism(phi).is_isomorphism


def test_cli_conjugate(capsys, tmp_path, circle):
    from eqbun.conjugacy import AlgebraProjection, projection_to_bundles
    from eqbun.bundles import morphism_from_rule
    V = circle.n_vertices
    p = AlgebraProjection.from_vertex_values("real", circle, np.broadcast_to(np.diag([1.0, 0.0]), (V, 2, 2)))
    q = AlgebraProjection.from_vertex_values("real", circle, np.broadcast_to(np.diag([0.0, 1.0]), (V, 2, 2)))
    E, Ep = projection_to_bundles(p)
    F, Fp = projection_to_bundles(q)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])

    def iso(a, b):
        return morphism_from_rule(a, b, lambda S: b.project(S)[0] @ swap @ a.project(S)[0])
    docs = {"p": io.observable_to_json(p), "q": io.observable_to_json(q),
            "phi": io.morphism_to_json(iso(E, F)), "phip": io.morphism_to_json(iso(Ep, Fp))}
    for k, doc in docs.items():
        io.write_document(tmp_path / f"{k}.json", doc)
    d = str(tmp_path)
    code, rep, _ = run(capsys, "conjugate", f"{d}/p.json", f"{d}/q.json", "--via", f"{d}/phi.json",
                       f"{d}/phip.json", "--out", d)
    assert code == 0
    assert rep["conjugator"]["conjugacy_residual"] == 0 and rep["unitary"]["unitarity"] < 1e-12
    assert (tmp_path / "unitary.eqb.json").exists()
    code, _, _ = run(capsys, "conjugate", f"{d}/p.json", f"{d}/q.json", "--via", f"{d}/phip.json",
                     f"{d}/phi.json")
    assert code == 1
