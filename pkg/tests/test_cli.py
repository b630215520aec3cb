import csv
import io
import json

import numpy as np
import pytest

from rulab import cli, dynamics, verify
from rulab import measures as M
from rulab import theories as T
from rulab.io import SCHEMA, dumps, matrix_to_json, write_matrix
from rulab.optim.sdp import SolverError

X = np.array([[0, 1], [1, 0]], dtype=complex)
H01 = np.diag([0.0, 1.0])


@pytest.fixture
def files(tmp_path):
    write_matrix(tmp_path / "plus.json", np.ones(2) / np.sqrt(2))
    write_matrix(tmp_path / "qutrit_stab.json", np.array([1, 0, 0]))
    write_matrix(tmp_path / "bad.json", np.diag([0.5, 0.4]))
    write_matrix(tmp_path / "X.json", X)
    write_matrix(tmp_path / "T.json", np.diag([1, np.exp(1j * np.pi / 4)]))
    # energy-exchanging implementation of X on a ladder ancilla
    t = T.EnergyConserving(H01, np.diag(np.arange(4, dtype=float)))
    rho = np.diag([0.0, 0.5, 0.5, 0.0])
    impl = dynamics.ImplementationTuple(t, T.sample_free(t, 0), rho)
    (tmp_path / "impl.json").write_text(dumps(impl.to_json()))
    return tmp_path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_measure_coherence_plus(files, capsys):
    code, out, _ = run(capsys, "measure", "--kind", "coherence", "--state", files / "plus.json")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == SCHEMA and doc["command"] == "measure"
    assert doc["value"] == pytest.approx(1.0)


def test_measure_mana_qutrit_stabilizer(files, capsys):
    code, out, _ = run(capsys, "measure", "--kind", "mana", "--state", files / "qutrit_stab.json")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.0, abs=1e-12)


def test_measure_malformed_trace(files, capsys):
    code, out, err = run(capsys, "measure", "--kind", "coherence", "--state", files / "bad.json")
    assert code == 2 and out == ""
    assert "trace" in err and "0.9" in err


def test_power_energy_x(files, capsys):
    code, out, _ = run(capsys, "power", "--theory", "energy", "--U", files / "X.json")
    doc = json.loads(out)
    assert code == 0 and doc["G"] == pytest.approx(1.0) and doc["L"] == pytest.approx(1.0)
    assert doc["certified"] is True


def test_power_search_needs_seed(files, capsys):
    code, _, err = run(capsys, "power", "--theory", "incoherent", "--U", files / "X.json")
    assert code == 2 and "--seed" in err
    code, out, _ = run(capsys, "power", "--theory", "clifford", "--U", files / "T.json", "--seed", 1,
                       "--restarts", 2)
    doc = json.loads(out)
    assert code == 0 and doc["pure"] is True and doc["G"] > 0.1


def test_certify_thm1_energy(files, capsys):
    code, out, _ = run(capsys, "certify", "--theorem", "thm1", "--impl", files / "impl.json", "--target",
                       files / "X.json", "--measure", "energy", "--seed", 0, "--restarts", 8)
    rep = json.loads(out)["report"]
    assert code == 0 and rep["satisfied"] is True and rep["status"] == "satisfied"
    assert rep["lhs"] == pytest.approx(2.0)


def test_certify_csv_format(files, capsys):
    code, out, _ = run(capsys, "certify", "--theorem", "thm1", "--impl", files / "impl.json", "--target",
                       files / "X.json", "--measure", "energy", "--seed", 0, "--restarts", 4, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and rows[0]["theorem"] == "Thm1"


def test_certify_thm2_mixed_ancilla_rejected(files, capsys):
    code, _, err = run(capsys, "certify", "--theorem", "thm2", "--impl", files / "impl.json", "--target",
                       files / "X.json", "--measure", "energy", "--seed", 0)
    assert code == 2 and "pure" in err


def test_verify_all_seed_7(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "all", "--seed", 7, "--trials", 3)
    doc = json.loads(out)
    assert code == 0 and doc["passed"] is True
    names = {s["suite"] for s in doc["suites"]}
    assert names == set(verify.SUITES)
    for s in doc["suites"]:
        for c in s["checks"]:
            assert c["count"] > 0 and c["max_violation"] <= c["tol"]


def test_verify_failure_exits_4(capsys, monkeypatch):
    bad = verify.Invariant("always broken", tol=0.0)
    bad.record(1.0)
    monkeypatch.setattr(verify, "run_suites", lambda names, seed, trials=10: [verify.SuiteResult("x", [bad])])
    code, out, _ = run(capsys, "verify", "--seed", 1)
    assert code == 4 and json.loads(out)["passed"] is False


def test_solver_failure_exits_3(files, capsys, monkeypatch):
    def boom(*a, **k):
        raise SolverError("stalled")
    monkeypatch.setattr(cli.dynamics, "power", boom)
    code, _, err = run(capsys, "power", "--theory", "energy", "--U", files / "X.json")
    assert code == 3 and "solver" in err


@pytest.mark.parametrize("argv", [["frobnicate"], ["measure", "--kind", "coherence"],
                                  ["verify", "--suite", "nonsense", "--seed", "1"],
                                  ["export-stab", "--n", "5"]])
def test_validation_exits_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = cli.main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2


def test_missing_file_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "measure", "--kind", "coherence", "--state", tmp_path / "nope.json")
    assert code == 2 and "not found" in err


def test_unknown_matrix_keys_rejected(tmp_path, capsys):
    doc = matrix_to_json(np.eye(2) / 2)
    doc["extra"] = 1
    (tmp_path / "s.json").write_text(json.dumps(doc))
    code, _, err = run(capsys, "measure", "--kind", "coherence", "--state", tmp_path / "s.json")
    assert code == 2 and "unknown keys" in err


def test_threads_env_validated(files, capsys, monkeypatch):
    monkeypatch.setenv("RULAB_THREADS", "zero")
    code, _, err = run(capsys, "power", "--theory", "energy", "--U", files / "X.json")
    assert code == 2 and "RULAB_THREADS" in err


def test_export_stab_counts_and_sdpa(files, capsys):
    code, out, _ = run(capsys, "export-stab", "--n", 2)
    assert code == 0 and json.loads(out)["count"] == 60
    code, out, _ = run(capsys, "export-stab", "--n", 1, "--sdpa", files / "p.dat-s", "--state",
                       files / "plus.json")
    assert code == 0
    assert (files / "p.dat-s").read_text().splitlines()[1].split()[0] == "6"


def test_pretty_format_carries_json_fields(files, capsys):
    _, js, _ = run(capsys, "power", "--theory", "energy", "--U", files / "X.json")
    _, pretty, _ = run(capsys, "power", "--theory", "energy", "--U", files / "X.json", "--format", "pretty")
    keys = [ln.split()[0] for ln in pretty.splitlines() if ln.strip()]
    for k in ("G", "L", "method", "certified"):
        assert k in keys
    assert set(json.loads(js)) - {"schema", "command", "argmax_state", "argmin_state", "measure"} <= set(keys)


def test_json_output_byte_identical(files, capsys):
    argv = ["certify", "--theorem", "thm1", "--impl", files / "impl.json", "--target", files / "X.json",
            "--measure", "energy", "--seed", 5, "--restarts", 4]
    a = run(capsys, *argv)[1]
    b = run(capsys, *argv)[1]
    assert a == b


def test_sweep_writes_artifacts(tmp_path, capsys):
    scen = {"theory": T.theory_to_json(T.EnergyConserving(H01)), "target": matrix_to_json(X),
            "measure": M.EnergyExpectation(H01).to_json(),
            "d_E": [1, 2], "restarts": 1, "seed": 2}
    (tmp_path / "s.json").write_text(json.dumps(scen))
    code, out, _ = run(capsys, "sweep", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o",
                       "--power-restarts", 1)
    doc = json.loads(out)
    assert code == 0 and [c["d_E"] for c in doc["cells"]] == [1, 2]
    for name in ("sweep.json", "sweep.jsonl", "sweep.csv", "sweep.dat"):
        assert (tmp_path / "o" / name).stat().st_size > 0
    scen.pop("seed")
    (tmp_path / "s2.json").write_text(json.dumps(scen))
    code, _, err = run(capsys, "sweep", "--scenario", tmp_path / "s2.json", "--out", tmp_path / "o2")
    assert code == 2 and "seed" in err
