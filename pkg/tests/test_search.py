import csv
import io
import json
import math

import numpy as np
import pytest

from rulab import bounds as B
from rulab import measures as M
from rulab import search as S
from rulab import theories as T
from rulab.io import dumps
from rulab.qlinalg import ValidationError

X = np.array([[0, 1], [1, 0]], dtype=complex)
H01 = np.diag([0.0, 1.0])


def _scenario(d_es, policy=S.CO, target=X, **kw):
    return S.SearchScenario(T.EnergyConserving(H01), target, M.EnergyExpectation(H01), d_es, policy,
                            restarts=kw.pop("restarts", 2), seed=kw.pop("seed", 3), **kw)


@pytest.fixture(scope="module")
def small_sweep():
    return S.run_sweep(_scenario([2, 4]), power_restarts=2)


def test_free_target_needs_no_ancilla():
    res = S.run_sweep(_scenario([1], target=np.diag([1, 1j])), diamond=False, power_restarts=2)
    assert res.lhs == pytest.approx(0.0, abs=1e-12)
    assert res.cells[0].delta_bures <= 1e-8


def test_sweep_monotone_and_above_floor(small_sweep):
    cells = small_sweep.cells
    assert small_sweep.lhs == pytest.approx(2.0)
    deltas = [c.delta_bures for c in cells]
    assert all(d > 0 for d in deltas)
    assert deltas[1] <= deltas[0] + 1e-9
    for c in cells:
        assert c.delta_floor is not None and c.delta_bures >= c.delta_floor
        assert all(r.satisfied for r in c.reports)
        assert c.delta_diamond is not None and c.delta_bures <= math.sqrt(c.delta_diamond) + 1e-6
        assert T.is_free(c.impl.v, c.impl.theory)[0]
    # running best never gets worse
    for c in cells:
        assert all(b <= a + 1e-12 for a, b in zip(c.history, c.history[1:]))


def test_sweep_reaches_known_optimum(small_sweep):
    # for X on a ladder ancilla the searches land on 2 sin(pi / (2 (d_E + 1)))
    for c in small_sweep.cells:
        assert c.delta_bures == pytest.approx(2 * math.sin(math.pi / (2 * (c.d_e + 1))), abs=1e-3)


def test_fixed_state_never_beats_co_optimised(small_sweep):
    fixed = S.run_sweep(_scenario([2], S.FIXED), diamond=False, power_restarts=2)
    assert fixed.cells[0].delta_bures >= small_sweep.cells[0].delta_bures - 1e-6
    assert np.allclose(fixed.cells[0].impl.rho_e, np.diag([1.0, 0.0]))


def test_sweep_outputs(small_sweep):
    doc = json.loads(dumps(small_sweep.to_json()))
    assert [c["d_E"] for c in doc["cells"]] == [2, 4]
    assert "wall_time" not in json.dumps(doc)
    lines = small_sweep.to_jsonl().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["lhs"] == pytest.approx(2.0)
    rows = list(csv.DictReader(io.StringIO(small_sweep.to_csv())))
    assert [int(r["d_E"]) for r in rows] == [2, 4]
    assert float(rows[0]["delta_bures"]) == small_sweep.cells[0].delta_bures
    dat = small_sweep.to_gnuplot().splitlines()
    assert dat[0].startswith("#")
    assert [len(ln.split()) for ln in dat[1:]] == [4, 4]


def test_sweep_deterministic_across_workers(monkeypatch):
    s = _scenario([2], restarts=2)
    a = S.run_sweep(s, diamond=False, power_restarts=2)
    monkeypatch.setenv("RULAB_THREADS", "3")
    b = S.run_sweep(s, diamond=False, power_restarts=2)
    assert dumps(a.to_json()) == dumps(b.to_json())


@pytest.mark.parametrize("raw", ["0", "-2", "two", "1.5"])
def test_thread_count_validation(monkeypatch, raw):
    monkeypatch.setenv("RULAB_THREADS", raw)
    with pytest.raises(ValidationError):
        S.worker_count()


def test_thread_count_default(monkeypatch):
    monkeypatch.delenv("RULAB_THREADS", raising=False)
    assert S.worker_count() == 1
    monkeypatch.setenv("RULAB_THREADS", "4")
    assert S.worker_count() == 4


def test_scenario_json_round_trip_and_strictness():
    s = _scenario([1, 2, 4], S.FIXED, rho_e=np.diag([0.5, 0.5]))
    doc = s.to_json()
    back = S.SearchScenario.from_json(json.loads(json.dumps(doc)))
    assert back.to_json() == doc
    for bad in ({**doc, "extra": 1}, {k: v for k, v in doc.items() if k != "seed"},
                {k: v for k, v in doc.items() if k != "target"}, {**doc, "d_E": [0]}, {**doc, "d_E": [32]},
                {**doc, "ancilla_policy": {"kind": "Sometimes"}}):
        with pytest.raises(ValidationError):
            S.SearchScenario.from_json(bad)


def test_scenario_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        S.SearchScenario(T.CliffordQubit(1), np.eye(2), M.LogStabilizerExtent(1), [3], seed=0)
    with pytest.raises(ValidationError):
        _scenario([2], theorem=B.THM2)
    with pytest.raises(ValidationError):
        S.SearchScenario(T.EnergyConserving(H01), np.eye(3), M.EnergyExpectation(H01), [2], seed=0)


def test_witness_certificate_seed_independent():
    a = S.witness_nogo(_scenario([2, 4, 8, 16], seed=1), 0.0)
    b = S.witness_nogo(_scenario([2, 4, 8, 16], seed=99), 0.0)
    assert a["achievable"] is False and a["confidence"] == "certificate"
    assert a["certificate"] == b["certificate"]
    assert all(r["rhs"] == 0.0 for r in a["certificate"])


def test_witness_needs_resource_change():
    with pytest.raises(ValidationError):
        S.witness_nogo(_scenario([2], target=np.diag([1, 1j])), 0.0)


def test_min_error_floor_inverts_rhs():
    prof = M.continuity_profile(M.EnergyExpectation(H01), M.BURES)
    x = S.min_error_floor(prof, B.THM1, 2.0, 2, 4)
    assert B.thm1_rhs(prof, x, 2, 4) == pytest.approx(2.0, abs=1e-9)
    assert S.min_error_floor(prof, B.THM1, 0.0, 2, 4) == 0.0
