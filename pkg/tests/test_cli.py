"""Command-line surface and HTTP service."""

import json

import pytest
from fastapi.testclient import TestClient

from pooltest.cli import main
from pooltest.server import create_app


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_single_point(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--strategy", "A3",
                           "--x", "0.2")
    assert code == 0
    assert "cost=0.723834" in out and "optimality=" in out


def test_analyze_best(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--best", "--x", "0.45")
    assert code == 0
    assert "best=A1" in out


def test_analyze_a1_at_half_is_optimal(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--strategy", "A1",
                           "--x", "0.5")
    assert code == 0
    assert "optimality=1" in out


def test_analyze_csv_grid(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--strategy", "A2",
                           "--x-grid", "0.1:0.3:3", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("strategy_id,x,")
    assert len(lines) == 4


def test_cutoffs_table_descending(capsys):
    code, out, _ = run_cli(capsys, "cutoffs")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    values = [float(r.split(",")[1]) for r in rows]
    assert values == sorted(values, reverse=True)
    assert abs(values[0] - 0.381966011250105) < 1e-9


def test_simulate_deterministic(capsys):
    args = ("simulate", "--strategy", "A3", "--x", "0.2",
            "--persons", "4000", "--reps", "4", "--seed", "9")
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2
    assert "misclassifications=0" in out1


def test_simulate_a1_trivial(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--strategy", "A1",
                           "--x", "0.3", "--persons", "1000", "--reps", "2")
    assert code == 0
    assert "tests_per_person=1 " in out or "tests_per_person=1\n" in out


def test_sweep_csv(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--strategy", "A2",
                           "--x-grid", "0.1:0.2:2", "--persons", "2000",
                           "--reps", "2", "--seed", "4")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# seed=4"
    assert len(lines) == 4


def test_dorfman(capsys):
    code, out, _ = run_cli(capsys, "dorfman", "--p", "0.01")
    assert code == 0
    assert "group_size=11" in out


def test_export_strategy(capsys, tmp_path):
    path = tmp_path / "a3.json"
    code, _, _ = run_cli(capsys, "export-strategy", "--strategy", "A3",
                         "--out", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["id"] == "A3"


def test_bad_strategy_nonzero_exit(capsys):
    code, _, err = run_cli(capsys, "analyze", "--strategy", "Q9",
                           "--x", "0.2")
    assert code != 0
    assert "error" in err.lower()


def test_bad_grid_usage_error(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["analyze", "--strategy", "A2", "--x-grid", "oops"])
    assert ei.value.code != 0


# ---------------------------------------------------------------------------
# HTTP service


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(str(tmp_path)))


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_session_lifecycle(client):
    roster = [{"id": f"p{i}"} for i in range(4)]
    r = client.post("/sessions", json={"risk": {"x": 0.15},
                                       "roster": roster,
                                       "strategy": "A4"})
    assert r.status_code == 201
    sid = r.json()["session_id"]
    for _ in range(3):
        nxt = client.get(f"/sessions/{sid}/next").json()
        assert not nxt["complete"]
        iid = nxt["instruction"]["instruction_id"]
        r = client.post(f"/sessions/{sid}/outcome",
                        json={"instruction_id": iid, "outcome": "+"})
        assert r.status_code == 200
    snap = client.get(f"/sessions/{sid}/statuses").json()
    by_id = {m["id"]: m for m in snap["roster"]}
    assert by_id["p3"]["status"] == "POS"
    assert all(by_id[f"p{i}"]["repooled"] == 1 for i in range(3))


def test_auto_strategy_selection(client):
    roster = [{"id": "a"}, {"id": "b"}]
    r = client.post("/sessions", json={"risk": {"x": 0.3}, "roster": roster})
    assert r.json()["strategy"] == "A2"
    roster2 = [{"id": "h", "stratum": "upper"},
               {"id": "l", "stratum": "lower"}]
    r = client.post("/sessions", json={"risk": {"x": 0.38, "y": 0.15},
                                       "roster": roster2})
    assert r.json()["strategy"] == "M1"


def test_double_submit_conflict(client):
    roster = [{"id": f"p{i}"} for i in range(2)]
    sid = client.post("/sessions", json={"risk": {"x": 0.2},
                                         "roster": roster,
                                         "strategy": "A2"}).json()["session_id"]
    iid = client.get(f"/sessions/{sid}/next").json()["instruction"]["instruction_id"]
    body = {"instruction_id": iid, "outcome": "-"}
    assert client.post(f"/sessions/{sid}/outcome", json=body).status_code == 200
    r = client.post(f"/sessions/{sid}/outcome", json=body)
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "SequencingError"


def test_next_idempotent(client):
    roster = [{"id": f"p{i}"} for i in range(3)]
    sid = client.post("/sessions", json={"risk": {"x": 0.2},
                                         "roster": roster,
                                         "strategy": "A3"}).json()["session_id"]
    a = client.get(f"/sessions/{sid}/next").json()
    b = client.get(f"/sessions/{sid}/next").json()
    assert a == b


def test_unknown_session_404(client):
    assert client.get("/sessions/nope/next").status_code == 404


def test_empty_roster_400(client):
    r = client.post("/sessions", json={"risk": {"x": 0.2}, "roster": []})
    assert r.status_code == 400


def test_restart_preserves_sessions(tmp_path):
    c1 = TestClient(create_app(str(tmp_path)))
    roster = [{"id": f"p{i}"} for i in range(4)]
    sid = c1.post("/sessions", json={"risk": {"x": 0.15}, "roster": roster,
                                     "strategy": "A4"}).json()["session_id"]
    for _ in range(2):
        iid = c1.get(f"/sessions/{sid}/next").json()["instruction"]["instruction_id"]
        c1.post(f"/sessions/{sid}/outcome",
                json={"instruction_id": iid, "outcome": "+"})
    snap1 = c1.get(f"/sessions/{sid}/statuses").json()
    c2 = TestClient(create_app(str(tmp_path)))
    snap2 = c2.get(f"/sessions/{sid}/statuses").json()
    assert snap1["tests_used"] == snap2["tests_used"]
    assert snap1["roster"] == snap2["roster"]


def test_history_endpoint(client):
    roster = [{"id": "a"}, {"id": "b"}]
    sid = client.post("/sessions", json={"risk": {"x": 0.2},
                                         "roster": roster,
                                         "strategy": "A2"}).json()["session_id"]
    iid = client.get(f"/sessions/{sid}/next").json()["instruction"]["instruction_id"]
    client.post(f"/sessions/{sid}/outcome",
                json={"instruction_id": iid, "outcome": "-"})
    events = client.get(f"/sessions/{sid}/history").json()["events"]
    assert events[0]["kind"] == "create"
    assert events[1]["kind"] == "outcome"
