import json

import numpy as np
import pytest

from starcovert import cli, detection, experiments

TINY = """\
seed: 11
solver:
  max_outer: 15
sweep:
  seeds: 2
  starts: 1
  warm_chain: true
  axes:
    - {name: eps, var: epsilon, values: [0.1, 0.3]}
    - {name: elements, var: N, values: [6, 10]}
validate:
  dep_configs: 2
  dep_taus: 4
  dep_samples: 20000
  dep_tol: 0.03
  outage_configs: 2
  outage_samples: 20000
  outage_tol: 0.02
  grid_configs: 3
  grid_points: 5000
  fd_points: 1
  avg_configs: 1
  avg_samples: 20000
  avg_tol: 0.02
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def swept(tmp_path_factory):
    """Config path and output directory of one traced sweep."""
    root = tmp_path_factory.mktemp("sweep")
    path = root / "tiny.yaml"
    path.write_text(TINY, encoding="utf-8")
    assert cli.main(["sweep", str(path), "--out-dir", str(root / "a"), "--trace"]) == 0
    return path, root / "a"


def test_sweep_is_byte_identical_across_runs(swept, tmp_path):
    path, first = swept
    assert cli.main(["sweep", str(path), "--out-dir", str(tmp_path), "--trace"]) == 0
    for name in ("sweep_eps.csv", "sweep_elements.csv", "traces/seed_000.jsonl"):
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes()


def test_sweep_csv_layout(swept):
    _, out = swept
    text = (out / "sweep_eps.csv").read_text(encoding="utf-8").splitlines()
    assert text[0].startswith("# config_hash=") and "master_seed=11" in text[0]
    assert text[1] == ",".join(experiments.CSV_COLUMNS)
    rows = experiments.read_csv(out / "sweep_eps.csv")
    assert len(rows) == 4
    assert {r["scheme"] for r in rows} == {"star", "ris"}
    for r in rows:
        assert r["seed_count"] == "2"
        assert r["wall_ms"] == ""
        assert float(r["mean_rate"]) >= 0.0
        assert 0 <= int(r["feasible_count"]) <= 2


def test_trace_header(swept):
    _, out = swept
    lines = (out / "traces" / "seed_001.jsonl").read_text(encoding="utf-8").splitlines()
    head = json.loads(lines[0])
    assert head["master_seed"] == 11 and head["seed_index"] == 1
    rec = json.loads(lines[1])
    for key in ("axis", "sweep_value", "scheme", "start", "k", "merit", "inner_count"):
        assert key in rec


def test_seed_override_changes_output(swept, tmp_path):
    path, first = swept
    cli.main(["sweep", str(path), "--out-dir", str(tmp_path), "--seed", "12"])
    a = (first / "sweep_eps.csv").read_text(encoding="utf-8")
    b = (tmp_path / "sweep_eps.csv").read_text(encoding="utf-8")
    assert "master_seed=12" in b and a != b


def test_validate_passes_and_writes_report(tiny, tmp_path, capsys):
    assert cli.main(["validate", str(tiny), "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6
    report = json.loads((tmp_path / "validate.json").read_text(encoding="utf-8"))
    assert all(c["passed"] for c in report["checks"])


def _printed_sign_dep(tau, p):
    """The DEP with a plus sign in the last branch, as a deliberate mutation."""
    t = np.asarray(tau, dtype=float) - p.sigma2_w
    A, lam, lam_t = p.jam_span, p.lam, p.lam_t
    psi = (lam_t * np.exp(-t / lam_t) - lam * np.exp(-t / lam)) / A
    chi = A - t
    with np.errstate(over="ignore"):
        hi = 1 + psi + (lam * np.exp(chi / lam) + lam_t * np.exp(chi / lam_t)) / A
    mid = 1 + psi + (lam - lam_t) / A
    out = np.where(t < 0, 1.0, np.where(t <= A, mid, hi))
    return np.clip(out, 0.0, 1.0)


def test_mutation_canary_fails_validation(tiny, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(detection, "dep", _printed_sign_dep)
    assert cli.main(["validate", str(tiny), "--out-dir", str(tmp_path)]) != 0
    assert "FAIL  mc_dep" in capsys.readouterr().out


def test_solve_prints_rate(tiny, capsys):
    code = cli.main(["solve", str(tiny)])
    out = capsys.readouterr().out
    assert "covert rate" in out and "master_seed=11" in out
    assert code in (0, 2)


def test_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("validate:\n  dep_samples: 0\nsystem:\n  N: -3\n", encoding="utf-8")
    assert cli.main(["validate", str(path)]) == 2
    err = capsys.readouterr().err
    assert "validate.dep_samples" in err and "system.N" in err


def test_missing_file_exit_code(tmp_path):
    assert cli.main(["sweep", str(tmp_path / "none.yaml")]) == 2


def test_bad_jobs(tiny):
    assert cli.main(["sweep", str(tiny), "--jobs", "0"]) == 2


def test_parallel_matches_serial(swept, tmp_path):
    path, first = swept
    cli.main(["sweep", str(path), "--out-dir", str(tmp_path), "--jobs", "2"])
    for name in ("sweep_eps.csv", "sweep_elements.csv"):
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes()
