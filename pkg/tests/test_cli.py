import csv
import json
from pathlib import Path

import pytest

from laguerre_lab import cli, fixtures

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("ORTHO", "TRACE_DECAY", "SQUARE_SCALING", "SHARPNESS"):
        assert name in out


def test_verify_fixtures(tmp_path, capsys):
    assert cli.main(["verify-fixtures"]) == 0
    assert "fixtures ok" in capsys.readouterr().out
    bad = _write(tmp_path, fixtures.DEFAULT_PATH.read_text(encoding="utf-8").replace("1.152", "1.153"), "fx.txt")
    assert cli.main(["verify-fixtures", "--path", str(bad)]) == 2


def test_ortho_run_writes_outputs(tmp_path):
    assert cli.main(["run", str(CONFIGS / "ortho.ini"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "ortho.json").read_text(encoding="utf-8"))
    assert set(doc) == {"experiment", "preset", "seed", "params", "summary", "pass"}
    assert doc["pass"] is True and doc["preset"] == "smoke"
    raw = (tmp_path / "ortho.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["d", "alpha", "gram_error", "roundtrip_error"]
    assert all(len(r) == 4 for r in rows)


def test_json_key_order_is_stable(tmp_path):
    cli.main(["run", str(CONFIGS / "ortho.ini"), "--out", str(tmp_path)])
    text = (tmp_path / "ortho.json").read_text(encoding="utf-8")
    doc = json.loads(text)
    assert text == json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@pytest.mark.parametrize("config,header", [
    ("trace_decay.ini", ["n", "norm", "log_n", "log_norm"]),
    ("square_scaling.ini", ["delta", "low_norm", "high_norm", "total", "fitted_exponent"]),
])
def test_csv_schemas(tmp_path, config, header):
    code, files = cli.run_config(CONFIGS / config, "smoke", 1, tmp_path)
    assert code == 0
    csv_path = next(p for p in files if p.suffix == ".csv")
    assert csv_path.read_text(encoding="utf-8").splitlines()[0].split(",") == header


def test_assertion_failure_exit_code(tmp_path):
    # the configured eigenvalue shift 2 disagrees with the kernel, so consistency fails
    assert cli.main(["run", str(CONFIGS / "potential_schur.ini"), "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "potential_schur.json").read_text())["pass"] is False


@pytest.mark.parametrize("text", [
    "not an ini file",
    "[experiment]\nname = ORTHO\n[params]\nbogus = 1\n",
    "[experiment]\nname = ORTHO\n[extras]\nx = 1\n",
    "[experiment]\nname = ORTHO\nseed = abc\n",
    "[experiment]\nname = NOPE\n",
    "[experiment]\nname = ORTHO\n[params]\nmax_level = four\n",
    "[params]\nmax_level = 2\n",
])
def test_config_errors_exit_2(tmp_path, text):
    out = tmp_path / "out"
    assert cli.main(["run", str(_write(tmp_path, text)), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.ini")]) == 2


def test_bad_jobs_exit_2(tmp_path):
    assert cli.main(["run", str(CONFIGS / "ortho.ini"), "--jobs", "0", "--out", str(tmp_path / "o")]) == 2


def test_bad_seed_env_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_SEED", "twelve")
    assert cli.main(["run", str(CONFIGS / "ortho.ini"), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_numerical_failure_exit_3(tmp_path):
    cfg = _write(tmp_path, "[experiment]\nname = TRACE_DECAY\n[params]\npower_max_iter = 1\n")
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == 3
    assert not out.exists()


def test_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_SEED", "77")
    cli.main(["run", str(CONFIGS / "ortho.ini"), "--out", str(tmp_path)])
    assert json.loads((tmp_path / "ortho.json").read_text())["seed"] == 77


def test_seed_falls_back_to_fixture(tmp_path, monkeypatch):
    monkeypatch.delenv("LAB_SEED", raising=False)
    cfg = _write(tmp_path, "[experiment]\nname = ORTHO\n")
    cli.main(["run", str(cfg), "--out", str(tmp_path)])
    assert json.loads((tmp_path / "exp.json").read_text())["seed"] == fixtures.fixture("default_seed")


def test_jobs_do_not_change_bytes(tmp_path):
    one, two = tmp_path / "one", tmp_path / "two"
    cli.run_config(CONFIGS / "trace_decay.ini", "smoke", 1, one)
    cli.run_config(CONFIGS / "trace_decay.ini", "smoke", 2, two)
    for name in ("trace_decay.json", "trace_decay.csv"):
        assert (one / name).read_bytes() == (two / name).read_bytes()


def test_refuses_on_fixture_mismatch(tmp_path, monkeypatch):
    monkeypatch.setattr(fixtures, "EXPECTED_SHA256", "0" * 64)
    out = tmp_path / "out"
    assert cli.main(["run", str(CONFIGS / "ortho.ini"), "--out", str(out)]) == 2
    assert not out.exists()


def test_atomic_write_leaves_no_partial_files(tmp_path, monkeypatch):
    target = tmp_path / "a.csv"
    target.write_text("old\n")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_atomic({target: "new\n", tmp_path / "b.json": "{}\n"})
    assert target.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv"]
