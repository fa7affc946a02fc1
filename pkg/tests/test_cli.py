import json

import pytest

from infreg.cli import main
from infreg.model import ensemble_from_json


def _tiny_config(tmp_path, **overrides):
    doc = {
        "schema": 1,
        "model": {
            "r": 2,
            "scene_count": 1,
            "channel": {"kind": "bsc", "alpha": 0.1},
        },
        "group": {"kind": "ring", "order": 8},
        "algorithm": {"name": "mmi_pair"},
        "sweep": {"variable": "n", "values": [32, 64]},
        "m": 2,
        "trials": 4,
        "seed": 11,
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_simulate_writes_replayable_ensemble(tmp_path, capsys):
    cfg = _tiny_config(tmp_path)
    out = tmp_path / "ensemble.json"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    text = out.read_text()
    e = ensemble_from_json(text)
    assert e.m == 2 and e.n == 32 and e.seed == 11
    printed = capsys.readouterr().out
    assert "true partition" in printed and "scene collision" in printed


def test_simulate_is_deterministic_and_seed_sensitive(tmp_path):
    cfg = _tiny_config(tmp_path)
    a, b, c = (tmp_path / name for name in ("a.json", "b.json", "c.json"))
    main(["simulate", "--config", str(cfg), "--out", str(a)])
    main(["simulate", "--config", str(cfg), "--out", str(b)])
    main(["simulate", "--config", str(cfg), "--out", str(c), "--seed", "12"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_run_outputs_and_manifest(tmp_path, capsys):
    cfg = _tiny_config(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("records.jsonl", "curve_strict.csv",
                 "curve_up_to_cluster_shift.csv", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["algorithm"] == "mmi_pair"
    assert manifest["trials"] == 4 and manifest["seed"] == 11
    assert manifest["sweep"] == {"variable": "n", "values": [32, 64]}
    assert sorted(manifest["outputs"]) == manifest["outputs"]
    records = (out / "records.jsonl").read_text().splitlines()
    assert len(records) == 8  # 4 trials x 2 sweep points
    assert all(json.loads(line)["config_digest"] == manifest["config_digest"]
               for line in records)
    curve = (out / "curve_strict.csv").read_text().splitlines()
    assert curve[0] == "x,rate,lo,hi,trials"
    assert len(curve) == 3
    printed = capsys.readouterr().out
    assert "strict error by n" in printed


def test_run_data_is_byte_stable_across_reruns_and_threads(tmp_path):
    cfg = _tiny_config(tmp_path)
    outs = [tmp_path / f"out{i}" for i in range(3)]
    main(["run", "--config", str(cfg), "--out", str(outs[0])])
    main(["run", "--config", str(cfg), "--out", str(outs[1])])
    main(["run", "--config", str(cfg), "--out", str(outs[2]), "--threads", "4"])
    data_names = ("records.jsonl", "curve_strict.csv", "curve_up_to_cluster_shift.csv")
    for name in data_names:
        base = (outs[0] / name).read_bytes()
        assert (outs[1] / name).read_bytes() == base
        assert (outs[2] / name).read_bytes() == base
    # the manifest may differ only in its timestamp (and thread count)
    m0 = json.loads((outs[0] / "manifest.json").read_text())
    m1 = json.loads((outs[1] / "manifest.json").read_text())
    m0.pop("created_at"), m1.pop("created_at")
    assert m0 == m1


def test_run_seed_override_changes_records(tmp_path):
    cfg = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["run", "--config", str(cfg), "--out", str(out1)])
    main(["run", "--config", str(cfg), "--out", str(out2), "--seed", "99"])
    assert (out1 / "records.jsonl").read_bytes() != (out2 / "records.jsonl").read_bytes()
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 99


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg = _tiny_config(tmp_path)
    out = tmp_path / "env"
    monkeypatch.setenv("INFREG_THREADS", "2")
    main(["run", "--config", str(cfg), "--out", str(out)])
    assert json.loads((out / "manifest.json").read_text())["threads"] == 2


def test_run_rejects_invalid_config(tmp_path, capsys):
    cfg = _tiny_config(tmp_path, algorithm={"name": "nonsense"})
    out = tmp_path / "bad"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


def test_run_rejects_semantically_bad_setup(tmp_path, capsys):
    # ring order must divide the sequence length; caught before any trial
    cfg = _tiny_config(tmp_path, group={"kind": "ring", "order": 7})
    out = tmp_path / "bad2"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert not out.exists()


def test_sequential_degraded_requires_three_images(tmp_path, capsys):
    cfg = _tiny_config(
        tmp_path,
        model={
            "r": 2,
            "scene_count": 1,
            "channel": {
                "kind": "degraded",
                "channels": [
                    {"kind": "bsc", "alpha": 0.1},
                    {"kind": "bsc", "alpha": 0.1},
                ],
            },
        },
        algorithm={"name": "sequential_degraded"},
        m=2,
    )
    out = tmp_path / "seq"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert "error:" in capsys.readouterr().err


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "suites passed" in out
    assert "[FAIL]" not in out
    assert out.count("[PASS]") == 7
