import json
import math
from pathlib import Path

import jsonschema
import pytest

from qspacetime import cli
from qspacetime.report import build_report, config_hash, dumps, emit_report, load_schema, validate_report

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out-dir", str(out)])
    return code, out


def load(out, stem):
    return json.loads((out / f"{stem}_report.json").read_text())


class TestReport:
    def test_schema_requires_seed(self):
        report = build_report("swap-verify", 1, {})
        del report["seed"]
        with pytest.raises(jsonschema.ValidationError):
            validate_report(report)

    def test_empty_results(self, tmp_path):
        report = build_report("radar", 0, {})
        assert report["results"] == {} and report["status"] == "ok"
        paths = emit_report(report, tmp_path)
        assert [p.name for p in paths] == ["radar_report.json"]

    def test_failed_check_sets_status(self):
        assert build_report("polytope", 0, {}, {}, {"x": False})["status"] == "verification_failed"

    def test_hash_is_key_order_independent(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_dumps_sorted(self):
        text = dumps(build_report("audit", 3, {"z": 1, "a": 2}))
        assert text.index('"a"') < text.index('"z"')

    def test_schema_shipped(self):
        assert load_schema()["properties"]["tool"]["const"] == "qspacetime"


class TestCli:
    def test_swap_verify(self, tmp_path):
        code, out = run(tmp_path, "swap-verify")
        assert code == 0
        r = load(out, "swap_verify")
        assert r["seed"] == 0
        assert len(r["results"]["standard"]["residuals"]) == 4
        assert all(v < 1e-12 for v in r["results"]["standard"]["residuals"].values())
        header = (out / "swap_verify_phase_table.csv").read_text().splitlines()[0]
        assert header == "convention,lhs,term,re,im"

    def test_tsirelson(self, tmp_path):
        code, out = run(tmp_path, "tsirelson", "--scenario", str(SCENARIOS / "chsh.json"))
        assert code == 0
        r = load(out, "tsirelson")
        assert abs(r["results"]["quantum_value"] - 2 * math.sqrt(2)) < 1e-6
        assert r["seed"] == 3

    def test_audit_fail_is_data(self, tmp_path):
        code, out = run(tmp_path, "audit", "--scenario", str(SCENARIOS / "audit_signaling.json"))
        assert code == 0
        r = load(out, "audit")
        assert r["results"]["verdict"] == "FAIL"
        assert r["status"] == "ok"

    def test_seed_flag_overrides(self, tmp_path):
        code, out = run(tmp_path, "timeline", "--scenario", str(SCENARIOS / "timeline_swap.json"), "--seed", "99", "--samples", "2000")
        assert code == 0
        r = load(out, "timeline")
        assert r["seed"] == 99 and r["results"]["runs"] == 2000

    @pytest.mark.parametrize(
        "command,scenario",
        [
            ("swap-verify", None),
            ("timeline", "timeline_delayed.json"),
            ("polytope", "chsh.json"),
            ("frame-recover", "frame_sampled_triad.json"),
            ("radar", "radar_3d.json"),
            ("audit", "audit_singlet.json"),
            ("signal-attempt", "signal_biased.json"),
        ],
    )
    def test_byte_identical(self, tmp_path, command, scenario):
        args = [command, "--samples", "3000"] if command in ("timeline", "audit", "signal-attempt") else [command]
        if scenario:
            args += ["--scenario", str(SCENARIOS / scenario)]
        c1, o1 = run(tmp_path, *args, name="a")
        c2, o2 = run(tmp_path, *args, name="b")
        assert c1 == c2 == 0
        files = sorted(p.name for p in o1.iterdir())
        assert files == sorted(p.name for p in o2.iterdir())
        for name in files:
            assert (o1 / name).read_bytes() == (o2 / name).read_bytes()

    @pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.json")))
    def test_shipped_scenarios_validate(self, tmp_path, name):
        command = {
            "swap": "swap-verify",
            "timeline": "timeline",
            "chsh": "tsirelson",
            "frame": "frame-recover",
            "radar": "radar",
            "audit": "audit",
            "signal": "signal-attempt",
        }[name.split("_")[0].removesuffix(".json")]
        code, out = run(tmp_path, command, "--scenario", str(SCENARIOS / name), "--samples", "2000")
        assert code == 0
        for path in out.glob("*_report.json"):
            validate_report(json.loads(path.read_text()))

    def test_verification_failure_exit(self, tmp_path):
        scenario = tmp_path / "tight.json"
        scenario.write_text(json.dumps({"tolerance": 0.0}))
        code, out = run(tmp_path, "swap-verify", "--scenario", str(scenario))
        assert code == 1
        assert load(out, "swap_verify")["status"] == "verification_failed"

    def test_usage_errors(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["nonsense"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            cli.main(["audit", "--scenario", str(tmp_path / "missing.json")])
        assert exc.value.code == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(SystemExit) as exc:
            cli.main(["audit", "--scenario", str(bad)])
        assert exc.value.code == 2

    def test_malformed_scenario(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"box": "pr_box"}))
        code, _ = run(tmp_path, "audit", "--scenario", str(bad))
        assert code == 2

    def test_unwritable_out_dir(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["swap-verify", "--out-dir", str(blocker / "sub")]) == 2
