import json
import sys

import pytest

from contactlab.core.report import Provenance, error_report
from contactlab.core.sampling import SamplingSpec
from contactlab.core.scenarios import (
    CHECKS,
    Scenario,
    StructureSpec,
    exit_code,
    load_registry,
    run_scenario,
)
from contactlab.core.structure_file import load_structure, read_structure_file
from contactlab.main_cli import main

SMALL = SamplingSpec(grid=(2, 2, 3))

HEISENBERG_FILE = {
    "name": "heisenberg-json",
    "eta": ["-0.5*y", "0", "0.5"],
    "g": [
        ["0.25 + 0.25*y^2", "0", "-0.25*y"],
        ["0", "0.25", "0"],
        ["-0.25*y", "0", "0.25"],
    ],
    "domain": {"bounds": [[-1, 1], [-1, 1], [-1, 1]]},
}


@pytest.fixture
def heisenberg_file(tmp_path):
    path = tmp_path / "heisenberg.json"
    path.write_text(json.dumps(HEISENBERG_FILE))
    return str(path)


def _run_cli(monkeypatch, *argv):
    monkeypatch.setattr(sys, "argv", ["contactlab", *argv])
    with pytest.raises(SystemExit) as exc:
        main()
    return exc.value.code


class TestRegistry:
    def test_packaged_registry(self):
        registry = load_registry()
        assert "flat-torus-axioms" in registry
        assert "heisenberg-eta-einstein" in registry
        for scenario in registry.values():
            assert all(c.check in CHECKS for c in scenario.checks)

    def test_duplicate_names(self):
        text = """
scenarios:
  - {name: a, structure: {model: flat-torus}, checks: [{check: contact-axioms}]}
  - {name: a, structure: {model: heisenberg}, checks: [{check: contact-axioms}]}
"""
        with pytest.raises(RuntimeError) as exc:
            load_registry(text)
        assert "Duplicate scenario name 'a'" in str(exc.value)

    def test_undeclared_check(self):
        text = "scenarios:\n  - {name: a, structure: {model: flat-torus}, checks: [{check: nope}]}\n"
        with pytest.raises(RuntimeError) as exc:
            load_registry(text)
        assert "undeclared checks" in str(exc.value)

    def test_exceeds_needs_floor(self):
        text = (
            "scenarios:\n  - {name: a, expect: exceeds, structure: {model: flat-torus},"
            " checks: [{check: contact-axioms}]}\n"
        )
        with pytest.raises(RuntimeError):
            load_registry(text)

    def test_not_a_list(self):
        with pytest.raises(RuntimeError) as exc:
            load_registry("scenarios: 3\n")
        assert "'scenarios' list" in str(exc.value)

    def test_gf_needs_f(self):
        with pytest.raises(ValueError):
            StructureSpec(model="gf")


class TestOverrides:
    def test_f_and_variant(self):
        scenario = load_registry()["gf-derived-const"]
        changed = scenario.with_overrides(f="0.2", variant="half-offdiag")
        assert changed.structure.f == "0.2"
        assert changed.structure.variant == "half-offdiag"
        assert scenario.structure.f == "0.1"

    def test_a_replaces_check_params(self):
        scenario = load_registry()["heisenberg-transform-law"]
        changed = scenario.with_overrides(a=3.0)
        assert changed.checks[0].params["a"] == 3.0

    def test_structure_file(self, heisenberg_file):
        changed = load_registry()["heisenberg-sasakian"].with_overrides(structure_file=heisenberg_file)
        assert changed.structure.model == "file"


class TestRunScenario:
    def test_flat_torus_axioms(self):
        report = run_scenario(load_registry()["flat-torus-axioms"], sampling=SMALL)
        assert report.verdict == "pass"
        assert report.met is True
        assert report.summary.count == 12
        assert report.provenance.sampling == "grid 2x2x3"
        assert report.provenance.seed == 7

    def test_expected_failure_is_met(self):
        report = run_scenario(load_registry()["flat-torus-sasakian"], sampling=SMALL)
        assert report.verdict == "fail"
        assert report.met is True

    def test_workers_do_not_change_output(self):
        scenario = load_registry()["universal-heisenberg"]
        one = run_scenario(scenario, sampling=SMALL, workers=1, chunk_size=5)
        many = run_scenario(scenario, sampling=SMALL, workers=3, chunk_size=5)
        assert one.model_dump() == many.model_dump()

    def test_bad_f_is_error_verdict(self):
        scenario = load_registry()["gf-derived-const"].with_overrides(f="0.1*x")
        report = run_scenario(scenario, sampling=SMALL)
        assert report.verdict == "error"
        assert report.met is False
        assert "z only" in report.notes["error"]

    def test_syntax_error_is_error_verdict(self):
        scenario = load_registry()["gf-derived-const"].with_overrides(f="0.1*")
        report = run_scenario(scenario, sampling=SMALL)
        assert report.verdict == "error"
        assert "ExpressionSyntaxError" in report.notes["error"]

    @pytest.mark.parametrize(
        "name",
        [
            "flat-torus-killing-x",
            "heisenberg-ricci-z-x",
            "heisenberg-ricci-z-xi",
            "universal-gf-half-offdiag",
            "oracle-gf-derived",
            "gf-remark-paper-literal-const",
            "gf-remark-paper-literal-sin",
            "gf-remark-half-offdiag-const",
            "gf-remark-half-offdiag-sin",
            "gf-zero-gap",
            "gf-zero-gap-paper-literal",
            "gf-zero-gap-half-offdiag",
        ],
    )
    def test_variant_coverage_meets_expectation(self, name):
        report = run_scenario(load_registry()[name], sampling=SMALL)
        assert report.verdict != "error"
        assert report.met is True

    def test_structure_file(self, heisenberg_file):
        scenario = Scenario(
            name="from-file",
            structure=StructureSpec(model="file", file=heisenberg_file),
            checks=[{"check": "contact-axioms"}, {"check": "sasakian"}],
        )
        report = run_scenario(scenario, sampling=SMALL)
        assert report.verdict == "pass"


class TestStructureFile:
    def test_read(self, heisenberg_file):
        spec = read_structure_file(heisenberg_file)
        assert spec.name == "heisenberg-json"
        S = load_structure(heisenberg_file)
        assert S.provenance["model"] == "file:heisenberg-json"

    def test_missing(self, tmp_path):
        with pytest.raises(RuntimeError) as exc:
            read_structure_file(str(tmp_path / "nope.json"))
        assert "not found" in str(exc.value)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(RuntimeError) as exc:
            read_structure_file(str(path))
        assert "JSON syntax error" in str(exc.value)

    def test_extra_field(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({**HEISENBERG_FILE, "color": "red"}))
        with pytest.raises(RuntimeError) as exc:
            read_structure_file(str(path))
        assert "Structure file validation error" in str(exc.value)

    def test_asymmetric_metric(self, tmp_path):
        path = tmp_path / "asym.json"
        g = [row[:] for row in HEISENBERG_FILE["g"]]
        g[0][1] = "0.1"
        path.write_text(json.dumps({**HEISENBERG_FILE, "g": g}))
        with pytest.raises(ValueError) as exc:
            load_structure(str(path))
        assert "not symmetric" in str(exc.value)


def test_exit_code():
    ok = run_scenario(load_registry()["flat-torus-axioms"], sampling=SMALL)
    missed = ok.model_copy(update={"met": False})
    err = error_report("e", "boom", Provenance(tolerance=1e-8))
    assert exit_code([ok]) == 0
    assert exit_code([ok, missed]) == 1
    assert exit_code([missed, err]) == 2


class TestCli:
    def test_list_scenarios(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "argv", ["contactlab", "list-scenarios"])
        main()
        out = capsys.readouterr().out
        assert "flat-torus-axioms" in out
        assert "gf-remark-sin" in out

    def test_check_passes(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        code = _run_cli(
            monkeypatch, "check", "--scenario", "flat-torus-axioms", "--grid", "2x2x2", "--format", "jsonl"
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 9
        assert json.loads(lines[-1])["summary"]["verdict"] == "pass"

    def test_unknown_scenario(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        assert _run_cli(monkeypatch, "check", "--scenario", "nope") == 2
        assert "unknown scenario 'nope'" in capsys.readouterr().err

    def test_missing_structure_file(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        code = _run_cli(
            monkeypatch, "check", "--scenario", "heisenberg-sasakian", "--structure", "missing.json"
        )
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_structure_override(self, monkeypatch, heisenberg_file, tmp_path):
        monkeypatch.chdir(tmp_path)
        code = _run_cli(
            monkeypatch,
            "check", "--scenario", "heisenberg-sasakian", "--structure", heisenberg_file, "--grid", "2x2x2",
        )
        assert code == 0

    def test_error_verdict_exit(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        code = _run_cli(
            monkeypatch, "check", "--scenario", "gf-derived-const", "--f", "0.1*x", "--grid", "2x2x2"
        )
        assert code == 2
        assert "Error in gf-derived-const" in capsys.readouterr().err

    def test_bad_config(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        config = tmp_path / "bad.yaml"
        config.write_text("checks:\n  workers: 0\n")
        code = _run_cli(monkeypatch, "check", "--scenario", "flat-torus-axioms", "-c", str(config))
        assert code == 2
        assert "Config validation error" in capsys.readouterr().err

    def test_log_file(self, monkeypatch, capsys, tmp_path):
        monkeypatch.chdir(tmp_path)
        code = _run_cli(monkeypatch, "check", "--scenario", "flat-torus-axioms", "--grid", "1x1x1", "--log")
        assert code == 0
        assert "Telemetry logging to: contactlab-log.jsonl" in capsys.readouterr().err
        assert (tmp_path / "contactlab-log.jsonl").exists()

    def test_out_file_csv(self, monkeypatch, tmp_path):
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "report.csv"
        code = _run_cli(
            monkeypatch,
            "check", "--scenario", "flat-torus-axioms", "--grid", "2x2x2", "--format", "csv", "--out", str(out),
        )
        assert code == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 9
        assert rows[0].startswith("scenario,x,y,z,")

    def test_run_all_is_deterministic(self, monkeypatch, tmp_path):
        monkeypatch.chdir(tmp_path)
        outputs = []
        for i in range(2):
            out = tmp_path / f"run{i}.jsonl"
            _run_cli(
                monkeypatch,
                "run", "--all", "--seed", "7", "--grid", "2x2x2", "--format", "jsonl", "--out", str(out),
                "--workers", str(1 + 2 * i),
            )
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        summaries = [json.loads(line) for line in outputs[0].decode().splitlines() if '"summary"' in line]
        assert len(summaries) == len(load_registry())
