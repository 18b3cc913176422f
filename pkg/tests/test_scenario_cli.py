"""Scenario schema, builtins, CLI exit codes and report determinism."""

import json

import numpy as np
import pytest

from crorbit.cli import cmd_analyze, cmd_orbit, cmd_transport, cmd_verify, main
from crorbit.scenario import (
    BUILTIN_SCENARIOS,
    ScenarioError,
    builtin_scenario,
    load_scenario,
)


class TestScenarioLoading:
    def test_builtins_resolve(self):
        for name in BUILTIN_SCENARIOS:
            sc = builtin_scenario(name)
            assert sc.name == name
            assert sc.digest
            if sc.kind == "embedded":
                assert sc.manifold is not None
                assert sc.frames
            else:
                assert sc.model_chart is not None

    def test_unknown_builtin(self):
        with pytest.raises(ScenarioError, match="neither a builtin"):
            load_scenario("does-not-exist")

    def test_schema_violation_reported_with_path(self, tmp_path):
        bad = dict(BUILTIN_SCENARIOS["lewy"])
        bad = json.loads(json.dumps(bad))
        bad["manifold"] = {"type": "embedded", "complex_dim": 2}  # rho missing
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ScenarioError, match="schema violation"):
            load_scenario(str(path))

    def test_expression_errors_surface(self, tmp_path):
        raw = json.loads(json.dumps(BUILTIN_SCENARIOS["lewy"]))
        raw["manifold"]["rho"] = ["v - x^2 - w^2"]  # unknown identifier w
        path = tmp_path / "bad_expr.json"
        path.write_text(json.dumps(raw))
        with pytest.raises(ScenarioError, match="expression error"):
            load_scenario(str(path))

    def test_point_dimension_checked(self, tmp_path):
        raw = json.loads(json.dumps(BUILTIN_SCENARIOS["lewy"]))
        raw["points"]["origin"] = [0.0, 0.0]
        path = tmp_path / "bad_pt.json"
        path.write_text(json.dumps(raw))
        with pytest.raises(ScenarioError, match="coordinates"):
            load_scenario(str(path))

    def test_custom_file_round_trip(self, tmp_path):
        raw = json.loads(json.dumps(BUILTIN_SCENARIOS["flat"]))
        raw["name"] = "flat-copy"
        path = tmp_path / "flat.json"
        path.write_text(json.dumps(raw))
        sc = load_scenario(str(path))
        assert sc.name == "flat-copy"
        assert sc.manifold.d == 1

    def test_point_resolution(self):
        sc = builtin_scenario("lewy")
        assert np.array_equal(sc.point("origin"), np.zeros(4))
        assert np.array_equal(sc.point("0.1,0,0,0.01"), [0.1, 0, 0, 0.01])
        with pytest.raises(ScenarioError, match="unknown point"):
            sc.point("nowhere")


class TestCommands:
    def test_analyze_lewy(self):
        report = cmd_analyze(builtin_scenario("lewy"), "origin")
        assert report.passed
        by_name = {r.name: r for r in report.results}
        assert by_name["genericity"].details["complex_rank"] == 1
        assert by_name["tangent-dimensions"].details["cr_dim"] == 1
        assert by_name["minimality"].details["minimal"] is True

    def test_analyze_flat_not_minimal(self):
        report = cmd_analyze(builtin_scenario("flat"), "origin")
        assert report.passed  # analysis succeeded; non-minimality is a finding
        by_name = {r.name: r for r in report.results}
        assert by_name["minimality"].details["minimal"] is False

    def test_analyze_chart_scenario(self):
        report = cmd_analyze(builtin_scenario("expchart"), "origin")
        assert report.passed
        assert report.results[0].name == "chart-validation"

    def test_transport_expchart(self, tmp_path):
        report = cmd_transport(
            builtin_scenario("expchart"),
            eta0=np.array([1.0]),
            xi0=np.array([1.0]),
            t=1.0,
            out_dir=tmp_path,
        )
        assert report.passed
        by_name = {r.name: r for r in report.results}
        assert by_name["horizontal-vs-flow"].value <= 1e-8
        assert by_name["duality-pairing"].value <= 1e-8
        eta_csv = (tmp_path / "transport_eta.csv").read_text().splitlines()
        assert eta_csv[0] == "t,xp1,eta1"
        assert len(eta_csv) > 2

    def test_transport_word(self):
        report = cmd_transport(
            builtin_scenario("expchart"),
            word=__import__("crorbit.flow", fromlist=["FlowWord"]).FlowWord.of(
                (1, 0.5), (1, 0.5)
            ),
        )
        assert report.passed

    def test_orbit_lewy_with_certificate(self, tmp_path):
        report = cmd_orbit(builtin_scenario("lewy"), "origin", budget=32, seed=7, out_dir=tmp_path)
        assert report.passed
        by_name = {r.name: r for r in report.results}
        assert by_name["lie-hull"].details["minimal"] is True
        assert by_name["global-minimality-certificate"].details["words"] <= 3
        cert = json.loads((tmp_path / "certificate.json").read_text())
        assert cert["smallest_singular_value"] >= 1e-3
        cloud_lines = (tmp_path / "orbit_cloud.csv").read_text().splitlines()
        assert cloud_lines[0].startswith("word,")

    def test_orbit_flat_no_certificate_in_band(self):
        report = cmd_orbit(builtin_scenario("flat"), "origin", budget=12, seed=7)
        assert report.passed
        by_name = {r.name: r for r in report.results}
        detail = by_name["global-minimality-certificate"].details
        assert detail["found"] is False
        assert detail["budget_exhausted"] is True
        assert detail["best_span_dimension"] == 2


class TestExitCodes:
    def test_analyze_success(self, capsys):
        assert main(["analyze", "--scenario", "lewy", "--point", "origin"]) == 0
        out = capsys.readouterr().out
        assert "OK" in out

    def test_point_off_manifold_is_input_error(self, capsys):
        code = main(["analyze", "--scenario", "lewy", "--point", "1,0,0,0.5"])
        assert code == 2
        assert "rho" in capsys.readouterr().err

    def test_malformed_scenario_exit_2(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"name": "broken"}))
        code = main(["analyze", "--scenario", str(path), "--point", "origin"])
        assert code == 2
        assert "schema" in capsys.readouterr().err

    def test_invalid_json_exit_2(self, tmp_path, capsys):
        path = tmp_path / "nonsense.json"
        path.write_text("{not json")
        assert main(["analyze", "--scenario", str(path), "--point", "origin"]) == 2

    def test_unknown_suite_exit_2(self, capsys):
        assert main(["verify", "--suite", "nonexistent"]) == 2

    def test_verify_single_suite_exit_0(self, capsys):
        assert main(["verify", "--suite", "lemma21", "--seed", "5"]) == 0

    def test_injected_sign_error_fails_named_check(self, monkeypatch, capsys):
        """A sign flip in the conormal transport field must fail the hamiltonian suite."""
        import crorbit.connection as connection
        import crorbit.verify as verify

        original = connection.xhat_field

        def flipped(c, x_field, p):
            out = original(c, x_field, p)
            out[c.l:] = -out[c.l:]
            return out

        monkeypatch.setattr(verify, "xhat_field", flipped)
        code = main(["verify", "--suite", "hamiltonian", "--seed", "5"])
        assert code == 1
        out = capsys.readouterr().out
        assert "[FAIL] xhat-hamiltonian-identification" in out

    def test_json_format_emits_report(self, capsys):
        assert main(["verify", "--suite", "lemma21", "--format", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["command"] == "verify"
        assert doc["passed"] is True

    def test_suite_crash_reported_as_failed_check(self, monkeypatch, capsys):
        """A flow blow-up inside a suite becomes a failed check, not a traceback."""
        import crorbit.verify as verify
        from crorbit.flow import FlowBlowupError

        def explode(seed):
            raise FlowBlowupError("synthetic blow-up")

        monkeypatch.setitem(verify.SUITES, "duality", explode)
        code = main(["verify", "--suite", "duality"])
        assert code == 1
        out = capsys.readouterr().out
        assert "duality-suite-aborted" in out


class TestDeterminism:
    def test_verify_reports_identical_modulo_timings(self):
        a = cmd_verify("lemma21", seed=9)
        b = cmd_verify("lemma21", seed=9)
        a.timings = {"total_seconds": 1.0}
        b.timings = {"total_seconds": 2.0}
        assert a.comparable_json() == b.comparable_json()
        assert a.to_json() != b.to_json()

    def test_orbit_reports_deterministic(self):
        a = cmd_orbit(builtin_scenario("lewy"), "origin", budget=16, seed=4)
        b = cmd_orbit(builtin_scenario("lewy"), "origin", budget=16, seed=4)
        assert a.comparable_json() == b.comparable_json()

    def test_report_written_to_out_dir(self, tmp_path):
        assert main([
            "verify", "--suite", "lemma21", "--seed", "2", "--out", str(tmp_path)
        ]) == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["arguments"] == {"suite": "lemma21"}
        assert "timings" in doc
