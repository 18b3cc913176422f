"""Scenario-driven command line: analyze, transport, orbit, verify.

Exit codes are a stable contract: 0 success, 1 check failure, 2 input
error (schema violations, unknown points, expression errors).  Reports are
JSON; trajectories and point clouds are CSV.  CRORBIT_THREADS caps the
parallelism of batch flow evaluations.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .connection import (
    ChartValidationError,
    dual_transport,
    flow_transport,
    horizontal_transport,
    validate_chart,
)
from .crmanifold import (
    ManifoldError,
    complex_tangent_space,
    conormal_fiber,
    genericity_check,
    lemma21_check,
    tangent_space,
    theta_isomorphism_check,
    HolomorphicForm,
)
from .expr import ExprError
from .flow import FlowError, FlowWord
from .orbit import (
    OrbitSearchParams,
    global_minimality_certificate,
    lie_hull,
    pushforward_span,
    reachable_samples,
    verify_certificate,
    write_cloud_csv,
    random_words,
)
from .report import CheckResult, Report
from .scenario import Scenario, ScenarioError, load_scenario
from .verify import SUITES, run_suites

__all__ = ["main", "cmd_analyze", "cmd_transport", "cmd_orbit", "cmd_verify"]

_INPUT_ERRORS = (
    ScenarioError,
    ExprError,
    ManifoldError,
    ChartValidationError,
    ValueError,
)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_word(text: str) -> FlowWord:
    try:
        steps = json.loads(text)
        return FlowWord(tuple((int(i), float(t)) for i, t in steps))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ScenarioError(
            f"--word must be JSON like [[1, 0.5], [2, -0.25]]: {exc}"
        ) from exc


# ---------------------------------------------------------------------------
# commands (in-process API used by the CLI and the tests)
# ---------------------------------------------------------------------------

def cmd_analyze(scenario: Scenario, point_spec: str, seed: int | None = None) -> Report:
    """Genericity, tangent dimensions, transposedness spot checks, minimality."""
    seed = scenario.seed if seed is None else seed
    report = Report(
        "analyze",
        {"point": point_spec},
        seed,
        scenario_name=scenario.name,
        scenario_digest=scenario.digest,
    )
    pt = scenario.point(point_spec)

    if scenario.kind == "chart":
        chart = scenario.model_chart
        rep = validate_chart(chart, [pt])
        report.results.append(
            CheckResult(
                "chart-validation",
                rep.passed,
                rep.max_tangency_violation,
                1e-12,
                details={"rank_ok": rep.rank_ok, "l": chart.l, "m": chart.m},
            )
        )
        return report

    m = scenario.manifold
    m.require_on_manifold(pt)
    gen = genericity_check(m, pt)
    report.results.append(
        CheckResult(
            "genericity",
            gen.generic,
            details={
                "real_rank": gen.real_rank,
                "complex_rank": gen.complex_rank,
                "codimension": m.d,
            },
        )
    )
    if not gen.generic:
        return report

    tm = tangent_space(m, pt)
    tc = complex_tangent_space(m, pt)
    report.results.append(
        CheckResult(
            "tangent-dimensions",
            tm.dim == m.dim and tc.dim == 2 * m.cr_dim,
            details={
                "tangent_dim": tm.dim,
                "complex_tangent_dim": tc.dim,
                "cr_dim": m.cr_dim,
            },
        )
    )

    rng = np.random.default_rng(seed)
    forms = conormal_fiber(m, pt)
    worst = 0.0
    for _ in range(20):
        w = rng.uniform(-1.0, 1.0, len(forms))
        omega = HolomorphicForm(sum(wi * f.zeta for wi, f in zip(w, forms)))
        x_vec = tm.basis @ rng.uniform(-1.0, 1.0, tm.dim)
        rep = lemma21_check(m, pt, omega, x_vec)
        worst = max(worst, rep.complex_identity_residual, rep.real_convention_residual)
    report.results.append(CheckResult("lemma21-spot", worst <= 1e-12, worst, 1e-12))
    ok, sv = theta_isomorphism_check(m, pt)
    report.results.append(
        CheckResult("theta-isomorphism", ok, sv, 1e-8, comparator=">=")
    )

    hull = lie_hull(m, scenario.default_frame(), pt)
    report.results.append(
        CheckResult(
            "minimality",
            hull.stabilized,
            details={
                "local_orbit_dimension": hull.dimension,
                "manifold_dimension": m.dim,
                "minimal": hull.dimension == m.dim,
                "depth_reached": hull.depth_reached,
            },
        )
    )
    return report


def cmd_transport(
    scenario: Scenario,
    chart_name: str | None = None,
    field: int = 1,
    word: FlowWord | None = None,
    point_spec: str | None = None,
    eta0: np.ndarray | None = None,
    xi0: np.ndarray | None = None,
    t: float = 1.0,
    out_dir: Path | None = None,
) -> Report:
    """Run the three transport descriptions and report pairwise deviations."""
    if chart_name is not None:
        if chart_name not in scenario.charts:
            raise ScenarioError(
                f"unknown chart {chart_name!r}; known: {sorted(scenario.charts)}"
            )
        chart = scenario.charts[chart_name]
    elif scenario.kind == "chart":
        chart = scenario.model_chart
    elif len(scenario.charts) == 1:
        chart = next(iter(scenario.charts.values()))
    else:
        raise ScenarioError("scenario has no unique chart; pass --chart")

    x0 = scenario.point(point_spec) if point_spec else np.zeros(chart.l)
    if x0.shape != (chart.l,):
        raise ScenarioError(f"point must have {chart.l} coordinates (x' only)")
    eta0 = np.ones(chart.m) if eta0 is None else eta0
    xi0 = np.ones(chart.m) if xi0 is None else xi0
    if eta0.shape != (chart.m,) or xi0.shape != (chart.m,):
        raise ScenarioError(f"eta and xi need {chart.m} components")

    rep = validate_chart(chart, [x0])
    if not rep.passed:
        raise ChartValidationError(f"chart failed validation at {x0}: {rep}")

    report = Report(
        "transport",
        {
            "chart": chart_name,
            "field": None if word is not None else field,
            "word": [list(s) for s in word.steps] if word is not None else None,
            "t": None if word is not None else t,
            "eta0": eta0.tolist(),
            "xi0": xi0.tolist(),
        },
        scenario.seed,
        scenario_name=scenario.name,
        scenario_digest=scenario.digest,
    )

    cfg = scenario.integrator
    eta_path: list = []
    xi_path: list = []
    if word is not None:
        word.validate(chart.rank)
        base, eta, xi = x0, eta0, xi0
        for idx, tt in word.steps:
            fld = chart.frame[idx - 1]
            h = horizontal_transport(chart, fld, base, eta, tt, cfg, path=eta_path)
            d = dual_transport(chart, fld, base, xi, tt, cfg, path=xi_path)
            base, eta, xi = h.base, h.eta, d.xi
        fv = flow_transport(chart, word, x0, eta0, cfg=cfg)
        h_base, h_eta, d_xi = base, eta, xi
    else:
        if not 1 <= field <= chart.rank:
            raise ScenarioError(f"field index {field} outside frame of size {chart.rank}")
        fld = chart.frame[field - 1]
        h = horizontal_transport(chart, fld, x0, eta0, t, cfg, path=eta_path)
        d = dual_transport(chart, fld, x0, xi0, t, cfg, path=xi_path)
        fv = flow_transport(chart, fld, x0, eta0, t, cfg)
        h_base, h_eta, d_xi = h.base, h.eta, d.xi

    deviation = float(np.max(np.abs(h_eta - fv.eta), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(h_eta), initial=0.0)))
    pairing_drift = abs(float(h_eta @ d_xi) - float(eta0 @ xi0))
    report.results.append(
        CheckResult(
            "horizontal-vs-flow",
            deviation <= 1e-7 * scale,
            deviation / scale,
            1e-7,
            details={
                "horizontal": h_eta.tolist(),
                "flow": fv.eta.tolist(),
                "endpoint": h_base.tolist(),
            },
        )
    )
    report.results.append(
        CheckResult(
            "duality-pairing",
            pairing_drift <= 1e-8,
            pairing_drift,
            1e-8,
            details={"xi": d_xi.tolist(), "initial_pairing": float(eta0 @ xi0)},
        )
    )

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for fname, rows, label in (
            ("transport_eta.csv", eta_path, "eta"),
            ("transport_xi.csv", xi_path, "xi"),
        ):
            with open(out_dir / fname, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["t", *[f"xp{i + 1}" for i in range(chart.l)],
                     *[f"{label}{i + 1}" for i in range(chart.m)]]
                )
                for tt, base, fiber in rows:
                    writer.writerow(
                        [repr(float(tt))]
                        + [repr(float(v)) for v in base]
                        + [repr(float(v)) for v in fiber]
                    )
            report.outputs[fname] = str(out_dir / fname)
    return report


def cmd_orbit(
    scenario: Scenario,
    point_spec: str,
    budget: int = 64,
    seed: int | None = None,
    out_dir: Path | None = None,
) -> Report:
    """Orbit dimension estimates, minimality certificate search, sample cloud."""
    if scenario.kind != "embedded":
        raise ScenarioError("orbit analysis needs an embedded-manifold scenario")
    seed = scenario.seed if seed is None else seed
    m = scenario.manifold
    frame = scenario.default_frame()
    pt = scenario.point(point_spec)
    m.require_on_manifold(pt)

    report = Report(
        "orbit",
        {"point": point_spec, "budget": budget},
        seed,
        scenario_name=scenario.name,
        scenario_digest=scenario.digest,
    )

    hull = lie_hull(m, frame, pt)
    report.results.append(
        CheckResult(
            "lie-hull",
            hull.stabilized,
            details={
                "dimension": hull.dimension,
                "manifold_dimension": m.dim,
                "minimal": hull.dimension == m.dim,
            },
        )
    )

    params = OrbitSearchParams(budget=budget, seed=seed)
    cert_rep = global_minimality_certificate(m, frame, pt, params)
    if cert_rep.certificate is not None:
        ok, sigma = verify_certificate(m, frame, pt, cert_rep.certificate)
        report.results.append(
            CheckResult(
                "global-minimality-certificate",
                ok,
                cert_rep.certificate.smallest_singular_value,
                params.tau_cert,
                comparator=">=",
                details={
                    "found": True,
                    "words": len(cert_rep.certificate.words),
                    "reverified_sigma": sigma,
                },
            )
        )
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            cert_path = out_dir / "certificate.json"
            cert_path.write_text(
                json.dumps(cert_rep.certificate.to_dict(), indent=2, sort_keys=True)
            )
            report.outputs["certificate.json"] = str(cert_path)
    else:
        best = cert_rep.best_span
        report.results.append(
            CheckResult(
                "global-minimality-certificate",
                True,  # budget exhaustion is reported in-band, not a failure
                details={
                    "found": False,
                    "budget_exhausted": cert_rep.budget_exhausted,
                    "best_span_dimension": best.dimension if best else None,
                    "note": cert_rep.note,
                },
            )
        )

    rng = np.random.default_rng(seed)
    words = [FlowWord.empty()] + random_words(rng, min(budget, 8), len(frame), 3, 0.4)
    span = pushforward_span(m, frame, pt, words)
    report.results.append(
        CheckResult(
            "pushforward-span",
            span.dimension == hull.dimension,
            details={
                "dimension": span.dimension,
                "lie_hull_dimension": hull.dimension,
                "words": len(words),
            },
        )
    )

    cloud = reachable_samples(m, frame, pt, min(budget, 60), seed=seed)
    max_drift = max(cloud.drifts, default=0.0)
    report.results.append(
        CheckResult(
            "reachable-samples",
            max_drift <= scenario.integrator.drift_bound,
            max_drift,
            scenario.integrator.drift_bound,
            details={"points": len(cloud.points), "failures": cloud.failures},
        )
    )
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        cloud_path = out_dir / "orbit_cloud.csv"
        write_cloud_csv(str(cloud_path), cloud)
        report.outputs["orbit_cloud.csv"] = str(cloud_path)
    return report


def cmd_verify(suite: str = "all", seed: int = 0) -> Report:
    """Run the named verification suite(s); exit 0 iff every check passes."""
    names = sorted(SUITES) if suite == "all" else [suite]
    for name in names:
        if name not in SUITES:
            raise ScenarioError(
                f"unknown suite {name!r}; available: {sorted(SUITES)} or 'all'"
            )
    report = Report("verify", {"suite": suite}, seed)
    report.results = run_suites(names, seed)
    return report


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crorbit",
        description=(
            "Partial connections, flow transport and CR-orbit minimality "
            "certificates for generic submanifolds."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument(
            "--format", choices=("json", "csv"), default=None,
            help="print the JSON report (json) instead of the summary lines",
        )

    p = sub.add_parser("analyze", help="genericity, tangent ranks, minimality")
    p.add_argument("--scenario", required=True, help="builtin name or JSON file")
    p.add_argument("--point", required=True, help="point name or comma-separated coords")
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("transport", help="compare the three transport descriptions")
    p.add_argument("--scenario", required=True)
    p.add_argument("--chart", default=None, help="chart name within the scenario")
    p.add_argument("--field", type=int, default=1, help="1-based frame field index")
    p.add_argument("--word", default=None, help="JSON list of [index, time] steps")
    p.add_argument("--point", default=None, help="base point (x' coordinates)")
    p.add_argument("--eta", default=None, help="comma-separated eta components")
    p.add_argument("--xi", default=None, help="comma-separated xi components")
    p.add_argument("--t", type=float, default=1.0)
    common(p)

    p = sub.add_parser("orbit", help="orbit dimensions, certificate search, cloud")
    p.add_argument("--scenario", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument(
        "--suite",
        default="all",
        help=f"one of {sorted(SUITES)} or 'all'",
    )
    p.add_argument("--seed", type=int, default=0)
    common(p)
    return parser


def _emit(report: Report, args) -> int:
    out_dir: Path | None = getattr(args, "out", None)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(report.to_json() + "\n")
    if getattr(args, "format", None) == "json":
        print(report.to_json())
    else:
        for r in report.results:
            flag = "PASS" if r.passed else "FAIL"
            if r.value is not None and r.bound is not None:
                print(f"[{flag}] {r.name}: {r.value:.3e} {r.comparator} {r.bound:.1e}")
            else:
                print(f"[{flag}] {r.name}: {json.dumps(r.to_dict()['details'], sort_keys=True)}")
        print(f"{'OK' if report.passed else 'FAILED'} ({len(report.results)} checks)")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "format", None) == "csv" and getattr(args, "out", None) is None:
        print("error: --format csv needs --out for the CSV artifacts", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        if args.command == "analyze":
            scenario = load_scenario(args.scenario)
            report = cmd_analyze(scenario, args.point, args.seed)
        elif args.command == "transport":
            scenario = load_scenario(args.scenario)
            report = cmd_transport(
                scenario,
                chart_name=args.chart,
                field=args.field,
                word=_parse_word(args.word) if args.word else None,
                point_spec=args.point,
                eta0=_parse_vector(args.eta) if args.eta else None,
                xi0=_parse_vector(args.xi) if args.xi else None,
                t=args.t,
                out_dir=args.out,
            )
        elif args.command == "orbit":
            scenario = load_scenario(args.scenario)
            report = cmd_orbit(
                scenario, args.point, args.budget, args.seed, out_dir=args.out
            )
        elif args.command == "verify":
            report = cmd_verify(args.suite, args.seed)
        else:  # pragma: no cover - argparse enforces the choices
            return 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FlowError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report.timings = {"total_seconds": time.perf_counter() - t0}
    return _emit(report, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
