"""The flattened-chart partial connection and its three transport routes."""

import math

import numpy as np
import pytest

from crorbit.connection import (
    ChartSetup,
    ChartValidationError,
    connection_axioms_check,
    covariant_derivative,
    covariant_derivative_via_bracket,
    curve_transport,
    dual_transport,
    flow_transport,
    hamiltonian_restriction_check,
    horizontal_transport,
    lift_section,
    validate_chart,
    xhat_field,
)
from crorbit.expr import Const, Var, add, mul, parse_expr
from crorbit.flow import FlowWord
from crorbit.vectorfield import VectorFieldSpec
from crorbit.verify import transport_corpus

EXP_FIELD = VectorFieldSpec.parse(["1", "x2"], 2)
EXP_CHART = ChartSetup(l=1, m=1, frame=(EXP_FIELD,))


class TestValidateChart:
    def test_tangent_field_passes(self):
        rep = validate_chart(EXP_CHART, [[0.0], [0.5], [-1.2]])
        assert rep.passed and rep.max_tangency_violation <= 1e-12

    def test_normal_field_fails_with_location(self):
        bad = ChartSetup(1, 1, (VectorFieldSpec.parse(["0", "1"], 2),))
        rep = validate_chart(bad, [[0.0]])
        assert not rep.passed
        assert rep.first_failure == (1, 0)

    def test_degenerate_codimension_zero_passes_vacuously(self):
        frame = (VectorFieldSpec.parse(["1", "0", "2*x2"], 3),)
        rep = validate_chart(ChartSetup(3, 0, frame), [[0.1, 0.2, 0.3]])
        assert rep.passed

    def test_rank_deficiency_detected(self):
        doubled = ChartSetup(1, 1, (EXP_FIELD, EXP_FIELD))
        rep = validate_chart(doubled, [[0.3]])
        assert not rep.rank_ok and not rep.passed


class TestCovariantDerivative:
    def test_exponential_chart_constant_section(self):
        out = covariant_derivative(EXP_CHART, EXP_FIELD, [Const(1.0)], [0.0])
        assert np.allclose(out, [-1.0], atol=1e-14)

    def test_zero_section(self):
        out = covariant_derivative(EXP_CHART, EXP_FIELD, [Const(0.0)], [0.7])
        assert np.allclose(out, [0.0])

    def test_zero_field_tensoriality(self):
        zero = VectorFieldSpec.parse(["0", "0"], 2)
        out = covariant_derivative(EXP_CHART, zero, [parse_expr("x1^2", 1)], [0.4])
        assert np.allclose(out, [0.0])

    def test_matches_bracket_definition(self):
        rng = np.random.default_rng(8)
        for case in transport_corpus(41, 10):
            c = case.chart
            eta = [
                parse_expr(f"{rng.uniform(-1, 1)!r} + {rng.uniform(-1, 1)!r}*x1", c.l)
                for _ in range(c.m)
            ]
            xp = rng.uniform(-0.3, 0.3, c.l)
            formula = covariant_derivative(c, case.field, eta, xp)
            bracket = covariant_derivative_via_bracket(
                c, case.field, lift_section(c, eta), xp
            )
            assert np.max(np.abs(formula - bracket)) <= 1e-12

    def test_non_tangent_field_rejected(self):
        bad = VectorFieldSpec.parse(["0", "1"], 2)
        with pytest.raises(ChartValidationError):
            covariant_derivative(EXP_CHART, bad, [Const(1.0)], [0.0])

    def test_wrong_section_size(self):
        with pytest.raises(ValueError, match="components"):
            covariant_derivative(EXP_CHART, EXP_FIELD, [Const(1.0), Const(2.0)], [0.0])


class TestTransports:
    def test_horizontal_closed_form(self):
        out = horizontal_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], 1.0)
        assert abs(out.eta[0] - math.e) <= 1e-9
        assert abs(out.base[0] - 1.0) <= 1e-10

    def test_zero_section_is_horizontal(self):
        out = horizontal_transport(EXP_CHART, EXP_FIELD, [0.0], [0.0], 0.8)
        assert out.eta[0] == 0.0

    def test_time_zero_identity(self):
        out = horizontal_transport(EXP_CHART, EXP_FIELD, [0.3], [0.7], 0.0)
        assert out.base[0] == 0.3 and out.eta[0] == 0.7

    def test_flow_transport_matches_horizontal(self):
        h = horizontal_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], 1.0)
        f = flow_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], 1.0)
        assert abs(f.eta[0] - math.e) <= 1e-8
        assert abs(f.eta[0] - h.eta[0]) <= 1e-8

    def test_flow_transport_zero_vector(self):
        f = flow_transport(EXP_CHART, EXP_FIELD, [0.0], [0.0], 0.6)
        assert f.eta[0] == 0.0

    def test_flow_transport_identity_word(self):
        f = flow_transport(EXP_CHART, FlowWord.empty(), [0.2], [0.9])
        assert f.eta[0] == 0.9

    def test_flow_transport_word_equals_single_leg(self):
        w = flow_transport(EXP_CHART, FlowWord.of((1, 0.8)), [0.0], [1.0])
        s = flow_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], 0.8)
        assert abs(w.eta[0] - s.eta[0]) <= 1e-12

    def test_word_with_time_rejected(self):
        with pytest.raises(ValueError, match="t must be None"):
            flow_transport(EXP_CHART, FlowWord.of((1, 0.5)), [0.0], [1.0], t=0.5)

    def test_dual_closed_form_and_pairing(self):
        for t in (-1.0, 0.5, 1.0, 2.0):
            h = horizontal_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], t)
            d = dual_transport(EXP_CHART, EXP_FIELD, [0.0], [1.0], t)
            assert abs(d.xi[0] - math.exp(-t)) <= 1e-9
            assert abs(h.eta[0] * d.xi[0] - 1.0) <= 1e-8

    def test_dual_zero_covector(self):
        d = dual_transport(EXP_CHART, EXP_FIELD, [0.0], [0.0], 1.3)
        assert d.xi[0] == 0.0

    def test_transport_equivalence_small_corpus(self):
        for case in transport_corpus(55, 15):
            h = horizontal_transport(
                case.chart, case.field, case.x0, case.eta0, case.t_equiv
            )
            f = flow_transport(case.chart, case.field, case.x0, case.eta0, case.t_equiv)
            scale = max(1.0, float(np.max(np.abs(h.eta))))
            assert np.max(np.abs(h.eta - f.eta)) <= 1e-7 * scale

    def test_curve_transport_behind_flag(self):
        with pytest.raises(ValueError, match="experimental"):
            curve_transport(EXP_CHART, lambda t: [1.0], [0.0], [1.0], 1.0)
        out = curve_transport(
            EXP_CHART, lambda t: [1.0], [0.0], [1.0], 1.0, experimental=True
        )
        # constant weight 1 on a single field reduces to the horizontal ODE
        assert abs(out.eta[0] - math.e) <= 1e-9


class TestXhatField:
    def test_exponential_chart(self):
        out = xhat_field(EXP_CHART, EXP_FIELD, ([0.7], [1.0]))
        assert np.allclose(out, [1.0, -1.0], atol=1e-14)

    def test_zero_covector_keeps_base_velocity(self):
        out = xhat_field(EXP_CHART, EXP_FIELD, ([0.2], [0.0]))
        assert np.allclose(out, [1.0, 0.0])

    def test_constant_field(self):
        c = ChartSetup(1, 1, (VectorFieldSpec.parse(["1", "0"], 2),))
        out = xhat_field(c, c.frame[0], ([0.0], [3.0]))
        assert np.allclose(out, [1.0, 0.0])


class TestHamiltonianRestriction:
    def test_exponential_chart_samples(self):
        rng = np.random.default_rng(3)
        samples = [(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)) for _ in range(100)]
        rep = hamiltonian_restriction_check(EXP_CHART, EXP_FIELD, samples)
        assert rep.passed
        assert rep.max_tangency <= 1e-12 and rep.max_mismatch <= 1e-12

    def test_multiplier_scaling(self):
        phi = add(Const(1.0), mul(Var(0), Var(0)))  # 1 + x1^2
        samples = [(np.array([0.5]), np.array([2.0]))]
        rep = hamiltonian_restriction_check(EXP_CHART, EXP_FIELD, samples, multiplier=phi)
        assert rep.passed and rep.max_multiplier_mismatch <= 1e-10

    def test_zero_covector_samples(self):
        samples = [(np.array([0.4]), np.array([0.0]))]
        rep = hamiltonian_restriction_check(EXP_CHART, EXP_FIELD, samples)
        assert rep.passed


class TestConnectionAxioms:
    def test_trivial_multiplier(self):
        rep = connection_axioms_check(
            EXP_CHART, EXP_FIELD, [Const(1.0)], Const(1.0), [[0.0], [0.5]]
        )
        assert rep.passed and rep.max_scaling_residual == 0.0

    def test_scaling_example(self):
        phi = parse_expr("x1", 2)
        scaled = covariant_derivative(EXP_CHART, EXP_FIELD.scaled(phi), [Const(1.0)], [2.0])
        base = covariant_derivative(EXP_CHART, EXP_FIELD, [Const(1.0)], [2.0])
        assert np.allclose(scaled, [-2.0], atol=1e-13)
        assert np.allclose(scaled, 2.0 * base, atol=1e-13)

    def test_lifting_independence_explicit(self):
        # adding x2 * d/dx1 (tangent to N on N) to the lift changes nothing
        lift = lift_section(EXP_CHART, [Const(1.0)])
        perturbed = VectorFieldSpec(
            (add(lift.coefficients[0], Var(1)), lift.coefficients[1]), 2
        )
        for xp in ([0.0], [0.8], [-0.4]):
            a = covariant_derivative_via_bracket(EXP_CHART, EXP_FIELD, lift, xp)
            b = covariant_derivative_via_bracket(EXP_CHART, EXP_FIELD, perturbed, xp)
            assert np.max(np.abs(a - b)) <= 1e-12

    def test_axioms_on_random_chart(self):
        case = transport_corpus(77, 1)[0]
        c = case.chart
        rng = np.random.default_rng(4)
        eta = [parse_expr(f"{rng.uniform(-1, 1)!r}*x1", c.l) for _ in range(c.m)]
        phi = parse_expr("1 + x1^2", c.dim)
        rep = connection_axioms_check(
            c, case.field, eta, phi, [rng.uniform(-0.3, 0.3, c.l) for _ in range(5)]
        )
        assert rep.passed, rep
