"""Expression parsing, printing, jets and the finite-difference oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crorbit.expr import (
    Add,
    Call,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    compile_values,
    compile_values_and_jacobian,
    differentiate,
    eval_jet,
    eval_value,
    parse_expr,
    substitute,
    to_text,
)


class TestParser:
    def test_direct_grammar_case(self):
        tree = parse_expr("x1*x1 + x2", 2)
        assert tree == Add(Mul(Var(0), Var(0)), Var(1))

    def test_index_out_of_range(self):
        with pytest.raises(ExprSyntaxError, match="out of range"):
            parse_expr("sin(x3)", 2)

    def test_lewy_defining_function_with_aliases(self):
        tree = parse_expr("v - x^2 - y^2", 4, aliases=["x", "y", "u", "v"])
        assert tree == Sub(Sub(Var(3), Pow(Var(0), 2)), Pow(Var(1), 2))

    def test_unknown_identifier_position(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expr("x1 + foo", 2)
        assert err.value.position == 5

    def test_syntax_error_reports_position(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("x1 + * x2", 2)
        with pytest.raises(ExprSyntaxError):
            parse_expr("sin(x1", 1)
        with pytest.raises(ExprSyntaxError):
            parse_expr("x1 x2", 2)

    def test_precedence_and_power(self):
        assert parse_expr("2*x1^2", 1) == Mul(Const(2.0), Pow(Var(0), 2))
        assert parse_expr("x1^-2", 1) == Pow(Var(0), -2)
        with pytest.raises(ExprSyntaxError, match="integer"):
            parse_expr("x1^1.5", 1)

    def test_unary_minus_extension(self):
        assert parse_expr("-3", 1) == Const(-3.0)
        assert parse_expr("-x1", 1) == Neg(Var(0))
        assert eval_value(parse_expr("-x1^2", 1), [3.0]) == -9.0

    def test_function_calls(self):
        assert parse_expr("sin(x1)", 1) == Call("sin", Var(0))
        assert parse_expr("log(exp(x1))", 1) == Call("log", Call("exp", Var(0)))

    def test_alias_shadows_function_rejected(self):
        with pytest.raises(ValueError, match="shadows"):
            parse_expr("sin(x1)", 1, aliases={"sin": 0})


# random tree strategy for the round-trip property
def _exprs(depth: int = 4, dim: int = 3):
    leaves = st.one_of(
        st.integers(0, dim - 1).map(Var),
        st.floats(-5, 5, allow_nan=False).map(lambda v: Const(float(v))),
    )

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: Add(*ab)),
            st.tuples(children, children).map(lambda ab: Sub(*ab)),
            st.tuples(children, children).map(lambda ab: Mul(*ab)),
            st.tuples(children, children).map(lambda ab: Div(*ab)),
            st.tuples(children, st.integers(0, 4)).map(lambda bn: Pow(*bn)),
            children.map(Neg),
            st.tuples(st.sampled_from(["sin", "cos", "exp", "log"]), children).map(
                lambda fa: Call(*fa)
            ),
        )

    return st.recursive(leaves, extend, max_leaves=25)


from crorbit.expr import Div  # noqa: E402  (used by the strategy)


class TestRoundTrip:
    @given(_exprs())
    @settings(max_examples=300, deadline=None)
    def test_print_parse_round_trip(self, tree):
        assert parse_expr(to_text(tree), 3) == tree

    def test_round_trip_with_aliases(self):
        names = ["x", "y", "u", "v"]
        tree = parse_expr("v - x^2 - y^2", 4, names)
        assert parse_expr(to_text(tree, names), 4, names) == tree


class TestJets:
    def test_product_rule(self):
        jet = eval_jet(parse_expr("x1*x2", 2), [3.0, 5.0], order=1)
        assert jet.value == 15.0
        assert np.array_equal(jet.gradient, [5.0, 3.0])

    def test_exp_identity(self):
        jet = eval_jet(parse_expr("exp(x1)", 1), [0.0], order=2)
        assert jet.value == 1.0
        assert jet.gradient[0] == 1.0
        assert jet.hessian[0, 0] == 1.0

    def test_quadratic(self):
        jet = eval_jet(parse_expr("x1^2 + x2^2", 2), [1.0, 2.0], order=2)
        assert jet.value == 5.0
        assert np.array_equal(jet.gradient, [2.0, 4.0])
        assert np.array_equal(jet.hessian, np.diag([2.0, 2.0]))

    def test_hessian_symmetric(self):
        jet = eval_jet(
            parse_expr("sin(x1*x2) + x1^3/x2", 2), [0.7, 1.3], order=2
        )
        assert np.array_equal(jet.hessian, jet.hessian.T)

    def test_order_zero_has_no_gradient(self):
        jet = eval_jet(parse_expr("x1", 1), [2.0], order=0)
        assert jet.gradient is None and jet.hessian is None

    def test_domain_errors(self):
        with pytest.raises(ExprDomainError):
            eval_jet(parse_expr("1/x1", 1), [0.0])
        with pytest.raises(ExprDomainError):
            eval_jet(parse_expr("log(x1)", 1), [-1.0])
        with pytest.raises(ExprDomainError):
            eval_jet(parse_expr("x1^-1", 1), [0.0])


def _random_tree(rng, dim, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Var(int(rng.integers(0, dim)))
        return Const(float(rng.uniform(-2, 2)))
    choice = rng.integers(0, 6)
    a = _random_tree(rng, dim, depth - 1)
    b = _random_tree(rng, dim, depth - 1)
    if choice == 0:
        return Add(a, b)
    if choice == 1:
        return Sub(a, b)
    if choice == 2:
        return Mul(a, b)
    if choice == 3:
        return Pow(a, int(rng.integers(0, 4)))
    if choice == 4:
        return Call(str(rng.choice(["sin", "cos", "exp"])), a)
    return Mul(Const(float(rng.uniform(-1, 1))), a)


class TestFiniteDifferenceOracle:
    def test_gradients_match_central_differences(self):
        """Forward-mode gradients vs central differences on 1000 random cases."""
        rng = np.random.default_rng(99)
        step = 1e-5
        checked = 0
        while checked < 1000:
            dim = int(rng.integers(1, 4))
            tree = _random_tree(rng, dim, 3)
            x = rng.uniform(-1.0, 1.0, dim)
            try:
                jet = eval_jet(tree, x, order=1)
            except ExprDomainError:
                continue
            if abs(jet.value) > 1e3 or np.max(np.abs(jet.gradient)) > 1e3:
                continue
            for k in range(dim):
                xp, xm = x.copy(), x.copy()
                xp[k] += step
                xm[k] -= step
                fd = (eval_value(tree, xp) - eval_value(tree, xm)) / (2 * step)
                scale = max(1.0, abs(jet.gradient[k]))
                assert abs(jet.gradient[k] - fd) <= 1e-6 * scale
            checked += 1


class TestDifferentiate:
    def test_polynomial_partial(self):
        tree = parse_expr("x1^3*x2", 2)
        dx = differentiate(tree, 0)
        assert eval_value(dx, [2.0, 5.0]) == pytest.approx(60.0, abs=1e-12)

    def test_chain_rules(self):
        rng = np.random.default_rng(5)
        for text in ("sin(x1^2)", "cos(x1)*exp(x1)", "log(2 + x1^2)", "1/(1 + x1^2)"):
            tree = parse_expr(text, 1)
            dx = differentiate(tree, 0)
            for _ in range(10):
                x = rng.uniform(-1.0, 1.0, 1)
                assert eval_value(dx, x) == pytest.approx(
                    eval_jet(tree, x, order=1).gradient[0], abs=1e-14
                )

    def test_closed_under_grammar(self):
        tree = parse_expr("sin(x1)*x2^3/(1 + x1^2)", 2)
        d = differentiate(differentiate(tree, 0), 1)
        assert parse_expr(to_text(d), 2) == d


class TestCompiledEvaluators:
    def test_matches_interpreted_path(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            dim = int(rng.integers(1, 5))
            trees = [_random_tree(rng, dim, 3) for _ in range(dim)]
            fn = compile_values_and_jacobian(trees, dim)
            x = rng.uniform(-0.8, 0.8, dim)
            try:
                vals, jac = fn(x)
            except (ZeroDivisionError, OverflowError, ValueError):
                continue
            for i, tree in enumerate(trees):
                jet = eval_jet(tree, x, order=1)
                assert vals[i] == pytest.approx(jet.value, abs=1e-13, rel=1e-13)
                assert np.allclose(jac[i], jet.gradient, atol=1e-13, rtol=1e-13)

    def test_pinned_variables_prune_to_restriction(self):
        tree = parse_expr("x1*x2 + x2^2", 2)
        fn = compile_values_and_jacobian([tree], 2, var_refs=["x[0]", "0.0"], deriv_vars=[1])
        vals, jac = fn([3.0])
        assert vals[0] == 0.0
        assert jac[0][0] == 3.0  # d/dx2 at (3, 0)

    def test_values_only(self):
        fn = compile_values([parse_expr("x1 + 2", 1)], 1)
        assert fn([1.5]) == (3.5,)


class TestSubstitute:
    def test_zero_pinning(self):
        tree = parse_expr("x1*x3 + x2^2", 3)
        pinned = substitute(tree, {2: Const(0.0)})
        assert pinned == Pow(Var(1), 2)
