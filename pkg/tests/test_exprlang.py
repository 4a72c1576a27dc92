import math

import numpy as np
import pytest

from cgnn_lab.exprlang import (
    BinOp,
    Call,
    Const,
    ExprEvalError,
    ExprSyntaxError,
    Neg,
    Var,
    compile_expr,
    estimate_bound,
    eval_expr,
    free_vars,
    parse_expr,
    print_expr,
)


def ev(text, params, **bindings):
    return eval_expr(parse_expr(text, params), bindings)


class TestParseEval:
    def test_function_plus_constant(self):
        assert ev("sin(u)+2", ["u"], u=0.0) == 2.0

    def test_precedence_mul_over_add(self):
        assert ev("2+3*t", ["t"], t=1.0) == 5.0

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expr("sin(", ["u"])
        assert err.value.offset == 4

    def test_tanh_value(self):
        assert ev("tanh(u)", ["u"], u=0.5) == pytest.approx(0.46211715726, abs=1e-10)

    def test_zero_factor(self):
        assert ev("u*exp(sin(u)/(1+u^2))", ["u"], u=0.0) == 0.0

    def test_time_coefficient_at_zero(self):
        # (1/3)cos(t) + e^-t at t = 0
        assert ev("cos(t)/3 + exp(-t)", ["t"], t=0.0) == pytest.approx(4.0 / 3.0)

    def test_constants_pi_e(self):
        assert ev("cos(pi)", []) == pytest.approx(-1.0)
        assert ev("e", []) == pytest.approx(math.e)

    def test_power_right_associative(self):
        assert ev("2^3^2", []) == 512.0

    def test_unary_minus_binds_below_power(self):
        assert ev("-2^2", []) == -4.0

    def test_unknown_identifier(self):
        with pytest.raises(ExprSyntaxError, match="unknown identifier"):
            parse_expr("sin(q)", ["u"])

    def test_arity_mismatch(self):
        with pytest.raises(ExprSyntaxError, match="exactly one argument"):
            parse_expr("sin(u, u)", ["u"])

    def test_unknown_function(self):
        with pytest.raises(ExprSyntaxError, match="unknown function"):
            parse_expr("sinh(u)", ["u"])

    def test_empty(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("   ", ["u"])

    def test_division_by_zero_names_subtree(self):
        e = parse_expr("1/(u-1)", ["u"])
        with pytest.raises(ExprEvalError, match="division by zero"):
            eval_expr(e, {"u": 1.0})

    def test_missing_binding(self):
        e = parse_expr("u+t", ["u", "t"])
        with pytest.raises(ExprEvalError, match="unbound"):
            eval_expr(e, {"u": 1.0})

    def test_free_vars(self):
        assert free_vars(parse_expr("u1*tanh(u2)+pi", ["u1", "u2"])) == {"u1", "u2"}


def _random_expr(rng, params, depth):
    """Small random expression tree over the full node vocabulary."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5 and params:
            return Var(rng.choice(params))
        return Const(round(rng.uniform(-3, 3), 3))
    pick = rng.random()
    if pick < 0.2:
        return Neg(_random_expr(rng, params, depth - 1))
    if pick < 0.5:
        fn = rng.choice(["sin", "cos", "tanh", "exp", "abs"])
        return Call(fn, _random_expr(rng, params, depth - 1))
    op = rng.choice(["+", "-", "*"])  # / and ^ excluded: domain-error-free trees
    return BinOp(op, _random_expr(rng, params, depth - 1),
                 _random_expr(rng, params, depth - 1))


class TestRoundTripAndProperties:
    def test_print_parse_round_trip(self):
        rng = np.random.default_rng(7)
        params = ("t", "u")
        for _ in range(200):
            e = _random_expr(rng, params, 4)
            text = print_expr(e)
            e2 = parse_expr(text, params)
            for _ in range(5):
                b = {"t": float(rng.uniform(-5, 5)), "u": float(rng.uniform(-5, 5))}
                assert abs(eval_expr(e, b) - eval_expr(e2, b)) <= 1e-12

    @pytest.mark.parametrize("pair", [("a+b*c", "a+(b*c)"), ("a^b^c", "a^(b^c)"),
                                      ("a-b-c", "(a-b)-c"), ("a/b/c", "(a/b)/c")])
    def test_precedence_equivalences(self, pair):
        rng = np.random.default_rng(11)
        e1 = parse_expr(pair[0], ["a", "b", "c"])
        e2 = parse_expr(pair[1], ["a", "b", "c"])
        for _ in range(50):
            b = {k: float(rng.uniform(0.2, 2.0)) for k in "abc"}
            assert eval_expr(e1, b) == pytest.approx(eval_expr(e2, b), abs=1e-12)

    def test_compiled_matches_eval(self):
        rng = np.random.default_rng(23)
        params = ("t", "u")
        for _ in range(100):
            e = _random_expr(rng, params, 4)
            fn = compile_expr(e, params)
            fs = compile_expr(e, params, scalar=True)
            t, u = float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3))
            ref = eval_expr(e, {"t": t, "u": u})
            assert float(fn(t, u)) == pytest.approx(ref, abs=1e-12)
            assert float(fs(t, u)) == pytest.approx(ref, abs=1e-12)

    def test_compiled_vectorizes(self):
        fn = compile_expr(parse_expr("u*exp(-u)+1", ["u"]), ("u",))
        xs = np.linspace(0, 3, 7)
        np.testing.assert_allclose(fn(xs), xs * np.exp(-xs) + 1.0)


class TestEstimateBound:
    def test_tanh_lipschitz_is_one(self):
        e = parse_expr("tanh(u)", ["u"])
        est = estimate_bound(e, "u", (-5.0, 5.0), "lipschitz", 20001)
        assert est.value == pytest.approx(1.0, abs=0.01)
        assert not est.certified

    def test_square_lipschitz_on_unit_interval(self):
        e = parse_expr("u^2", ["u"])
        est = estimate_bound(e, "u", (0.0, 1.0), "lipschitz", 4001)
        assert est.value == pytest.approx(2.0, abs=0.01)

    def test_derivative_min_of_self_signal_factor(self):
        # dense-grid central differences; the frozen oracle value for
        # min over [-10, 10] of d/du [u e^{sin u / (1+u^2)}] is 0.5458448
        # (4e6-point scan cross-checked against the closed-form derivative)
        e = parse_expr("u*exp(sin(u)/(1+u^2))", ["u"])
        est = estimate_bound(e, "u", (-10.0, 10.0), "derivative-min", 1_000_001)
        assert est.value == pytest.approx(0.5458448, abs=0.02)
        assert est.value == pytest.approx(0.5458448, abs=1e-5)

    def test_sup_inf(self):
        e = parse_expr("sin(u)+2", ["u"])
        assert estimate_bound(e, "u", (-5, 5), "sup", 10001).value == pytest.approx(3.0, abs=1e-5)
        assert estimate_bound(e, "u", (-5, 5), "inf", 10001).value == pytest.approx(1.0, abs=1e-5)

    def test_lipschitz_monotone_under_refinement(self):
        e = parse_expr("sin(3*u)+u^2", ["u"])
        samples = 51
        prev = -math.inf
        for _ in range(5):
            est = estimate_bound(e, "u", (-2.0, 2.0), "lipschitz", samples)
            assert est.value >= prev - 1e-12
            prev = est.value
            samples = 2 * samples - 1  # nested dyadic refinement

    def test_fixed_bindings(self):
        e = parse_expr("t*u", ["t", "u"])
        est = estimate_bound(e, "u", (0.0, 1.0), "lipschitz", 101, fixed={"t": 3.0})
        assert est.value == pytest.approx(3.0, abs=1e-9)

    def test_rejects_bad_interval_and_samples(self):
        e = parse_expr("u", ["u"])
        with pytest.raises(ValueError):
            estimate_bound(e, "u", (1.0, 1.0), "lipschitz", 100)
        with pytest.raises(ValueError):
            estimate_bound(e, "u", (0.0, 1.0), "lipschitz", 1)
        with pytest.raises(ValueError):
            estimate_bound(e, "u", (0.0, 1.0), "slope", 100)

    def test_evaluation_failure_inside_interval(self):
        e = parse_expr("1/u", ["u"])
        with pytest.raises(ExprEvalError, match="non-finite"):
            estimate_bound(e, "u", (-1.0, 1.0), "lipschitz", 101)  # grid hits u = 0
