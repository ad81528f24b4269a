import numpy as np
import pytest

from symdisc.expr import (
    Add,
    Const,
    ExprSyntaxError,
    Mul,
    Pow,
    Sym,
    compile_expr,
    eval_expr,
    expr_names,
    grad_expr,
    parse_expr,
    print_expr,
)
from tests.conftest import FEYNMAN_INPUTS, FEYNMAN_PARAMS, FEYNMAN_TRUE

FEYNMAN_BINDINGS = dict(m=1.0, w=1.0, w0=1.0, z=1.0, c=0.25, e1=1.0, e2=2.0, e3=2.0, e4=2.0)


class TestParse:
    def test_feynman_structure(self):
        tree = parse_expr(FEYNMAN_TRUE)
        # c * m^e1 * (w^e2 + w0^e3) * z^e4, left-assoc products
        assert isinstance(tree, Mul)
        assert tree.right == Pow(Sym("z"), Sym("e4"))
        assert tree.left.right == Add(Pow(Sym("w"), Sym("e2")), Pow(Sym("w0"), Sym("e3")))
        assert tree.left.left == Mul(Sym("c"), Pow(Sym("m"), Sym("e1")))

    def test_single_variable(self):
        assert parse_expr("x") == Sym("x")

    def test_power_right_associative(self):
        assert eval_expr(parse_expr("2^3^2"), {}) == 512.0

    def test_unary_minus_binds_tighter_than_power(self):
        assert eval_expr(parse_expr("-x^2"), {"x": 3.0}) == 9.0

    def test_whitespace_insensitive(self):
        assert parse_expr(" c *m^ e1 ") == parse_expr("c*m^e1")

    def test_syntax_error_has_position(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expr("2*")
        assert err.value.position == 2

    def test_unknown_character(self):
        with pytest.raises(ExprSyntaxError, match="unknown character"):
            parse_expr("a $ b")

    def test_trailing_garbage(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("(a+b))")

    def test_scientific_literals(self):
        assert eval_expr(parse_expr("2.5e-3"), {}) == 2.5e-3


class TestEval:
    def test_feynman_at_ones(self):
        assert eval_expr(parse_expr(FEYNMAN_TRUE), FEYNMAN_BINDINGS) == pytest.approx(0.5)

    def test_feynman_hand_arithmetic(self):
        b = dict(FEYNMAN_BINDINGS, m=2.0, z=3.0)
        assert eval_expr(parse_expr(FEYNMAN_TRUE), b) == pytest.approx(9.0)

    def test_constant_empty_bindings(self):
        assert eval_expr(parse_expr("5"), {}) == 5.0

    def test_negative_base_fractional_power_is_nan(self):
        assert np.isnan(eval_expr(parse_expr("x^0.5"), {"x": -1.0}))

    def test_negative_base_integer_power_sign_preserving(self):
        assert eval_expr(parse_expr("x^3"), {"x": -2.0}) == -8.0

    def test_division_by_zero_is_inf(self):
        assert np.isinf(eval_expr(parse_expr("1/x"), {"x": 0.0}))

    def test_unbound_symbol(self):
        with pytest.raises(KeyError, match="unbound symbol"):
            eval_expr(parse_expr("a*x"), {"a": 1.0})

    def test_deterministic(self):
        e = parse_expr(FEYNMAN_TRUE)
        vals = {eval_expr(e, FEYNMAN_BINDINGS) for _ in range(10)}
        assert len(vals) == 1

    def test_vectorized_bindings(self):
        e = parse_expr("a*x^2")
        out = eval_expr(e, {"a": 2.0, "x": np.array([1.0, 2.0, 3.0])})
        assert np.allclose(out, [2.0, 8.0, 18.0])


class TestGrad:
    def test_dc_of_feynman(self):
        g = grad_expr(parse_expr(FEYNMAN_TRUE), FEYNMAN_BINDINGS, ["c"])
        assert g[0] == pytest.approx(2.0)

    def test_textbook_square(self):
        assert grad_expr(parse_expr("x^2"), {"x": 3.0}, ["x"])[0] == pytest.approx(6.0)

    def test_gradient_of_constant_is_zero(self):
        g = grad_expr(parse_expr("7"), {"x": 1.0}, ["x", "y"])
        assert np.array_equal(g, np.zeros(2))

    def test_integer_power_negative_base_gradient(self):
        # d/dx x^3 = 3 x^2, valid for x < 0 since the exponent is constant
        assert grad_expr(parse_expr("x^3"), {"x": -2.0}, ["x"])[0] == pytest.approx(12.0)

    def test_fractional_power_at_zero_flagged(self):
        g = grad_expr(parse_expr("x^0.5"), {"x": 0.0}, ["x"])
        assert not np.isfinite(g[0])


def _random_tree(rng, names, depth):
    if depth == 0 or rng.uniform() < 0.3:
        if rng.uniform() < 0.5:
            return Const(round(float(rng.uniform(0.2, 3.0)), 3))
        return Sym(str(rng.choice(names)))
    op = rng.integers(0, 5)
    left = _random_tree(rng, names, depth - 1)
    right = _random_tree(rng, names, depth - 1)
    if op == 0:
        return Add(left, right)
    if op == 1:
        return parse_expr(f"({print_expr(left)}) - ({print_expr(right)})")
    if op == 2:
        return Mul(left, right)
    if op == 3:
        return parse_expr(f"({print_expr(left)}) / ({print_expr(right)})")
    # keep powers well-defined: positive base via symbol bindings, small exponent
    return Pow(left, Const(float(rng.integers(1, 4))))


class TestGradMatchesFiniteDifferences:
    def test_thousand_random_trees(self):
        rng = np.random.default_rng(20260809)
        names = ["x", "y", "a", "b"]
        checked = 0
        while checked < 1000:
            tree = _random_tree(rng, names, depth=3)
            wrt = sorted(expr_names(tree))
            if not wrt:
                continue
            b = {n: float(rng.uniform(0.5, 2.0)) for n in names}
            v = eval_expr(tree, b)
            if not np.isfinite(v) or abs(v) > 1e6:
                continue
            g = grad_expr(tree, b, wrt)
            if not np.all(np.isfinite(g)):
                continue
            h = 1e-6
            for i, name in enumerate(wrt):
                bp = dict(b, **{name: b[name] + h})
                bm = dict(b, **{name: b[name] - h})
                fd = (eval_expr(tree, bp) - eval_expr(tree, bm)) / (2 * h)
                assert abs(g[i] - fd) / (1.0 + abs(g[i])) <= 1e-5, print_expr(tree)
            checked += 1


class TestPrint:
    def test_simple_sum(self):
        assert print_expr(parse_expr("x+1")) == "(x + 1)"

    def test_monomial_roundtrip(self):
        src = "c*m^e1*w^e2*w0^e3*z^e4"
        tree = parse_expr(src)
        assert parse_expr(print_expr(tree)) == tree

    def test_roundtrip_corpus(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            tree = _random_tree(rng, ["x", "y", "z"], depth=4)
            assert parse_expr(print_expr(tree)) == tree

    def test_negation_roundtrip(self):
        tree = parse_expr("-(x + 2) * -y")
        assert parse_expr(print_expr(tree)) == tree


class TestCompiled:
    def test_matches_tree_walk(self):
        rng = np.random.default_rng(11)
        inputs, params = FEYNMAN_INPUTS, FEYNMAN_PARAMS
        fns = compile_expr(parse_expr(FEYNMAN_TRUE), inputs, params)
        for _ in range(50):
            x = rng.uniform(0.2, 2.0, 4)
            th = rng.normal(1.0, 1.0, 5)
            b = dict(zip(inputs + params, np.concatenate([x, th])))
            v_ref = eval_expr(parse_expr(FEYNMAN_TRUE), b)
            v, dth = fns.value_dtheta(x, th)
            assert v == pytest.approx(v_ref, rel=1e-12, abs=1e-12)
            g_ref = grad_expr(parse_expr(FEYNMAN_TRUE), b, params)
            assert np.allclose(dth, g_ref, rtol=1e-10, atol=1e-12, equal_nan=True)
            _, dx = fns.value_dx(x, th)
            gx_ref = grad_expr(parse_expr(FEYNMAN_TRUE), b, inputs)
            assert np.allclose(dx, gx_ref, rtol=1e-10, atol=1e-12, equal_nan=True)

    def test_vectorized_over_samples(self):
        fns = compile_expr(parse_expr("a*x + b"), ("x",), ("a", "b"))
        theta = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 0.5]])
        out = fns.value(np.array([2.0]), tuple(theta))
        assert np.allclose(out, [2.5, 4.5, 6.5])

    def test_domain_error_propagates_as_nan(self):
        fns = compile_expr(parse_expr("x^e"), ("x",), ("e",))
        assert np.isnan(fns.value(np.array([-1.0]), np.array([0.5])))
