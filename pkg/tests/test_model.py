import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sddde import DelayRangeError, ExpPoly, ModelError, parse_expr, parse_model, to_text
from sddde.model import Bin, Call, Neg, Num, Param, Pow, State

SCALAR_SRC = """\
name = "scalar_nested"
dim = 1
parameters = ["p"]
tau_max = 10
delays = ["0", "-x1@1"]
rhs = ["p - x1@2"]
"""


class TestParseModel:
    def test_scalar_nested(self):
        m = parse_model(SCALAR_SRC)
        assert (m.n, m.m, m.n_p) == (1, 2, 1)
        assert m.declared_tau_max == 10.0

    def test_position_control(self, poscontrol_model):
        m = poscontrol_model
        assert (m.n, m.m) == (2, 4)
        assert m.param_names == ("tau0", "s0", "k", "c", "gamma")

    def test_unknown_delay_slot(self):
        src = SCALAR_SRC.replace("p - x1@2", "p - x1@5")
        with pytest.raises(ModelError, match="unknown delay slot"):
            parse_model(src)

    def test_forward_delay_reference(self):
        src = SCALAR_SRC.replace('"0", "-x1@1"', '"0", "-x1@2"')
        with pytest.raises(ModelError, match="forward delay reference"):
            parse_model(src)

    def test_first_delay_must_be_zero(self):
        src = SCALAR_SRC.replace('"0", "-x1@1"', '"1", "-x1@1"')
        with pytest.raises(ModelError, match="slot 1 must be the literal 0"):
            parse_model(src)

    def test_unknown_identifier(self):
        src = SCALAR_SRC.replace("p - x1@2", "p - q*x1@2")
        with pytest.raises(ModelError, match="unknown identifier 'q'"):
            parse_model(src)

    def test_dim_mismatch(self):
        src = SCALAR_SRC.replace('rhs = ["p - x1@2"]', 'rhs = ["p - x1@2", "0"]')
        with pytest.raises(ModelError, match="rhs has 2 expressions"):
            parse_model(src)

    def test_syntax_error_carries_location(self):
        with pytest.raises(ModelError, match="line 2"):
            parse_model('dim = 1\nbogus_line\ndelays = ["0"]\nrhs = ["0"]')

    def test_nonzero_exponent_grammar(self):
        m = parse_model(SCALAR_SRC.replace("p - x1@2", "p - x1@2^3"))
        assert m.equilibrium_residual([0.5], [0.5**0.5 * 0.0 + 0.7937005259840998])[
            0
        ] == pytest.approx(0.5 - 0.7937005259840998**3)

    def test_non_integer_exponent_rejected(self):
        with pytest.raises(ModelError, match="integer literal"):
            parse_model(SCALAR_SRC.replace("p - x1@2", "p - x1@2^1.5"))


class TestEvalFunctional:
    def test_scalar_equilibrium_residual_zero(self, scalar_model, pi_half):
        val = scalar_model.eval_functional([-pi_half], np.array([-pi_half]))
        assert val[0] == pytest.approx(0.0, abs=1e-15)

    def test_position_control_equilibrium(self, poscontrol_model, poscontrol_ref):
        params = poscontrol_model.params_from(poscontrol_ref)
        s0 = poscontrol_ref["s0"]
        u = np.array([poscontrol_ref["c"] * s0 / 2, s0])
        val = poscontrol_model.eval_functional(params, u)
        assert np.max(np.abs(val)) == pytest.approx(0.0, abs=1e-14)

    def test_agrees_with_handrolled_evaluator(self, scalar_model, pi_half):
        # independent evaluation of F(u) = p - u(u(0)) on the same history
        p = -pi_half
        eps = 0.1
        cos_hist = ExpPoly.constant([p]) + ExpPoly.exponential([eps / 2], 1j) + ExpPoly.exponential(
            [eps / 2], -1j
        )

        def by_hand(u):
            u1 = u(0.0)[0]
            return p - u(u1)[0]

        ours = scalar_model.eval_functional([p], cos_hist)[0]
        theirs = by_hand(cos_hist.eval_real)
        assert ours == pytest.approx(theirs, abs=1e-14)

    def test_matches_equilibrium_residual_exactly(self, poscontrol_model, poscontrol_ref):
        params = poscontrol_model.params_from(poscontrol_ref)
        x = np.array([3.7, 4.2])
        a = poscontrol_model.eval_functional(params, x)
        b = poscontrol_model.equilibrium_residual(params, x)
        assert np.array_equal(a, b)

    @given(
        x1=st.floats(-2.0, 10.0, allow_nan=False),
        x2=st.floats(0.1, 8.0, allow_nan=False),
    )
    @settings(max_examples=40)
    def test_constant_history_equals_residual_property(
        self, poscontrol_model, poscontrol_ref, x1, x2
    ):
        params = poscontrol_model.params_from(poscontrol_ref)
        x = np.array([x1, x2])
        a = poscontrol_model.eval_functional(params, x)
        b = poscontrol_model.equilibrium_residual(params, x)
        assert np.array_equal(a, b)

    def test_delay_out_of_range(self, scalar_model):
        # x > 0 makes the nested delay negative
        with pytest.raises(DelayRangeError) as err:
            scalar_model.eval_functional([1.0], np.array([1.0]))
        assert err.value.slot == 2
        assert err.value.value == pytest.approx(-1.0)


class TestEquilibriumHelpers:
    def test_scalar_frozen_delays(self, scalar_model, pi_half):
        res = scalar_model.equilibrium_residual([-pi_half], [-pi_half])
        assert res[0] == pytest.approx(0.0, abs=1e-15)
        taus = scalar_model.frozen_delays([-pi_half], [-pi_half])
        assert taus == pytest.approx([0.0, pi_half])

    def test_position_control_frozen_delays(self, poscontrol_model, poscontrol_ref):
        params = poscontrol_model.params_from(poscontrol_ref)
        taus = poscontrol_model.frozen_delays(params, [4.0, 4.0])
        assert taus == pytest.approx([0.0, 1.0, 4.0, 5.0])

    def test_nonequilibrium_residual_nonzero(self, scalar_model):
        assert abs(scalar_model.equilibrium_residual([-2.0], [-1.0])[0]) > 0.1

    def test_tau_max_auto_margin(self, pi_half):
        src = SCALAR_SRC.replace("tau_max = 10\n", "")
        m = parse_model(src)
        assert m.declared_tau_max is None
        assert m.resolve_tau_max([-pi_half], [-pi_half]) == pytest.approx(1.25 * pi_half)

    def test_params_from_validation(self, poscontrol_model):
        with pytest.raises(ModelError, match="not assigned"):
            poscontrol_model.params_from({"tau0": 1.0})
        with pytest.raises(ModelError, match="unknown parameter"):
            poscontrol_model.params_from(
                {"tau0": 1, "s0": 4, "k": 1, "c": 2, "gamma": 1, "zz": 3}
            )


# --- expression round trip -------------------------------------------------

_PARAMS = ("p", "beta")


def leaf_st():
    return st.one_of(
        st.floats(0.0, 1e4, allow_nan=False).map(Num),
        st.sampled_from([Param("p", 0), Param("beta", 1)]),
        st.builds(State, st.integers(1, 2), st.integers(1, 2)),
    )


def expr_st():
    return st.recursive(
        leaf_st(),
        lambda inner: st.one_of(
            st.builds(Bin, st.sampled_from("+-*/"), inner, inner),
            st.builds(Neg, inner),
            st.builds(Pow, inner, st.integers(-3, 3)),
            st.builds(Call, st.sampled_from(("sin", "cos", "exp", "atan")), inner),
        ),
        max_leaves=12,
    )


class TestRoundTrip:
    @given(tree=expr_st())
    @settings(max_examples=150)
    def test_parse_of_rendered_tree_is_identical(self, tree):
        text = to_text(tree)
        again = parse_expr(text, _PARAMS, 2, 2)
        assert again == tree

    def test_bundled_model_expressions_round_trip(self, scalar_model, poscontrol_model):
        for m in (scalar_model, poscontrol_model):
            for expr in m.delay_exprs + m.rhs_exprs:
                assert parse_expr(to_text(expr), m.param_names, m.n, m.m) == expr

    def test_rename_invariance(self):
        a = parse_expr("p*x1@2 + sin(beta)", ("p", "beta"), 2, 2)
        b = parse_expr("alpha*x1@2 + sin(omega)", ("alpha", "omega"), 2, 2)
        from sddde.model import compile_expr

        X = [[0.3, -0.8], [1.1, 0.25]]
        P = [1.7, -0.4]
        assert compile_expr(a)(X, P) == compile_expr(b)(X, P)
