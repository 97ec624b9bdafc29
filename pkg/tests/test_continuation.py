import numpy as np
import pytest
from scipy.optimize import brentq

from sddde import (
    ConvergenceError,
    StepSettings,
    continue_branch,
    continue_hopf_curve,
    hopf_l1,
    parse_model,
    solve_equilibrium,
)

PI_2 = np.pi / 2

STABLE_LINEAR_SRC = (
    'name="stable"\ndim=1\nparameters=["p"]\ntau_max=2\n'
    'delays=["0", "1"]\nrhs=["p - 0.5*x1@2"]\n'
)

CUBIC_FREE_TAU_SRC = (
    'name="cubic"\ndim=1\nparameters=["p", "tau"]\ntau_max=6\n'
    'delays=["0", "tau"]\nrhs=["p - x1@2^3"]\n'
)
CUBIC_FREE_TAU_SD_SRC = CUBIC_FREE_TAU_SRC.replace('"tau"]\nrhs', '"tau + 0*x1@1"]\nrhs')


def hopf_formula_tau0(s0, k=1.0):
    def g(t):
        om = np.pi / (2 * t + s0)
        return 2 * om / k - np.sin(om * t) - np.sin(om * (t + s0))

    return brentq(g, 0.5, 2.0, xtol=1e-13)


class TestSolveEquilibrium:
    def test_position_control(self, poscontrol_model, poscontrol_ref):
        params = poscontrol_model.params_from(poscontrol_ref)
        x = solve_equilibrium(poscontrol_model, params, np.array([4.0, 4.0]))
        assert x == pytest.approx([4.0, 4.0], abs=1e-12)

    def test_scalar_from_zero_guess(self, scalar_model):
        x = solve_equilibrium(scalar_model, [-PI_2], np.zeros(1))
        assert x[0] == pytest.approx(-PI_2, abs=1e-12)

    def test_singular_jacobian(self):
        m = parse_model('name="s"\ndim=1\nparameters=["p"]\ndelays=["0"]\nrhs=["p - x1@1^2"]\n')
        with pytest.raises(ConvergenceError, match="singular Jacobian"):
            solve_equilibrium(m, [-1.0], np.zeros(1))


class TestBranch:
    def test_scalar_hopf_detection(self, scalar_model):
        pts = continue_branch(
            scalar_model,
            {"p": -1.5},
            "p",
            (-2.0, -1.0),
            np.array([-1.5]),
            step=StepSettings(initial=0.05, max_points=60),
        )
        events = [pt for pt in pts if pt.event == "HOPF"]
        assert len(events) == 1
        assert events[0].param == pytest.approx(-PI_2, abs=1e-6)
        assert events[0].omega == pytest.approx(1.0, abs=1e-6)

    def test_branch_points_are_equilibria(self, scalar_model):
        pts = continue_branch(
            scalar_model,
            {"p": -1.5},
            "p",
            (-1.8, -1.2),
            np.array([-1.5]),
            step=StepSettings(initial=0.1, max_points=30),
        )
        for pt in pts:
            res = scalar_model.equilibrium_residual([pt.param], pt.x)
            assert np.max(np.abs(res)) <= 1e-8

    def test_stability_flag_flips_at_event(self, scalar_model):
        pts = continue_branch(
            scalar_model,
            {"p": -1.5},
            "p",
            (-2.0, -1.0),
            np.array([-1.5]),
            step=StepSettings(initial=0.05, max_points=60),
        )
        idx = next(i for i, pt in enumerate(pts) if pt.event == "HOPF")
        before = [pt.stable for pt in pts[:idx] if pt.event is None]
        after = [pt.stable for pt in pts[idx + 1 :] if pt.event is None]
        assert set(before) == {False} and set(after) == {True}

    def test_position_control_hopf_vs_formula(self, poscontrol_model):
        # independent oracle: bisection root of the analytic Hopf relation
        expected = hopf_formula_tau0(4.0)
        asg = {"tau0": 0.8, "s0": 4.0, "k": 1.0, "c": 2.0, "gamma": 1.0}
        pts = continue_branch(
            poscontrol_model,
            asg,
            "tau0",
            (0.5, 1.5),
            np.array([4.0, 4.0]),
            step=StepSettings(initial=0.1, max_points=40),
        )
        events = [pt for pt in pts if pt.event == "HOPF"]
        assert len(events) == 1
        assert events[0].param == pytest.approx(expected, abs=1e-6)

    def test_stable_linear_branch_has_no_events(self):
        m = parse_model(STABLE_LINEAR_SRC)
        pts = continue_branch(
            m,
            {"p": 0.0},
            "p",
            (-1.0, 1.0),
            np.zeros(1),
            step=StepSettings(initial=0.2, max_points=30),
        )
        assert all(pt.event is None for pt in pts)
        assert all(pt.stable for pt in pts)
        values = [pt.param for pt in pts]
        assert values == sorted(values)

    def test_reversal_retraces_branch(self, scalar_model):
        fwd = continue_branch(
            scalar_model,
            {"p": -1.9},
            "p",
            (-1.9, -1.1),
            np.array([-1.9]),
            step=StepSettings(initial=0.07, max_points=40),
            direction="forward",
        )
        bwd = continue_branch(
            scalar_model,
            {"p": -1.1},
            "p",
            (-1.9, -1.1),
            np.array([-1.1]),
            step=StepSettings(initial=0.07, max_points=40),
            direction="backward",
        )
        ps = np.array([pt.param for pt in bwd if pt.event is None])
        xs = np.array([pt.x[0] for pt in bwd if pt.event is None])
        for pt in fwd:
            if pt.event is None and ps.min() <= pt.param <= ps.max():
                interp = np.interp(pt.param, ps, xs)
                assert abs(interp - pt.x[0]) <= 1e-6


@pytest.fixture(scope="module")
def curve(poscontrol_model, poscontrol_ref):
    return continue_hopf_curve(
        poscontrol_model,
        poscontrol_ref,
        ("tau0", "s0"),
        np.array([4.0, 4.0]),
        omega_guess=np.pi / 6,
        step=StepSettings(initial=0.25, max_points=12, max_step=0.5),
    )


class TestHopfCurve:
    def test_points_satisfy_analytic_identity(self, curve):
        assert len(curve) >= 20
        for pt in curve:
            tau0, s0 = pt.params
            om = pt.omega
            assert abs(2 * om - np.sin(om * tau0) - np.sin(om * (tau0 + s0))) <= 1e-6
            assert abs(om - np.pi / (2 * tau0 + s0)) <= 1e-6

    def test_residuals_small(self, curve):
        assert max(pt.residual for pt in curve) <= 1e-8

    def test_q0_phase_fixed(self, curve):
        for pt in curve:
            k = int(np.argmax(np.abs(pt.q0)))
            assert abs(pt.q0[k].imag) < 1e-10 and pt.q0[k].real > 0

    def test_l1_zero_event_mechanics(self, poscontrol_model):
        asg = {"tau0": 1.03, "s0": 5.8, "k": 1.0, "c": 2.0, "gamma": 1.0}
        pts = continue_hopf_curve(
            poscontrol_model,
            asg,
            ("tau0", "s0"),
            np.array([5.8, 5.8]),
            omega_guess=np.pi / (2 * 1.03 + 5.8),
            step=StepSettings(initial=0.25, max_points=2, max_step=0.4),
            monitor_l1=True,
        )
        events = [pt for pt in pts if pt.event == "L1_ZERO"]
        assert len(events) == 1
        assert abs(events[0].L1) < 1e-6
        # refined on the curve itself
        assert events[0].residual <= 1e-8
        signs = [np.sign(pt.L1) for pt in pts if pt.event is None and pt.L1 is not None]
        assert len(set(signs)) == 2

    def test_representation_invariance_constant_delays(self):
        # the same constant-delay model, once literal and once written as a
        # state-dependent expression, gives identical curves
        p_star = 3.0 ** (-1.5)
        results = []
        for src in (CUBIC_FREE_TAU_SRC, CUBIC_FREE_TAU_SD_SRC):
            m = parse_model(src)
            asg = {"p": p_star, "tau": PI_2}
            pts = continue_hopf_curve(
                m,
                asg,
                ("p", "tau"),
                np.array([3.0 ** (-0.5)]),
                omega_guess=1.0,
                step=StepSettings(initial=0.1, max_points=6, max_step=0.2),
            )
            results.append(pts)
        a, b = results
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            assert abs(pa.params[0] - pb.params[0]) <= 1e-8
            assert abs(pa.params[1] - pb.params[1]) <= 1e-8
            assert abs(pa.omega - pb.omega) <= 1e-8
