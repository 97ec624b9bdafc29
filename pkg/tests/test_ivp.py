import numpy as np
import pytest
import scipy.special

from sddde import ExpPoly, characteristic_roots, combine, linearize, parse_model, simulate

PI_2 = np.pi / 2

LINEAR_SRC = 'name="lin"\ndim=1\nparameters=[]\ntau_max=2\ndelays=["0","1"]\nrhs=["0 - x1@2"]\n'
SHORT_DELAY_SRC = 'name="sd"\ndim=1\nparameters=[]\ntau_max=1\ndelays=["0","0.005"]\nrhs=["0 - x1@2"]\n'


@pytest.fixture(scope="module")
def linear_model():
    return parse_model(LINEAR_SRC)


@pytest.fixture(scope="module")
def char_history():
    lam = complex(scipy.special.lambertw(-1.0, 0))
    return lam, ExpPoly.exponential([1.0], lam).real_part()


class TestSimulate:
    def test_equilibrium_invariance(self, scalar_model):
        traj = simulate(scalar_model, [-PI_2], np.array([-PI_2]), t_end=5.0, step=0.01)
        assert np.max(np.abs(traj.y - (-PI_2))) <= 1e-12

    def test_characteristic_solution(self, linear_model, char_history):
        lam, hist = char_history
        traj = simulate(linear_model, [], hist, t_end=5.0, step=1e-3)
        for t in np.linspace(0.25, 5.0, 20):
            assert traj(t)[0] == pytest.approx(np.exp(lam * t).real, abs=1e-6)

    def test_dense_output_exact_at_nodes(self, linear_model, char_history):
        _, hist = char_history
        traj = simulate(linear_model, [], hist, t_end=1.0, step=0.05)
        for k in range(traj.t.size):
            assert np.array_equal(traj(traj.t[k]), traj.y[k])

    def test_growth_and_decay_rates_match_roots(self, scalar_model):
        for dp in (-0.05, +0.05):
            p = np.array([-PI_2 + dp])
            xstar = p.copy()
            lin = linearize(scalar_model, p, xstar)
            roots = characteristic_roots(lin, count=4)
            rate = max(z.real for z, _ in roots)
            history = combine(
                1.0,
                ExpPoly.constant(xstar),
                1e-3,
                ExpPoly.exponential([1.0], 1j).real_part() * 2,
            )
            traj = simulate(scalar_model, p, history, t_end=200.0, step=0.02)
            dev = np.abs(traj.y[:, 0] - xstar[0])
            mask = traj.t > 20
            d, t = dev[mask], traj.t[mask]
            peaks = [
                (t[i], d[i])
                for i in range(1, len(d) - 1)
                if d[i] > d[i - 1] and d[i] >= d[i + 1]
            ]
            times = np.array([pk[0] for pk in peaks])
            values = np.array([pk[1] for pk in peaks])
            slope = np.polyfit(times, np.log(values), 1)[0]
            assert abs(slope - rate) <= 0.05 * abs(rate)

    def test_convergence_order(self, linear_model, char_history):
        _, hist = char_history

        def run(h):
            return simulate(linear_model, [], hist, t_end=4.0, step=h)

        ref = run(0.04 / 8)
        probe = np.linspace(1.0, 4.0, 13)
        e1 = max(abs(run(0.04)(t)[0] - ref(t)[0]) for t in probe)
        e2 = max(abs(run(0.02)(t)[0] - ref(t)[0]) for t in probe)
        assert 12.0 <= e1 / e2 <= 20.0

    def test_restart_consistency(self, linear_model, char_history):
        _, hist = char_history
        first = simulate(linear_model, [], hist, t_end=2.0, step=0.01)
        second = simulate(linear_model, [], first.tail_history(2.0), t_end=2.0, step=0.01)
        direct = simulate(linear_model, [], hist, t_end=4.0, step=0.01)
        for t in np.linspace(0.0, 2.0, 41):
            assert abs(second(t)[0] - direct(2.0 + t)[0]) <= 1e-9

    def test_short_delay_fixed_point_sweeps(self):
        m = parse_model(SHORT_DELAY_SRC)
        coarse = simulate(m, [], np.array([1.0]), t_end=1.0, step=0.01)
        fine = simulate(m, [], np.array([1.0]), t_end=1.0, step=0.00125)
        assert coarse.y[-1][0] == pytest.approx(fine.y[-1][0], abs=1e-5)
