"""Method-of-steps initial-value solver, used as a dynamical oracle.

Fixed-step classical RK4; delayed values come from cubic-Hermite dense
output over completed steps (value and derivative stored per node). When
an evaluated delay is shorter than the step the stage values are resolved
by a small number of fixed-point sweeps over a tentative interpolant for
the current step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SdddeError
from .model import as_history

_SWEEP_LIMIT = 5
_SWEEP_TOL = 1e-12


@dataclass
class Trajectory:
    """Times, states, and dense-output data of one simulation run."""

    t: np.ndarray         # node times, t[0] = 0
    y: np.ndarray         # (N+1, n) states
    yp: np.ndarray        # (N+1, n) derivatives F(u_t) at the nodes
    history: object       # initial history callable on [-tau_max, 0]
    step: float

    @property
    def n(self):
        return self.y.shape[1]

    def __call__(self, time):
        """Dense evaluation; exact at nodes, cubic Hermite in between."""
        if time <= 0.0:
            return np.asarray(self.history(time), dtype=float)
        h = self.step
        near = int(round(time / h))
        if 0 <= near < len(self.t) and abs(time - self.t[near]) <= 1e-12 * max(1.0, abs(time)):
            return self.y[near].copy()
        idx = min(int(time / h), len(self.t) - 2)
        s = (time - self.t[idx]) / h
        return _hermite(self.y[idx], self.yp[idx], self.y[idx + 1], self.yp[idx + 1], s, h)

    def tail_history(self, at_time):
        """History callable u_{at_time}(theta) for restarting a simulation."""

        def hist(theta):
            return self(at_time + theta)

        return hist


def _hermite(y0, m0, y1, m1, s, h):
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * m0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * m1
    )


class _DenseState:
    """History access across {initial history, completed steps, tentative step}."""

    def __init__(self, history, step):
        self.history = history
        self.h = step
        self.t = [0.0]
        self.y = []
        self.yp = []
        self.tentative = None     # (y_next, yp_next) during the current step
        self.used_tentative = False

    def value(self, time):
        if time <= 0.0:
            return np.asarray(self.history(time), dtype=float)
        h = self.h
        k = len(self.y) - 1      # completed steps span [0, k*h]
        idx = int(time / h)
        if idx >= k:
            if self.tentative is None:
                raise SdddeError("history query beyond computed trajectory")
            self.used_tentative = True
            y1, m1 = self.tentative
            s = (time - k * h) / h
            return _hermite(self.y[k], self.yp[k], y1, m1, min(s, 1.0), h)
        s = (time - idx * h) / h
        return _hermite(self.y[idx], self.yp[idx], self.y[idx + 1], self.yp[idx + 1], s, h)


def simulate(model, params, history, t_end, step, tau_max=None):
    """Integrate the sd-DDE from a history on [-tau_max, 0] to t_end.

    history may be an ExpPoly, a constant vector, or a callable; step is
    the fixed RK4 step. Stage values needing not-yet-computed history are
    resolved by fixed-point sweeps (error if they do not settle).
    """
    if step <= 0:
        raise SdddeError("step must be positive")
    params = np.asarray(params, dtype=float)
    hist = as_history(history, model.n)
    x0 = np.asarray(hist(0.0), dtype=float)
    if tau_max is None:
        tau_max = model.resolve_tau_max(params, x0)

    nsteps = int(round(t_end / step))
    if nsteps < 1:
        raise SdddeError("t_end must cover at least one step")

    dense = _DenseState(hist, step)
    dense.y.append(x0)

    def rhs(t_abs, y_cur):
        def u(theta):
            if theta == 0.0:
                return y_cur
            return dense.value(t_abs + theta)

        return model.eval_functional(params, u, tau_max=tau_max)

    dense.yp.append(rhs(0.0, x0))

    h = step
    for k in range(nsteps):
        t0 = k * h
        y0 = dense.y[-1]
        f0 = dense.yp[-1]
        y_next = y0.copy()
        m_next = f0.copy()
        converged = False
        for _ in range(_SWEEP_LIMIT):
            dense.tentative = (y_next, m_next)
            dense.used_tentative = False
            k1 = f0
            k2 = rhs(t0 + h / 2, y0 + (h / 2) * k1)
            k3 = rhs(t0 + h / 2, y0 + (h / 2) * k2)
            k4 = rhs(t0 + h, y0 + h * k3)
            y_new = y0 + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            m_new = rhs(t0 + h, y_new)
            delta = max(
                float(np.max(np.abs(y_new - y_next))), float(np.max(np.abs(m_new - m_next)))
            )
            needed_sweep = dense.used_tentative
            y_next, m_next = y_new, m_new
            if not needed_sweep or delta <= _SWEEP_TOL:
                converged = True
                break
        if not converged:
            raise ConvergenceError(
                f"fixed-point sweeps for short delays did not settle at t={t0 + h:.6g}"
            )
        dense.tentative = None
        dense.t.append((k + 1) * h)
        dense.y.append(y_next)
        dense.yp.append(m_next)

    return Trajectory(
        t=np.array(dense.t),
        y=np.vstack(dense.y),
        yp=np.vstack(dense.yp),
        history=hist,
        step=step,
    )
