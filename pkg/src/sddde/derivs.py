"""Directional and multilinear derivatives of the functional at an equilibrium.

The functional of an sd-DDE is differentiable at an equilibrium along smooth
exponential-polynomial directions. Order-j derivatives are taken by central
finite differences in the scalar deviation, Richardson-extrapolated; the
symmetric j-linear forms are then recovered through the polarization
identity, and complex directions are split into real and imaginary parts
(the functional itself is only defined on real histories, so complex
perturbations of the state are never taken).
"""

import itertools
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .errors import SdddeError
from .histfun import ExpPoly, combine, sup_norm
from .model import as_history

MAX_ORDER = 5

_NORM_SAMPLES = 201


@dataclass(frozen=True)
class DerivSettings:
    base_step: float = 5e-3
    richardson_levels: int = 2
    direction_normalization: bool = True

    def __post_init__(self):
        if not (1e-6 < self.base_step < 1e-1):
            raise SdddeError("base_step must lie in (1e-6, 1e-1)")
        if self.richardson_levels < 1:
            raise SdddeError("richardson_levels must be >= 1")


def _eval_stencil(model, params, xstar, direction, order, step, tau_max):
    """Plain central-difference estimate of d^order/d delta^order F(x*+delta v)."""
    hist = direction.eval_real if isinstance(direction, ExpPoly) else direction
    total = np.zeros(model.n)
    for k in range(order + 1):
        offset = (order / 2 - k) * step
        coeff = (-1) ** k * comb(order, k)
        if offset == 0.0 and order % 2 == 0 and order > 0:
            u = xstar
        else:
            u = _Perturbed(xstar, offset, hist)
        total += coeff * model.eval_functional(params, u, tau_max=tau_max)
    return total / step**order


class _Perturbed:
    """History theta -> xstar + delta * v(theta)."""

    __slots__ = ("xstar", "delta", "vfun")

    def __init__(self, xstar, delta, vfun):
        self.xstar = xstar
        self.delta = delta
        self.vfun = vfun

    def __call__(self, theta):
        return self.xstar + self.delta * self.vfun(theta)


def directional_derivative(model, params, xstar, v, order, settings=None, tau_max=None):
    """Order-j derivative of delta -> F(x* + delta v) at delta = 0.

    v must be a real-valued (conjugate-paired) ExpPoly. Order is limited to
    MAX_ORDER; delays perturbed during stenciling must stay in range, which
    surfaces as DelayRangeError.
    """
    settings = settings or DerivSettings()
    if not (1 <= order <= MAX_ORDER):
        raise SdddeError(f"derivative order must be in 1..{MAX_ORDER}, got {order}")
    params = np.asarray(params, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if tau_max is None:
        tau_max = model.resolve_tau_max(params, xstar)

    scale = 1.0
    direction = v
    if settings.direction_normalization:
        nrm = sup_norm(v, -tau_max, 0.0, _NORM_SAMPLES)
        if nrm == 0.0:
            return np.zeros(model.n)
        scale = nrm
        direction = v * (1.0 / nrm)
    value = _richardson(
        lambda h: _eval_stencil(model, params, xstar, direction, order, h, tau_max),
        settings.base_step,
        settings.richardson_levels,
    )
    return value * scale**order


def _richardson(estimate, step, levels):
    # central stencils have pure h^2 error expansions
    table = [estimate(step / 2**i) for i in range(levels)]
    for m in range(1, levels):
        table = [
            (4**m * table[i + 1] - table[i]) / (4**m - 1) for i in range(len(table) - 1)
        ]
    return table[0]


def _real_form(model, params, xstar, directions, settings, tau_max):
    """Symmetric j-linear form on real ExpPoly directions via polarization."""
    j = len(directions)
    if any(w.is_zero for w in directions):
        return np.zeros(model.n)
    total = np.zeros(model.n)
    # the eps <-> -eps terms are equal, so fix eps_1 = +1 and double
    for eps in itertools.product(*([(1,)] + [(1, -1)] * (j - 1))):
        summed = directions[0]
        for e, w in zip(eps[1:], directions[1:]):
            summed = combine(1.0, summed, float(e), w)
        sign = 1 if eps.count(-1) % 2 == 0 else -1
        total += sign * directional_derivative(
            model, params, xstar, summed, j, settings, tau_max=tau_max
        )
    return 2.0 * total / (2**j * factorial(j))


def multilinear_form(model, params, xstar, directions, settings=None, tau_max=None):
    """Symmetric j-linear form F_j(v_1, ..., v_j) for complex ExpPoly directions.

    Complex directions are expanded by multilinearity into real/imaginary
    parts (2^j real form evaluations), each real form coming from the
    polarization identity over signed diagonal directional derivatives.
    """
    settings = settings or DerivSettings()
    j = len(directions)
    if not (1 <= j <= 3):
        raise SdddeError("multilinear_form supports orders 1..3")
    params = np.asarray(params, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if tau_max is None:
        tau_max = model.resolve_tau_max(params, xstar)
    parts = [(v.real_part(), v.imag_part()) for v in directions]
    out = np.zeros(model.n, dtype=complex)
    for which in itertools.product((0, 1), repeat=j):
        chosen = [parts[i][s] for i, s in enumerate(which)]
        contrib = _real_form(model, params, xstar, chosen, settings, tau_max)
        out += (1j) ** sum(which) * contrib
    return out


def richardson_discrepancy(model, params, xstar, directions, settings=None, tau_max=None):
    """|form at (levels) - form at (levels-1 extrapolation removed)|.

    Used as a smoothness diagnostic: a large gap between the plain and the
    extrapolated estimates flags a direction on which F is not smooth
    enough for the requested order.
    """
    settings = settings or DerivSettings()
    coarse = DerivSettings(
        base_step=settings.base_step,
        richardson_levels=max(1, settings.richardson_levels - 1),
        direction_normalization=settings.direction_normalization,
    )
    a = multilinear_form(model, params, xstar, directions, settings, tau_max=tau_max)
    b = multilinear_form(model, params, xstar, directions, coarse, tau_max=tau_max)
    return float(np.max(np.abs(a - b)))
