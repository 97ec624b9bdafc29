"""Hopf and fold normal forms on the center manifold.

The Hopf pipeline computes the order-2 center-manifold coefficients from
the characteristic matrix and the quadratic form, then the cubic
normal-form coefficient

    g21 = p0 [ F3 q q qbar + F2 qbar h20 + F2 q h11 ],    L1 = Re(g21)/(2 w),

with criticality subcritical for L1 > 0 and supercritical for L1 < 0. The
fold coefficient is the quadratic coefficient on the one-dimensional
center manifold of a simple zero root, a = p0 F2(q, q) / 2.

The same systems are also exposed through a generic homological-equation
solver (regular orders solve directly; resonant orders carry a normal-form
unknown and are solved through a bordered system with the solution forced
orthogonal to the nullspace of L_h^T).
"""

from dataclasses import dataclass

import numpy as np

from .derivs import DerivSettings, multilinear_form
from .errors import DegenerateEigenvalueError, NumericalError, ResonanceError
from .histfun import ExpPoly
from .spectral import (
    EigenData,
    char_matrix,
    char_matrix_deriv,
    eigenfunction,
    hopf_eigendata,
    linearize,
)

_DEGENERACY_TOL = 1e-8
_SINGULAR_TOL = 1e-10
_FD_CONSISTENCY_REL = 1e-4


@dataclass(frozen=True)
class HopfNF:
    eig: EigenData
    h2_20: ExpPoly
    h2_11: ExpPoly
    g21: complex
    L1: float
    criticality: str


def _solve_regular(mat, rhs, what):
    s = np.linalg.svd(mat, compute_uv=False)
    if s[-1] < _SINGULAR_TOL * max(s[0], 1.0):
        raise ResonanceError(what)
    return np.linalg.solve(mat, rhs)


def hopf_h2(model, params, xstar, eig, settings=None, lin=None, forms=None):
    """Order-2 center-manifold coefficients (h2_20, h2_11) as ExpPoly.

    h2_11 is constant, h2_20 a pure exp(2 i w theta) term. Raises
    ResonanceError when Delta(0) (fold-Hopf) or Delta(2 i w) (1:2
    resonance) is singular.
    """
    settings = settings or DerivSettings()
    lin = lin or linearize(model, params, xstar)
    q = eigenfunction(eig)
    qbar = q.conjugate()
    if forms is None:
        forms = {}
    f2qq = forms.get("f2qq")
    if f2qq is None:
        f2qq = multilinear_form(model, params, xstar, [q, q], settings)
        forms["f2qq"] = f2qq
    f2qqbar = forms.get("f2qqbar")
    if f2qqbar is None:
        f2qqbar = multilinear_form(model, params, xstar, [q, qbar], settings)
        forms["f2qqbar"] = f2qqbar
    h20_coef = _solve_regular(
        char_matrix(lin, 2j * eig.omega),
        f2qq,
        "resonant Hopf: 1:2 resonance, Delta(2 i w) singular",
    )
    h11_coef = _solve_regular(
        char_matrix(lin, 0.0),
        2.0 * f2qqbar,
        "resonant Hopf: Delta(0) singular (fold-Hopf)",
    )
    h2_20 = ExpPoly.exponential(h20_coef, 2j * eig.omega)
    h2_11 = ExpPoly.constant(h11_coef)
    return h2_20, h2_11


def _canonical_phase(eig):
    """Re-fix the EigenData phase convention (largest q0 component real > 0).

    Makes the pipeline exactly phase-invariant: externally rotated
    eigenvectors map to the same canonical pair before any FD evaluation.
    """
    k = int(np.argmax(np.abs(eig.q0)))
    phase = eig.q0[k] / abs(eig.q0[k])
    if phase == 1.0:
        return eig
    return EigenData(
        omega=eig.omega,
        q0=eig.q0 / phase,
        p0=eig.p0 * phase,
        residuals=eig.residuals,
    )


def _g21_bracket(model, params, xstar, eig, h2_20, h2_11, settings):
    q = eigenfunction(eig)
    qbar = q.conjugate()
    f3 = multilinear_form(model, params, xstar, [q, q, qbar], settings)
    t2 = multilinear_form(model, params, xstar, [qbar, h2_20], settings)
    t3 = multilinear_form(model, params, xstar, [q, h2_11], settings)
    return f3 + t2 + t3, (f3, t2, t3)


def hopf_l1(model, params, xstar, omega_guess, settings=None, lin=None, eig=None):
    """Full Hopf normal form at an equilibrium with a simple pair near i w.

    The cubic bracket is evaluated at the configured Richardson level and
    re-checked one level down; disagreement beyond the consistency
    tolerance raises "derivative accuracy insufficient".
    """
    settings = settings or DerivSettings()
    params = np.asarray(params, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    lin = lin or linearize(model, params, xstar)
    if eig is None:
        eig = hopf_eigendata(lin, omega_guess)
    else:
        eig = _canonical_phase(eig)
    forms = {}
    h2_20, h2_11 = hopf_h2(model, params, xstar, eig, settings, lin=lin, forms=forms)
    bracket, terms = _g21_bracket(model, params, xstar, eig, h2_20, h2_11, settings)
    if settings.richardson_levels > 1:
        coarse = DerivSettings(
            base_step=settings.base_step,
            richardson_levels=settings.richardson_levels - 1,
            direction_normalization=settings.direction_normalization,
        )
        bracket_coarse, _ = _g21_bracket(model, params, xstar, eig, h2_20, h2_11, coarse)
        gap = float(np.max(np.abs(bracket - bracket_coarse)))
        scale = max(float(np.max(np.abs(t))) for t in terms)
        tol = max(
            _FD_CONSISTENCY_REL * float(np.max(np.abs(bracket))),
            1e-8 * (1.0 + scale),
        )
        if gap > tol:
            raise NumericalError(
                f"derivative accuracy insufficient: Richardson levels disagree by {gap:.2e}"
            )
    g21 = complex(eig.p0 @ bracket)
    L1 = g21.real / (2.0 * eig.omega)
    if L1 > _DEGENERACY_TOL:
        crit = "subcritical"
    elif L1 < -_DEGENERACY_TOL:
        crit = "supercritical"
    else:
        crit = "degenerate"
    return HopfNF(eig=eig, h2_20=h2_20, h2_11=h2_11, g21=g21, L1=L1, criticality=crit)


def fold_coefficient(model, params, xstar, settings=None, lin=None):
    """Quadratic coefficient a of the fold normal form at a simple zero root.

    a = p0 F2(q, q) / 2 with p0 Delta'(0) q0 = 1; the fold is
    non-degenerate iff a != 0.
    """
    settings = settings or DerivSettings()
    params = np.asarray(params, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    lin = lin or linearize(model, params, xstar)
    D0 = char_matrix(lin, 0.0).real
    s = np.linalg.svd(D0, compute_uv=False)
    top = max(s[0], 1.0)
    if s[-1] > 1e-6 * top:
        raise DegenerateEigenvalueError(
            f"no zero root: smallest singular value of Delta(0) is {s[-1]:.2e}"
        )
    if lin.n > 1 and s[-2] < 1e-6 * top:
        raise DegenerateEigenvalueError("zero root is not simple")
    U, _, Vh = np.linalg.svd(D0)
    q0 = Vh[-1]
    p0 = U[:, -1]
    k = int(np.argmax(np.abs(q0)))
    if q0[k] < 0:
        q0 = -q0
    scale = p0 @ char_matrix_deriv(lin, 0.0).real @ q0
    if abs(scale) < 1e-8:
        raise DegenerateEigenvalueError(
            "zero root is not simple: |p0 Delta'(0) q0| ~ 0 before scaling"
        )
    p0 = p0 / scale
    q = ExpPoly.constant(q0)
    f2qq = multilinear_form(model, params, xstar, [q, q], settings)
    return float(0.5 * (p0 @ f2qq.real))


# ---------------------------------------------------------------------------
# generic homological systems


@dataclass(frozen=True)
class HomologicalSystem:
    """Linear system L_h h0 = L_alpha alpha + rhs for one monomial order.

    L_alpha has zero columns at non-resonant orders (alpha empty). When
    L_h is singular with kernel dimension d, [L_h, -L_alpha] must have
    full rank and alpha is the unique d-vector making the system solvable.
    """

    order: int
    L_h: np.ndarray
    L_alpha: np.ndarray
    rhs: np.ndarray
    kernel_dim: int


def homological_solve(sys):
    """(h0, alpha) for a HomologicalSystem.

    Non-resonant orders solve directly (alpha empty). Resonant orders use
    the bordered system that forces h0 orthogonal to null(L_h^T).
    """
    k = sys.L_h.shape[0]
    d = sys.L_alpha.shape[1] if sys.L_alpha.size else 0
    if d == 0:
        s = np.linalg.svd(sys.L_h, compute_uv=False)
        if s[-1] < _SINGULAR_TOL * max(s[0], 1.0):
            raise ResonanceError(
                "homological system is singular but carries no normal-form unknown"
            )
        return np.linalg.solve(sys.L_h, sys.rhs), np.zeros(0, dtype=complex)
    if sys.kernel_dim != d:
        raise NumericalError(
            f"normal-form unknown dimension {d} does not match kernel dimension "
            f"{sys.kernel_dim}"
        )
    U, s, _ = np.linalg.svd(sys.L_h)
    null_lh_t = U[:, k - d:].conj()  # columns span null(L_h^T)
    bordered = np.zeros((k + d, k + d), dtype=complex)
    bordered[:k, :k] = sys.L_h
    bordered[:k, k:] = -sys.L_alpha
    bordered[k:, :k] = null_lh_t.conj().T
    rhs = np.concatenate([sys.rhs, np.zeros(d, dtype=complex)])
    sb = np.linalg.svd(bordered, compute_uv=False)
    if sb[-1] < 1e-12 * max(sb[0], 1.0):
        raise NumericalError("bordered homological system is rank deficient")
    sol = np.linalg.solve(bordered, rhs)
    return sol[:k], sol[k:]


def hopf_order2_systems(lin, eig, f2qq, f2qqbar):
    """Homological systems whose solutions are the h2_20 / h2_11 coefficients."""
    sys20 = HomologicalSystem(
        order=2,
        L_h=char_matrix(lin, 2j * eig.omega),
        L_alpha=np.zeros((lin.n, 0), dtype=complex),
        rhs=np.asarray(f2qq, dtype=complex),
        kernel_dim=0,
    )
    sys11 = HomologicalSystem(
        order=2,
        L_h=char_matrix(lin, 0.0),
        L_alpha=np.zeros((lin.n, 0), dtype=complex),
        rhs=2.0 * np.asarray(f2qqbar, dtype=complex),
        kernel_dim=0,
    )
    return sys20, sys11


def hopf_order3_system(lin, eig, bracket):
    """Resonant order-3 system; alpha is the cubic coefficient g21/2.

    Built so that Re(alpha)/omega equals L1: L_h = Delta(i w), L_alpha =
    -Delta'(i w) q0, rhs = bracket/2.
    """
    return HomologicalSystem(
        order=3,
        L_h=char_matrix(lin, 1j * eig.omega),
        L_alpha=-(char_matrix_deriv(lin, 1j * eig.omega) @ eig.q0)[:, None],
        rhs=0.5 * np.asarray(bracket, dtype=complex),
        kernel_dim=1,
    )


def fold_order2_system(lin, q0, f2qq):
    """Resonant order-2 system at a simple zero root; alpha is the fold a."""
    return HomologicalSystem(
        order=2,
        L_h=char_matrix(lin, 0.0),
        L_alpha=-(char_matrix_deriv(lin, 0.0) @ np.asarray(q0, dtype=complex))[:, None],
        rhs=0.5 * np.asarray(f2qq, dtype=complex),
        kernel_dim=1,
    )
