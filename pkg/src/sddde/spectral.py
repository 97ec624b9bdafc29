"""Frozen-delay linearization and spectral machinery.

The linearization at an equilibrium freezes the state-dependent delays at
their equilibrium values and differentiates the coefficient function slot
by slot. Its characteristic matrix is

    Delta(lambda) = lambda*I - sum_j A_j exp(-lambda*tau_j),

whose roots are the eigenvalues. Root finding seeds a Chebyshev
pseudospectral discretization of the generator and refines each seed by
Newton on the bordered system [Delta(lambda) q; c.q - 1] = 0.

The resolvent and the contour-quadrature spectral projection operate in
closed form on ExpPoly data, so projections of exponential-polynomial
histories are again exponential polynomials.
"""

import warnings
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .errors import ConvergenceError, DegenerateEigenvalueError, NumericalError, SdddeError
from .histfun import ExpPoly, combine

_RESIDUAL_TOL = 1e-10
_NULLITY_TOL = 1e-8


@dataclass(frozen=True)
class Linearization:
    """Matrices A_j and frozen delays tau_j of the linearized problem."""

    A: tuple            # m matrices, each (n, n)
    taus: tuple         # m frozen delays, taus[0] == 0
    params: np.ndarray
    xstar: np.ndarray

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def m(self):
        return len(self.A)

    @property
    def tau_span(self):
        return max(self.taus)


def linearize(model, params, xstar, check_equilibrium=True):
    """Slot-wise central-difference linearization at an equilibrium."""
    params = np.asarray(params, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if check_equilibrium:
        res = model.equilibrium_residual(params, xstar)
        if np.max(np.abs(res)) > 1e-10:
            raise NumericalError(
                f"linearize requires an equilibrium; residual is {np.max(np.abs(res)):.3e}"
            )
    n, m = model.n, model.m
    step = 1e-6 * (1.0 + np.max(np.abs(xstar)))
    base = np.tile(xstar[:, None], (1, m))
    A = []
    for j in range(m):
        Aj = np.zeros((n, n))
        for i in range(n):
            xp = base.copy()
            xm = base.copy()
            xp[i, j] += step
            xm[i, j] -= step
            Aj[:, i] = (model.eval_rhs(xp, params) - model.eval_rhs(xm, params)) / (2 * step)
        A.append(Aj)
    taus = model.frozen_delays(params, xstar)
    return Linearization(tuple(A), tuple(float(t) for t in taus), params, xstar)


def char_matrix(lin, lam):
    """Delta(lambda) = lambda*I - sum_j A_j exp(-lambda*tau_j)."""
    n = lin.n
    out = lam * np.eye(n, dtype=complex)
    for Aj, tau in zip(lin.A, lin.taus):
        out -= Aj * np.exp(-lam * tau)
    return out


def char_matrix_deriv(lin, lam):
    """d/dlambda of the characteristic matrix: I + sum_j tau_j A_j e^{-lam tau_j}."""
    n = lin.n
    out = np.eye(n, dtype=complex)
    for Aj, tau in zip(lin.A, lin.taus):
        out += tau * Aj * np.exp(-lam * tau)
    return out


def apply_linearization(lin, f):
    """A[f] = sum_j A_j f(-tau_j) for an ExpPoly (or callable) f."""
    ev = f.eval if isinstance(f, ExpPoly) else f
    return sum(Aj @ np.asarray(ev(-tau), dtype=complex) for Aj, tau in zip(lin.A, lin.taus))


# ---------------------------------------------------------------------------
# pseudospectral seeding


def _cheb(nnodes):
    """Chebyshev extreme points on [-1, 1] and differentiation matrix."""
    x = np.cos(np.arange(nnodes + 1) * pi / nnodes)
    c = np.hstack([2.0, np.ones(nnodes - 1), 2.0]) * (-1.0) ** np.arange(nnodes + 1)
    X = np.tile(x, (nnodes + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(nnodes + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _interp_row(theta_nodes, weights, y):
    d = y - theta_nodes
    hit = np.abs(d) < 1e-13
    if np.any(hit):
        row = np.zeros(theta_nodes.size)
        row[np.argmax(hit)] = 1.0
        return row
    q = weights / d
    return q / q.sum()


def generator_eigenvalues(lin, cheb_nodes=32):
    """Eigenvalues of the Chebyshev-discretized linear generator (root seeds)."""
    n = lin.n
    span = lin.tau_span
    if span == 0.0:
        return np.linalg.eigvals(sum(lin.A))
    x, D = _cheb(cheb_nodes)
    theta = (x - 1.0) * span / 2.0        # theta_0 = 0, theta_N = -span
    Dth = D * (2.0 / span)
    M = np.kron(Dth, np.eye(n))
    w = np.hstack([0.5, np.ones(cheb_nodes - 1), 0.5]) * (-1.0) ** np.arange(cheb_nodes + 1)
    row = np.zeros((n, n * (cheb_nodes + 1)))
    for Aj, tau in zip(lin.A, lin.taus):
        row += np.kron(_interp_row(theta, w, -tau), Aj)
    M[:n, :] = row
    return np.linalg.eigvals(M)


def _null_vectors(mat):
    """(right, left) unit null-ish vectors from the smallest singular pair."""
    U, _, Vh = np.linalg.svd(mat)
    return Vh[-1].conj(), U[:, -1].conj()


def _nullity(mat):
    s = np.linalg.svd(mat, compute_uv=False)
    top = s[0] if s[0] > 0 else 1.0
    return int(np.sum(s < _NULLITY_TOL * max(top, 1.0)))


def refine_root(lin, lam0, max_iter=40):
    """Newton on [Delta(lam) q; c.q - 1] from seed lam0.

    Returns (lam, q, residual) with unit q, or raises ConvergenceError.
    """
    n = lin.n
    q, _ = _null_vectors(char_matrix(lin, lam0))
    cc = q.conj()
    lam = complex(lam0)
    for _ in range(max_iter):
        D = char_matrix(lin, lam)
        r = np.concatenate([D @ q, [cc @ q - 1.0]])
        if np.max(np.abs(r)) < 1e-13:
            break
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = D
        J[:n, n] = char_matrix_deriv(lin, lam) @ q
        J[n, :n] = cc
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise ConvergenceError(f"singular bordered system at lambda={lam:.6g}") from None
        q = q + delta[:n]
        lam = lam + delta[n]
    q = q / np.linalg.norm(q)
    residual = float(np.linalg.norm(char_matrix(lin, lam) @ q))
    if residual > _RESIDUAL_TOL:
        raise ConvergenceError(
            f"root refinement stalled near lambda={lam:.6g} (residual {residual:.2e})"
        )
    return lam, q, residual


def characteristic_roots(lin, count=8, re_cutoff=2.0, cheb_nodes=32):
    """Roots of det Delta with Re >= -re_cutoff, sorted by descending real part.

    Returns a list of (root, multiplicity); multiplicity is the numerical
    nullity of Delta at the root. Fewer roots than requested, or dropped
    seeds, are reported as warnings.
    """
    if count < 1:
        raise SdddeError("count must be >= 1")
    seeds = generator_eigenvalues(lin, cheb_nodes)
    seeds = seeds[np.argsort(-seeds.real)]
    found = []
    for seed in seeds:
        if seed.real < -re_cutoff - 0.5:
            break
        if len(found) >= 4 * count:
            break
        try:
            lam, _, _ = refine_root(lin, complex(seed))
        except ConvergenceError as err:
            warnings.warn(f"dropped root seed {seed:.4g}: {err}", stacklevel=2)
            continue
        if lam.real < -re_cutoff:
            continue
        if any(abs(lam - other) < 1e-8 * (1.0 + abs(other)) for other in found):
            continue
        found.append(lam)
        if abs(lam.imag) > 1e-9:
            found.append(lam.conjugate())
    found.sort(key=lambda z: (-z.real, abs(z.imag), -np.sign(z.imag)))
    found = found[:count] if len(found) > count else found
    # keep conjugate pairs intact after truncation
    if found and abs(found[-1].imag) > 1e-9 and found[-1].conjugate() not in found:
        found.append(found[-1].conjugate())
        found.sort(key=lambda z: (-z.real, abs(z.imag), -np.sign(z.imag)))
    if len(found) < count:
        warnings.warn(f"requested {count} roots, found {len(found)}", stacklevel=2)
    return [(lam, _nullity(char_matrix(lin, lam))) for lam in found]


# ---------------------------------------------------------------------------
# Hopf eigendata


@dataclass(frozen=True)
class EigenData:
    """Critical pair +-i*omega with normalized right/adjoint eigenvectors.

    Invariants: Delta(i w) q0 ~ 0, p0 Delta(i w) ~ 0, p0 Delta'(i w) q0 = 1,
    and the largest-magnitude component of q0 is real positive.
    """

    omega: float
    q0: np.ndarray
    p0: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def lam(self):
        return 1j * self.omega


def hopf_eigendata(lin, omega_guess):
    """Locate the simple root near i*omega_guess and build normalized data."""
    lam, _, _ = refine_root(lin, 1j * float(omega_guess))
    if lam.imag < 0:
        lam = lam.conjugate()
    omega = lam.imag
    if omega <= 0:
        raise DegenerateEigenvalueError(
            f"no oscillatory root near i*{omega_guess:.6g}; found {lam:.6g}"
        )
    D = char_matrix(lin, 1j * omega)
    q0, p0 = _null_vectors(D)
    scale = p0 @ char_matrix_deriv(lin, 1j * omega) @ q0
    if abs(scale) < 1e-8:
        raise DegenerateEigenvalueError(
            "non-semisimple or degenerate critical eigenvalue: "
            f"|p0 Delta'(i w) q0| = {abs(scale):.2e} before scaling"
        )
    # phase: largest-|.| component of q0 real positive
    k = int(np.argmax(np.abs(q0)))
    phase = q0[k] / abs(q0[k])
    q0 = q0 / phase
    p0 = p0 / (p0 @ char_matrix_deriv(lin, 1j * omega) @ q0)
    residuals = {
        "right": float(np.linalg.norm(D @ q0)),
        "left": float(np.linalg.norm(p0 @ D)),
        "real_part": abs(lam.real),
        "normalization": abs(p0 @ char_matrix_deriv(lin, 1j * omega) @ q0 - 1.0),
    }
    return EigenData(omega=float(omega), q0=q0, p0=p0, residuals=residuals)


def eigenfunction(eig, lin=None):
    """The critical eigenfunction q(theta) = q0 exp(i w theta) as ExpPoly."""
    return ExpPoly.exponential(eig.q0, 1j * eig.omega)


# ---------------------------------------------------------------------------
# resolvent, adjoint pairing, spectral projection

_SERIES_CUTOFF = 1e-6
_SERIES_TERMS = 12


def exp_integral(v, lam):
    """I(theta) = int_theta^0 exp(lam (theta - s)) v(s) ds as an ExpPoly."""
    terms = []
    for coef, power, mu in v.terms:
        alpha = mu - lam
        if abs(alpha) < _SERIES_CUTOFF:
            # near-resonant: expand exp(alpha s) to keep coefficients benign
            for t in range(_SERIES_TERMS):
                fac = alpha**t / _factorial(t)
                terms.append((-coef * fac / (power + t + 1), power + t + 1, lam))
        else:
            # int s^k e^{alpha s} ds = e^{alpha s} sum_i (-1)^i k!/(k-i)! s^{k-i}/alpha^{i+1}
            q0 = (-1.0) ** power * _factorial(power) / alpha ** (power + 1)
            terms.append((coef * q0, 0, lam))
            for i in range(power + 1):
                ci = (-1.0) ** i * _factorial(power) / _factorial(power - i) / alpha ** (i + 1)
                terms.append((-coef * ci, power - i, mu))
    return ExpPoly(v.dim, terms)


def _factorial(k):
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def resolvent_apply(lin, lam, v):
    """R(lambda) v: x(theta) = e^{lam theta} x0 + I(theta), closed form.

    x0 = Delta(lambda)^{-1} [v(0) + A[I]]; errors if lambda is (numerically)
    a characteristic root.
    """
    D = char_matrix(lin, lam)
    if _nullity(D) > 0:
        raise NumericalError(f"resolvent undefined: lambda={lam:.6g} is a characteristic root")
    integral = exp_integral(v, lam)
    rhs = v.eval(0.0) + apply_linearization(lin, integral)
    x0 = np.linalg.solve(D, rhs)
    return combine(1.0, ExpPoly.exponential(x0, lam), 1.0, integral)


def adjoint_coordinate(lin, lam, p_row, v):
    """Coordinate functional of the eigentriple (lam, ., p): p [v(0) + A[I_lam v]].

    This is the residue of the resolvent at a simple root lam with the
    p Delta'(lam) q = 1 normalization; equivalently the adjoint-eigenvector
    pairing written with integrals over [0, tau_j].
    """
    integral = exp_integral(v, lam)
    return p_row @ (v.eval(0.0) + apply_linearization(lin, integral))


def hopf_coordinates(lin, eig, v):
    """(c1, c2) with P_c v = c1 q + c2 qbar for the simple Hopf pair."""
    c1 = adjoint_coordinate(lin, eig.lam, eig.p0, v)
    c2 = adjoint_coordinate(lin, -eig.lam, eig.p0.conj(), v)
    return c1, c2


def _root_pool(lin, around, re_cutoff=None):
    cut = max(2.0, 2.0 * max(abs(z) for z in around))
    if re_cutoff is not None:
        cut = max(cut, re_cutoff)
    try:
        roots = characteristic_roots(lin, count=12, re_cutoff=cut)
    except NumericalError:
        roots = []
    return [z for z, _ in roots]


def spectral_projection(lin, critical, v, m_nodes=64, radius=None, check=True):
    """P_c v by trapezoid contour quadrature around each critical root.

    critical: the enclosed (simple) roots. The default radius for each root
    is half its distance to the nearest other root. When all critical
    roots are simple the quadrature is cross-checked against the residue
    formula; disagreement signals a contour enclosing extra roots.
    """
    critical = [complex(z) for z in critical]
    if radius is None:
        pool = _root_pool(lin, critical)
        radii = []
        for z in critical:
            others = [w for w in pool if abs(w - z) > 1e-8] + [
                w for w in critical if w is not z and abs(w - z) > 1e-8
            ]
            if not others:
                radii.append(0.5)
            else:
                radii.append(0.5 * min(abs(w - z) for w in others))
        radii = [max(r, 1e-3) for r in radii]
    else:
        radii = [float(radius)] * len(critical)

    result = ExpPoly.zero(v.dim)
    for z, rho in zip(critical, radii):
        for s in range(m_nodes):
            t = 2.0 * pi * s / m_nodes
            node = np.exp(1j * t)
            lam = z + rho * node
            contrib = resolvent_apply(lin, lam, v)
            result = combine(1.0, result, rho * node / m_nodes, contrib)

    if check:
        simple = all(_nullity(char_matrix(lin, z)) == 1 for z in critical)
        if simple:
            residue = ExpPoly.zero(v.dim)
            for z in critical:
                q, p = _null_vectors(char_matrix(lin, z))
                p = p / (p @ char_matrix_deriv(lin, z) @ q)
                coord = adjoint_coordinate(lin, z, p, v)
                residue = combine(1.0, residue, 1.0, ExpPoly.exponential(coord * q, z))
            span = lin.tau_span if lin.tau_span > 0 else 1.0
            grid = np.linspace(-span, 0.0, 33)
            diff = max(float(np.max(np.abs(result.eval(t) - residue.eval(t)))) for t in grid)
            scale = 1.0 + max(float(np.max(np.abs(residue.eval(t)))) for t in grid)
            if diff > 1e-6 * scale:
                raise NumericalError(
                    "contour projection disagrees with the residue formula "
                    f"(diff {diff:.2e}); the contour likely encloses extra roots"
                )
    return result
