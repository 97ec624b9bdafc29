"""Equilibrium branches, bifurcation detection, and Hopf-curve continuation.

Branches of equilibria are followed in one parameter with a secant
predictor and pseudo-arclength corrector; at every accepted point the
rightmost characteristic roots are recomputed and sign changes of the test
functions (real part of the rightmost complex pair for Hopf, determinant
of the frozen-delay Jacobian for folds) are bracketed by bisection.

Hopf curves are continued in two parameters through the extended real
system {equilibrium residual; Re/Im of Delta(i w) q0; Re/Im of (c.q0 - 1)}
with the normalization row c frozen per curve. L1 can be monitored along
the curve; its sign changes are located by secant iteration on the curve
parameter.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .derivs import DerivSettings
from .errors import (
    ConvergenceError,
    DegenerateEigenvalueError,
    DelayRangeError,
    ModelError,
)
from .normalform import hopf_l1
from .spectral import (
    char_matrix,
    characteristic_roots,
    hopf_eigendata,
    linearize,
)

_IM_TOL = 1e-8


@dataclass(frozen=True)
class StepSettings:
    initial: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.5
    grow: float = 1.5
    shrink: float = 0.5
    max_points: int = 400
    corrector_tol: float = 1e-10
    max_corrector_iters: int = 10
    fast_iters: int = 3


@dataclass(frozen=True)
class RootSettings:
    count: int = 6
    re_cutoff: float = 2.0
    cheb_nodes: int = 32


# ---------------------------------------------------------------------------
# Newton helpers


def _fd_jacobian(fun, y, f0=None, step_scale=1e-6):
    f0 = fun(y) if f0 is None else f0
    n_out, n_in = f0.size, y.size
    J = np.zeros((n_out, n_in))
    for k in range(n_in):
        h = step_scale * (1.0 + abs(y[k]))
        yp = y.copy()
        ym = y.copy()
        yp[k] += h
        ym[k] -= h
        J[:, k] = (fun(yp) - fun(ym)) / (2 * h)
    return J


def newton(fun, y0, tol=1e-10, max_iters=25, damped=True):
    """Damped Newton with central-difference Jacobian on a square system.

    Returns (solution, residual max-norm, iterations used).
    """
    y = np.asarray(y0, dtype=float).copy()
    r = fun(y)
    for it in range(max_iters):
        nrm = np.max(np.abs(r))
        if nrm <= tol:
            return y, nrm, it
        J = _fd_jacobian(fun, y, r)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Jacobian in Newton iteration") from None
        if not np.all(np.isfinite(delta)):
            raise ConvergenceError("non-finite Newton update")
        if damped:
            scale = 1.0
            while scale > 1.0 / 64.0:
                r_try = fun(y + scale * delta)
                if np.max(np.abs(r_try)) < nrm:
                    break
                scale *= 0.5
            y = y + scale * delta
            r = fun(y)
        else:
            y = y + delta
            r = fun(y)
    nrm = np.max(np.abs(r))
    if nrm <= tol:
        return y, nrm, max_iters
    raise ConvergenceError(f"Newton did not converge (residual {nrm:.3e})")


def solve_equilibrium(model, params, guess, tol=1e-10):
    """Newton solve of f(x, ..., x, p) = 0 from the given guess."""
    params = np.asarray(params, dtype=float)
    x, _, _ = newton(lambda x: model.equilibrium_residual(params, x), guess, tol=tol)
    return x


# ---------------------------------------------------------------------------
# one-parameter equilibrium branches


@dataclass(frozen=True)
class BranchPoint:
    param: float
    x: np.ndarray
    roots: tuple
    test_hopf: float
    test_fold: float
    stable: bool
    step: float
    event: str | None = None
    omega: float | None = None


def _analyze_point(model, pvec, x, roots_cfg, step):
    lin = linearize(model, pvec, x)
    roots = characteristic_roots(
        lin, count=roots_cfg.count, re_cutoff=roots_cfg.re_cutoff, cheb_nodes=roots_cfg.cheb_nodes
    )
    lams = tuple(lam for lam, _ in roots)
    complex_res = [lam.real for lam in lams if abs(lam.imag) > _IM_TOL]
    test_hopf = max(complex_res) if complex_res else float("-inf")
    test_fold = float(np.linalg.det(sum(lin.A)))
    rightmost = max((lam.real for lam in lams), default=float("-inf"))
    return lams, test_hopf, test_fold, rightmost < 0.0


def _make_point(model, pvec, pvalue, x, roots_cfg, step, event=None, omega=None):
    lams, th, tf, stable = _analyze_point(model, pvec, x, roots_cfg, step)
    return BranchPoint(
        param=float(pvalue),
        x=np.asarray(x, dtype=float).copy(),
        roots=lams,
        test_hopf=th,
        test_fold=tf,
        stable=stable,
        step=float(step),
        event=event,
        omega=omega,
    )


def _refine_sign_change(model, pvec_template, fidx, value_fn, p_lo, p_hi, x_lo, x_hi, tol=1e-8):
    """Bisection on the free parameter for a bracketed test-function zero."""
    f_lo = value_fn(p_lo, x_lo)
    for _ in range(200):
        if abs(p_hi - p_lo) <= tol:
            break
        p_mid = 0.5 * (p_lo + p_hi)
        x_guess = x_lo + (x_hi - x_lo) * ((p_mid - p_lo) / (p_hi - p_lo) if p_hi != p_lo else 0.5)
        pv = pvec_template.copy()
        pv[fidx] = p_mid
        x_mid = solve_equilibrium(model, pv, x_guess)
        f_mid = value_fn(p_mid, x_mid)
        if np.sign(f_mid) == np.sign(f_lo):
            p_lo, x_lo, f_lo = p_mid, x_mid, f_mid
        else:
            p_hi, x_hi = p_mid, x_mid
    p_star = 0.5 * (p_lo + p_hi)
    pv = pvec_template.copy()
    pv[fidx] = p_star
    x_star = solve_equilibrium(model, pv, 0.5 * (x_lo + x_hi))
    return p_star, x_star


def continue_branch(
    model,
    assignments,
    free_name,
    prange,
    x_guess,
    step=StepSettings(),
    roots=RootSettings(),
    direction="both",
):
    """Continue the equilibrium branch over prange, detecting Hopf/fold points.

    Returns an ordered list of BranchPoint; detected bifurcations appear as
    extra points with event set to "HOPF" or "FOLD". Leaving the range
    terminates the corresponding direction normally.
    """
    if free_name not in model.param_names:
        raise ModelError(f"unknown free parameter {free_name!r}")
    fidx = model.param_names.index(free_name)
    pvec = model.params_from(assignments)
    lo, hi = float(min(prange)), float(max(prange))
    p0 = float(pvec[fidx])
    if not (lo <= p0 <= hi):
        raise ModelError(f"initial {free_name}={p0} outside range [{lo}, {hi}]")

    x0 = solve_equilibrium(model, pvec, x_guess)
    start = _make_point(model, pvec, p0, x0, roots, 0.0)

    passes = []
    if direction in ("both", "forward"):
        passes.append(+1.0)
    if direction in ("both", "backward"):
        passes.append(-1.0)

    legs = {}
    for sgn in passes:
        legs[sgn] = _branch_leg(model, pvec, fidx, (lo, hi), start, sgn, step, roots)
    if direction == "forward":
        return [start] + legs[+1.0]
    if direction == "backward":
        return list(reversed(legs[-1.0])) + [start]
    return list(reversed(legs.get(-1.0, []))) + [start] + legs.get(+1.0, [])


def _branch_leg(model, pvec_base, fidx, bounds, start, sgn, step, roots):
    lo, hi = bounds
    n = model.n
    out = []

    def residual(y):
        pv = pvec_base.copy()
        pv[fidx] = y[n]
        return model.equilibrium_residual(pv, y[:n])

    def solve_at(pval, x_seed):
        pv = pvec_base.copy()
        pv[fidx] = pval
        return solve_equilibrium(model, pv, x_seed)

    y_prev = np.concatenate([start.x, [start.param]])
    h = step.initial
    # first step: natural continuation to build a secant tangent
    p1 = start.param + sgn * h
    if not (lo <= p1 <= hi):
        return out
    x1 = solve_at(p1, start.x)
    y_cur = np.concatenate([x1, [p1]])
    pv = pvec_base.copy()
    pv[fidx] = p1
    out.append(_make_point(model, pv, p1, x1, roots, sgn * h))
    _detect_events(model, pvec_base, fidx, start, out[-1], out, roots, solve_at)

    while len(out) < step.max_points:
        tangent = y_cur - y_prev
        nrm = np.linalg.norm(tangent)
        if nrm == 0:
            break
        tangent /= nrm
        accepted = False
        while not accepted:
            y_pred = y_cur + h * tangent

            def aug(y):
                return np.concatenate([residual(y), [tangent @ (y - y_pred)]])

            try:
                y_new, _, iters = newton(
                    aug, y_pred, tol=step.corrector_tol, max_iters=step.max_corrector_iters
                )
                accepted = True
            except ConvergenceError:
                h *= step.shrink
                if h < step.min_step:
                    raise ConvergenceError(
                        "continuation step underflow (corrector keeps failing)"
                    ) from None
        p_new = float(y_new[n])
        if not (lo <= p_new <= hi):
            # land exactly on the boundary and stop this leg
            p_end = hi if p_new > hi else lo
            x_end = solve_at(p_end, y_new[:n])
            pv = pvec_base.copy()
            pv[fidx] = p_end
            prev_pt = out[-1]
            out.append(_make_point(model, pv, p_end, x_end, roots, sgn * h))
            _detect_events(model, pvec_base, fidx, prev_pt, out[-1], out, roots, solve_at)
            break
        pv = pvec_base.copy()
        pv[fidx] = p_new
        prev_pt = out[-1]
        out.append(_make_point(model, pv, p_new, y_new[:n], roots, h))
        _detect_events(model, pvec_base, fidx, prev_pt, out[-1], out, roots, solve_at)
        y_prev, y_cur = y_cur, y_new
        if iters <= step.fast_iters:
            h = min(h * step.grow, step.max_step)
    return out


def _detect_events(model, pvec_base, fidx, pt_a, pt_b, out, roots, solve_at):
    """Bisect bracketed test-function sign changes between two branch points."""
    if abs(pt_b.param - pt_a.param) < 1e-12:
        return

    def hopf_val(p, x):
        pv = pvec_base.copy()
        pv[fidx] = p
        lin = linearize(model, pv, x)
        rts = characteristic_roots(
            lin, count=roots.count, re_cutoff=roots.re_cutoff, cheb_nodes=roots.cheb_nodes
        )
        vals = [lam.real for lam, _ in rts if abs(lam.imag) > _IM_TOL]
        return max(vals) if vals else float("-inf")

    def fold_val(p, x):
        pv = pvec_base.copy()
        pv[fidx] = p
        lin = linearize(model, pv, x)
        return float(np.linalg.det(sum(lin.A)))

    events = []
    if (
        np.isfinite(pt_a.test_hopf)
        and np.isfinite(pt_b.test_hopf)
        and np.sign(pt_a.test_hopf) * np.sign(pt_b.test_hopf) < 0
    ):
        p_star, x_star = _refine_sign_change(
            model, pvec_base, fidx, hopf_val, pt_a.param, pt_b.param, pt_a.x, pt_b.x
        )
        pv = pvec_base.copy()
        pv[fidx] = p_star
        lin = linearize(model, pv, x_star)
        rts = characteristic_roots(
            lin, count=roots.count, re_cutoff=roots.re_cutoff, cheb_nodes=roots.cheb_nodes
        )
        pair = [lam for lam, _ in rts if lam.imag > _IM_TOL]
        omega = None
        if pair:
            cand = min(pair, key=lambda z: abs(z.real))
            try:
                eig = hopf_eigendata(lin, cand.imag)
                omega = eig.omega
            except (DegenerateEigenvalueError, ConvergenceError) as err:
                warnings.warn(f"Hopf candidate at {p_star:.8g} failed validation: {err}")
        if omega is not None:
            events.append(
                _make_point(model, pv, p_star, x_star, roots, pt_b.step, "HOPF", omega)
            )
    if np.sign(pt_a.test_fold) * np.sign(pt_b.test_fold) < 0:
        p_star, x_star = _refine_sign_change(
            model, pvec_base, fidx, fold_val, pt_a.param, pt_b.param, pt_a.x, pt_b.x
        )
        pv = pvec_base.copy()
        pv[fidx] = p_star
        events.append(_make_point(model, pv, p_star, x_star, roots, pt_b.step, "FOLD"))
    if events:
        last = out.pop()
        events.sort(key=lambda pt: (pt.param - pt_a.param) / (pt_b.param - pt_a.param))
        out.extend(events)
        out.append(last)


# ---------------------------------------------------------------------------
# two-parameter Hopf curves


@dataclass(frozen=True)
class HopfCurvePoint:
    params: tuple          # values of the two free parameters
    x: np.ndarray
    omega: float
    q0: np.ndarray         # phase-fixed copy
    residual: float
    L1: float | None = None
    event: str | None = None


def _free_indices(model, free_names):
    names = tuple(free_names)
    if len(names) != 2 or len(set(names)) != 2:
        raise ModelError("Hopf-curve continuation needs two distinct free parameters")
    for name in names:
        if name not in model.param_names:
            raise ModelError(f"unknown free parameter {name!r}")
    return tuple(model.param_names.index(name) for name in names)


def _hopf_residual(model, pvec_base, fidx1, fidx2, c_row, y, n):
    x = y[:n]
    q = y[n : 2 * n] + 1j * y[2 * n : 3 * n]
    omega = y[3 * n]
    pv = pvec_base.copy()
    pv[fidx1] = y[3 * n + 1]
    pv[fidx2] = y[3 * n + 2]
    lin = linearize(model, pv, x, check_equilibrium=False)
    eqres = model.equilibrium_residual(pv, x)
    w = char_matrix(lin, 1j * omega) @ q
    norm = c_row @ q - 1.0
    return np.concatenate([eqres, w.real, w.imag, [norm.real, norm.imag]])


def _phase_fixed(q):
    k = int(np.argmax(np.abs(q)))
    return q / (q[k] / abs(q[k]))


def start_hopf_curve(model, assignments, free_names, x_guess, omega_guess):
    """Solve the extended Hopf system with the second free parameter fixed.

    Returns (y, c_row) where y stacks [x, Re q, Im q, omega, p1, p2].
    """
    f1, f2 = _free_indices(model, free_names)
    pvec = model.params_from(assignments)
    n = model.n
    x0 = np.asarray(x_guess, dtype=float)
    try:
        x0 = solve_equilibrium(model, pvec, x0)
    except ConvergenceError:
        pass  # the full extended solve below still gets a chance
    lin = linearize(model, pvec, x0, check_equilibrium=False)
    D = char_matrix(lin, 1j * float(omega_guess))
    _, _, Vh = np.linalg.svd(D)
    q0 = Vh[-1].conj()
    c_row = q0.conj() / (q0.conj() @ q0)

    y = np.concatenate([x0, q0.real, q0.imag, [float(omega_guess), pvec[f1], pvec[f2]]])

    def fun(z):
        yy = y.copy()
        yy[: 3 * n + 2] = z  # x, q, omega, p1 free; p2 fixed
        return _hopf_residual(model, pvec, f1, f2, c_row, yy, n)

    z0 = y[: 3 * n + 2]
    z, _, _ = newton(fun, z0, tol=1e-11, max_iters=30)
    y[: 3 * n + 2] = z
    return y, c_row


def continue_hopf_curve(
    model,
    assignments,
    free_names,
    x_guess,
    omega_guess,
    step=StepSettings(initial=0.1),
    monitor_l1=False,
    deriv_settings=None,
    direction="both",
):
    """Pseudo-arclength continuation of a Hopf curve in two parameters.

    Every accepted point satisfies the extended system to corrector
    tolerance; with monitor_l1 the first Lyapunov coefficient is computed
    at each point and its sign changes are refined on the curve and
    reported as L1_ZERO events (degenerate Hopf, Bautin candidate).
    """
    deriv_settings = deriv_settings or DerivSettings()
    f1, f2 = _free_indices(model, free_names)
    pvec_base = model.params_from(assignments)
    n = model.n
    y0, c_row = start_hopf_curve(model, assignments, free_names, x_guess, omega_guess)

    def residual(y):
        return _hopf_residual(model, pvec_base, f1, f2, c_row, y, n)

    def make_point(y, event=None):
        res = float(np.max(np.abs(residual(y))))
        q = y[n : 2 * n] + 1j * y[2 * n : 3 * n]
        point = HopfCurvePoint(
            params=(float(y[3 * n + 1]), float(y[3 * n + 2])),
            x=y[:n].copy(),
            omega=float(y[3 * n]),
            q0=_phase_fixed(q / np.linalg.norm(q)),
            residual=res,
            L1=None,
            event=event,
        )
        if _simplicity_lost(model, pvec_base, f1, f2, y, n):
            raise DegenerateEigenvalueError(
                "loss of simplicity of the critical pair along the Hopf curve"
            )
        if monitor_l1:
            point = replace(point, L1=_curve_l1(model, pvec_base, f1, f2, y, n, deriv_settings))
        return point

    points = [make_point(y0)]
    legs = {}
    for sgn in (+1.0, -1.0) if direction == "both" else ((+1.0,) if direction == "forward" else (-1.0,)):
        legs[sgn] = _curve_leg(
            model, residual, make_point, y0, sgn, step, n
        )
    forward = legs.get(+1.0, [])
    backward = legs.get(-1.0, [])
    pts = [pt for _, pt in reversed(backward)] + points + [pt for _, pt in forward]
    ys = [y for y, _ in reversed(backward)] + [y0] + [y for y, _ in forward]

    if monitor_l1:
        pts = _locate_l1_zeros(model, residual, make_point, pvec_base, f1, f2, ys, pts, n)
    return pts


def _curve_leg(model, residual, make_point, y_start, sgn, step, n):
    out = []
    h = step.initial
    # first tangent from the nullspace of the extended Jacobian
    J = _fd_jacobian(residual, y_start)
    _, _, Vh = np.linalg.svd(J)
    tangent = Vh[-1]
    # deterministic orientation: first free parameter increases for sgn=+1
    ref = tangent[3 * n + 1]
    if abs(ref) < 1e-12:
        ref = tangent[int(np.argmax(np.abs(tangent)))]
    tangent = tangent / (np.linalg.norm(tangent) * np.sign(ref)) * sgn
    y_cur = y_start
    while len(out) < step.max_points:
        accepted = False
        while not accepted:
            y_pred = y_cur + h * tangent

            def aug(y):
                return np.concatenate([residual(y), [tangent @ (y - y_pred)]])

            try:
                y_new, _, iters = newton(
                    aug, y_pred, tol=step.corrector_tol, max_iters=step.max_corrector_iters
                )
                accepted = True
            except DelayRangeError:
                # the curve left the model's delay domain: end this leg
                return out
            except ConvergenceError:
                h *= step.shrink
                if h < step.min_step:
                    raise ConvergenceError(
                        "Hopf-curve corrector failure after step underflow"
                    ) from None
        try:
            point = make_point(y_new)
        except DelayRangeError:
            return out
        out.append((y_new, point))
        new_tangent = y_new - y_cur
        nt = np.linalg.norm(new_tangent)
        if nt == 0:
            break
        tangent = new_tangent / nt
        y_cur = y_new
        if iters <= step.fast_iters:
            h = min(h * step.grow, step.max_step)
    return out


def _simplicity_lost(model, pvec_base, f1, f2, y, n):
    pv = pvec_base.copy()
    pv[f1] = y[3 * n + 1]
    pv[f2] = y[3 * n + 2]
    lin = linearize(model, pv, y[:n], check_equilibrium=False)
    s = np.linalg.svd(char_matrix(lin, 1j * y[3 * n]), compute_uv=False)
    return n > 1 and s[-2] < 1e-8 * max(s[0], 1.0)


def _curve_l1(model, pvec_base, f1, f2, y, n, deriv_settings):
    pv = pvec_base.copy()
    pv[f1] = y[3 * n + 1]
    pv[f2] = y[3 * n + 2]
    nf = hopf_l1(model, pv, y[:n], y[3 * n], settings=deriv_settings)
    return nf.L1


def _locate_l1_zeros(model, residual, make_point, pvec_base, f1, f2, ys, pts, n):
    out = list(pts)
    inserted = 0
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        if a.L1 is None or b.L1 is None or a.L1 == 0.0:
            continue
        if np.sign(a.L1) * np.sign(b.L1) >= 0:
            continue
        ya, yb = ys[k], ys[k + 1]
        seg = yb - ya
        tangent = seg / np.linalg.norm(seg)
        ta, tb, la, lb = 0.0, 1.0, a.L1, b.L1
        y_t = None
        for _ in range(60):
            t = tb - lb * (tb - ta) / (lb - la)  # secant
            t = min(max(t, 0.0), 1.0)
            y_pred = ya + t * seg

            def aug(y):
                return np.concatenate([residual(y), [tangent @ (y - y_pred)]])

            y_t, _, _ = newton(aug, y_pred, tol=1e-10, max_iters=12)
            l_t = _curve_l1(model, pvec_base, f1, f2, y_t, n, DerivSettings())
            if np.sign(l_t) == np.sign(la):
                ta, la = t, l_t
            else:
                tb, lb = t, l_t
            dp = np.hypot(
                (yb[3 * n + 1] - ya[3 * n + 1]) * (tb - ta),
                (yb[3 * n + 2] - ya[3 * n + 2]) * (tb - ta),
            )
            if dp <= 1e-4:
                break
        if y_t is not None:
            out.insert(k + 1 + inserted, make_point(y_t, event="L1_ZERO"))
            inserted += 1
    return out
