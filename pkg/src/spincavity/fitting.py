"""Nonlinear least-squares extraction of coupling and loss rates from 2D
reflection/transmission power maps, plus 1D Lorentzian dip fitting.

The minimizer is a bounded Levenberg-Marquardt loop on parameters scaled
by their initial guess: forward-difference Jacobian with step
max(1e-6 |p|, 1e-9), damping increased whenever the normal equations are
singular or a step fails to reduce the residual, and only
residual-decreasing steps accepted.
"""

import math
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("g_eff", "kappa_c0", "kappa_c1", "kappa_c2", "kappa_s",
               "omega_c")

LM_MAX_ITER = 500
LM_REL_DECREASE = 1e-10
LM_GRAD_TOL = 1e-8
FD_REL_STEP = 1e-6
FD_ABS_STEP = 1e-9


@dataclass
class FitResult:
    """Parameter estimates with Jacobian-based standard errors."""

    estimates: dict
    standard_errors: dict
    residual_norm: float
    n_iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    seed: int | None = None

    def as_dict(self):
        return {"estimates": dict(self.estimates),
                "standard_errors": dict(self.standard_errors),
                "residual_norm": self.residual_norm,
                "n_iterations": self.n_iterations,
                "converged": self.converged,
                "seed": self.seed}


def forward_difference_jacobian(fun, p, r0=None, lo=None, hi=None):
    """J[i, j] = d r_i / d p_j by one-sided differences.

    Steps reverse direction where a forward step would leave the bounds.
    """
    p = np.asarray(p, dtype=float)
    if r0 is None:
        r0 = fun(p)
    m, n = r0.size, p.size
    J = np.empty((m, n))
    for j in range(n):
        h = max(FD_REL_STEP * abs(p[j]), FD_ABS_STEP)
        if hi is not None and p[j] + h > hi[j]:
            h = -h
        q = p.copy()
        q[j] += h
        J[:, j] = (fun(q) - r0) / h
    return J


def central_difference_jacobian(fun, p):
    p = np.asarray(p, dtype=float)
    r0 = fun(p)
    J = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = max(FD_REL_STEP * abs(p[j]), FD_ABS_STEP)
        qp, qm = p.copy(), p.copy()
        qp[j] += h
        qm[j] -= h
        J[:, j] = (fun(qp) - fun(qm)) / (2.0 * h)
    return J


def _lm_minimize(fun, p0, lo, hi):
    """Core bounded LM loop; returns (p, r, J, converged, iters, history)."""
    p = np.clip(np.asarray(p0, dtype=float), lo, hi)
    r = fun(p)
    cost = float(r @ r)
    lam = 1e-3
    history = [math.sqrt(cost)]
    converged = False
    it = 0
    J = None
    while it < LM_MAX_ITER:
        it += 1
        J = forward_difference_jacobian(fun, p, r, lo, hi)
        g = J.T @ r
        if np.max(np.abs(g)) < LM_GRAD_TOL:
            converged = True
            break
        A = J.T @ J
        d = np.clip(np.diag(A), 1e-300, None)
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            p_new = np.clip(p + step, lo, hi)
            r_new = fun(p_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        p, r, cost = p_new, r_new, cost_new
        history.append(math.sqrt(cost))
        lam = max(lam / 3.0, 1e-14)
        if rel < LM_REL_DECREASE:
            converged = True
            break
    if J is None:
        J = forward_difference_jacobian(fun, p, r, lo, hi)
    return p, r, J, converged, it, history


def _standard_errors(J, r):
    m, n = J.shape
    dof = max(m - n, 1)
    s2 = float(r @ r) / dof
    try:
        cov = s2 * np.linalg.inv(J.T @ J)
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        return np.full(n, np.nan)


@dataclass
class FitProblem:
    """Immutable description of one 2D spectral fit.

    `reflection`/`transmission` hold measured power maps indexed
    [drive, spin] on the shared axes; at least one must be present.
    Free parameters are a subset of PARAM_NAMES; all other model values
    come from `cavity`/`spin`. The photon number is held fixed at `n_cav`
    (low-power acquisition).
    """

    cavity: object
    spin: object
    drive_axis: np.ndarray
    spin_axis: np.ndarray
    free_params: tuple
    initial_guess: dict
    reflection: np.ndarray | None = None
    transmission: np.ndarray | None = None
    bounds: dict = field(default_factory=dict)
    weights_reflection: np.ndarray | None = None
    weights_transmission: np.ndarray | None = None
    n_cav: float = 0.0

    def __post_init__(self):
        self.free_params = tuple(self.free_params)
        if len(self.free_params) == 0:
            raise ValueError("at least one free parameter is required")
        for name in self.free_params:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown fit parameter '{name}'")
            if name not in self.initial_guess:
                raise ValueError(f"initial guess missing for '{name}'")
        if self.reflection is None and self.transmission is None:
            raise ValueError("fit needs reflection and/or transmission data")
        self.drive_axis = np.asarray(self.drive_axis, dtype=float)
        self.spin_axis = np.asarray(self.spin_axis, dtype=float)
        shape = (self.drive_axis.size, self.spin_axis.size)
        for name in ("reflection", "transmission"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != shape:
                    raise ValueError(f"{name} data shape {arr.shape} does not "
                                     f"match axes {shape}")
                setattr(self, name, arr)
        bounds = {}
        for name in self.free_params:
            p0 = float(self.initial_guess[name])
            if name in self.bounds:
                lo, hi = self.bounds[name]
            elif name == "omega_c":
                lo, hi = 0.99 * p0, 1.01 * p0
            else:
                lo, hi = p0 / 100.0, p0 * 100.0
            if not lo <= p0 <= hi:
                raise ValueError(f"initial guess for '{name}' outside bounds")
            bounds[name] = (float(lo), float(hi))
        self.bounds = bounds

    @classmethod
    def from_grids(cls, reflection_grid=None, transmission_grid=None,
                   **kwargs):
        """Build a problem from SweepGrid objects (power maps extracted)."""
        ref = trans = None
        src = reflection_grid or transmission_grid
        if src is None:
            raise ValueError("at least one grid required")
        if reflection_grid is not None:
            ref = reflection_grid.power("reflection")
        if transmission_grid is not None:
            trans = transmission_grid.power("transmission")
            if reflection_grid is not None:
                if not (np.array_equal(reflection_grid.drive_axis,
                                       transmission_grid.drive_axis)
                        and np.array_equal(reflection_grid.spin_axis,
                                           transmission_grid.spin_axis)):
                    raise ValueError("grids must share axes for a joint fit")
        return cls(drive_axis=src.drive_axis, spin_axis=src.spin_axis,
                   reflection=ref, transmission=trans, **kwargs)


def _apply_params(problem, values):
    cav = problem.cavity
    spn = problem.spin
    cav_over = {k: values[k] for k in
                ("kappa_c0", "kappa_c1", "kappa_c2", "omega_c")
                if k in values}
    if cav_over:
        cav = cav.with_updates(**cav_over)
    if "kappa_s" in values:
        spn = spn.with_updates(kappa_s=values["kappa_s"])
    if "g_eff" in values:
        spn = spn.with_g_eff(values["g_eff"])
    return cav, spn


def model_power_maps(problem, values):
    """|Gamma|^2 and |T|^2 maps for the given parameter overrides."""
    from .response import reflection_coefficient, transmission_coefficient

    cav, spn = _apply_params(problem, values)
    omd = problem.drive_axis[:, None]
    oms = problem.spin_axis[None, :]
    ref = trans = None
    if problem.reflection is not None:
        ref = np.abs(reflection_coefficient(cav, spn, omd, oms,
                                            problem.n_cav)) ** 2
    if problem.transmission is not None:
        trans = np.abs(transmission_coefficient(cav, spn, omd, oms,
                                                problem.n_cav)) ** 2
    return ref, trans


def residuals(problem, params):
    """Weighted model-minus-data vector.

    Cell order: reflection map in row-major (drive outer, spin inner)
    order, then the transmission map likewise.
    """
    if isinstance(params, dict):
        values = params
    else:
        values = dict(zip(problem.free_params, np.asarray(params)))
    for name, (lo, hi) in problem.bounds.items():
        v = values[name]
        if not lo <= v <= hi:
            raise ValueError(f"parameter '{name}'={v!r} outside bounds")
    ref, trans = model_power_maps(problem, values)
    parts = []
    if ref is not None:
        w = problem.weights_reflection
        d = ref - problem.reflection
        parts.append((d * w if w is not None else d).ravel())
    if trans is not None:
        w = problem.weights_transmission
        d = trans - problem.transmission
        parts.append((d * w if w is not None else d).ravel())
    return np.concatenate(parts)


def residual_jacobian(problem, params, scheme="forward"):
    """Finite-difference Jacobian of `residuals` w.r.t. the free params."""
    p = np.asarray([params[k] for k in problem.free_params]
                   if isinstance(params, dict) else params, dtype=float)

    def fun(q):
        vals = dict(zip(problem.free_params, q))
        ref, trans = model_power_maps(problem, vals)
        parts = []
        if ref is not None:
            w = problem.weights_reflection
            d = ref - problem.reflection
            parts.append((d * w if w is not None else d).ravel())
        if trans is not None:
            w = problem.weights_transmission
            d = trans - problem.transmission
            parts.append((d * w if w is not None else d).ravel())
        return np.concatenate(parts)

    if scheme == "forward":
        return forward_difference_jacobian(fun, p)
    if scheme == "central":
        return central_difference_jacobian(fun, p)
    raise ValueError("scheme must be 'forward' or 'central'")


def fit_spectra_2d(problem, multistart=0, seed=0):
    """Levenberg-Marquardt fit of the 2D power maps.

    Parameters are scaled by their initial guess internally. When
    `multistart` > 0 and the primary start fails to converge, that many
    Latin-hypercube restarts within the bounds are tried and the best
    iterate is kept.
    """
    names = problem.free_params
    p0 = np.array([problem.initial_guess[k] for k in names], dtype=float)
    scale = np.where(p0 != 0.0, np.abs(p0), 1.0)
    lo = np.array([problem.bounds[k][0] for k in names]) / scale
    hi = np.array([problem.bounds[k][1] for k in names]) / scale

    def fun(u):
        vals = dict(zip(names, u * scale))
        ref, trans = model_power_maps(problem, vals)
        parts = []
        if ref is not None:
            w = problem.weights_reflection
            d = ref - problem.reflection
            parts.append((d * w if w is not None else d).ravel())
        if trans is not None:
            w = problem.weights_transmission
            d = trans - problem.transmission
            parts.append((d * w if w is not None else d).ravel())
        return np.concatenate(parts)

    u, r, J, conv, iters, hist = _lm_minimize(fun, p0 / scale, lo, hi)
    best = (float(r @ r), u, r, J, conv, iters, hist)

    if not conv and multistart > 0:
        rng = np.random.default_rng(seed)
        strata = np.array([rng.permutation(multistart)
                           for _ in names]).T  # latin hypercube
        for k in range(multistart):
            frac = (strata[k] + rng.uniform(size=len(names))) / multistart
            u0 = lo + frac * (hi - lo)
            u2, r2, J2, c2, it2, h2 = _lm_minimize(fun, u0, lo, hi)
            cand = (float(r2 @ r2), u2, r2, J2, c2, it2, h2)
            # prefer converged runs, then lower residual
            if (not best[4], best[0]) > (not cand[4], cand[0]):
                best = cand

    cost, u, r, J, conv, iters, hist = best
    errs = _standard_errors(J, r) * scale
    return FitResult(
        estimates={k: float(v) for k, v in zip(names, u * scale)},
        standard_errors={k: float(e) for k, e in zip(names, errs)},
        residual_norm=math.sqrt(cost),
        n_iterations=iters,
        converged=bool(conv),
        residual_history=hist,
        seed=seed)


def lorentzian_dip_model(axis, center, fwhm, contrast_c, offset):
    hw = 0.5 * fwhm
    return offset + 1.0 - contrast_c * hw**2 / ((axis - center) ** 2 + hw**2)


def fit_lorentzian(trace):
    """Fit a Lorentzian dip plus constant offset to a trace.

    Returns a FitResult with estimates for center, fwhm, contrast and
    offset (same convergence contract as the 2D fitter).
    """
    x = np.asarray(trace.axis, dtype=float)
    y = np.asarray(trace.values, dtype=float)
    baseline = float(np.median(y))
    i_min = int(np.argmin(y))
    depth = baseline - float(y[i_min])
    if depth <= 0:
        raise ValueError("trace shows no dip to fit")
    half = baseline - 0.5 * depth
    below = np.where(y <= half)[0]
    span = abs(x[-1] - x[0])
    fwhm0 = abs(x[below[-1]] - x[below[0]]) if below.size >= 2 else span / 10.0
    p0 = np.array([x[i_min], max(fwhm0, span / len(x)), depth,
                   baseline - 1.0])
    scale = np.where(p0 != 0.0, np.abs(p0), 1.0)
    lo = np.array([x.min(), span / (10.0 * len(x)), 0.0,
                   baseline - 1.0 - 10.0 * max(depth, 1.0)]) / scale
    hi = np.array([x.max(), 10.0 * span, 1e6,
                   baseline - 1.0 + 10.0 * max(depth, 1.0)]) / scale

    def fun(u):
        c, w, cc, off = u * scale
        return lorentzian_dip_model(x, c, w, cc, off) - y

    u, r, J, conv, iters, hist = _lm_minimize(fun, p0 / scale, lo, hi)
    errs = _standard_errors(J, r) * scale
    names = ("center", "fwhm", "contrast", "offset")
    return FitResult(
        estimates={k: float(v) for k, v in zip(names, u * scale)},
        standard_errors={k: float(e) for k, e in zip(names, errs)},
        residual_norm=float(np.sqrt(r @ r)),
        n_iterations=iters,
        converged=bool(conv),
        residual_history=hist)
