"""Levenberg-Marquardt least squares plus the model zoo used for spectral and
lifetime parameter extraction: Lorentzian lines, exponential decays with
optional Gaussian instrument response, the cavity-emitter transmission model,
and the power-broadening saturation curve.

The minimizer uses a numerically differenced Jacobian (central differences,
step max(1e-6, 1e-6 |p|)) and damping driven by the gain ratio between actual
and predicted chi^2 reduction.  Bounds are handled by smooth reparameterization
(log for one-sided, logit for two-sided), keeping the core solver plain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcx

from .derive import Measured
from .errors import ConfigurationError, DegenerateFitError
from .spectra import transmission_amplitude

MAX_ITERATIONS = 500
STEP_TOL = 1e-8        # relative parameter step
CHI2_TOL = 1e-10       # relative chi^2 improvement
_NULL_EIG_RATIO = 1e-12


def _lorentzian(x, x0, fwhm, amplitude, offset):
    half = fwhm / 2.0
    return offset + amplitude * half ** 2 / ((x - x0) ** 2 + half ** 2)


def _exp_decay(x, t0, tau, amplitude, offset, sigma_irf=0.0):
    u = x - t0
    if sigma_irf == 0.0:
        return offset + amplitude * np.exp(-u / tau)
    # one-sided exponential convolved with a unit-area Gaussian IRF.  Two
    # branches keep it overflow-free: erfcx explodes for large negative z,
    # while for z < 0 the plain-erfc exponent is always negative.
    z = (sigma_irf / tau - u / sigma_irf) / math.sqrt(2.0)
    with np.errstate(over="ignore", invalid="ignore"):
        right = erfcx(z) * np.exp(-u ** 2 / (2.0 * sigma_irf ** 2))
        left = erfc(z) * np.exp(sigma_irf ** 2 / (2.0 * tau ** 2) - u / tau)
    return offset + 0.5 * amplitude * np.where(z >= 0, right, left)


def _dit(x, nu_c, nu_a, g, kappa, gamma, amplitude, offset,
         kappa_wg_fraction=1.0):
    t = transmission_amplitude(x, nu_c, nu_a, g, kappa, gamma,
                               kappa_wg_fraction)
    return offset + amplitude * np.abs(t) ** 2


def _power_broadening(x, linewidth0, p_sat):
    return linewidth0 * np.sqrt(1.0 + x / p_sat)


# kind -> (function, required parameter names, optional {name: default})
MODEL_ZOO = {
    "lorentzian": (_lorentzian, ("x0", "fwhm", "amplitude", "offset"), {}),
    "exp_decay": (_exp_decay, ("t0", "tau", "amplitude", "offset"),
                  {"sigma_irf": 0.0}),
    "dit": (_dit, ("nu_c", "nu_a", "g", "kappa", "gamma", "amplitude",
                   "offset"), {"kappa_wg_fraction": 1.0}),
    "power_broadening": (_power_broadening, ("linewidth0", "p_sat"), {}),
}


@dataclass(frozen=True)
class FreeParam:
    """A free fit parameter: name, initial guess, optional (lo, hi) bounds."""

    name: str
    init: float
    bounds: tuple | None = None

    def __post_init__(self):
        if self.bounds is not None:
            lo, hi = self.bounds
            if lo is not None and hi is not None and not lo < hi:
                raise ConfigurationError(
                    f"bounds for {self.name!r} need lo < hi")


@dataclass(frozen=True)
class FitModel:
    """Model selection with fixed values and ordered free parameters."""

    kind: str
    fixed_params: dict = field(default_factory=dict)
    free_params: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in MODEL_ZOO:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if not self.free_params:
            raise ConfigurationError("at least one free parameter required")
        _, required, optional = MODEL_ZOO[self.kind]
        known = set(required) | set(optional)
        free_names = [p.name for p in self.free_params]
        if len(set(free_names)) != len(free_names):
            raise ConfigurationError("duplicate free parameter")
        for name in list(self.fixed_params) + free_names:
            if name not in known:
                raise ConfigurationError(
                    f"parameter {name!r} not part of model {self.kind!r}")
        overlap = set(self.fixed_params) & set(free_names)
        if overlap:
            raise ConfigurationError(f"parameters both fixed and free: {overlap}")
        missing = set(required) - set(self.fixed_params) - set(free_names)
        if missing:
            raise ConfigurationError(f"model {self.kind!r} missing {missing}")

    @property
    def free_names(self) -> tuple:
        return tuple(p.name for p in self.free_params)


def evaluate_model(model: FitModel, free_values, x) -> np.ndarray:
    """Evaluate the model on ``x`` for the given free-parameter vector."""
    values = np.asarray(free_values, dtype=float)
    if values.shape != (len(model.free_params),):
        raise ConfigurationError(
            f"expected {len(model.free_params)} free values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("invalid parameter vector (non-finite)")
    func, _required, optional = MODEL_ZOO[model.kind]
    params = dict(optional)
    params.update(model.fixed_params)
    params.update(zip(model.free_names, values))
    return np.asarray(func(np.asarray(x, dtype=float), **params), dtype=float)


@dataclass
class FitResult:
    """Best-fit parameters with 1-sigma errors, diagnostics and convergence.

    ``covariance`` is ordered like ``free_names`` and already scaled by the
    reduced chi^2; sigma = sqrt(diag) except for flagged unidentifiable
    parameters, which carry sigma = inf.
    """

    params: dict
    chi2_reduced: float
    covariance: np.ndarray
    converged: bool
    n_iterations: int
    residuals: np.ndarray
    free_names: tuple
    unidentifiable: tuple = ()

    def report(self, units: dict | None = None) -> str:
        units = units or {}
        lines = []
        for name in self.free_names:
            m = self.params[name]
            flag = "  (unidentifiable)" if name in self.unidentifiable else ""
            lines.append(f"{name} = {m.value:.8g} +/- {m.sigma:.3g}"
                         f" {units.get(name, m.unit)}".rstrip() + flag)
        lines.append(f"chi2_reduced = {self.chi2_reduced:.6g}")
        lines.append(f"converged = {self.converged}"
                     f" after {self.n_iterations} iterations")
        return "\n".join(lines)


class _Transform:
    """Smooth bijection between a bounded parameter and the free axis."""

    def __init__(self, bounds):
        lo, hi = (None, None) if bounds is None else bounds
        self.lo, self.hi = lo, hi

    def encode(self, p: float) -> float:
        lo, hi = self.lo, self.hi
        if lo is None and hi is None:
            return p
        if hi is None:
            if p <= lo:
                raise ConfigurationError(f"initial value {p:g} at/below bound {lo:g}")
            return math.log(p - lo)
        if lo is None:
            if p >= hi:
                raise ConfigurationError(f"initial value {p:g} at/above bound {hi:g}")
            return math.log(hi - p)
        if not lo < p < hi:
            raise ConfigurationError(f"initial value {p:g} outside ({lo:g}, {hi:g})")
        return math.log((p - lo) / (hi - p))

    def decode(self, th: float) -> float:
        lo, hi = self.lo, self.hi
        if lo is None and hi is None:
            return th
        if hi is None:
            return lo + math.exp(th)
        if lo is None:
            return hi - math.exp(th)
        s = 1.0 / (1.0 + math.exp(-th))
        return lo + (hi - lo) * s

    def derivative(self, th: float) -> float:
        """dp/dtheta, for mapping sigma back to the original axis."""
        lo, hi = self.lo, self.hi
        if lo is None and hi is None:
            return 1.0
        if hi is None:
            return math.exp(th)
        if lo is None:
            return -math.exp(th)
        s = 1.0 / (1.0 + math.exp(-th))
        return (hi - lo) * s * (1.0 - s)


def _difference_step(value: float) -> float:
    return max(1e-6, 1e-6 * abs(value))


def residual_jacobian(residual_fn, theta: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of the residual vector wrt theta."""
    r0 = residual_fn(theta)
    jac = np.empty((r0.size, theta.size))
    for j in range(theta.size):
        h = _difference_step(theta[j])
        up = theta.copy()
        up[j] += h
        down = theta.copy()
        down[j] -= h
        jac[:, j] = (residual_fn(up) - residual_fn(down)) / (2.0 * h)
    return jac


def _null_directions(normal: np.ndarray, free_names) -> tuple:
    """Labels of parameters dominating near-null curvature directions."""
    w, v = np.linalg.eigh(normal)
    wmax = max(w.max(), 0.0)
    labels = []
    for i, eig in enumerate(w):
        if eig <= wmax * _NULL_EIG_RATIO:
            labels.append(free_names[int(np.argmax(np.abs(v[:, i])))])
    return tuple(dict.fromkeys(labels))


def lm_fit(model: FitModel, x, y, sigma_y=None, *,
           max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Weighted Levenberg-Marquardt fit of ``model`` to (x, y).

    Without ``sigma_y`` the fit is unweighted and parameter errors are scaled
    post hoc by the reduced chi^2 (the returned covariance always carries that
    scaling).  Convergence: relative parameter step < 1e-8 or relative chi^2
    improvement < 1e-10; at most ``max_iterations`` damped steps, after which
    the best-so-far result is returned with converged = False.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigurationError("x and y must be 1-d and the same length")
    n_free = len(model.free_params)
    if x.size < 2 * n_free:
        raise ConfigurationError(
            f"need at least {2 * n_free} points for {n_free} free parameters")
    if sigma_y is None:
        weights = np.ones_like(y)
    else:
        weights = np.asarray(sigma_y, dtype=float)
        if weights.shape != y.shape or np.any(weights <= 0):
            raise ConfigurationError("sigma_y must be positive, same length as y")

    transforms = [_Transform(p.bounds) for p in model.free_params]
    theta = np.array([tr.encode(p.init)
                      for tr, p in zip(transforms, model.free_params)])

    def decode(th):
        return np.array([tr.decode(v) for tr, v in zip(transforms, th)])

    def residuals(th):
        f = evaluate_model(model, decode(th), x)
        return (f - y) / weights

    def trial_chi2(th):
        # candidate steps that leave the finite-parameter domain are
        # rejected via an infinite cost, never raised
        try:
            r = residuals(th)
        except ConfigurationError:
            return None, np.inf
        return r, float(r @ r) if np.all(np.isfinite(r)) else np.inf

    r = residuals(theta)
    if not np.all(np.isfinite(r)):
        raise ConfigurationError("initial guess yields non-finite model values")
    chi2 = float(r @ r)
    jac = residual_jacobian(residuals, theta)
    if not np.all(np.isfinite(jac)):
        raise DegenerateFitError("Jacobian non-finite at the initial guess")
    normal = jac.T @ jac
    grad = jac.T @ r
    if np.all(normal == 0.0):
        raise DegenerateFitError(
            "model insensitive to every free parameter: "
            + ", ".join(model.free_names))

    def scale_matrix(a):
        # Marquardt scaling keeps steps equivariant under per-parameter
        # rescaling; the floor keeps flat directions solvable
        d = np.diag(a).copy()
        return np.diag(np.maximum(d, 1e-12 * max(d.max(), np.finfo(float).tiny)))

    damping = 1e-3
    growth = 2.0
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        scaling = scale_matrix(normal)
        try:
            step = np.linalg.solve(normal + damping * scaling, -grad)
        except np.linalg.LinAlgError:
            raise DegenerateFitError(
                "singular normal equations; unidentifiable direction: "
                + ", ".join(_null_directions(normal, model.free_names)
                            or model.free_names))
        if not np.all(np.isfinite(step)):
            raise DegenerateFitError(
                "non-finite step; unidentifiable direction: "
                + ", ".join(_null_directions(normal, model.free_names)
                            or model.free_names))
        theta_new = theta + step
        r_new, chi2_new = trial_chi2(theta_new)
        step_small = np.max(np.abs(step) / (np.abs(theta) + STEP_TOL)) \
            <= STEP_TOL

        if chi2_new < chi2:
            predicted = float(step @ (damping * (scaling @ step) - grad))
            gain = (chi2 - chi2_new) / predicted if predicted > 0 else 1.0
            improvement = chi2 - chi2_new
            theta, r, chi2 = theta_new, r_new, chi2_new
            jac = residual_jacobian(residuals, theta)
            normal = jac.T @ jac
            grad = jac.T @ r
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            growth = 2.0
            chi2_small = improvement <= CHI2_TOL * max(chi2, np.finfo(float).tiny)
            if step_small or chi2_small or chi2 == 0.0:
                converged = True
                break
        elif step_small:
            # no improvement available within the step tolerance: done
            converged = True
            break
        else:
            damping *= growth
            growth *= 2.0
            if damping > 1e100:
                break

    # curvature analysis and covariance at the final point
    unidentifiable = _null_directions(normal, model.free_names)
    w, v = np.linalg.eigh(normal)
    wmax = max(w.max(), np.finfo(float).tiny)
    inv_w = np.where(w > wmax * _NULL_EIG_RATIO, 1.0 / np.where(w > 0, w, 1.0), 0.0)
    cov_theta = (v * inv_w) @ v.T
    dof = x.size - n_free
    chi2_reduced = chi2 / dof
    cov_theta = cov_theta * chi2_reduced

    dp = np.array([tr.derivative(t) for tr, t in zip(transforms, theta)])
    covariance = cov_theta * np.outer(dp, dp)
    values = decode(theta)
    sigmas = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    params = {}
    for i, name in enumerate(model.free_names):
        sigma = math.inf if name in unidentifiable else float(sigmas[i])
        params[name] = Measured(float(values[i]), sigma, "")
    return FitResult(params=params, chi2_reduced=chi2_reduced,
                     covariance=covariance, converged=converged,
                     n_iterations=iteration, residuals=r * weights,
                     free_names=model.free_names,
                     unidentifiable=unidentifiable)


def fit_linewidth_extrapolation(power, linewidth, sigma_y=None) -> FitResult:
    """Zero-power linewidth from a power-broadening saturation fit.

    Fits linewidth(P) = linewidth0 sqrt(1 + P/P_sat); ``linewidth0`` is the
    extrapolated natural linewidth.  Requires at least 3 points.
    """
    power = np.asarray(power, dtype=float)
    linewidth = np.asarray(linewidth, dtype=float)
    if power.size < 3:
        raise ConfigurationError("need at least 3 (power, linewidth) points")
    if np.any(power < 0) or np.any(linewidth <= 0):
        raise ConfigurationError("powers must be >= 0 and linewidths > 0")
    lw0 = float(linewidth[np.argmin(power)])
    positive = power[power > 0]
    psat0 = float(np.median(positive)) if positive.size else 1.0
    model = FitModel(
        kind="power_broadening",
        free_params=[FreeParam("linewidth0", lw0, (0.0, None)),
                     FreeParam("p_sat", psat0, (0.0, None))],
    )
    return lm_fit(model, power, linewidth, sigma_y=sigma_y)
