"""Coupled two-system functional, the fixed-point equation for u*, and chaos gaps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.optimize import brentq

from .cs_functional import CSOptimum, OptimizerSettings, cs_value, optimize_cs
from .errors import AdmissibilityError, PreconditionError
from .mixture import MixtureSpec
from .order_param import (
    Envelope,
    StepOrderParameter,
    d_eval,
    log_integral,
    support_min,
    weighted_integral,
)

log = logging.getLogger(__name__)

INV_GOLDEN = (sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ChaosPoint:
    t: float
    u: float
    lam: float
    b: float

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if not -1.0 <= self.u <= 1.0:
            raise ValueError(f"u must lie in [-1, 1], got {self.u}")

    @property
    def eta(self) -> int:
        return -1 if self.u < 0 else 1


@dataclass
class ChaosGapCurve:
    grid: list[float]
    gaps: list[float]
    lambda_star: list[float]
    u_star: float
    two_p: float
    u_x: float = 0.0
    t: float = 0.0
    optimum: CSOptimum | None = field(default=None, repr=False)

    def min_gap_off(self, center: float, radius: float) -> float:
        off = [g for u, g in zip(self.grid, self.gaps) if abs(u - center) >= radius - 1e-12]
        return min(off) if off else float("nan")


def phi_eval(x: StepOrderParameter, spec: MixtureSpec, t: float, u_abs: float, q):
    """phi(q) = d(|u|) + (1-t)/(1+t) (d(q) - d(|u|))."""
    return Envelope.phi(t, u_abs)(x, spec, q)


def coupled_value(spec: MixtureSpec, x: StepOrderParameter, point: ChaosPoint) -> float:
    """P_u(x, b, lambda) for the pair of systems with correlation t."""
    t, u, lam, b, eta = point.t, point.u, point.lam, point.b, point.eta
    u_abs = abs(u)
    if not abs(lam) < b:
        raise AdmissibilityError(f"log term needs |lambda| < b, got lambda={lam:.6g}, b={b:.6g}")
    phi = Envelope.phi(t, u_abs)
    try:
        near_d = log_integral(x, spec, b, eta * lam, 0.0, u_abs)
        near_phi = log_integral(x, spec, b, -eta * lam, 0.0, u_abs, phi)
        far_minus = log_integral(x, spec, b, lam, u_abs, 1.0)
        far_plus = log_integral(x, spec, b, -lam, u_abs, 1.0)
    except AdmissibilityError as err:
        raise AdmissibilityError(f"coupled functional at u={u:.6g}, lambda={lam:.6g}: {err}", err.location) from err
    d0 = d_eval(x, spec, 0.0)
    field_env = d0 if u >= 0 else phi.apply(d_eval(x, spec, u_abs), d0)
    field_denom = b - lam - field_env
    if field_denom <= 0.0:
        raise AdmissibilityError(f"field denominator b - lambda - e(0) = {field_denom:.6g} <= 0", 0.0)
    value = -0.5 * np.log1p(-((lam / b) ** 2))
    value += 0.5 * (1.0 + t) * near_d + 0.5 * (1.0 - t) * near_phi
    value += 0.5 * (far_minus + far_plus)
    value += -lam * u + b - 1.0 - np.log(b) - weighted_integral(x, spec)
    value += spec.h**2 / field_denom
    return float(value)


def f_eval(spec: MixtureSpec, x: StepOrderParameter, b: float, t: float, u: float) -> float:
    """f(u) = (h^2 + t xi'(u)) / (b - d(0))^2 - u, with xi' odd."""
    return (spec.h**2 + t * spec.xi(u, 1)) / (b - d_eval(x, spec, 0.0)) ** 2 - u


def solve_u_star(spec: MixtureSpec, x: StepOrderParameter, b: float, t: float, tol: float = 1e-12) -> float:
    """The unique root of f on [-u_x, u_x]."""
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    if spec.h == 0.0:
        return 0.0
    u_x = support_min(x)

    def f(u):
        return f_eval(spec, x, b, t, u)

    f0, fx = f(0.0), f(u_x)
    if not (f0 > 0.0 and fx <= tol):
        raise PreconditionError(
            f"no sign change of f on [0, u_x]: f(0)={f0:.3g}, f(u_x)={fx:.3g}; (x, b) is not the optimiser"
        )
    root = u_x if abs(fx) <= tol else brentq(f, 0.0, u_x, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    if abs(f(root)) > tol:
        raise PreconditionError(f"root of f not resolved: |f(u*)| = {abs(f(root)):.3g}")
    scan = np.linspace(-u_x, 0.0, 1001, endpoint=False)
    if np.any(np.array([f(u) for u in scan]) <= 0.0):
        raise PreconditionError("f has a root in [-u_x, 0); (x, b) is not the optimiser")
    return float(root)


def golden_section(func, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 200):
    """Minimise a unimodal function on [lo, hi]; returns (argmin, min)."""
    a, c = lo, hi
    x1 = c - INV_GOLDEN * (c - a)
    x2 = a + INV_GOLDEN * (c - a)
    f1, f2 = func(x1), func(x2)
    for _ in range(max_iter):
        if c - a <= tol:
            break
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - INV_GOLDEN * (c - a)
            f1 = func(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_GOLDEN * (c - a)
            f2 = func(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def lambda_curvature(spec, x, b, t, u, n: int = 41, step: float = 1e-4) -> float:
    """Largest |d^2 P_u / d lambda^2| over |lambda| <= (b - d(0))/2 (finite differences)."""
    half = 0.5 * (b - d_eval(x, spec, 0.0))
    worst = 0.0
    for lam in np.linspace(-half, half, n):
        vals = [coupled_value(spec, x, ChaosPoint(t, u, lam + s, b)) for s in (-step, 0.0, step)]
        worst = max(worst, abs(vals[0] - 2 * vals[1] + vals[2]) / step**2)
    return worst


def chaos_gap(
    spec: MixtureSpec,
    x: StepOrderParameter,
    b: float,
    t: float,
    u: float,
    margin: float = 1e-6,
    tol: float = 1e-8,
    grid_points: int = 201,
) -> tuple[float, float]:
    """Delta(u) = 2 P(x, b) - min over lambda of P_u(x, b, lambda), and the minimising lambda."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"chaos_gap needs 0 < t < 1, got t={t}")
    two_p = 2.0 * cs_value(spec, x, b)
    half_width = b - d_eval(x, spec, 0.0) - margin

    def objective(lam):
        return coupled_value(spec, x, ChaosPoint(t, u, lam, b))

    lam_star, best = golden_section(objective, -half_width, half_width, tol)
    at_zero = objective(0.0)
    if at_zero <= best:
        lam_star, best = 0.0, at_zero

    # dense grid guard against a multimodal lambda profile
    grid = np.linspace(-half_width, half_width, grid_points)
    vals = np.array([objective(lam) for lam in grid])
    i = int(np.argmin(vals))
    if vals[i] < best - 1e-7:
        log.warning("golden section and grid disagree at u=%.6g (%.3g vs %.3g)", u, best, vals[i])
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
        lam_star, best = golden_section(objective, lo, hi, tol)
    if abs(lam_star) > half_width - 1e-4:
        log.warning("lambda* = %.6g hugs the admissible boundary at u=%.6g", lam_star, u)
    return two_p - best, float(lam_star)


def chaos_curve(
    spec: MixtureSpec,
    t: float,
    grid,
    optimum: CSOptimum | None = None,
    settings: OptimizerSettings | None = None,
) -> ChaosGapCurve:
    """Sweep chaos_gap over u, adding +-u_x and u* to the grid."""
    opt = optimum if optimum is not None else optimize_cs(spec, settings)
    x, b = opt.x_star, opt.b_star
    u_x = support_min(x)
    u_star = solve_u_star(spec, x, b, t)
    points = sorted(set(float(u) for u in grid) | {u_x, -u_x, u_star})
    gaps, lams = [], []
    for u in points:
        gap, lam = chaos_gap(spec, x, b, t, u)
        gaps.append(gap)
        lams.append(lam)
    return ChaosGapCurve(
        grid=points,
        gaps=gaps,
        lambda_star=lams,
        u_star=u_star,
        two_p=2.0 * cs_value(spec, x, b),
        u_x=u_x,
        t=t,
        optimum=opt,
    )
