"""The Crisanti-Sommers functional and its minimisation over step order parameters."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import expit, logit

from .errors import AdmissibilityError, NumericalFailure
from .mixture import MixtureSpec, require_valid
from .order_param import (
    StepOrderParameter,
    d_eval,
    log_integral,
    support_min,
    weighted_integral,
)

log = logging.getLogger(__name__)


def cs_value(spec: MixtureSpec, x: StepOrderParameter, b: float) -> float:
    """P(x, b) with the q-weighted last term, int_0^1 q xi''(q) x(q) dq."""
    d0 = d_eval(x, spec, 0.0)
    if not b > d0:
        raise AdmissibilityError(f"need b > d(0) = {d0:.6g}, got b = {b:.6g}", location=0.0)
    if b < 1.0:
        raise AdmissibilityError(f"need b >= 1, got b = {b:.6g}")
    field_term = spec.h**2 / (b - d0)
    integral = log_integral(x, spec, b, 0.0, 0.0, 1.0)
    return 0.5 * (field_term + integral + b - 1.0 - np.log(b) - weighted_integral(x, spec))


def support_residual(spec: MixtureSpec, x: StepOrderParameter, b: float, tol: float = 1e-12) -> float:
    """(h^2 + xi'(u_x)) / (b - d(0))^2 - u_x; zero at the optimiser."""
    u_x = support_min(x, tol)
    d0 = d_eval(x, spec, 0.0)
    return (spec.h**2 + spec.xi(u_x, 1)) / (b - d0) ** 2 - u_x


@dataclass
class OptimizerSettings:
    k_max: int = 6
    tol_k: float = 1e-9
    grad_tol: float = 1e-6
    restarts: int = 3
    seed: int = 0
    maxiter: int = 40000
    snap_tol: float = 1e-7
    fd_step: float = 1e-6


@dataclass
class CSOptimum:
    x_star: StepOrderParameter
    b_star: float
    value: float
    k_used: int
    stationarity_residuals: list[float]
    support_residual: float
    level_values: dict[int, float] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)

    @property
    def active_constraint(self) -> str:
        """Which lower bound on b is closer: 'b>1' or 'b>d(0)'."""
        return min(self.margins, key=self.margins.get) if self.margins else "none"

    @property
    def u_x(self) -> float:
        return support_min(self.x_star)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "b_star": self.b_star,
            "x_star": [[q, m] for q, m in self.x_star.pairs],
            "k_used": self.k_used,
            "u_x": self.u_x,
            "stationarity_residuals": list(self.stationarity_residuals),
            "support_residual": self.support_residual,
            "level_values": {str(k): v for k, v in self.level_values.items()},
            "margins": dict(self.margins),
            "active_constraint": self.active_constraint,
        }


# Parametrisation.  A level-k family has breakpoints q_1..q_k in (0, 1), levels
# m_0..m_{k-1} below the top level m_k = 1, and b.  Unconstrained coordinates
# use stick breaking through a logistic map for the ordered q's and m's and
# log(b - max(1, d(0))) for b.


@dataclass(frozen=True)
class _Layout:
    k: int
    m0_pinned: bool = False

    @property
    def n_m(self) -> int:
        return self.k - (1 if self.m0_pinned else 0)

    @property
    def size(self) -> int:
        return self.k + self.n_m + 1


def _sticks(z: np.ndarray, start: float) -> list[float]:
    out, cur = [], start
    for frac in expit(z):
        cur = cur + (1.0 - cur) * frac
        out.append(cur)
    return out


def _unstick(values, start: float) -> np.ndarray:
    z, cur = [], start
    for v in values:
        frac = (v - cur) / (1.0 - cur) if cur < 1.0 else 0.5
        z.append(logit(min(max(frac, 1e-9), 1.0 - 1e-9)))
        cur = v
    return np.asarray(z, dtype=float)


def _decode(layout: _Layout, z: np.ndarray, spec: MixtureSpec):
    k = layout.k
    qs = _sticks(z[:k], 0.0)
    if layout.m0_pinned:
        ms = [0.0] + _sticks(z[k : k + layout.n_m], 0.0)
    else:
        ms = _sticks_from_zero(z[k : k + layout.n_m])
    x = StepOrderParameter(q=(0.0, *qs), m=(*ms, 1.0))
    floor = max(1.0, d_eval(x, spec, 0.0))
    b = floor + np.exp(z[-1])
    return x, b


def _sticks_from_zero(z: np.ndarray) -> list[float]:
    # first level is a free fraction of [0, 1], later ones break the remainder
    if len(z) == 0:
        return []
    first = float(expit(z[0]))
    return [first] + _sticks(z[1:], first)


def _encode(layout: _Layout, x: StepOrderParameter, b: float, spec: MixtureSpec) -> np.ndarray:
    qs = list(x.q[1:])
    ms = list(x.m[:-1])
    zq = _unstick(qs, 0.0)
    if layout.m0_pinned:
        zm = _unstick(ms[1:], 0.0)
    elif ms:
        first = min(max(ms[0], 1e-9), 1.0 - 1e-9)
        zm = np.concatenate([[logit(first)], _unstick(ms[1:], ms[0])])
    else:
        zm = np.zeros(0)
    floor = max(1.0, d_eval(x, spec, 0.0))
    zb = np.log(max(b - floor, 1e-12))
    return np.concatenate([zq, zm, [zb]])


class _Objective:
    """Wraps cs_value for one layout and remembers the best probe."""

    def __init__(self, spec: MixtureSpec, layout: _Layout):
        self.spec = spec
        self.layout = layout
        self.best_value = np.inf
        self.best_point = None
        self.calls = 0

    def __call__(self, z: np.ndarray) -> float:
        self.calls += 1
        try:
            x, b = _decode(self.layout, z, self.spec)
            val = cs_value(self.spec, x, b)
        except (AdmissibilityError, ValueError, FloatingPointError):
            return np.inf
        if not np.isfinite(val):
            return np.inf
        if val < self.best_value:
            self.best_value = val
            self.best_point = (x, b)
        return val


def _nelder_mead(obj: _Objective, z0: np.ndarray, settings: OptimizerSettings) -> np.ndarray:
    z = np.asarray(z0, dtype=float)
    prev = np.inf
    for _ in range(8):
        res = minimize(
            obj,
            z,
            method="Nelder-Mead",
            options={
                "xatol": 1e-11,
                "fatol": 1e-15,
                "maxiter": settings.maxiter,
                "maxfev": settings.maxiter,
                "adaptive": len(z) > 3,
            },
        )
        z = res.x
        if prev - res.fun < 1e-15:
            break
        prev = res.fun
    return z


def _canonical(x: StepOrderParameter, snap: float) -> tuple[StepOrderParameter, bool]:
    """Snap near-bound levels, merge equal levels and collapse tiny pieces."""
    q = list(x.q)
    m = [0.0 if v < snap else (1.0 if v > 1.0 - snap else v) for v in x.m]
    m[-1] = 1.0
    changed = True
    while changed:
        changed = False
        for i in range(len(q) - 1):
            tiny = q[i + 1] - q[i] < snap
            same = abs(m[i + 1] - m[i]) < snap
            if tiny or same:
                # merge pieces i and i+1 into one starting at q[i], keep the larger level
                m[i] = max(m[i], m[i + 1])
                del q[i + 1], m[i + 1]
                changed = True
                break
        if len(q) > 1 and 1.0 - q[-1] < snap:
            del q[-1], m[-1]
            m[-1] = 1.0
            changed = True
    m[-1] = 1.0
    canon = StepOrderParameter(tuple(q), tuple(m))
    return canon, (canon.k >= 1 and canon.m[0] == 0.0)


def _raw_vector(layout: _Layout, x: StepOrderParameter, b: float) -> np.ndarray:
    ms = list(x.m[:-1])
    if layout.m0_pinned:
        ms = ms[1:]
    return np.asarray([*x.q[1:], *ms, b], dtype=float)


def _from_raw(layout: _Layout, v: np.ndarray):
    k = layout.k
    qs = v[:k]
    ms = list(v[k : k + layout.n_m])
    if layout.m0_pinned:
        ms = [0.0] + ms
    return StepOrderParameter(q=(0.0, *qs), m=(*ms, 1.0)), float(v[-1])


def stationarity(spec: MixtureSpec, x: StepOrderParameter, b: float, step: float = 1e-6) -> list[float]:
    """Central finite-difference partials of P in (q_1..q_k, free m's, b)."""
    layout = _Layout(x.k, x.k >= 1 and x.m[0] == 0.0)
    v0 = _raw_vector(layout, x, b)
    grads = []
    for i in range(len(v0)):
        vals = []
        for sgn in (1.0, -1.0):
            v = v0.copy()
            v[i] += sgn * step
            try:
                xx, bb = _from_raw(layout, v)
                vals.append(cs_value(spec, xx, bb))
            except (AdmissibilityError, ValueError):
                vals.append(None)
        if None in vals:
            # fall back to a one-sided difference at an ordering constraint
            f0 = cs_value(spec, x, b)
            if vals[0] is not None:
                grads.append((vals[0] - f0) / step)
            elif vals[1] is not None:
                grads.append((f0 - vals[1]) / step)
            else:
                grads.append(0.0)
        else:
            grads.append((vals[0] - vals[1]) / (2.0 * step))
    return grads


def _newton_polish(spec: MixtureSpec, x: StepOrderParameter, b: float, step: float = 1e-5, iters: int = 6):
    """A few damped Newton steps in raw coordinates with a finite-difference Hessian."""
    layout = _Layout(x.k, x.k >= 1 and x.m[0] == 0.0)
    v = _raw_vector(layout, x, b)

    def f(vec):
        try:
            xx, bb = _from_raw(layout, vec)
            return cs_value(spec, xx, bb)
        except (AdmissibilityError, ValueError):
            return np.inf

    with np.errstate(invalid="ignore"):
        v = _newton_steps(f, v, step, iters)
    return _from_raw(layout, v)


def _newton_steps(f, v, step, iters):
    fv = f(v)
    n = len(v)
    for _ in range(iters):
        g = np.zeros(n)
        H = np.zeros((n, n))
        e = np.eye(n) * step
        for i in range(n):
            g[i] = (f(v + e[i]) - f(v - e[i])) / (2 * step)
            for j in range(i, n):
                H[i, j] = H[j, i] = (
                    f(v + e[i] + e[j]) - f(v + e[i] - e[j]) - f(v - e[i] + e[j]) + f(v - e[i] - e[j])
                ) / (4 * step * step)
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(H)):
            break
        try:
            w, V = np.linalg.eigh(H)
        except np.linalg.LinAlgError:
            break
        if np.min(w) <= 0:
            break
        delta = -V @ ((V.T @ g) / w)
        accepted = False
        for damp in (1.0, 0.5, 0.25, 0.125):
            cand = v + damp * delta
            fc = f(cand)
            if fc <= fv:
                v, fv, accepted = cand, fc, True
                break
        if not accepted or np.max(np.abs(delta)) < 1e-12:
            break
    return v


def _polish(spec, x, b, settings):
    """Re-optimise every interior coordinate of the structure of x."""
    layout = _Layout(x.k, x.k >= 1 and x.m[0] == 0.0)
    obj = _Objective(spec, layout)
    z = _nelder_mead(obj, _encode(layout, x, b, spec), settings)
    obj(z)
    if obj.best_point is None:
        return x, b, np.inf
    xp, bp = _newton_polish(spec, *obj.best_point)
    return xp, bp, cs_value(spec, xp, bp)


def _coarsenings(x: StepOrderParameter, tol: float):
    """Structures with one fewer free coordinate than x, near x."""
    q, m = list(x.q), list(x.m)
    if x.k >= 1 and 0.0 < m[0] < tol:
        yield StepOrderParameter(tuple(q), (0.0, *m[1:]))
    for i in range(len(q) - 1):
        upper = q[i + 1]
        if upper - q[i] < tol or m[i + 1] - m[i] < tol:
            qq, mm = q[:i + 1] + q[i + 2:], m[:i] + [m[i + 1]] + m[i + 2:]
            yield StepOrderParameter(tuple(qq), tuple(mm))
    if len(q) > 1 and 1.0 - q[-1] < tol:
        yield StepOrderParameter(tuple(q[:-1]), (*m[:-2], 1.0))


def _simplify(spec, x, b, settings, tol=1e-3):
    """Polish, then greedily accept coarser structures that are no worse."""
    x, _ = _canonical(x, settings.snap_tol)
    x, b, value = _polish(spec, x, b, settings)
    changed = True
    while changed:
        changed = False
        for cand in _coarsenings(x, tol):
            cx, cb, cv = _polish(spec, cand, b, settings)
            if cv <= value + 1e-12:
                x, b, value, changed = cx, cb, cv, True
                break
    return x, b, value


def optimize_level(spec: MixtureSpec, k: int, settings: OptimizerSettings | None = None, warm=None, rng=None):
    """Best (x, b) found within the family of at most k breakpoints above 0."""
    settings = settings or OptimizerSettings()
    rng = rng if rng is not None else np.random.default_rng(settings.seed + 7919 * k)
    layout = _Layout(k)
    obj = _Objective(spec, layout)
    starts = []
    if warm is not None:
        starts.append(_encode(layout, _split_for_level(warm[0], k), warm[1], spec))
    d_lin = np.linspace(0.2, 0.8, k) if k else np.zeros(0)
    starts.append(np.concatenate([_unstick(d_lin, 0.0), np.full(k, -0.5), [0.0]]))
    for _ in range(settings.restarts):
        starts.append(rng.normal(0.0, 1.5, size=layout.size))
    for z0 in starts:
        _nelder_mead(obj, z0, settings)
    if obj.best_point is None:
        raise NumericalFailure(f"no admissible point found at level k={k}")
    x, b, value = _simplify(spec, *obj.best_point, settings)
    if value > obj.best_value + 1e-12:
        x, b = obj.best_point
        value = obj.best_value
    return x, b, value


def _split_for_level(x: StepOrderParameter, k: int) -> StepOrderParameter:
    """Embed a coarser step function into the level-k family by splitting pieces."""
    q, m = list(x.q), list(x.m)
    while len(q) - 1 < k:
        uppers = q[1:] + [1.0]
        lengths = [u - lo for lo, u in zip(q, uppers)]
        i = int(np.argmax(lengths))
        mid = 0.5 * (q[i] + uppers[i])
        nxt = m[i + 1] if i + 1 < len(m) else 1.0
        q.insert(i + 1, mid)
        m.insert(i + 1, m[i] + 0.01 * (nxt - m[i]))
    while len(q) - 1 > k:
        del q[-1], m[-1]
    m[-1] = 1.0
    return StepOrderParameter(tuple(q), tuple(m))


def _optimize_null(spec: MixtureSpec, settings: OptimizerSettings) -> CSOptimum:
    # xi == 0: P does not depend on x, only b is optimised
    x_frozen = StepOrderParameter.constant(1.0)

    def p_of_b(b):
        return cs_value(spec, x_frozen, b)

    hi = 2.0 + 2.0 * abs(spec.h) + spec.h**2
    res = minimize_scalar(p_of_b, bounds=(1.0, hi), method="bounded", options={"xatol": 1e-12})
    b, value = float(res.x), float(res.fun)
    if p_of_b(1.0) <= value:
        b, value = 1.0, p_of_b(1.0)
    # report the order parameter consistent with the support equation
    x = StepOrderParameter.step_at(spec.h**2 / b**2) if spec.h != 0.0 else x_frozen
    value = cs_value(spec, x, b)
    step = settings.fd_step
    grad = (p_of_b(b + step) - p_of_b(b - step)) / (2 * step) if b - step >= 1.0 else 0.0
    return CSOptimum(
        x_star=x,
        b_star=b,
        value=value,
        k_used=x.k,
        stationarity_residuals=[grad],
        support_residual=support_residual(spec, x, b),
        level_values={0: value},
        margins={"b>1": b - 1.0, "b>d(0)": b - d_eval(x, spec, 0.0)},
    )


def optimize_cs(spec: MixtureSpec, settings: OptimizerSettings | None = None) -> CSOptimum:
    """Minimise P over step order parameters with a nested number of levels.

    Levels k = 0, 1, ... are optimised in turn (warm started from the previous
    level) until the value improves by less than ``settings.tol_k``.
    """
    settings = settings or OptimizerSettings()
    require_valid(spec)
    if spec.is_null:
        return _optimize_null(spec, settings)

    rng = np.random.default_rng(settings.seed)
    levels: dict[int, float] = {}
    best = None
    for k in range(settings.k_max + 1):
        x, b, value = optimize_level(spec, k, settings, warm=best[:2] if best else None, rng=rng)
        levels[k] = value
        if best is not None and best[2] - value < settings.tol_k:
            break
        if best is None or value < best[2]:
            best = (x, b, value)
    x, b, value = best
    grads = stationarity(spec, x, b, settings.fd_step)
    result = CSOptimum(
        x_star=x,
        b_star=b,
        value=value,
        k_used=x.k,
        stationarity_residuals=grads,
        support_residual=support_residual(spec, x, b),
        level_values=levels,
        margins={"b>1": b - 1.0, "b>d(0)": b - d_eval(x, spec, 0.0)},
    )
    if max(abs(g) for g in grads) > settings.grad_tol:
        raise NumericalFailure(
            f"optimizer stopped with stationarity residual {max(abs(g) for g in grads):.3g}"
            f" > {settings.grad_tol:g}",
            best=result,
        )
    return result
