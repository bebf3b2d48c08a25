"""Brute-force checks of the two-replica Guerra recursion.

The recursive functionals J^1, J^2 are evaluated by nested Gauss-Hermite
quadrature over the rotated increments (y^1 +- y^2)/sqrt(2) and compared with
their explicit sums.  ``tau_chi`` gives the chi-square large-deviation term.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, log1p, sqrt

import mpmath
import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

from .errors import AdmissibilityError, NumericalFailure
from .mixture import MixtureSpec
from .order_param import StepOrderParameter, d_eval, insert_breakpoint


@dataclass(frozen=True)
class RSBSchedule:
    """Levels m_0..m_k, breakpoints q_0..q_{k+1} with q_tau = |u|, weights n_0..n_k."""

    m: tuple[float, ...]
    q: tuple[float, ...]
    tau: int
    t: float
    eta: int = 1

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(v) for v in self.m))
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        if len(self.q) != len(self.m) + 1:
            raise ValueError("need k+2 breakpoints for k+1 levels")
        if self.m[0] != 0.0:
            raise ValueError("the schedule starts with m_0 = 0")
        if self.q[0] != 0.0 or self.q[-1] != 1.0:
            raise ValueError("breakpoints run from q_0 = 0 to q_{k+1} = 1")
        if any(b < a for a, b in zip(self.q, self.q[1:])):
            raise ValueError("breakpoints must be nondecreasing")
        if any(b < a for a, b in zip(self.m, self.m[1:])) or self.m[-1] > 1.0:
            raise ValueError("levels must be nondecreasing in [0, 1]")
        if not 0 <= self.tau <= self.k + 1:
            raise ValueError(f"tau must lie in 0..k+1, got {self.tau}")
        if self.eta not in (-1, 1):
            raise ValueError("eta is +1 or -1")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")

    @property
    def k(self) -> int:
        return len(self.m) - 1

    @property
    def u(self) -> float:
        return self.eta * self.q[self.tau]

    @property
    def n(self) -> tuple[float, ...]:
        out = []
        for p, m in enumerate(self.m):
            if p == 0:
                out.append(0.0)
            elif p < self.tau:
                out.append(m / (1.0 + self.t))
            else:
                out.append(m)
        return tuple(out)

    def variances(self, spec: MixtureSpec) -> np.ndarray:
        xi1 = spec.xi(np.asarray(self.q), 1)
        return np.diff(xi1)

    def rotated_variances(self, spec: MixtureSpec, branch: int) -> np.ndarray:
        """Variances of (y^1 + y^2)/sqrt(2) (branch 1) or (y^1 - y^2)/sqrt(2) (branch 2)."""
        v = self.variances(spec)
        sign = 1.0 if branch == 1 else -1.0
        corr = np.array([self.eta * self.t if p < self.tau else 0.0 for p in range(self.k + 1)])
        return (1.0 + sign * corr) * v

    def covariance(self, spec: MixtureSpec, p: int) -> np.ndarray:
        """2x2 covariance of (y_p^1, y_p^2)."""
        v = self.variances(spec)[p]
        c = self.eta * self.t * v if p < self.tau else 0.0
        return np.array([[v, c], [c, v]])

    def order_parameter(self) -> StepOrderParameter:
        return StepOrderParameter(self.q[:-1], self.m)


def schedule_from(x: StepOrderParameter, u: float, t: float) -> RSBSchedule:
    """Build the schedule of x with |u| inserted as a breakpoint."""
    u_abs = abs(u)
    xx = insert_breakpoint(x, u_abs)
    q, m = list(xx.q), list(xx.m)
    if m[0] != 0.0:
        # a zero-length bottom piece keeps m_0 = 0 without changing x
        q, m = [0.0] + q, [0.0] + m
    q.append(1.0)
    tau = len(q) - 1 if u_abs == 1.0 else q.index(u_abs)
    return RSBSchedule(m=tuple(m), q=tuple(q), tau=tau, t=t, eta=-1 if u < 0 else 1)


def gaussian_exp_identity(n: float, L: float, v: float, y: float) -> float:
    """(1/n) log E exp(n/(2L) (y + sqrt(v) z)^2), and its n -> 0 limit."""
    if L <= 0 or v < 0 or n < 0:
        raise ValueError("need L > 0, v >= 0, n >= 0")
    if n * v >= L:
        raise AdmissibilityError(f"expectation diverges: n*v = {n * v:.6g} >= L = {L:.6g}")
    if n == 0.0:
        return y * y / (2.0 * L) + v / (2.0 * L)
    return y * y / (2.0 * (L - n * v)) - log1p(-n * v / L) / (2.0 * n)


def _branch_setup(schedule: RSBSchedule, spec: MixtureSpec, b: float, lam: float, branch: int):
    if branch not in (1, 2):
        raise ValueError("branch is 1 or 2")
    terminal = b - lam if branch == 1 else b + lam
    start = sqrt(2.0) * spec.h if branch == 1 else 0.0
    return terminal, start, schedule.rotated_variances(spec, branch)


def _check_admissible(schedule, spec, b, lam):
    d0 = d_eval(schedule.order_parameter(), spec, 0.0)
    if not b - abs(lam) > d0:
        raise AdmissibilityError(f"need b - |lambda| > d(0) = {d0:.6g}, got b={b:.6g}, lambda={lam:.6g}")


def _nested_quadrature(terminal, start, weights_n, variances, nodes):
    z, w = hermegauss(nodes)
    logw = np.log(w / w.sum())
    k = len(weights_n) - 1

    def level(p, a):
        if p == k + 1:
            return a * a / (2.0 * terminal)
        pts = a[:, None] + sqrt(variances[p]) * z[None, :]
        vals = level(p + 1, pts.ravel()).reshape(pts.shape)
        n = weights_n[p]
        if n == 0.0:
            return vals @ np.exp(logw)
        return logsumexp(n * vals + logw, axis=1) / n

    return float(level(0, np.array([start]))[0])


def recursive_J(
    schedule: RSBSchedule,
    spec: MixtureSpec,
    b: float,
    lam: float,
    branch: int,
    nodes=(32, 48, 64, 96, 128),
    rtol: float = 1e-10,
) -> float:
    """E J_1^branch(h + y_0^1, h + y_0^2, lambda) by nested Gauss-Hermite quadrature."""
    if schedule.k > 2:
        raise ValueError("the quadrature oracle is limited to k <= 2")
    _check_admissible(schedule, spec, b, lam)
    terminal, start, var = _branch_setup(schedule, spec, b, lam, branch)
    n = schedule.n
    prev = None
    for count in nodes:
        val = _nested_quadrature(terminal, start, n, var, count)
        if not np.isfinite(val):
            raise NumericalFailure(f"non-finite quadrature value with {count} nodes")
        if prev is not None and abs(val - prev) <= rtol * max(1.0, abs(val)):
            return val
        prev = val
    raise NumericalFailure(f"Gauss-Hermite recursion did not converge (last change {abs(val - prev):.3g})", best=val)


def closed_form_J(schedule: RSBSchedule, spec: MixtureSpec, b: float, lam: float, branch: int) -> float:
    """Explicit sums for E J_1^branch built from d(q_p) and the partial sums d'_p."""
    _check_admissible(schedule, spec, b, lam)
    x = schedule.order_parameter()
    q, tau, t, eta, n = schedule.q, schedule.tau, schedule.t, schedule.eta, schedule.n
    k = schedule.k
    sign = 1.0 if branch == 1 else -1.0
    base = b - lam if branch == 1 else b + lam
    d = [d_eval(x, spec, qp) for qp in q]
    d[-1] = 0.0
    d_tau = d[tau]
    coef = 1.0 + sign * eta * t

    def denom(p):
        if p >= tau:
            return base - d[p]
        d_prime = (d[p] - d_tau) / (1.0 + t)
        return base - (d_tau + coef * d_prime)

    rot = schedule.rotated_variances(spec, branch)
    total = 0.0
    for p in range(k + 1):
        upper, lower = denom(p + 1), denom(p)
        if lower <= 0.0:
            raise AdmissibilityError(f"non-positive denominator at level p={p}")
        if n[p] == 0.0:
            total += 0.5 * rot[p] / upper
        else:
            total += 0.5 * log(upper / lower) / n[p]
    if branch == 1:
        total += 2.0 * spec.h**2 / (2.0 * denom(0))
    return total


def assemble_B(schedule: RSBSchedule, spec: MixtureSpec, b: float, lam: float) -> float:
    """N^-1 E B_1 = log sqrt(b^2/(b^2 - lambda^2)) + E J^1 + E J^2."""
    return (
        -0.5 * np.log1p(-((lam / b) ** 2))
        + closed_form_J(schedule, spec, b, lam, 1)
        + closed_form_J(schedule, spec, b, lam, 2)
    )


def tau_chi(N: int, b: float) -> float:
    """-N^-1 log P(chi^2_N >= N b), computed in extended precision."""
    if N < 1 or b <= 0:
        raise ValueError("need N >= 1 and b > 0")
    with mpmath.workdps(40):
        tail = mpmath.gammainc(mpmath.mpf(N) / 2, mpmath.mpf(N) * b / 2, mpmath.inf, regularized=True)
        return float(-mpmath.log(tail) / N)


def tau_limit(b: float) -> float:
    return 0.5 * (b - 1.0 - log(b))


def random_schedule(rng: np.random.Generator, spec: MixtureSpec, k_max: int = 2):
    """A random admissible (schedule, b, lambda) triple for the oracle suite."""
    k = int(rng.integers(0, k_max + 1))
    inner = np.sort(rng.uniform(0.0, 1.0, size=k))
    q = (0.0, *inner, 1.0)
    m = (0.0, *np.sort(rng.uniform(0.05, 1.0, size=k)))
    tau = int(rng.integers(0, k + 2))
    t = float(rng.uniform(0.05, 0.95))
    eta = int(rng.choice([-1, 1]))
    sched = RSBSchedule(m=m, q=q, tau=tau, t=t, eta=eta)
    d0 = d_eval(sched.order_parameter(), spec, 0.0)
    lam = float(rng.uniform(-0.5, 0.5))
    var_total = float(np.sum(sched.variances(spec)))
    b = d0 + abs(lam) + var_total + float(rng.uniform(0.5, 1.5))
    return sched, b, lam
