"""Step-function order parameters and the exact integrals built on them.

A :class:`StepOrderParameter` is the distribution function
``x(q) = m[l]`` on ``[q[l], q[l+1])`` with ``q[k+1] = 1`` implicit and
``x(1) = 1``.  Every integral against ``xi''`` is evaluated piecewise in
closed form, so nothing here uses quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import AdmissibilityError
from .mixture import MixtureSpec


@dataclass(frozen=True)
class StepOrderParameter:
    q: tuple[float, ...]
    m: tuple[float, ...]

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        m = tuple(float(v) for v in self.m)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "m", m)
        if len(q) != len(m) or not q:
            raise ValueError("q and m must be non-empty and of equal length")
        if q[0] != 0.0:
            raise ValueError("the first breakpoint must be q_0 = 0")
        if any(b < a for a, b in zip(q, q[1:])) or q[-1] > 1.0:
            raise ValueError(f"breakpoints must be nondecreasing in [0, 1]: {q}")
        if any(b < a for a, b in zip(m, m[1:])) or m[0] < 0.0 or m[-1] > 1.0:
            raise ValueError(f"levels must be nondecreasing in [0, 1]: {m}")

    @classmethod
    def from_pairs(cls, pairs) -> "StepOrderParameter":
        pairs = list(pairs)
        return cls(q=tuple(p[0] for p in pairs), m=tuple(p[1] for p in pairs))

    @classmethod
    def constant(cls, level: float = 1.0) -> "StepOrderParameter":
        return cls(q=(0.0,), m=(level,))

    @classmethod
    def step_at(cls, q: float) -> "StepOrderParameter":
        """0 below q, 1 from q on (replica symmetric with overlap q)."""
        if q <= 0.0:
            return cls.constant(1.0)
        return cls(q=(0.0, q), m=(0.0, 1.0))

    @property
    def k(self) -> int:
        return len(self.q) - 1

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.q, self.m))

    @cached_property
    def q_arr(self) -> np.ndarray:
        return np.asarray(self.q)

    @cached_property
    def m_arr(self) -> np.ndarray:
        return np.asarray(self.m)

    @cached_property
    def upper_arr(self) -> np.ndarray:
        return np.append(self.q_arr[1:], 1.0)

    def uppers(self) -> np.ndarray:
        return self.upper_arr

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        idx = np.searchsorted(np.asarray(self.q), s_arr, side="right") - 1
        out = np.asarray(self.m)[np.clip(idx, 0, self.k)]
        out = np.where(s_arr >= 1.0, 1.0, out)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Envelope:
    """``e(s) = d(anchor) + scale * (d(s) - d(anchor))``; the default is ``d`` itself."""

    scale: float = 1.0
    anchor: float = 0.0

    @classmethod
    def phi(cls, t: float, u_abs: float) -> "Envelope":
        return cls(scale=(1.0 - t) / (1.0 + t), anchor=u_abs)

    def __call__(self, x: StepOrderParameter, spec: MixtureSpec, s):
        return self.apply(d_eval(x, spec, self.anchor), d_eval(x, spec, s))

    def apply(self, d_anchor: float, ds):
        if self.scale == 1.0:
            return ds
        return d_anchor + self.scale * (ds - d_anchor)


D_ENVELOPE = Envelope()


@dataclass(frozen=True)
class _Profile:
    xi1_lower: np.ndarray
    xi1_upper: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray


@lru_cache(maxsize=1024)
def _profile(x: StepOrderParameter, spec: MixtureSpec) -> _Profile:
    xi1_lower = spec.xi(x.q_arr, 1)
    xi1_upper = spec.xi(x.upper_arr, 1)
    pieces = x.m_arr * (xi1_upper - xi1_lower)
    d_lower = np.cumsum(pieces[::-1])[::-1]
    d_upper = np.append(d_lower[1:], 0.0)
    return _Profile(xi1_lower, xi1_upper, d_lower, d_upper)


def d_eval(x: StepOrderParameter, spec: MixtureSpec, q):
    """d(q) = int_q^1 xi''(s) x(s) ds."""
    prof = _profile(x, spec)
    idx = np.searchsorted(x.q_arr, q, side="right") - 1
    if np.ndim(q) == 0:
        i = int(idx)
        return float(prof.d_upper[i] + x.m[i] * (prof.xi1_upper[i] - spec.xi(q, 1)))
    q_arr = np.asarray(q, dtype=float)
    return prof.d_upper[idx] + x.m_arr[idx] * (prof.xi1_upper[idx] - spec.xi(q_arr, 1))


def weighted_integral(x: StepOrderParameter, spec: MixtureSpec) -> float:
    """int_0^1 q xi''(q) x(q) dq, telescoped through theta."""
    return _weighted(x, spec)


@lru_cache(maxsize=1024)
def _weighted(x: StepOrderParameter, spec: MixtureSpec) -> float:
    return float(np.sum(x.m_arr * (spec.theta(x.upper_arr) - spec.theta(x.q_arr))))


def log_integral(
    x: StepOrderParameter,
    spec: MixtureSpec,
    b: float,
    shift: float,
    lo: float,
    hi: float,
    envelope: Envelope | None = None,
) -> float:
    """int_lo^hi xi''(s) / (b - shift - e(s)) ds for an envelope e built from d.

    On a piece where x = m the denominator is ``D0 + scale*m*(xi'(s) - xi'(s0))``,
    so the piece integral is ``log(1 + r) / (scale*m)`` with ``r = scale*m*dxi/D0``.
    """
    env = D_ENVELOPE if envelope is None else envelope
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    if lo == hi:
        return 0.0
    prof = _profile(x, spec)
    keep = (x.upper_arr > lo) & (x.q_arr < hi)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return 0.0
    starts = x.q_arr[idx].copy()
    xi_s = prof.xi1_lower[idx].copy()
    d_s = prof.d_lower[idx].copy()
    xi_e = prof.xi1_upper[idx].copy()
    m = x.m_arr[idx]
    if starts[0] < lo:
        starts[0] = lo
        xi_s[0] = spec.xi(lo, 1)
        d_s[0] = prof.d_upper[idx[0]] + m[0] * (prof.xi1_upper[idx[0]] - xi_s[0])
    if x.upper_arr[idx[-1]] > hi:
        xi_e[-1] = spec.xi(hi, 1)
    d_anchor = d_eval(x, spec, env.anchor) if env.scale != 1.0 else 0.0
    denom = b - shift - env.apply(d_anchor, d_s)
    # the denominator is nondecreasing in s, so piece starts are the worst points
    bad = np.flatnonzero(denom <= 0.0)
    if bad.size:
        s_bad = float(starts[bad[0]])
        raise AdmissibilityError(
            f"denominator b - shift - e(s) = {denom[bad[0]]:.6g} <= 0 at s = {s_bad:.6g}",
            location=s_bad,
        )
    dxi = xi_e - xi_s
    slope = env.scale * m
    r = slope * dxi / denom
    safe = np.where(r == 0.0, 1.0, r)
    factor = np.where(r == 0.0, 1.0, np.log1p(r) / safe)
    return float(np.sum(dxi / denom * factor))


def support_min(x: StepOrderParameter, tol: float = 1e-12) -> float:
    """Smallest point of the support of the measure: first q with x(q) > tol."""
    for q, m in zip(x.q, x.m):
        if m > tol:
            return q
    return 1.0


def insert_breakpoint(x: StepOrderParameter, q: float) -> StepOrderParameter:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"breakpoint must lie in [0, 1], got {q}")
    if q in x.q or q == 1.0:
        return x
    idx = int(np.searchsorted(np.asarray(x.q), q, side="right"))
    new_q = x.q[:idx] + (q,) + x.q[idx:]
    new_m = x.m[:idx] + (x.m[idx - 1],) + x.m[idx:]
    return StepOrderParameter(new_q, new_m)
