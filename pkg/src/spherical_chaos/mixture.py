"""Even mixture functions xi(x) = sum_p beta_p^2 x^(2p) and the companion theta(q)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import factorial

import numpy as np


@dataclass(frozen=True)
class MixtureSpec:
    """A model (xi, h).

    ``terms`` holds pairs ``(p, beta_sq)`` for monomials ``beta_sq * x**(2p)``;
    an empty tuple is the degenerate xi == 0 model (pure external field).
    """

    terms: tuple[tuple[int, float], ...] = ()
    h: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((int(p), float(c)) for p, c in self.terms)
        )
        object.__setattr__(self, "h", float(self.h))

    @property
    def is_null(self) -> bool:
        return all(c == 0.0 for _, c in self.terms)

    @property
    def max_degree(self) -> int:
        return max((p for p, c in self.terms if c != 0.0), default=0)

    @cached_property
    def _tables(self):
        # per derivative order: (powers, coefficients) of the surviving monomials
        tables = {}
        active = [(2 * p, c) for p, c in self.terms if c != 0.0]
        for order in range(4):
            pairs = [(deg - order, c * factorial(deg) / factorial(deg - order)) for deg, c in active if deg >= order]
            tables[order] = (
                np.array([e for e, _ in pairs], dtype=float),
                np.array([c for _, c in pairs], dtype=float),
            )
            tables[("scalar", order)] = [(int(e), float(c)) for e, c in pairs]
        theta_pairs = [(deg, (deg - 1) * c) for deg, c in active]
        tables["theta"] = (
            np.array([e for e, _ in theta_pairs], dtype=float),
            np.array([c for _, c in theta_pairs], dtype=float),
        )
        return tables

    def xi(self, x, order: int = 0):
        return xi_eval(self, x, order)

    def theta(self, q):
        return theta_eval(self, q)

    def digest(self) -> str:
        blob = json.dumps({"terms": sorted(self.terms), "h": self.h}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"terms": [[p, c] for p, c in self.terms], "h": self.h}

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureSpec":
        return cls(terms=tuple(tuple(t) for t in data.get("terms", ())), h=data.get("h", 0.0))


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.valid


def xi_eval(spec: MixtureSpec, x, order: int = 0):
    """xi or one of its first three derivatives, by direct monomial summation."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be one of 0, 1, 2, 3; got {order!r}")
    if np.ndim(x) == 0:
        xv = float(x)
        if abs(xv) > 1.0 + 1e-12:
            raise ValueError("xi is only defined on [-1, 1]")
        return float(sum(c * xv**e for e, c in spec._tables[("scalar", order)]))
    x_arr = np.asarray(x, dtype=float)
    if x_arr.size and np.abs(x_arr).max() > 1.0 + 1e-12:
        raise ValueError("xi is only defined on [-1, 1]")
    return _poly(x_arr, *spec._tables[order])


def _poly(x_arr: np.ndarray, powers: np.ndarray, coefs: np.ndarray):
    if not coefs.size:
        out = np.zeros_like(x_arr)
    else:
        out = (x_arr[..., None] ** powers) @ coefs
    return float(out) if out.ndim == 0 else out


def theta_eval(spec: MixtureSpec, q):
    """theta(q) = q xi'(q) - xi(q); theta(0) = 0 and theta' = q xi''."""
    q_arr = np.asarray(q, dtype=float)
    if q_arr.size and (q_arr.min() < -1e-12 or q_arr.max() > 1.0 + 1e-12):
        raise ValueError("theta is evaluated on [0, 1]")
    # per monomial: q * 2p c q^(2p-1) - c q^(2p) = (2p - 1) c q^(2p)
    return _poly(q_arr, *spec._tables["theta"])


def validate(spec: MixtureSpec) -> ValidationReport:
    report = ValidationReport()
    degrees = [p for p, _ in spec.terms]
    for p in sorted(set(degrees)):
        if degrees.count(p) > 1:
            report.problems.append(f"duplicate degree p={p}")
    for p, c in spec.terms:
        if p < 1:
            report.problems.append(f"degree p={p} must be >= 1")
        if not np.isfinite(c):
            report.problems.append(f"non-finite coefficient for p={p}")
        elif c < 0:
            report.problems.append(f"negative coefficient beta_sq={c} for p={p}")
    if not np.isfinite(spec.h):
        report.problems.append("non-finite external field h")
    return report


def require_valid(spec: MixtureSpec) -> None:
    report = validate(spec)
    if not report.valid:
        raise ValueError("invalid mixture: " + "; ".join(report.problems))
