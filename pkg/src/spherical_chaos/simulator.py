"""Finite-N Monte Carlo for two spherical mixed even-spin systems with correlated disorder.

Disorder tensors are dense and unsymmetrised.  Chains are advanced in batches
(one row per chain) but every chain draws from its own random stream, so
results do not depend on how chains are grouped.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from math import sqrt

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .errors import ConfigurationError
from .mixture import MixtureSpec

log = logging.getLogger(__name__)

DEFAULT_MAX_ENTRIES = 32**4
BIN_WIDTH = 0.02
BIN_EDGES = np.linspace(-1.0, 1.0, int(round(2.0 / BIN_WIDTH)) + 1)
DEFAULT_EPS = (0.1, 0.2, 0.3)


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(int(seed))


@dataclass
class DisorderRealization:
    """Per-system coupling tensors, already scaled by beta_p N^{-(2p-1)/2}.

    ``tensors[p] = (T1, T2)`` where each has shape ``(N**(2p-1), N)``.
    """

    spec: MixtureSpec
    N: int
    t: float
    seed: object
    tensors: dict[int, tuple[np.ndarray, np.ndarray]]
    self_test: dict = field(default_factory=dict)

    @property
    def self_test_passed(self) -> bool:
        return bool(self.self_test.get("passed", True))


# two-sided 3-sigma level shared by the three entry statistics (Bonferroni)
SELF_TEST_Z = float(norm.isf(2.0 * norm.sf(3.0) / 3.0 / 2.0))


def _covariance_self_test(raw_pairs, t: float, z: float = SELF_TEST_Z) -> dict:
    """Entry-level check: unit variances and cross-correlation t within z standard errors."""
    if not raw_pairs:
        return {"passed": True, "entries": 0}
    a = np.concatenate([p[0].ravel() for p in raw_pairs])
    b = np.concatenate([p[1].ravel() for p in raw_pairs])
    n = a.size
    cross = float(np.mean(a * b))
    var1, var2 = float(np.mean(a * a)), float(np.mean(b * b))
    se_cross = sqrt((1.0 + t * t) / n)
    se_var = sqrt(2.0 / n)
    ok = abs(cross - t) <= z * se_cross and abs(var1 - 1.0) <= z * se_var and abs(var2 - 1.0) <= z * se_var
    return {"passed": bool(ok), "entries": n, "cross": cross, "var1": var1, "var2": var2, "cross_se": se_cross}


def build_disorder(
    spec: MixtureSpec, N: int, t: float, seed, max_entries: int = DEFAULT_MAX_ENTRIES
) -> DisorderRealization:
    """Draw shared and private Gaussian tensors and combine them as sqrt(t) S + sqrt(1-t) P_j."""
    if N < 2:
        raise ConfigurationError(f"N must be at least 2, got {N}")
    if not 0.0 <= t <= 1.0:
        raise ConfigurationError(f"t must lie in [0, 1], got {t}")
    for p, c in spec.terms:
        if c != 0.0 and N ** (2 * p) > max_entries:
            raise ConfigurationError(
                f"term p={p} at N={N} needs {N ** (2 * p)} entries per tensor; budget is {max_entries}"
            )
    rng = np.random.default_rng(_seed_sequence(seed))
    a, c_priv = sqrt(t), sqrt(1.0 - t)
    tensors, raw_pairs = {}, []
    for p, beta_sq in sorted(spec.terms):
        if beta_sq == 0.0:
            continue
        shape = (N ** (2 * p - 1), N)
        shared = rng.standard_normal(shape)
        priv1 = rng.standard_normal(shape)
        priv2 = rng.standard_normal(shape)
        g1 = a * shared + c_priv * priv1
        g2 = a * shared + c_priv * priv2
        raw_pairs.append((g1, g2))
        scale = sqrt(beta_sq) * N ** (-(2 * p - 1) / 2)
        tensors[p] = (scale * g1, scale * g2)
    report = _covariance_self_test(raw_pairs, t)
    if not report["passed"]:
        log.warning("disorder covariance self-test failed at 3 sigma: %s", report)
    return DisorderRealization(spec=spec, N=N, t=t, seed=seed, tensors=tensors, self_test=report)


def _contract(tensor: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Full contraction of stacked tensors (C, N^(2p-1), N) with sigma (C, N)."""
    C, N = sigma.shape
    vec = tensor
    s = sigma[:, :, None]
    while True:
        vec = np.matmul(vec, s)[..., 0]
        if vec.shape[1] == 1:
            return vec[:, 0]
        vec = vec.reshape(C, -1, N)


def hamiltonian_eval(real: DisorderRealization, system: int, sigma) -> float:
    """-H(sigma) = X^system(sigma) + h sum_i sigma_i."""
    if system not in (1, 2):
        raise ValueError("system is 1 or 2")
    sig = np.asarray(sigma, dtype=float)
    value = real.spec.h * float(sig.sum())
    for tensor_pair in real.tensors.values():
        tensor = tensor_pair[system - 1]
        vec = tensor
        while vec.size > 1:
            vec = vec.reshape(-1, real.N) @ sig
        value += float(vec.reshape(()))
    return value


@dataclass(frozen=True)
class ChainSettings:
    sweeps: int = 1000
    burn_fraction: float = 0.2
    thin: int = 5
    accept_low: float = 0.3
    accept_high: float = 0.6
    delta0: float = 0.5
    adapt_factor: float = 1.25

    def __post_init__(self):
        if self.sweeps < 1 or self.thin < 1:
            raise ConfigurationError("sweeps and thin must be positive")
        if not 0.0 <= self.burn_fraction < 1.0:
            raise ConfigurationError("burn_fraction must lie in [0, 1)")

    @property
    def burn_in(self) -> int:
        return int(self.sweeps * self.burn_fraction)


@dataclass
class ChainState:
    sigma: np.ndarray
    energy: float
    delta: float
    accepted: int
    proposed: int
    sweep: int

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def sphere_point(rng: np.random.Generator, N: int) -> np.ndarray:
    v = rng.standard_normal(N)
    return sqrt(N) * v / np.linalg.norm(v)


def propose(sigma: np.ndarray, delta, zeta: np.ndarray) -> np.ndarray:
    """sqrt(N) (sigma + delta zeta) / |sigma + delta zeta|, row-wise."""
    v = sigma + np.asarray(delta)[..., None] * zeta if np.ndim(delta) else sigma + delta * zeta
    N = sigma.shape[-1]
    return sqrt(N) * v / np.linalg.norm(v, axis=-1, keepdims=True)


def accept_probability(minus_h_new, minus_h_old):
    """Metropolis rule for exp(-H): min(1, exp(-H' + H))."""
    return np.exp(np.minimum(0.0, np.asarray(minus_h_new) - np.asarray(minus_h_old)))


class _Batch:
    """A batch of chains, each on its own tensors and random stream."""

    def __init__(self, tensors: list[dict[int, np.ndarray]], h: float, N: int, seeds, settings: ChainSettings):
        self.N, self.h, self.settings = N, h, settings
        self.C = len(seeds)
        degrees = sorted({p for tens in tensors for p in tens})
        self.stacks = [np.stack([tens[p] for tens in tensors]) for p in degrees]
        self.rngs = [np.random.default_rng(_seed_sequence(s)) for s in seeds]
        self.sigma = np.stack([sphere_point(r, N) for r in self.rngs])
        self.energy = self.minus_h(self.sigma)
        self.delta = np.full(self.C, settings.delta0)
        self.accepted = np.zeros(self.C, dtype=np.int64)
        self.proposed = np.zeros(self.C, dtype=np.int64)

    def minus_h(self, sigma: np.ndarray) -> np.ndarray:
        out = self.h * sigma.sum(axis=1)
        for stack in self.stacks:
            out = out + _contract(stack, sigma)
        return out

    def sweep(self):
        N = self.N
        zetas = np.stack([r.standard_normal((N, N)) for r in self.rngs], axis=1)
        uniforms = np.stack([r.random(N) for r in self.rngs], axis=1)
        acc = np.zeros(self.C, dtype=np.int64)
        for step in range(N):
            cand = propose(self.sigma, self.delta, zetas[step])
            e_new = self.minus_h(cand)
            take = uniforms[step] < accept_probability(e_new, self.energy)
            self.sigma = np.where(take[:, None], cand, self.sigma)
            self.energy = np.where(take, e_new, self.energy)
            acc += take
        self.accepted += acc
        self.proposed += N
        return acc / N

    def adapt(self, rate: np.ndarray):
        s = self.settings
        self.delta = np.where(rate < s.accept_low, self.delta / s.adapt_factor, self.delta)
        self.delta = np.where(rate > s.accept_high, self.delta * s.adapt_factor, self.delta)

    def run(self, callback):
        """Run all sweeps; ``callback(sweep_index)`` fires on every thinned post-burn-in sweep."""
        s = self.settings
        for sweep in range(s.sweeps):
            rate = self.sweep()
            if sweep < s.burn_in:
                self.adapt(rate)
                if sweep == s.burn_in - 1:
                    self.accepted[:] = 0
                    self.proposed[:] = 0
            elif (sweep - s.burn_in + 1) % s.thin == 0:
                callback(sweep)


def metropolis_chain(real: DisorderRealization, system: int, sweeps: int, seed, settings: ChainSettings | None = None):
    """Yield thinned post-burn-in states of a single Metropolis chain."""
    base = settings or ChainSettings()
    s = ChainSettings(**{**asdict(base), "sweeps": sweeps})
    tens = {p: pair[system - 1] for p, pair in real.tensors.items()}
    batch = _Batch([tens], real.spec.h, real.N, [seed], s)
    states = []

    def record(sweep):
        states.append(
            ChainState(
                sigma=batch.sigma[0].copy(),
                energy=float(batch.energy[0]),
                delta=float(batch.delta[0]),
                accepted=int(batch.accepted[0]),
                proposed=int(batch.proposed[0]),
                sweep=sweep,
            )
        )

    batch.run(record)
    yield from states


@dataclass
class OverlapReport:
    N: int
    t: float
    h: float
    spec_digest: str
    u_star: float
    histogram: list[float]
    mean: float
    variance: float
    mean_stderr: float
    tails: dict[float, float]
    tail_stderr: dict[float, float]
    replicas: int
    samples: int
    effective_samples: float
    acceptance: float
    self_test_failures: int = 0
    replica_means: list[float] = field(default_factory=list, repr=False)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (BIN_EDGES[:-1] + BIN_EDGES[1:])

    def mass_within(self, radius: float, center: float = 0.0) -> float:
        inside = np.abs(self.bin_centers - center) <= radius + 1e-12
        return float(np.sum(np.asarray(self.histogram)[inside]))

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("replica_means")
        out["tails"] = {str(k): v for k, v in self.tails.items()}
        out["tail_stderr"] = {str(k): v for k, v in self.tail_stderr.items()}
        return out


def _ess(series: np.ndarray) -> float:
    """Effective sample size from the initial positive autocorrelation sequence."""
    n = series.size
    if n < 4:
        return float(n)
    x = series - series.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return float(n)
    tau = 1.0
    for lag in range(1, n // 2):
        rho = float(np.dot(x[:-lag], x[lag:])) / (n * var)
        if rho <= 0.0:
            break
        tau += 2.0 * rho
    return n / tau


def overlap_experiment(
    spec: MixtureSpec,
    N: int,
    t: float,
    replicas: int,
    sweeps: int,
    base_seed: int,
    u_star: float = 0.0,
    eps=DEFAULT_EPS,
    settings: ChainSettings | None = None,
    max_entries: int = DEFAULT_MAX_ENTRIES,
    chunk_entries: int = 1 << 22,
) -> OverlapReport:
    """Sample the overlap of one chain on each system across disorder replicas."""
    if not 0.0 < t <= 1.0:
        raise ConfigurationError(f"t must lie in (0, 1], got {t}")
    if replicas < 2:
        raise ConfigurationError("need at least two replicas for standard errors")
    base = settings or ChainSettings()
    s = ChainSettings(**{**asdict(base), "sweeps": sweeps})
    reals = [build_disorder(spec, N, t, (base_seed, r), max_entries) for r in range(replicas)]
    per_chain = max(1, sum(pair[0].size for pair in reals[0].tensors.values()))
    chunk = max(1, chunk_entries // (2 * per_chain))
    overlaps = []
    acceptance = []
    for start in range(0, replicas, chunk):
        group = range(start, min(start + chunk, replicas))
        tensors, seeds = [], []
        for r in group:
            for system in (1, 2):
                tensors.append({p: pair[system - 1] for p, pair in reals[r].tensors.items()})
                seeds.append((base_seed, r, system))
        batch = _Batch(tensors, spec.h, N, seeds, s)
        rows = []
        batch.run(lambda _sweep: rows.append(np.einsum("ri,ri->r", batch.sigma[0::2], batch.sigma[1::2]) / N))
        overlaps.append(np.array(rows).T if rows else np.zeros((len(group), 0)))
        acceptance.append(batch.accepted / np.maximum(batch.proposed, 1))
    R = np.vstack(overlaps)
    if R.shape[1] == 0:
        raise ConfigurationError("no post-burn-in samples; increase sweeps")
    hist, _ = np.histogram(np.clip(R, -1.0, 1.0), bins=BIN_EDGES)
    hist = hist / hist.sum()
    rep_means = R.mean(axis=1)
    tails, tail_se = {}, {}
    for e in eps:
        per_rep = np.mean(np.abs(R - u_star) > e, axis=1)
        tails[float(e)] = float(per_rep.mean())
        tail_se[float(e)] = float(per_rep.std(ddof=1) / sqrt(replicas))
    return OverlapReport(
        N=N,
        t=t,
        h=spec.h,
        spec_digest=spec.digest(),
        u_star=u_star,
        histogram=[float(v) for v in hist],
        mean=float(R.mean()),
        variance=float(R.var()),
        mean_stderr=float(rep_means.std(ddof=1) / sqrt(replicas)),
        tails=tails,
        tail_stderr=tail_se,
        replicas=replicas,
        samples=int(R.size),
        effective_samples=float(sum(_ess(row) for row in R)),
        acceptance=float(np.mean(np.concatenate(acceptance))),
        self_test_failures=sum(not r.self_test_passed for r in reals),
        replica_means=[float(v) for v in rep_means],
    )


@dataclass
class TrendResult:
    slope: float
    intercept: float
    all_zero: bool
    partial_zero: bool
    eps: float
    reports: list[OverlapReport]

    @property
    def tails(self) -> list[float]:
        return [r.tails[self.eps] for r in self.reports]


def fit_log_tail(N_list, tails) -> tuple[float, float, bool, bool]:
    """Least-squares slope of log(tail) against N over the positive tails."""
    N_arr, tail_arr = np.asarray(N_list, float), np.asarray(tails, float)
    pos = tail_arr > 0.0
    if pos.sum() < 2:
        return float("-inf"), float("nan"), not pos.any(), bool(pos.any())
    slope, intercept = np.polyfit(N_arr[pos], np.log(tail_arr[pos]), 1)
    return float(slope), float(intercept), False, bool((~pos).any())


def concentration_trend(
    spec: MixtureSpec,
    t: float,
    N_list,
    eps: float,
    u_star: float,
    replicas: int,
    sweeps: int,
    seed: int,
    settings: ChainSettings | None = None,
) -> TrendResult:
    N_list = list(N_list)
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigurationError("N_list must be strictly ascending with at least three sizes")
    eps_set = tuple(sorted(set(DEFAULT_EPS) | {float(eps)}))
    reports = [
        overlap_experiment(spec, N, t, replicas, sweeps, seed, u_star=u_star, eps=eps_set, settings=settings)
        for N in N_list
    ]
    slope, intercept, all_zero, partial = fit_log_tail(N_list, [r.tails[float(eps)] for r in reports])
    if all_zero:
        log.warning("all tail estimates are zero at eps=%g; slope set to -inf", eps)
    return TrendResult(slope, intercept, all_zero, partial, float(eps), reports)


@dataclass
class TailRow:
    s: float
    exceedance: float
    bound: float
    binomial_sigma: float

    @property
    def respected(self) -> bool:
        return bool(self.exceedance <= self.bound + 3.0 * self.binomial_sigma)


def _features(Z: np.ndarray, p: int) -> np.ndarray:
    """Rows z^{(x) 2p}, flattened."""
    out = Z
    for _ in range(2 * p - 1):
        out = (out[:, :, None] * Z[:, None, :]).reshape(Z.shape[0], -1)
    return out


def logz_concentration_check(
    spec: MixtureSpec,
    N: int,
    M: int,
    draws: int,
    seed: int,
    multipliers=(0.5, 1.0, 2.0),
    a_scale: float = 1.0,
    batch: int = 250,
    max_entries: int = DEFAULT_MAX_ENTRIES,
) -> list[TailRow]:
    """Empirical tails of X = log sum_i exp(g(z_i) + h sum z_i) over M fixed sphere points."""
    if M < 1 or draws < 2:
        raise ConfigurationError("need M >= 1 and draws >= 2")
    rng = np.random.default_rng(_seed_sequence((seed, 0)))
    Z = np.stack([sphere_point(rng, N) for _ in range(M)])
    field_term = spec.h * Z.sum(axis=1)
    variance = N * spec.xi(1.0)
    a = a_scale * variance
    active = [(p, c) for p, c in sorted(spec.terms) if c != 0.0]
    for p, _ in active:
        if N ** (2 * p) > max_entries:
            raise ConfigurationError(f"term p={p} at N={N} exceeds the tensor budget")
    if not active or a == 0.0:
        return [TailRow(s=0.0, exceedance=0.0, bound=0.0, binomial_sigma=0.0) for _ in multipliers]
    feats = [(_features(Z, p), sqrt(c) * N ** (-(2 * p - 1) / 2)) for p, c in active]
    draw_rng = np.random.default_rng(_seed_sequence((seed, 1)))
    values = []
    for start in range(0, draws, batch):
        size = min(batch, draws - start)
        g = np.zeros((size, M))
        for F, scale in feats:
            coeffs = draw_rng.standard_normal((size, F.shape[1]))
            g += scale * coeffs @ F.T
        values.append(logsumexp(g + field_term, axis=1))
    X = np.concatenate(values)
    centred = np.abs(X - X.mean())
    rows = []
    for mult in multipliers:
        s = mult * sqrt(variance)
        bound = min(1.0, 2.0 * float(np.exp(-(s * s) / (4.0 * a))))
        exceed = float(np.mean(centred >= s))
        rows.append(TailRow(s=s, exceedance=exceed, bound=bound, binomial_sigma=sqrt(bound * (1.0 - bound) / draws)))
    return rows
