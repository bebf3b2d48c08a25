"""Command-line front end.

    python -m spherical_chaos {solve,chaos,oracle,simulate} --config run.json [--out DIR] [--seed N] [--set key=value ...]

Precedence, lowest first: built-in defaults, the JSON config file, ``--set``
overrides (dotted keys, JSON values), then ``--seed`` and ``--out``.  Without
an output directory the run goes to ``$SPHERICAL_CHAOS_OUT/<subcommand>`` or
``runs/<subcommand>``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .chaos import chaos_curve, solve_u_star
from .cs_functional import OptimizerSettings, optimize_cs
from .errors import AdmissibilityError, ConfigurationError, NumericalFailure, PreconditionError
from .guerra_oracle import (
    RSBSchedule,
    assemble_B,
    closed_form_J,
    gaussian_exp_identity,
    random_schedule,
    recursive_J,
    schedule_from,
    tau_chi,
    tau_limit,
)
from .mixture import MixtureSpec, validate
from .order_param import StepOrderParameter, support_min
from .simulator import DEFAULT_MAX_ENTRIES, BIN_EDGES, ChainSettings, fit_log_tail, overlap_experiment

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ORACLE_TOL = 1e-5
OUT_ENV = "SPHERICAL_CHAOS_OUT"
COMMANDS = ("solve", "chaos", "oracle", "simulate")


@dataclass
class ModelConfig:
    terms: list = field(default_factory=list)
    h: float = 0.0


@dataclass
class ChaosConfig:
    u_step: float = 0.05
    exclusion: float = 0.05


@dataclass
class OracleConfig:
    cases: int = 100
    k_max: int = 2
    tau_N: list = field(default_factory=lambda: [100, 1000, 10000])
    tau_b: float = 2.0
    terms: list = field(default_factory=lambda: [[1, 1.0]])


@dataclass
class SimulateConfig:
    N_list: list = field(default_factory=lambda: [8, 16, 24, 32])
    replicas: int = 50
    sweeps: int = 1000
    eps: list = field(default_factory=lambda: [0.1, 0.2, 0.3])
    u_star: float | None = None
    max_entries: int = DEFAULT_MAX_ENTRIES


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    t: float = 0.5
    seed: int = 0
    out: str | None = None
    optimizer: dict = field(default_factory=dict)
    chaos: ChaosConfig = field(default_factory=ChaosConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)

    _blocks = {"model": ModelConfig, "chaos": ChaosConfig, "oracle": OracleConfig, "simulate": SimulateConfig}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            block = cls._blocks.get(key)
            if block is None:
                kwargs[key] = value
                continue
            if not isinstance(value, dict):
                raise ConfigurationError(f"'{key}' must be an object")
            names = {f.name for f in fields(block)}
            extra = set(value) - names
            if extra:
                raise ConfigurationError(f"unknown keys in '{key}': {sorted(extra)}")
            kwargs[key] = block(**value)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def spec(self) -> MixtureSpec:
        return MixtureSpec(terms=tuple(tuple(t) for t in self.model.terms), h=self.model.h)

    def optimizer_settings(self) -> OptimizerSettings:
        return OptimizerSettings(**{"seed": self.seed, **self.optimizer})


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate_config(cfg: RunConfig, command: str) -> None:
    """Raise ConfigurationError before anything touches the disk."""
    problems = []
    terms = cfg.model.terms
    if not isinstance(terms, list) or not all(
        isinstance(t, (list, tuple)) and len(t) == 2 and _is_int(t[0]) and _is_number(t[1]) for t in terms
    ):
        problems.append("model.terms must be a list of [p, beta_sq] pairs")
    elif not _is_number(cfg.model.h):
        problems.append("model.h must be a finite number")
    else:
        problems += validate(cfg.spec).problems
    if not _is_number(cfg.t) or not 0.0 <= cfg.t <= 1.0:
        problems.append("t must be a number in [0, 1]")
    if not _is_int(cfg.seed) or cfg.seed < 0:
        problems.append("seed must be a non-negative integer")
    if not isinstance(cfg.optimizer, dict):
        problems.append("optimizer must be an object")
    else:
        try:
            cfg.optimizer_settings()
        except TypeError as err:
            problems.append(f"optimizer: {err}")
    if command == "chaos":
        if _is_number(cfg.t) and not 0.0 < cfg.t < 1.0:
            problems.append("chaos needs 0 < t < 1")
        if not _is_number(cfg.chaos.u_step) or not 0.0 < cfg.chaos.u_step <= 1.0:
            problems.append("chaos.u_step must lie in (0, 1]")
        if not _is_number(cfg.chaos.exclusion) or cfg.chaos.exclusion < 0:
            problems.append("chaos.exclusion must be a non-negative number")
    if command == "oracle":
        o = cfg.oracle
        if not _is_int(o.cases) or o.cases < 1:
            problems.append("oracle.cases must be a positive integer")
        if not _is_int(o.k_max) or not 0 <= o.k_max <= 2:
            problems.append("oracle.k_max must be 0, 1 or 2")
        if not isinstance(o.tau_N, list) or not o.tau_N or not all(_is_int(n) and n >= 1 for n in o.tau_N):
            problems.append("oracle.tau_N must be a list of positive integers")
        if not _is_number(o.tau_b) or o.tau_b <= 1.0:
            problems.append("oracle.tau_b must exceed 1")
        try:
            bad_terms = validate(MixtureSpec(tuple(tuple(t) for t in o.terms))).problems
        except (TypeError, ValueError) as err:
            bad_terms = [str(err)]
        if bad_terms:
            problems.append("oracle.terms must be a valid mixture: " + "; ".join(bad_terms))
    if command == "simulate":
        s = cfg.simulate
        if _is_number(cfg.t) and cfg.t == 0.0:
            problems.append("simulate needs 0 < t <= 1")
        if not isinstance(s.N_list, list) or not all(_is_int(n) and n >= 2 for n in s.N_list):
            problems.append("simulate.N_list must be a list of integers >= 2")
        elif len(s.N_list) < 3 or any(b <= a for a, b in zip(s.N_list, s.N_list[1:])):
            problems.append("simulate.N_list must be strictly ascending with at least three sizes")
        elif not problems:
            for p, c in cfg.spec.terms:
                if c != 0.0 and max(s.N_list) ** (2 * p) > s.max_entries:
                    problems.append(f"term p={p} at N={max(s.N_list)} exceeds the tensor budget {s.max_entries}")
        if not _is_int(s.replicas) or s.replicas < 2:
            problems.append("simulate.replicas must be an integer >= 2")
        if not _is_int(s.sweeps) or s.sweeps < 10:
            problems.append("simulate.sweeps must be an integer >= 10")
        if not isinstance(s.eps, list) or not s.eps or not all(_is_number(e) and e > 0 for e in s.eps):
            problems.append("simulate.eps must be a list of positive numbers")
        if s.u_star is not None and (not _is_number(s.u_star) or abs(s.u_star) > 1):
            problems.append("simulate.u_star must be null or a number in [-1, 1]")
    if problems:
        raise ConfigurationError("; ".join(problems))


def _set_dotted(data: dict, key: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set '{key}': '{part}' is not an object")
    node[parts[-1]] = value


def load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigurationError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
    data = copy.deepcopy(data)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got '{item}'")
        key, raw = item.split("=", 1)
        _set_dotted(data, key.strip(), raw)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    try:
        return RunConfig.from_dict(data)
    except TypeError as err:
        raise ConfigurationError(str(err)) from err


def output_dir(cfg: RunConfig, command: str) -> Path:
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get(OUT_ENV, "runs")) / command


def _num(v) -> str:
    return format(float(v), ".17g")


def _csv(header: str, rows) -> str:
    lines = [header] + [",".join(_num(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _manifest(cfg: RunConfig, command: str, files) -> dict:
    return {
        "command": command,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        "package": "spherical_chaos",
        "seed": cfg.seed,
        "version": __version__,
    }


def cmd_solve(cfg: RunConfig) -> tuple[dict[str, str], int]:
    opt = optimize_cs(cfg.spec, cfg.optimizer_settings())
    grid = np.linspace(0.0, 1.0, 200)
    files = {
        "cs_optimum.json": _json(opt.to_dict()),
        "order_param.csv": _csv("q,x", zip(grid, opt.x_star(grid))),
    }
    return files, EXIT_OK


def cmd_chaos(cfg: RunConfig) -> tuple[dict[str, str], int]:
    step = cfg.chaos.u_step
    n = int(round(2.0 / step))
    grid = np.round(np.linspace(-1.0, 1.0, n + 1), 12)
    opt = optimize_cs(cfg.spec, cfg.optimizer_settings())
    curve = chaos_curve(cfg.spec, cfg.t, grid, optimum=opt)
    summary = {
        "t": cfg.t,
        "u_star": curve.u_star,
        "u_x": curve.u_x,
        "two_p": curve.two_p,
        "b_star": opt.b_star,
        "min_gap_off_u_star": curve.min_gap_off(curve.u_star, cfg.chaos.exclusion),
        "exclusion": cfg.chaos.exclusion,
        "gap_at_u_star": curve.gaps[curve.grid.index(curve.u_star)],
        "min_gap": min(curve.gaps),
    }
    files = {
        "chaos_curve.csv": _csv("u,gap,lambda_star", zip(curve.grid, curve.gaps, curve.lambda_star)),
        "chaos_summary.json": _json(summary),
    }
    return files, EXIT_OK


def cmd_oracle(cfg: RunConfig) -> tuple[dict[str, str], int]:
    o = cfg.oracle
    spec = MixtureSpec(tuple(tuple(t) for t in o.terms), h=cfg.model.h)
    rng = np.random.default_rng(cfg.seed)
    cases = []
    for i in range(o.cases):
        sched, b, lam = random_schedule(rng, spec, o.k_max)
        errs = []
        for branch in (1, 2):
            errs.append(abs(recursive_J(sched, spec, b, lam, branch) - closed_form_J(sched, spec, b, lam, branch)))
        cases.append(
            {
                "case": i,
                "k": sched.k,
                "tau": sched.tau,
                "t": sched.t,
                "eta": sched.eta,
                "b": b,
                "lambda": lam,
                "error_branch1": errs[0],
                "error_branch2": errs[1],
            }
        )
    # fixed examples: single-level collapse, a k=1 comparison, and the sign-flip swap
    b = 4.0
    single = RSBSchedule(m=(0.0,), q=(0.0, 1.0), tau=0, t=0.5)
    collapse = abs(recursive_J(single, MixtureSpec(spec.terms), b, 0.0, 1) - spec.xi(1.0, 1) / (2 * b))
    k1 = schedule_from(StepOrderParameter((0.0, 0.4), (0.0, 0.6)), 0.4, 0.5)
    k1_spec = MixtureSpec(((1, 1.0),))
    k1_err = abs(recursive_J(k1, k1_spec, b, 0.3, 1) - closed_form_J(k1, k1_spec, b, 0.3, 1))
    flat = schedule_from(StepOrderParameter((0.0, 0.4), (0.0, 0.6)), 0.0, 0.5)
    swap = abs(recursive_J(flat, k1_spec, b, 0.3, 1) - recursive_J(flat, k1_spec, b, -0.3, 2))
    examples = {"single_level_collapse": collapse, "k1_closed_form": k1_err, "sign_flip_swap": swap}
    limit = tau_limit(o.tau_b)
    tau_rows = [{"N": n, "tau": tau_chi(n, o.tau_b), "error": abs(tau_chi(n, o.tau_b) - limit)} for n in o.tau_N]
    gauss = abs(gaussian_exp_identity(1e-9, 1.5, 0.8, 0.3) - gaussian_exp_identity(0.0, 1.5, 0.8, 0.3))
    worst = float(max([max(c["error_branch1"], c["error_branch2"]) for c in cases] + list(examples.values())))
    errors = [r["error"] for r in tau_rows]
    report = {
        "cases": cases,
        "examples": examples,
        "max_error": worst,
        "tolerance": ORACLE_TOL,
        "passed": bool(worst <= ORACLE_TOL),
        "tau_chi": {"b": o.tau_b, "limit": limit, "rows": tau_rows, "monotone": bool(all(b < a for a, b in zip(errors, errors[1:])))},
        "gaussian_identity_continuity": gauss,
        "assembly_check_lambda0": _assembly_spot_check(spec),
    }
    return {"oracle_report.json": _json(report)}, EXIT_OK if worst <= ORACLE_TOL else EXIT_NUMERIC


def _assembly_spot_check(spec: MixtureSpec) -> float:
    from .chaos import ChaosPoint, coupled_value
    from .order_param import weighted_integral

    x = StepOrderParameter((0.0, 0.3), (0.0, 0.7))
    b, t, lam, u = 4.0, 0.5, 0.2, 0.3
    sched = schedule_from(x, u, t)
    lhs = assemble_B(sched, spec, b, lam) - lam * u + b - 1.0 - np.log(b) - weighted_integral(x, spec)
    return abs(lhs - coupled_value(spec, x, ChaosPoint(t, u, lam, b)))


def _simulation_center(cfg: RunConfig) -> float:
    s = cfg.simulate
    if s.u_star is not None:
        return float(s.u_star)
    spec = cfg.spec
    if spec.h == 0.0:
        return 0.0
    opt = optimize_cs(spec, cfg.optimizer_settings())
    if cfg.t == 1.0:
        # without decoupling the overlap sits at the top of the support
        return 1.0 if spec.is_null else support_min(opt.x_star)
    return solve_u_star(spec, opt.x_star, opt.b_star, cfg.t)


def cmd_simulate(cfg: RunConfig) -> tuple[dict[str, str], int]:
    s = cfg.simulate
    spec = cfg.spec
    center = _simulation_center(cfg)
    eps = tuple(float(e) for e in s.eps)
    settings = ChainSettings(sweeps=s.sweeps)
    files, rows, reports = {}, [], []
    centers = 0.5 * (BIN_EDGES[:-1] + BIN_EDGES[1:])
    for N in s.N_list:
        rep = overlap_experiment(
            spec, N, cfg.t, s.replicas, s.sweeps, cfg.seed, u_star=center, eps=eps,
            settings=settings, max_entries=s.max_entries,
        )
        reports.append(rep)
        files[f"overlap_N{N}.csv"] = _csv("bin_center,mass", zip(centers, rep.histogram))
        rows += [(N, e, rep.tails[e], rep.tail_stderr[e]) for e in eps]
    files["concentration.csv"] = _csv("N,eps,tail,stderr", rows)
    slopes, flags = {}, {}
    for e in eps:
        slope, intercept, all_zero, partial = fit_log_tail(s.N_list, [r.tails[e] for r in reports])
        slopes[str(e)] = slope if np.isfinite(slope) else "-inf"
        flags[str(e)] = {"all_zero": all_zero, "partial_zero": partial}
    trend = {
        "t": cfg.t,
        "u_star": center,
        "slopes": slopes,
        "flags": flags,
        "N_list": list(s.N_list),
        "mass_within_0.2": {str(r.N): r.mass_within(0.2, center) for r in reports},
        "mean_overlap": {str(r.N): r.mean for r in reports},
        "acceptance": {str(r.N): r.acceptance for r in reports},
        "self_test_failures": {str(r.N): r.self_test_failures for r in reports},
    }
    files["trend.json"] = _json(trend)
    return files, EXIT_OK


HANDLERS = {"solve": cmd_solve, "chaos": cmd_chaos, "oracle": cmd_oracle, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherical_chaos", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output directory (overrides config 'out')")
    parser.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, JSON-parsed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def write_outputs(out: Path, cfg: RunConfig, command: str, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    payload = dict(files)
    payload["manifest.json"] = _json(_manifest(cfg, command, files))
    for name, text in sorted(payload.items()):
        (out / name).write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        validate_config(cfg, args.command)
    except ConfigurationError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        files, code = HANDLERS[args.command](cfg)
    except ConfigurationError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, AdmissibilityError, PreconditionError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    out = output_dir(cfg, args.command)
    write_outputs(out, cfg, args.command, files)
    print(f"wrote {len(files) + 1} files to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
