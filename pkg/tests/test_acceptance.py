"""The ten acceptance criteria, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from spherical_chaos.chaos import ChaosPoint, chaos_curve, coupled_value, f_eval
from spherical_chaos.cli import main
from spherical_chaos.cs_functional import cs_value, optimize_cs, optimize_level
from spherical_chaos.guerra_oracle import closed_form_J, random_schedule, recursive_J, tau_chi, tau_limit
from spherical_chaos.mixture import MixtureSpec
from spherical_chaos.simulator import concentration_trend, logz_concentration_check

TWO_SPIN = MixtureSpec(((1, 1.0),))
U_STEP = 0.05
SIM_N = [8, 16, 24, 32]
SIM_REPLICAS = 50
SIM_SWEEPS = 1000
SIM_SEED = 2024


def magnetization_oracle(h, step=1e-6):
    m = np.arange(-1 + step, 1, step)
    vals = h * m + 0.5 * np.log1p(-m * m)
    i = int(np.argmax(vals))
    return vals[i], m[i]


@pytest.mark.criterion(1, "pure-field closed form")
def test_pure_field_closed_form(record):
    value, m = magnetization_oracle(1.0)
    b_oracle = 1.0 / (1.0 - m * m)
    start = time.perf_counter()
    opt = optimize_cs(MixtureSpec((), h=1.0))
    elapsed = time.perf_counter() - start
    record(f"value={opt.value:.7f} b*={opt.b_star:.7f} oracle=({value:.7f}, {b_oracle:.7f}) {elapsed:.2f}s")
    assert abs(value - 0.377428) <= 1e-5 and abs(b_oracle - 1.618034) <= 1e-5
    assert abs(opt.value - value) <= 1e-5
    assert abs(opt.b_star - b_oracle) <= 1e-5
    assert elapsed < 1.0


@pytest.mark.criterion(2, "high-temperature 2-spin")
def test_high_temperature_two_spin(record):
    spec = MixtureSpec(((1, 0.25),))
    start = time.perf_counter()
    opt = optimize_cs(spec)
    base = optimize_level(spec, 0)[2]
    gains = [base - optimize_level(spec, k)[2] for k in (1, 2)]
    elapsed = time.perf_counter() - start
    record(f"value={opt.value:.10f} b*={opt.b_star:.8f} gains={gains[0]:.1e},{gains[1]:.1e} {elapsed:.1f}s")
    assert abs(opt.value - 0.125) <= 1e-6
    assert all(m == 1.0 for m in opt.x_star.m)
    assert abs(opt.b_star - 1.5) <= 1e-6
    assert all(g < 1e-9 for g in gains)
    assert elapsed < 10.0


def _identity_points(opt, count=20, seed=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(-opt.u_x, opt.u_x, size=count)


@pytest.mark.criterion(3, "coupling identity at zero multiplier")
def test_coupling_identity(two_spin_field_optimum, record):
    spec, opt = two_spin_field_optimum
    two_p = 2.0 * cs_value(spec, opt.x_star, opt.b_star)
    errors = [
        abs(coupled_value(spec, opt.x_star, ChaosPoint(0.5, u, 0.0, opt.b_star)) - two_p)
        for u in _identity_points(opt)
    ]
    record(f"max error {max(errors):.1e}")
    assert max(errors) <= 1e-12


@pytest.mark.criterion(4, "multiplier derivative identity")
def test_derivative_identity(two_spin_field_optimum, record):
    spec, opt = two_spin_field_optimum
    x, b, t, step = opt.x_star, opt.b_star, 0.5, 1e-6
    errors = []
    for u in _identity_points(opt):
        hi = coupled_value(spec, x, ChaosPoint(t, u, step, b))
        lo = coupled_value(spec, x, ChaosPoint(t, u, -step, b))
        errors.append(abs((hi - lo) / (2 * step) - f_eval(spec, x, b, t, u)))
    record(f"max error {max(errors):.1e}")
    assert max(errors) <= 1e-6


def _chaos_grid():
    return np.round(np.linspace(-1.0, 1.0, int(round(2.0 / U_STEP)) + 1), 12)


@pytest.mark.criterion(5, "chaos gap certificate")
def test_chaos_certificate(record):
    start = time.perf_counter()
    details = []
    for h in (0.0, 0.5):
        spec = MixtureSpec(((1, 1.0),), h=h)
        curve = chaos_curve(spec, 0.5, _chaos_grid())
        u_star = curve.u_star
        gap_at = curve.gaps[curve.grid.index(u_star)]
        off = [g for u, g in zip(curve.grid, curve.gaps) if abs(u - u_star) >= U_STEP]
        details.append(f"h={h}: u*={u_star:.6f} gap(u*)={gap_at:.1e} min off={min(off):.2e}")
        assert all(g > 0.0 for g in off)
        assert gap_at <= 1e-6
        if h == 0.0:
            assert u_star == 0.0
            gaps = dict(zip(curve.grid, curve.gaps))
            for u in _chaos_grid():
                assert gaps[u] == pytest.approx(gaps[-u if u != 0 else 0.0], abs=1e-9)
        else:
            assert 0.0 < u_star < curve.u_x
    elapsed = time.perf_counter() - start
    record("; ".join(details) + f"; {elapsed:.1f}s")
    assert elapsed < 60.0


@pytest.mark.criterion(6, "nested quadrature against closed-form recursion")
def test_guerra_oracle_suite(record):
    rng = np.random.default_rng(6)
    spec = MixtureSpec(((1, 0.9), (2, 0.4)), h=0.4)
    start = time.perf_counter()
    worst, levels = 0.0, set()
    for _ in range(100):
        sched, b, lam = random_schedule(rng, spec, k_max=2)
        levels.add(sched.k)
        for branch in (1, 2):
            err = abs(recursive_J(sched, spec, b, lam, branch) - closed_form_J(sched, spec, b, lam, branch))
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    record(f"100 cases, k in {sorted(levels)}, max error {worst:.1e}, {elapsed:.1f}s")
    assert worst <= 1e-5
    assert levels == {0, 1, 2}
    assert elapsed < 300.0


@pytest.mark.criterion(7, "chi-square tail rate")
def test_tau_limit(record):
    limit = tau_limit(2.0)
    errors = [abs(tau_chi(n, 2.0) - limit) for n in (100, 1000, 10_000)]
    record(f"limit={limit:.6f} errors={', '.join(f'{e:.2e}' for e in errors)}")
    assert abs(limit - 0.153426) < 1e-6
    assert abs(tau_chi(10_000, 2.0) - 0.153426) <= 0.01
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.criterion(8, "log-partition concentration bound")
def test_logz_concentration(record):
    start = time.perf_counter()
    rows = logz_concentration_check(TWO_SPIN, 16, 2000, 2000, seed=8)
    elapsed = time.perf_counter() - start
    record(", ".join(f"s={r.s:g}: {r.exceedance:.4f} <= {r.bound:.4f}" for r in rows) + f", {elapsed:.1f}s")
    assert [r.s for r in rows] == pytest.approx([0.5 * 4, 1.0 * 4, 2.0 * 4])
    assert all(r.respected for r in rows)
    assert elapsed < 300.0


@pytest.mark.criterion(9, "chaos by simulation")
def test_chaos_by_simulation(record):
    start = time.perf_counter()
    decoupled = concentration_trend(TWO_SPIN, 0.3, SIM_N, 0.3, 0.0, SIM_REPLICAS, SIM_SWEEPS, SIM_SEED)
    control = concentration_trend(TWO_SPIN, 1.0, SIM_N, 0.3, 0.0, SIM_REPLICAS, SIM_SWEEPS, SIM_SEED)
    elapsed = time.perf_counter() - start
    at24 = SIM_N.index(24)
    mass_t03 = decoupled.reports[at24].mass_within(0.2)
    mass_t1 = control.reports[at24].mass_within(0.2)
    record(
        f"slope t=0.3 {decoupled.slope:.4f}, t=1 {control.slope:.4f}; "
        f"mass |R|<=0.2 at N=24: {mass_t03:.3f} vs {mass_t1:.3f}; {elapsed:.0f}s"
    )
    assert not decoupled.all_zero
    assert decoupled.slope < 0.0
    assert mass_t03 > mass_t1
    assert elapsed < 1800.0


def _run_twice(tmp_path, name, args):
    outputs = []
    for rerun in ("first", "second"):
        out = tmp_path / name / rerun
        assert main(args + ["--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    return outputs


@pytest.mark.criterion(10, "byte-identical reruns")
def test_determinism(tmp_path, record):
    runs = {}
    for h in (0.0, 0.5):
        args = ["chaos", "--set", "model.terms=[[1,1.0]]", "--set", f"model.h={h}", "--set", "t=0.5", "--seed", "0"]
        runs[f"chaos h={h}"] = _run_twice(tmp_path, f"chaos_{h}", args)
    for t in (0.3, 1.0):
        args = [
            "simulate",
            "--set", "model.terms=[[1,1.0]]",
            "--set", f"t={t}",
            "--set", f"simulate.N_list={SIM_N}",
            "--set", f"simulate.replicas={SIM_REPLICAS}",
            "--set", f"simulate.sweeps={SIM_SWEEPS}",
            "--set", "simulate.eps=[0.3]",
            "--seed", str(SIM_SEED),
        ]
        runs[f"simulate t={t}"] = _run_twice(tmp_path, f"sim_{t}", args)
    files = sum(len(first) for first, _ in runs.values())
    record(f"{len(runs)} runs, {files} files compared")
    for label, (first, second) in runs.items():
        assert first.keys() == second.keys(), label
        for name in first:
            assert first[name] == second[name], f"{label}: {name} differs"
