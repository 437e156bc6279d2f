"""The ten acceptance criteria, each at its tolerance and runtime budget.

Every test records a one-line verdict in ``conftest.ACCEPTANCE``; the lines
are printed in the terminal summary.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from avgctl.analysis import (
    bracket_rank_check,
    convergence_sweep,
    det_m_errors,
    flow_uniqueness_probe,
    grad_check,
    h2_gradient_decay,
    liplog_modulus,
    mean_motion_errors,
    min_time_shoot,
    switch_check,
    switch_corpus,
    time_limit_probe,
)
from avgctl.averaging import (
    CotangentPoint,
    average_velocity,
    dual_norm,
    hamiltonian,
    optimal_profile,
    random_profile,
    theta_rank,
)
from avgctl.dynamics import JointControl
from avgctl.averaging import ControlProfile
from avgctl.two_body import null_costate

from conftest import ACCEPTANCE

SIGNCOS = ControlProfile.closed_form(lambda th: np.sign(np.cos(th))[:, None], 1, (np.pi / 2, 3 * np.pi / 2))


def record(k: int, ok: bool, detail: str, elapsed: float, budget: float):
    ok = bool(ok and elapsed < budget)
    line = f"{detail}; {elapsed:.2f}s (< {budget:g}s)"
    ACCEPTANCE[k] = (ok, line)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {line}")
    assert ok, line


def _two_body_center():
    x = np.array([1.2, 0.2, -0.1])
    A, X, Y = null_costate(x[1], x[2], 1.0)
    return CotangentPoint(x, np.array([A / x[0], X, Y]))


def test_criterion_01_det_m_identity():
    t0 = time.perf_counter()
    err = float(det_m_errors(1000, seed=0, e_max=0.95).max())
    record(1, err <= 1e-10, f"det M max rel err {err:.2e} (<= 1e-10)", time.perf_counter() - t0, 1.0)


def test_criterion_02_switch_uniqueness():
    t0 = time.perf_counter()
    hist, disagree = switch_check(switch_corpus(1000, seed=0))
    ok = max(hist) <= 1 and disagree == 0
    record(2, ok, f"zero-count histogram {dict(sorted(hist.items()))}, {disagree} disagreements",
           time.perf_counter() - t0, 30.0)


def test_criterion_03_mean_motion():
    t0 = time.perf_counter()
    err = float(mean_motion_errors(200, seed=0).max())
    record(3, err <= 1e-8, f"mean of 1/w max rel err {err:.2e} (<= 1e-8)", time.perf_counter() - t0, 5.0)


def test_criterion_04_convergence_order(rot, tb):
    t0 = time.perf_counter()
    eps = [0.1, 0.05, 0.025, 0.0125]
    r = convergence_sweep(rot, [0.0, 0.0], JointControl.from_profile(SIGNCOS, 2.0), 2.0, eps)
    x, p = np.array([1.0, 0.1, 0.05]), np.array([-1.0, 0.3, -0.2])
    k = convergence_sweep(tb, x, JointControl.from_profile(optimal_profile(tb, x, p), 1.0), 1.0, eps)
    ok = (0.85 <= r.fitted_slope <= 1.15 and r.r_squared >= 0.98 and not r.failed
          and 0.8 <= k.fitted_slope <= 1.2 and not k.failed)
    detail = (f"rotating slope {r.fitted_slope:.3f} r2 {r.r_squared:.4f}; "
              f"two-body slope {k.fitted_slope:.3f} r2 {k.r_squared:.4f}")
    record(4, ok, detail, time.perf_counter() - t0, 300.0)


def test_criterion_05_closed_forms(rot):
    t0 = time.perf_counter()
    theta = np.arange(1_000_000) * (2 * np.pi / 1_000_000)
    mean_abs_cos = float(np.mean(np.abs(np.cos(theta))))
    rng = np.random.default_rng(5)
    errs_h, errs_n = [], []
    for _ in range(100):
        x, p, v = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
        errs_h.append(abs(hamiltonian(rot, x, p) / (mean_abs_cos * np.linalg.norm(p)) - 1))
        errs_n.append(abs(dual_norm(rot, x, v) * mean_abs_cos / np.linalg.norm(v) - 1))
    eh, en = max(errs_h), max(errs_n)
    record(5, eh <= 1e-6 and en <= 1e-6, f"H rel err {eh:.2e}, N rel err {en:.2e} (<= 1e-6)",
           time.perf_counter() - t0, 10.0)


def test_criterion_06_gradient(rot, tb):
    t0 = time.perf_counter()
    er = grad_check(rot, samples=100, seed=0)
    et = grad_check(tb, samples=100, seed=0)
    record(6, er <= 1e-5 and et <= 1e-4, f"rotating {er:.2e} (<= 1e-5), two-body {et:.2e} (<= 1e-4)",
           time.perf_counter() - t0, 60.0)


def test_criterion_07_duality_chain(rot, tb):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    gap, worst_n = 0.0, 0.0
    for sys in (rot, tb):
        for _ in range(100):
            x = sys.sampler(rng) if sys.sampler is not None else rng.normal(size=sys.n)
            p = rng.normal(size=sys.n)
            h = hamiltonian(sys, x, p)
            gap = max(gap, abs(p @ average_velocity(sys, x, optimal_profile(sys, x, p)) - h))
            worst_n = max(worst_n, dual_norm(sys, x, average_velocity(sys, x, random_profile(sys.m, rng))))
    record(7, gap <= 1e-8 and worst_n <= 1 + 1e-6,
           f"support gap {gap:.2e} (<= 1e-8), max N of random profiles {worst_n:.6f} (<= 1 + 1e-6)",
           time.perf_counter() - t0, 60.0)


def test_criterion_08_min_time_limit(rot):
    t0 = time.perf_counter()
    shot = min_time_shoot(rot, [0.0, 0.0], [1.0, 0.0])
    rep = time_limit_probe(rot, [0.1, 0.05, 0.025], [0.0, 0.0], [1.0, 0.0], shot=shot)
    excess = np.asarray(rep.reach_times) - rep.T0
    c_prime = float(np.max(excess / np.asarray(rep.eps_list)))
    ok = abs(shot.T0 - np.pi / 2) <= 1e-6 and 0.7 <= rep.excess_slope <= 1.3 and np.isfinite(c_prime)
    detail = (f"T0 {shot.T0:.9f} (pi/2 +- 1e-6), reach-time excess <= {c_prime:.3f} eps, "
              f"excess slope {rep.excess_slope:.3f} ([0.7, 1.3])")
    record(8, ok, detail, time.perf_counter() - t0, 120.0)


def test_criterion_09_flow_regularity(rot, tb):
    t0 = time.perf_counter()
    decay = max(h2_gradient_decay(rot, np.zeros(2)).max(),
                h2_gradient_decay(tb, np.array([1.0, 0.1, 0.2])).max())
    center = _two_body_center()
    ll = liplog_modulus(tb, center)
    lip = np.asarray(ll.lipschitz[-3:])
    tail = np.asarray(ll.ratios[-3:])
    s_rot = flow_uniqueness_probe(rot, CotangentPoint(np.zeros(2), np.array([1.0, 0.5])), 1e-9, 1.0)
    s_tb = flow_uniqueness_probe(tb, center, 1e-9, 0.5)
    ok = (decay < 1e-2 and ll.bounded(3.0) and bool(np.all(np.diff(lip) > 0))
          and s_rot <= 1e-7 and s_tb <= 1e3 * 1e-9**0.5)
    detail = (f"H^2 grad ratio {decay:.1e} (< 1e-2); liplog tail max/min {tail.max() / tail.min():.3f} (<= 3), "
              f"Lipschitz increasing {bool(np.all(np.diff(lip) > 0))}; "
              f"spread rotating {s_rot:.1e} (<= 1e-7), two-body {s_tb:.1e} (<= 3.2e-5)")
    record(9, ok, detail, time.perf_counter() - t0, 180.0)


def test_criterion_10_rank_framework(tb):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    bad = []
    for i in range(100):
        x = tb.sampler(rng)
        theta = rng.uniform(0, 2 * np.pi)
        tr = theta_rank(tb, theta, x, j_max=2)
        rk = bracket_rank_check(tb, np.r_[theta, x], j_max=2)
        if tr != 3 or tuple(rk) != (3, 4):
            bad.append(i)
    record(10, not bad, f"theta_rank 3 and bracket ranks (3, 4) at {100 - len(bad)}/100 points",
           time.perf_counter() - t0, 60.0)
