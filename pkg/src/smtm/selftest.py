"""Built-in end-to-end checks, runnable as ``smtm selftest``.

Each check exercises one documented guarantee at full size, so the whole
suite is slow (tens of minutes on one core) but a pass is meaningful.
``run_all`` prints one line per check and returns the results; the test
suite asserts on them individually.
"""

from __future__ import annotations

import json
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from .diagnostics import ChainTrace, ks_distance, reversibility_stat
from .geometry import (
    SpherePoint,
    StereoChart,
    forward_batch,
    inverse_batch,
    propose_tangent_batch,
)
from .kernels import KernelConfig, _log_sphere_rows, ideal_step, smtm_step, step
from .presets import PRESETS
from .rng import chain_rng
from .runner import run_preset
from .scaling import (
    ScalingParams,
    acceptance_curve,
    ell_to_h,
    mc_limit_esjd,
    n1_total_acceptance,
    optimize_ell,
    phi1,
    phi2,
    phi_log_parts,
)
from .targets import Gaussian, PolyTail, ProductIID, StudentT


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check_roundtrip() -> tuple[bool, str]:
    """Projection and its inverse invert each other across 12 decades."""
    rng = chain_rng(2026, 0)
    worst = 0.0
    for d in (1, 2, 10, 100):
        chart = StereoChart(d=d, radius=float(np.sqrt(d)))
        m = 2500
        dirs = rng.standard_normal((m, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = 10.0 ** rng.uniform(-6.0, 6.0, size=m)
        x = dirs * radii[:, None]
        coords, gaps = inverse_batch(chart, x)
        back = forward_batch(chart, coords, gaps)
        rel = np.linalg.norm(back - x, axis=1) / radii
        worst = max(worst, float(rel.max()))
        # converse direction: sphere -> plane -> sphere
        coords2, gaps2 = inverse_batch(chart, back)
        drift = np.linalg.norm(coords2 - coords, axis=1) + np.abs(gaps2 - gaps) / gaps
        worst = max(worst, float(drift.max()))
    ok = worst <= 1e-10
    return ok, f"max relative error {worst:.2e} over 4 x 2500 points (tol 1e-10)"


def _check_n1_coupling() -> tuple[bool, str]:
    """One candidate reduces the multi-try kernels to their plain versions."""
    d = 3
    target = ProductIID(Gaussian(0.0, 1.0), d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))
    pairs = (
        ("smtm", "srwm", 10000, {"step": 0.4, "chart": chart}),
        ("mtm", "rwm", 2000, {"step": 0.5}),
    )
    for weight in ("gb", "lb"):
        for multi, single, n_steps, kw in pairs:
            cfg_m = KernelConfig(kernel=multi, n_candidates=1, weight=weight, **kw)
            cfg_s = KernelConfig(kernel=single, weight=weight, **kw)
            rng_m = chain_rng(31, 0)
            rng_s = chain_rng(31, 0)
            x = np.full(d, 1.5)
            y = x.copy()
            for t in range(n_steps):
                out_m = step(target, x, cfg_m, rng_m)
                out_s = step(target, y, cfg_s, rng_s)
                same = (
                    np.array_equal(out_m.next, out_s.next)
                    and out_m.accepted == out_s.accepted
                    and out_m.alpha == out_s.alpha
                )
                if not same:
                    return False, f"{multi} vs {single} ({weight}) diverged at step {t}"
                x, y = out_m.next, out_s.next
    return True, "smtm==srwm (1e4 steps) and mtm==rwm (2e3), bitwise, gb and lb"


def _check_phi_identities() -> tuple[bool, str]:
    """Closed forms, range bounds, and Lipschitz stability of phi1/phi2."""
    rng = chain_rng(47, 0)
    x1 = 8.0 * rng.standard_normal((100000, 1))
    y1 = np.empty((100000, 0))
    want = np.exp(np.minimum(0.0, x1[:, 0]))
    for w in ("gb", "lb"):
        if not np.array_equal(phi1(1, x1, y1, w), want):
            return False, f"n=1 phi1 closed form violated ({w})"
        if not np.array_equal(phi2(1, x1, y1, w), want):
            return False, f"n=1 phi2 closed form violated ({w})"
    for n in (1, 2, 3, 5, 17):
        xz = np.zeros((4, n))
        yz = np.zeros((4, n - 1))
        for w in ("gb", "lb"):
            p1 = phi1(1, xz, yz, w)
            p2 = phi2(1, xz, yz, w)
            if not (np.all(p1 == 1.0) and np.allclose(p2, 1.0 / n, rtol=1e-12, atol=0.0)):
                return False, f"all-zero values wrong at n={n} ({w})"
    # range bounds over 1e6 random rows, mixing mild and heavy tails
    n = 4
    for chunk in range(4):
        m = 250000
        xs = 30.0 * rng.standard_normal((m, n))
        ys = 30.0 * rng.standard_cauchy((m, n - 1))
        for w in ("gb", "lb"):
            j = 1 + chunk % n
            p1 = phi1(j, xs, ys, w)
            p2 = phi2(j, xs, ys, w)
            if not (np.all(p1 >= 0.0) and np.all(p1 <= 1.0)):
                return False, f"phi1 out of [0,1] ({w}, j={j})"
            if not (np.all(p2 >= 0.0) and np.all(p2 <= p1)):
                return False, f"phi2 outside [0, phi1] ({w}, j={j})"
    # empirical Lipschitz constant stays bounded and stable as delta halves
    m, n = 20000, 3
    bx = rng.standard_normal((m, n))
    by = rng.standard_normal((m, n - 1))
    ux = rng.standard_normal((m, n))
    uy = rng.standard_normal((m, n - 1))
    scale = np.maximum(
        np.abs(ux).max(axis=1), np.abs(uy).max(axis=1) if n > 1 else 0.0
    )
    ux /= scale[:, None]
    uy /= scale[:, None]
    sups = {"gb": [], "lb": []}
    for delta in (0.1, 0.05, 0.025, 0.0125):
        for w in ("gb", "lb"):
            base = phi1(1, bx, by, w)
            moved = phi1(1, bx + delta * ux, by + delta * uy, w)
            sups[w].append(float(np.max(np.abs(moved - base))) / delta)
    for w in ("gb", "lb"):
        s = np.asarray(sups[w])
        if not (np.all(s <= 6.0) and s.max() / s.min() <= 1.5):
            return False, f"Lipschitz ratios unstable ({w}): {np.round(s, 3).tolist()}"
    g = ", ".join(f"{v:.3f}" for v in sups["gb"])
    return True, f"closed forms and bounds hold; gb Lipschitz ratios [{g}] stable"


def _check_optimal_acceptance() -> tuple[bool, str]:
    """Grid-optimal step for n=1 gb lands near the classic 0.234 rate."""
    grid = np.linspace(0.2, 6.0, 50)
    res = optimize_ell(
        grid, 1_000_000, chain_rng(61, 0),
        lam=1.0, n_candidates=1, fisher_i=4.0 / 3.0, weight="gb",
    )
    ok = 0.20 <= res.acceptance <= 0.27
    return ok, (
        f"ell*={res.ell:.3f}, acceptance at optimum {res.acceptance:.4f}"
        f" +/- {res.acceptance_stderr:.4f} (want in [0.20, 0.27])"
    )


def _check_candidate_curves() -> tuple[bool, str]:
    """Total acceptance is eventually monotone in the candidate count.

    gb rises once from n=1, then decreases back to the n=1 level; lb
    increases toward an asymptote near 1.  Consecutive differences share
    random numbers, so their standard errors are tight.
    """
    ns = (1, 2, 4, 8, 16, 64)
    samples = 400000
    p_gb = ScalingParams(ell=1.2, lam=1.0, n_candidates=1, fisher_i=4.0 / 3.0, weight="gb")
    cg = acceptance_curve(p_gb, ns, samples, chain_rng(71, 0))
    v, se = cg.estimates, cg.stderrs
    dv, dse = cg.diff_estimates, cg.diff_stderrs
    gb_dec = bool(np.all(dv[1:] <= 3.0 * dse[1:]))
    gb_floor = bool(np.all(v >= v[0] - 3.0 * np.hypot(se, se[0])))
    gb_near = bool(abs(v[-1] - v[0]) <= 0.02)
    anchor = n1_total_acceptance(p_gb)
    gb_anchor = bool(abs(v[0] - anchor) <= 4.0 * se[0])
    p_lb = ScalingParams(ell=1.2, lam=1.0, n_candidates=1, fisher_i=4.0 / 3.0, weight="lb")
    cl = acceptance_curve(p_lb, ns, samples, chain_rng(72, 0))
    lb_inc = bool(np.all(cl.diff_estimates >= -3.0 * cl.diff_stderrs))
    lb_above = bool(cl.estimates[-1] > cl.estimates[0])
    popt, _ = curve_fit(
        lambda nn, a, b, c: a - b * np.power(nn, -c),
        np.asarray(ns, dtype=float), cl.estimates,
        p0=(1.0, 0.3, 0.5), maxfev=10000,
    )
    lb_tail = bool(cl.estimates[-1] >= 0.9 * popt[0])
    ok = gb_dec and gb_floor and gb_near and gb_anchor and lb_inc and lb_above and lb_tail
    return ok, (
        f"gb v(1)={v[0]:.4f} (closed form {anchor:.4f}), v(64)={v[-1]:.4f},"
        f" |v64-v1|={abs(v[-1] - v[0]):.4f} (tol 0.02), decreasing from n=2: {gb_dec};"
        f" lb v(64)={cl.estimates[-1]:.4f} vs 0.9*asymptote"
        f" {0.9 * popt[0]:.4f}, non-decreasing: {lb_inc}"
    )


def _check_limit_matches_kernel() -> tuple[bool, str]:
    """Finite-d kernel statistics match the dimension-limit functionals.

    d=200 product Gaussian with mean 0.5 and variance 0.75, n=3, gb.  One
    fixed candidate index plays the role of the limit's tagged candidate:
    iid stationary trials estimate E[alpha_1] and n * E[|jump|^2 alpha_1],
    compared against the Monte Carlo limit values.
    """
    d, n, ell = 200, 3, 1.5
    target = ProductIID(Gaussian(0.5, 0.75), d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))  # E[X^2] = 1
    h = ell_to_h(d, 1.0, ell)
    params = ScalingParams(ell=ell, lam=1.0, n_candidates=n, fisher_i=4.0 / 3.0, weight="gb", d=d)
    lim_esjd, lim_se = mc_limit_esjd(params, 400000, chain_rng(100, 0))
    lim_alpha = lim_esjd / (n * ell * ell)

    rng = chain_rng(100, 1)
    trials = 20000
    alpha_sum = 0.0
    stat_sum = 0.0
    for _ in range(trials):
        x = target.sample(rng)
        coords0, gaps0 = inverse_batch(chart, x[None, :])
        z = SpherePoint(coords0[0], float(gaps0[0]))
        logpi_z = float(_log_sphere_rows(chart, target, x[None, :], gaps0, 8)[0])
        raw = rng.standard_normal((n, d + 1))
        coords, gaps = propose_tangent_batch(z, h, raw)
        xhat = forward_batch(chart, coords, gaps)
        logpis_c = _log_sphere_rows(chart, target, xhat, gaps, 8)
        r = logpis_c - logpi_z
        zj = SpherePoint(coords[0], float(gaps[0]))
        raw_r = rng.standard_normal((n - 1, d + 1))
        ref_coords, ref_gaps = propose_tangent_batch(zj, h, raw_r)
        xstar = forward_batch(chart, ref_coords, ref_gaps)
        s = _log_sphere_rows(chart, target, xstar, ref_gaps, 8) - logpis_c[0]
        _, log_num, log_den = phi_log_parts(1, r, s, "gb")
        a1 = float(np.exp(min(0.0, float(log_num - log_den))))
        jump = xhat[0] - x
        alpha_sum += a1
        stat_sum += n * float(jump @ jump) * a1
    emp_alpha = alpha_sum / trials
    emp_esjd = stat_sum / trials
    alpha_ok = abs(emp_alpha - lim_alpha) <= 0.05
    rel = emp_esjd / lim_esjd - 1.0
    esjd_ok = abs(rel) <= 0.10
    return alpha_ok and esjd_ok, (
        f"alpha {emp_alpha:.4f} vs limit {lim_alpha:.4f} (tol 0.05);"
        f" jump statistic {emp_esjd:.4f} vs limit {lim_esjd:.4f}"
        f" ({rel:+.2%}, tol 10%)"
    )


def _check_heavy_tail_equilibrium() -> tuple[bool, str]:
    """Long run on a product Student-t target stays in its stationary law."""
    d = 10
    comp = StudentT(11.0, 0.0, 1.0)
    target = ProductIID(comp, d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d * 11.0 / 9.0)))  # E[X^2] = 11/9
    cfg = KernelConfig(kernel="smtm", step=1.0, n_candidates=5, weight="gb", chart=chart)
    rng = chain_rng(83, 0)
    x = target.sample(rng)
    burn = 20000
    trace = ChainTrace(d, retention="full", burn_in=burn, thinning=1)
    for _ in range(220000):
        res = smtm_step(target, x, cfg, rng)
        trace.append(res)
        x = res.next
    ks = ks_distance(trace.first_coords(), comp.cdf)
    m1, s1 = reversibility_stat(trace, lambda a, b: a[:, 0] * b[:, 0] ** 2)
    m2, s2 = reversibility_stat(trace, lambda a, b: (a[:, 0] < b[:, 0]).astype(float))
    z1, z2 = m1 / s1, m2 / s2
    ok = ks < 0.02 and abs(z1) <= 4.0 and abs(z2) <= 4.0
    return ok, (
        f"KS {ks:.4f} on 2e5 draws (tol 0.02);"
        f" reversibility z-scores {z1:+.2f}, {z2:+.2f} (|z| <= 4)"
    )


def _check_multi_candidate_escape() -> tuple[bool, str]:
    """Many candidates must not trap the sphere kernel in the tail.

    From |x| = 10 sqrt(10) toward a standard Gaussian core, gb-smtm with
    100 candidates should cross |x| <= 5 within 1000 iterations on almost
    every seed, while flat gb-mtm with 100 candidates stalls.
    """
    d = 10
    target = ProductIID(Gaussian(0.0, 1.0), d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))
    x0 = np.full(d, 10.0)

    def crossing(kind: str, h: float, cap: int, seed: int) -> int | None:
        cfg = KernelConfig(
            kernel=kind, step=h, n_candidates=100, weight="gb",
            chart=chart if kind == "smtm" else None,
        )
        rng = chain_rng(seed, 0)
        x = x0.copy()
        for t in range(cap):
            x = step(target, x, cfg, rng).next
            if float(x @ x) <= 25.0:
                return t + 1
        return None

    sm_cap, mt_cap = 1000, 2000
    sm = [crossing("smtm", 0.35, sm_cap, s) for s in range(1, 11)]
    mt = [crossing("mtm", 0.75, mt_cap, s) for s in range(1, 11)]
    hits = sum(c is not None for c in sm)
    sm_med = float(np.median([sm_cap if c is None else c for c in sm]))
    mt_med = float(np.median([mt_cap if c is None else c for c in mt]))
    ok = hits >= 9 and mt_med >= 10.0 * sm_med
    return ok, (
        f"smtm crossed on {hits}/10 seeds (median {sm_med:.0f});"
        f" mtm median {mt_med:.0f}{'+' if any(c is None for c in mt) else ''}"
        f" ({mt_med / sm_med:.0f}x, want >= 10x)"
    )


def _check_far_tail_floor() -> tuple[bool, str]:
    """Acceptance stays bounded away from zero a million units out."""
    d = 10
    target = PolyTail(21.0, d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))
    cfg = KernelConfig(
        kernel="ideal", step=0.5 / np.sqrt(d), weight="gb", chart=chart, ideal_inner_m=64
    )
    x0 = np.full(d, 1e6 / np.sqrt(d))
    alphas = np.empty(1000)
    for trial in range(alphas.size):
        rng = chain_rng(9, trial)
        alphas[trial] = ideal_step(target, x0, cfg, rng).alpha
    mean = float(alphas.mean())
    se = float(alphas.std() / np.sqrt(alphas.size))
    ok = mean >= 0.05
    return ok, f"mean acceptance {mean:.4f} +/- {se:.4f} at |x| = 1e6 (floor 0.05)"


def _check_preset_determinism() -> tuple[bool, str]:
    """Every preset reruns byte-identically and fits the per-run budget."""
    budget = 300.0
    worst = 0.0
    for name in PRESETS:
        manifests = []
        with tempfile.TemporaryDirectory() as tmp:
            for rep in ("a", "b"):
                t0 = time.perf_counter()
                man = run_preset(name, output_dir=Path(tmp) / rep)
                elapsed = time.perf_counter() - t0
                worst = max(worst, elapsed)
                if elapsed > budget:
                    return False, f"{name} took {elapsed:.0f}s (budget {budget:.0f}s)"
                manifests.append(man)
            if json.dumps(manifests[0], sort_keys=True) != json.dumps(manifests[1], sort_keys=True):
                return False, f"{name} rerun manifests differ"
            for rel in manifests[0]["outputs"]:
                pa = Path(tmp) / "a" / rel
                pb = Path(tmp) / "b" / rel
                if pa.read_bytes() != pb.read_bytes():
                    return False, f"{name} rerun differs in {rel}"
    return True, (
        f"{len(PRESETS)} presets x 2 runs byte-identical;"
        f" slowest single run {worst:.0f}s (budget {budget:.0f}s)"
    )


CHECKS: tuple[tuple[str, object], ...] = (
    ("geometry-roundtrip", _check_roundtrip),
    ("single-candidate-coupling", _check_n1_coupling),
    ("weight-function-identities", _check_phi_identities),
    ("optimal-acceptance-rate", _check_optimal_acceptance),
    ("candidate-count-curves", _check_candidate_curves),
    ("limit-vs-kernel", _check_limit_matches_kernel),
    ("heavy-tail-equilibrium", _check_heavy_tail_equilibrium),
    ("multi-candidate-escape", _check_multi_candidate_escape),
    ("far-tail-floor", _check_far_tail_floor),
    ("preset-determinism", _check_preset_determinism),
)


def run_check(name: str) -> CheckResult:
    """Run one named check, timing it and catching its failures."""
    fn = dict(CHECKS).get(name)
    if fn is None:
        raise KeyError(f"unknown check {name!r}")
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failure, not an abort
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def run_all(only: str | None = None) -> list[CheckResult]:
    """Run every check (or those whose name contains `only`); print a line each."""
    results = []
    for name, _ in CHECKS:
        if only and only not in name:
            continue
        res = run_check(name)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name} ({res.seconds:.1f}s): {res.detail}", flush=True)
    return results
