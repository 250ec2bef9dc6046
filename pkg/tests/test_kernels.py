import math

import numpy as np
import pytest

from smtm import (
    Gaussian,
    KernelConfig,
    ProductIID,
    StereoChart,
    sp_inverse,
    step,
)
from smtm.errors import AllWeightsDegenerate, ConfigError, DimensionMismatch
from smtm.geometry import inverse_batch
from smtm.kernels import (
    eval_log_density_rows,
    ideal_step,
    mtm_step,
    select_candidate,
    smtm_step,
    srwm_step,
)
from smtm.rng import chain_rng


class ScriptedRng:
    """Replays queued draws, asserting the kernel's documented draw order."""

    def __init__(self, *blocks):
        self._queue = list(blocks)

    def _pop(self, kind, shape):
        assert self._queue, f"unexpected extra draw {kind} {shape}"
        got_kind, arr = self._queue.pop(0)
        arr = np.asarray(arr, dtype=float)
        assert got_kind == kind and arr.shape == tuple(shape), (
            f"wanted {got_kind} {arr.shape}, kernel asked for {kind} {tuple(shape)}"
        )
        return arr

    def standard_normal(self, size):
        if isinstance(size, int):
            size = (size,)
        return self._pop("normal", size)

    def gumbel(self, loc, scale, size):
        return self._pop("gumbel", (size,))

    def random(self):
        return float(self._pop("uniform", ()))

    def exhausted(self):
        return not self._queue


def _tangent_raw_for(z, plane_points, chart, h):
    """Raw tangent draws that make the proposal land on given plane points."""
    targets, _ = inverse_batch(chart, np.asarray(plane_points, dtype=float))
    a = targets @ z.coords
    assert np.all(a > 0.0), "target points must lie in the reachable hemisphere"
    v = targets - a[:, None] * z.coords[None, :]
    return v / (a[:, None] * h)


# hand value from the textbook two-try acceptance ratio: standard Gaussian,
# x=0, candidates (0.5, -0.3), selected 0.5, reference point 0.2
MTM_ALPHA_GB = 0.9284393577274613
MTM_ALPHA_LB = 0.9050070789398421

# hand value on the d=2, R=1 chart with standard Gaussian target:
# x=(0.3,-0.1), candidates (0.1,0.2),(0.1,-0.1),(-0.2,0.1), selected the
# second, references (0.5,0.3),(-0.4,-0.2)
SMTM_ALPHA_GB = 0.8013948109684392
SMTM_ALPHA_LB = 0.8481685114854042


def _mtm_script(uniform):
    return ScriptedRng(
        ("normal", [[0.5], [-0.3]]),
        ("gumbel", [10.0, 0.0]),  # forces selection of the first candidate
        ("normal", [[-0.3]]),     # reference at 0.5 - 0.3 = 0.2
        ("uniform", uniform),
    )


def test_mtm_scripted_acceptance_gb():
    target = ProductIID(Gaussian(0.0, 1.0), 1)
    cfg = KernelConfig(kernel="mtm", step=1.0, n_candidates=2, weight="gb")
    rng = _mtm_script(uniform=0.5)
    res = mtm_step(target, np.zeros(1), cfg, rng)
    assert rng.exhausted()
    assert res.chosen_index == 1
    assert math.isclose(res.alpha, MTM_ALPHA_GB, rel_tol=1e-13)
    assert res.accepted and res.next[0] == 0.5
    assert res.candidate_sq_jump == 0.25


def test_mtm_scripted_acceptance_lb():
    target = ProductIID(Gaussian(0.0, 1.0), 1)
    cfg = KernelConfig(kernel="mtm", step=1.0, n_candidates=2, weight="lb")
    rng = _mtm_script(uniform=0.95)  # above alpha, must reject
    res = mtm_step(target, np.zeros(1), cfg, rng)
    assert math.isclose(res.alpha, MTM_ALPHA_LB, rel_tol=1e-13)
    assert not res.accepted and res.next[0] == 0.0
    # the rejected candidate's jump is still reported
    assert res.candidate_sq_jump == 0.25


def _smtm_script(chart, x, h, uniform):
    z = sp_inverse(chart, x)
    cands = [[0.1, 0.2], [0.1, -0.1], [-0.2, 0.1]]
    raw_c = _tangent_raw_for(z, cands, chart, h)
    zj = sp_inverse(chart, np.asarray(cands[1]))
    raw_r = _tangent_raw_for(zj, [[0.5, 0.3], [-0.4, -0.2]], chart, h)
    return ScriptedRng(
        ("normal", raw_c),
        ("gumbel", [0.0, 10.0, 0.0]),  # forces the second candidate
        ("normal", raw_r),
        ("uniform", uniform),
    )


def test_smtm_scripted_acceptance_gb():
    chart = StereoChart(d=2, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 2)
    x = np.array([0.3, -0.1])
    cfg = KernelConfig(kernel="smtm", step=0.4, n_candidates=3, weight="gb", chart=chart)
    rng = _smtm_script(chart, x, 0.4, uniform=0.9)  # above alpha, must reject
    res = smtm_step(target, x, cfg, rng)
    assert rng.exhausted()
    assert res.chosen_index == 2
    assert math.isclose(res.alpha, SMTM_ALPHA_GB, rel_tol=1e-12)
    assert not res.accepted and np.array_equal(res.next, x)
    assert math.isclose(res.candidate_sq_jump, 0.04, rel_tol=1e-10)
    assert math.isclose(res.alpha2, res.selection_prob * res.alpha, rel_tol=0.0, abs_tol=5e-14)


def test_smtm_scripted_acceptance_lb():
    chart = StereoChart(d=2, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 2)
    x = np.array([0.3, -0.1])
    cfg = KernelConfig(kernel="smtm", step=0.4, n_candidates=3, weight="lb", chart=chart)
    rng = _smtm_script(chart, x, 0.4, uniform=0.5)  # below alpha, must accept
    res = smtm_step(target, x, cfg, rng)
    assert math.isclose(res.alpha, SMTM_ALPHA_LB, rel_tol=1e-12)
    assert res.accepted
    assert np.allclose(res.next, [0.1, -0.1], rtol=0.0, atol=1e-12)


def test_srwm_scripted_move():
    chart = StereoChart(d=1, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 1)
    x = np.array([1.0])
    z = sp_inverse(chart, x)
    cfg = KernelConfig(kernel="srwm", step=0.7, chart=chart)
    # log pi_S(t) = -t^2/2 + log(1 + t^2) on this chart
    want = math.exp((-0.5 * 0.04 + math.log(1.04)) - (-0.5 + math.log(2.0)))
    raw = _tangent_raw_for(z, [[0.2]], chart, 0.7)
    res = srwm_step(target, x, cfg, ScriptedRng(("normal", raw), ("uniform", 0.9)))
    assert math.isclose(res.alpha, want, rel_tol=1e-12)
    assert not res.accepted and np.array_equal(res.next, x)
    res = srwm_step(target, x, cfg, ScriptedRng(("normal", raw), ("uniform", 0.5)))
    assert res.accepted and math.isclose(res.next[0], 0.2, rel_tol=0.0, abs_tol=1e-12)


def test_draw_order_contract():
    # consuming the documented blocks by hand must leave the generator in
    # exactly the state the kernel leaves it in
    d = 3
    target = ProductIID(Gaussian(0.0, 1.0), d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))
    x = np.full(d, 0.7)
    cases = [
        (KernelConfig(kernel="rwm", step=0.5),
         [("normal", (d,)), ("uniform", None)]),
        (KernelConfig(kernel="mtm", step=0.5, n_candidates=4),
         [("normal", (4, d)), ("gumbel", 4), ("normal", (3, d)), ("uniform", None)]),
        (KernelConfig(kernel="mtm", step=0.5, n_candidates=1),
         [("normal", (1, d)), ("uniform", None)]),  # no gumbel at one try
        (KernelConfig(kernel="srwm", step=0.3, chart=chart),
         [("normal", (1, d + 1)), ("uniform", None)]),
        (KernelConfig(kernel="smtm", step=0.3, n_candidates=5, chart=chart),
         [("normal", (5, d + 1)), ("gumbel", 5), ("normal", (4, d + 1)), ("uniform", None)]),
        (KernelConfig(kernel="smtm", step=0.3, n_candidates=1, chart=chart),
         [("normal", (1, d + 1)), ("uniform", None)]),
        (KernelConfig(kernel="ideal", step=0.3, chart=chart, ideal_inner_m=16),
         [("normal", (16, d + 1)), ("gumbel", 16), ("normal", (16, d + 1)), ("uniform", None)]),
    ]
    for cfg, blocks in cases:
        r_kernel = chain_rng(101, 0)
        step(target, x, cfg, r_kernel)
        r_manual = chain_rng(101, 0)
        for kind, shape in blocks:
            if kind == "normal":
                r_manual.standard_normal(shape)
            elif kind == "gumbel":
                r_manual.gumbel(0.0, 1.0, shape)
            else:
                r_manual.random()
        assert r_kernel.bit_generator.state == r_manual.bit_generator.state, cfg.kernel


def test_guard_paths_reject_and_consume_budget():
    # from |x| = 3e6 on a unit chart the polar gap is ~2e-13, so tiny
    # tangent steps keep every proposal inside the pole guard
    chart = StereoChart(d=1, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 1)
    x = np.array([3e6])
    cases = [
        (KernelConfig(kernel="srwm", step=1e-9, chart=chart),
         [("normal", (1, 2)), ("uniform", None)]),
        (KernelConfig(kernel="smtm", step=1e-9, n_candidates=3, chart=chart),
         [("normal", (3, 2)), ("gumbel", 3), ("normal", (2, 2)), ("uniform", None)]),
        (KernelConfig(kernel="ideal", step=1e-9, chart=chart, ideal_inner_m=8),
         [("normal", (8, 2)), ("gumbel", 8), ("normal", (8, 2)), ("uniform", None)]),
    ]
    for cfg, blocks in cases:
        r_kernel = chain_rng(103, 0)
        res = step(target, x, cfg, r_kernel)
        assert not res.accepted and res.chosen_index is None, cfg.kernel
        assert res.alpha == 0.0 and res.candidate_sq_jump == 0.0
        assert np.array_equal(res.next, x)
        r_manual = chain_rng(103, 0)
        for kind, shape in blocks:
            if kind == "normal":
                r_manual.standard_normal(shape)
            elif kind == "gumbel":
                r_manual.gumbel(0.0, 1.0, shape)
            else:
                r_manual.random()
        assert r_kernel.bit_generator.state == r_manual.bit_generator.state, cfg.kernel


def test_smtm_masks_pole_candidates():
    # a candidate stuck at the pole gets -inf weight: even a huge gumbel
    # boost must not select it
    chart = StereoChart(d=1, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 1)
    x = np.array([3e6])
    z = sp_inverse(chart, x)
    # from the near-pole start only |u| > R plane points are reachable
    raw = np.vstack([np.zeros((1, 2)), _tangent_raw_for(z, [[5.0]], chart, 1.0)])
    rng = ScriptedRng(
        ("normal", raw),
        ("gumbel", [100.0, 0.0]),
        ("normal", np.zeros((1, 2))),
        ("uniform", 0.999),
    )
    cfg = KernelConfig(kernel="smtm", step=1.0, n_candidates=2, chart=chart)
    res = smtm_step(target, x, cfg, rng)
    assert res.chosen_index == 2
    # moving from the far tail to the core is uphill by billions of nats
    assert res.alpha == 1.0 and res.accepted
    assert math.isclose(res.next[0], 5.0, rel_tol=1e-9)


def test_select_candidate_behavior():
    rng = chain_rng(11, 0)
    lw = np.array([0.0, -np.inf, -np.inf])
    assert all(select_candidate(lw, rng) == 1 for _ in range(50))
    # gumbel-max is an exact categorical draw
    probs = np.array([0.2, 0.3, 0.5])
    counts = np.zeros(3)
    n = 20000
    for _ in range(n):
        counts[select_candidate(np.log(probs), rng) - 1] += 1
    se = np.sqrt(n * probs * (1.0 - probs))
    assert np.all(np.abs(counts - n * probs) <= 4.0 * se)
    with pytest.raises(AllWeightsDegenerate):
        select_candidate(np.array([-np.inf, -np.inf]), rng)
    with pytest.raises(DimensionMismatch):
        select_candidate(np.zeros((2, 2)), rng)
    with pytest.raises(DimensionMismatch):
        select_candidate(np.zeros(0), rng)


def test_joint_probability_identity():
    # alpha2 must equal selection_prob * alpha for every multi-try step
    rng = chain_rng(53, 0)
    d = 2
    target = ProductIID(Gaussian(0.0, 1.0), d)
    chart = StereoChart(d=d, radius=float(np.sqrt(d)))
    configs = (
        KernelConfig(kernel="mtm", step=0.8, n_candidates=4, weight="gb"),
        KernelConfig(kernel="mtm", step=0.8, n_candidates=4, weight="lb"),
        KernelConfig(kernel="smtm", step=0.5, n_candidates=4, weight="gb", chart=chart),
        KernelConfig(kernel="smtm", step=0.5, n_candidates=4, weight="lb", chart=chart),
    )
    for cfg in configs:
        x = np.zeros(d)
        worst = 0.0
        for _ in range(300):
            res = step(target, x, cfg, rng)
            assert 0.0 <= res.alpha <= 1.0
            assert 0.0 < res.selection_prob <= 1.0
            assert 0.0 <= res.alpha2 <= res.alpha + 5e-14
            worst = max(worst, abs(res.alpha2 - res.selection_prob * res.alpha))
            x = res.next
        assert worst <= 5e-14, cfg.weight


def test_ideal_step_near_zero_proposals():
    # all-zero tangent draws collapse every candidate onto the current
    # point; the estimated ratio must stay at 1 instead of degrading
    chart = StereoChart(d=2, radius=1.0)
    target = ProductIID(Gaussian(0.0, 1.0), 2)
    x = np.array([0.4, -0.2])
    m = 4
    rng = ScriptedRng(
        ("normal", np.zeros((m, 3))),
        ("gumbel", np.zeros(m)),
        ("normal", np.zeros((m, 3))),
        ("uniform", 0.999999),
    )
    cfg = KernelConfig(kernel="ideal", step=0.5, chart=chart, ideal_inner_m=m)
    res = ideal_step(target, x, cfg, rng)
    assert res.alpha >= 1.0 - 1e-9
    assert res.candidate_sq_jump <= 1e-20


class _UniformPullback:
    """Plane density whose sphere image is the uniform law on the sphere."""

    def __init__(self, d, radius):
        self.d = d
        self._r2 = radius * radius

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -self.d * np.log(self._r2 + np.sum(x * x, axis=-1))


def test_srwm_accepts_every_move_on_uniform_pullback():
    d = 3
    chart = StereoChart(d=d, radius=1.3)
    target = _UniformPullback(d, 1.3)
    rng = chain_rng(43, 0)
    x = np.array([0.4, -1.0, 2.0])
    cfg = KernelConfig(kernel="srwm", step=0.9, chart=chart)
    for _ in range(200):
        res = step(target, x, cfg, rng)
        # constant sphere density cancels up to projection rounding
        assert res.accepted and res.alpha >= 1.0 - 1e-12
        x = res.next


def test_kernel_config_validation():
    chart = StereoChart(d=2, radius=1.0)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="hmc", step=0.5)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="rwm", step=0.0)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="mtm", step=0.5, n_candidates=0)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="mtm", step=0.5, weight="greedy")
    with pytest.raises(ConfigError):
        KernelConfig(kernel="smtm", step=0.5)  # sphere kernel without chart
    with pytest.raises(ConfigError):
        KernelConfig(kernel="srwm", step=0.5, chart=chart, n_candidates=3)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="rwm", step=0.5, n_candidates=2)
    with pytest.raises(ConfigError):
        KernelConfig(kernel="ideal", step=0.5, chart=chart, ideal_inner_m=1)


def test_log_density_rows_ignore_worker_count(monkeypatch):
    target = ProductIID(Gaussian(0.0, 1.0), 3)
    x = chain_rng(59, 0).standard_normal((40, 3))
    want = target.log_density(x)
    for workers in ("1", "3", "7"):
        monkeypatch.setenv("SMTM_THREADS", workers)
        assert np.array_equal(eval_log_density_rows(target, x, threshold=8), want)
    monkeypatch.setenv("SMTM_THREADS", "not-a-number")
    with pytest.raises(ConfigError):
        eval_log_density_rows(target, x, threshold=8)
