"""Transition kernels: random-walk, multiple-try, and their sphere versions.

All kernels are pure functions (target, x, config, rng) -> StepResult; no
state is carried between steps except the chain position itself.  Candidate
log-densities go through one shared batched evaluator whose chunking never
changes results (row sums are independent of the split), so thread counts
affect speed only.

The draw order per step is frozen and documented here because seed-level
reproducibility depends on it:

    1. candidate normals, shape (N, dim)
    2. selection Gumbel noise, shape (N,), only when N > 1
    3. reference normals, shape (N-1, dim)
    4. one uniform for the accept test

With N = 1 the sphere multiple-try kernel consumes the stream exactly like
the sphere random-walk kernel and reproduces it bitwise; likewise the
multiple-try kernel reduces to the plain random walk.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import AllWeightsDegenerate, ConfigError, DimensionMismatch
from .geometry import (
    NORTH_POLE_GAP,
    SpherePoint,
    StereoChart,
    forward_batch,
    inverse_batch,
    propose_tangent_batch,
)
from .scaling import WEIGHT_KINDS, phi_log_parts

KERNEL_KINDS = ("rwm", "mtm", "srwm", "smtm", "ideal")
_SPHERE_KERNELS = ("srwm", "smtm", "ideal")


@dataclass(frozen=True)
class KernelConfig:
    """Static parameters of one kernel.

    Attributes:
        kernel: one of "rwm", "mtm", "srwm", "smtm", "ideal".
        step: proposal scale; plane standard deviation for rwm/mtm, tangent
            scale h for the sphere kernels.
        n_candidates: number of tries N (rwm and srwm require 1).
        weight: "gb" or "lb" candidate weighting.
        chart: projection chart; required for the sphere kernels.
        ideal_inner_m: inner sample size of the ideal-kernel estimator.
        parallel_threshold: minimum candidate rows before the thread pool
            is used for log-density evaluation.
    """

    kernel: str
    step: float
    n_candidates: int = 1
    weight: str = "gb"
    chart: StereoChart | None = None
    ideal_inner_m: int = 64
    parallel_threshold: int = 8

    def __post_init__(self):
        if self.kernel not in KERNEL_KINDS:
            raise ConfigError(f"kernel must be one of {KERNEL_KINDS}, got {self.kernel!r}")
        if not self.step > 0.0:
            raise ConfigError(f"step must be positive, got {self.step!r}")
        if self.n_candidates < 1:
            raise ConfigError(f"n_candidates must be >= 1, got {self.n_candidates!r}")
        if self.weight not in WEIGHT_KINDS:
            raise ConfigError(f"weight must be one of {WEIGHT_KINDS}, got {self.weight!r}")
        if self.kernel in _SPHERE_KERNELS and self.chart is None:
            raise ConfigError(f"kernel {self.kernel!r} needs a chart")
        if self.kernel in ("rwm", "srwm") and self.n_candidates != 1:
            raise ConfigError(f"kernel {self.kernel!r} is single-try; set n_candidates=1")
        if self.kernel == "ideal" and self.ideal_inner_m < 2:
            raise ConfigError(f"ideal_inner_m must be >= 2, got {self.ideal_inner_m!r}")
        if self.parallel_threshold < 1:
            raise ConfigError("parallel_threshold must be >= 1")


@dataclass(frozen=True)
class StepResult:
    """Outcome of one kernel step.

    Attributes:
        next: chain position after the step (the input x if rejected).
        accepted: whether the proposed move was taken.
        chosen_index: 1-based index of the selected candidate, or None when
            no candidate was usable.
        alpha: acceptance probability of the selected candidate, in [0, 1].
        candidate_sq_jump: squared plane distance of the selected candidate
            from the current state (0.0 when nothing was selectable).
        selection_prob: probability the selected candidate had of being
            selected (None for kernels without a selection stage notion).
        alpha2: joint select-and-accept probability of the selected
            candidate; equals selection_prob * alpha up to rounding.
    """

    next: np.ndarray
    accepted: bool
    chosen_index: int | None
    alpha: float
    candidate_sq_jump: float
    selection_prob: float | None = None
    alpha2: float | None = None


_pool: ThreadPoolExecutor | None = None
_pool_workers = 0
_pool_lock = threading.Lock()


def _worker_count() -> int:
    env = os.environ.get("SMTM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SMTM_THREADS must be an integer, got {env!r}") from None
    return min(4, os.cpu_count() or 1)


def _get_pool(workers: int) -> ThreadPoolExecutor:
    global _pool, _pool_workers
    with _pool_lock:
        if _pool is None or _pool_workers != workers:
            if _pool is not None:
                _pool.shutdown(wait=False)
            _pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="smtm-logpi")
            _pool_workers = workers
        return _pool


def eval_log_density_rows(target, x2d: np.ndarray, threshold: int = 8) -> np.ndarray:
    """target.log_density over rows of x2d, threaded above `threshold` rows.

    Each row's value is computed within a single chunk, so the output is
    bitwise independent of the worker count.
    """
    k = x2d.shape[0]
    if k == 0:
        return np.zeros(0)
    workers = _worker_count()
    if workers <= 1 or k < threshold:
        return np.atleast_1d(np.asarray(target.log_density(x2d), dtype=float))
    chunks = np.array_split(x2d, min(workers, k))
    pool = _get_pool(workers)
    parts = pool.map(
        lambda c: np.atleast_1d(np.asarray(target.log_density(c), dtype=float)), chunks
    )
    return np.concatenate(list(parts))


def _log_sphere_rows(
    chart: StereoChart, target, x2d: np.ndarray, gaps: np.ndarray, threshold: int
) -> np.ndarray:
    """Sphere log-density rows for pre-projected plane points with known gaps."""
    logpi = eval_log_density_rows(target, x2d, threshold)
    r2 = chart.radius * chart.radius
    return logpi + chart.d * (np.log(2.0 * r2) - np.log(gaps))


def select_candidate(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    """Sample an index proportionally to exp(log_weights); 1-based.

    Uses the Gumbel-max trick: argmax(log_weights + G_i) with iid standard
    Gumbel noise is an exact categorical draw.

    Raises:
        AllWeightsDegenerate: if every weight is zero (-inf log weight).
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size < 1:
        raise DimensionMismatch(f"log_weights must be a nonempty 1-d array, got {lw.shape}")
    if not np.any(lw > -np.inf):
        raise AllWeightsDegenerate("all candidate weights are zero")
    g = rng.gumbel(0.0, 1.0, lw.size)
    return int(np.argmax(lw + g)) + 1


def _finish(x, cands, j, r, s, weight, rng, log_w):
    """Common accept phase: phi-form acceptance probability plus bookkeeping."""
    xj, log_num, log_den = phi_log_parts(j + 1, r, s, weight)
    log_a = min(0.0, float(log_num - log_den))
    alpha = float(np.exp(log_a))
    u = rng.random()
    accepted = u < alpha
    sel = float(np.exp(log_w[j] - logsumexp(log_w)))
    alpha2 = float(np.exp(min(0.0, float(xj - max(float(log_num), float(log_den))))))
    jump = cands[j] - x
    return StepResult(
        next=cands[j] if accepted else x,
        accepted=bool(accepted),
        chosen_index=j + 1,
        alpha=alpha,
        candidate_sq_jump=float(jump @ jump),
        selection_prob=sel,
        alpha2=alpha2,
    )


def rwm_step(target, x: np.ndarray, step: float, rng: np.random.Generator) -> StepResult:
    """One plane random-walk Metropolis step with N(0, step^2 I) proposals."""
    if not step > 0.0:
        raise ConfigError(f"step must be positive, got {step!r}")
    x = np.asarray(x, dtype=float)
    y = x + step * rng.standard_normal(x.shape[0])
    logpi_x = float(eval_log_density_rows(target, x[None, :])[0])
    logpi_y = float(eval_log_density_rows(target, y[None, :])[0])
    log_a = min(0.0, logpi_y - logpi_x)
    alpha = float(np.exp(log_a))
    u = rng.random()
    accepted = u < alpha
    jump = y - x
    return StepResult(
        next=y if accepted else x,
        accepted=bool(accepted),
        chosen_index=1,
        alpha=alpha,
        candidate_sq_jump=float(jump @ jump),
        selection_prob=1.0,
        alpha2=alpha,
    )


def mtm_step(
    target, x: np.ndarray, config: KernelConfig, rng: np.random.Generator
) -> StepResult:
    """One plane multiple-try Metropolis step with independent reference draws."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    n = config.n_candidates
    raw = rng.standard_normal((n, d))
    cands = x + config.step * raw
    logpi_x = float(eval_log_density_rows(target, x[None, :], config.parallel_threshold)[0])
    logpi_c = eval_log_density_rows(target, cands, config.parallel_threshold)
    r = logpi_c - logpi_x
    log_w = r if config.weight == "gb" else 0.5 * r
    j = 0 if n == 1 else select_candidate(log_w, rng) - 1
    refs = cands[j] + config.step * rng.standard_normal((n - 1, d))
    logpi_refs = eval_log_density_rows(target, refs, config.parallel_threshold)
    s = logpi_refs - logpi_c[j]
    return _finish(x, cands, j, r, s, config.weight, rng, log_w)


def srwm_step(
    target, x: np.ndarray, config: KernelConfig, rng: np.random.Generator
) -> StepResult:
    """One stereographic random-walk step: tangent proposal, project, accept."""
    chart = config.chart
    x = np.asarray(x, dtype=float)
    coords0, gaps0 = inverse_batch(chart, x[None, :])
    z = SpherePoint(coords0[0], float(gaps0[0]))
    logpis_z = float(_log_sphere_rows(chart, target, x[None, :], gaps0, config.parallel_threshold)[0])
    raw = rng.standard_normal((1, chart.d + 1))
    coords, gaps = propose_tangent_batch(z, config.step, raw)
    if gaps[0] < NORTH_POLE_GAP:
        rng.random()
        return StepResult(x, False, None, 0.0, 0.0, None, 0.0)
    xhat = forward_batch(chart, coords, gaps)
    logpis_hat = float(_log_sphere_rows(chart, target, xhat, gaps, config.parallel_threshold)[0])
    log_a = min(0.0, logpis_hat - logpis_z)
    alpha = float(np.exp(log_a))
    u = rng.random()
    accepted = u < alpha
    jump = xhat[0] - x
    return StepResult(
        next=xhat[0] if accepted else x,
        accepted=bool(accepted),
        chosen_index=1,
        alpha=alpha,
        candidate_sq_jump=float(jump @ jump),
        selection_prob=1.0,
        alpha2=alpha,
    )


def smtm_step(
    target, x: np.ndarray, config: KernelConfig, rng: np.random.Generator
) -> StepResult:
    """One stereographic multiple-try step.

    Candidates whose projection falls inside the pole guard get zero weight;
    if none survive, the step consumes its full draw budget and rejects.
    """
    chart = config.chart
    x = np.asarray(x, dtype=float)
    n = config.n_candidates
    coords0, gaps0 = inverse_batch(chart, x[None, :])
    z = SpherePoint(coords0[0], float(gaps0[0]))
    logpis_z = float(_log_sphere_rows(chart, target, x[None, :], gaps0, config.parallel_threshold)[0])

    raw_c = rng.standard_normal((n, chart.d + 1))
    coords, gaps = propose_tangent_batch(z, config.step, raw_c)
    valid = gaps >= NORTH_POLE_GAP
    safe_gaps = np.where(valid, gaps, 1.0)
    xhat = forward_batch(chart, coords, safe_gaps)
    logpis_c = _log_sphere_rows(chart, target, xhat, safe_gaps, config.parallel_threshold)
    logpis_c[~valid] = -np.inf
    r = logpis_c - logpis_z
    log_w = r if config.weight == "gb" else 0.5 * r

    if n > 1:
        gum = rng.gumbel(0.0, 1.0, n)
        j = int(np.argmax(log_w + gum)) if valid.any() else None
    else:
        j = 0 if valid[0] else None

    raw_r = rng.standard_normal((n - 1, chart.d + 1))
    if j is None:
        rng.random()
        return StepResult(x, False, None, 0.0, 0.0, None, 0.0)

    zj = SpherePoint(coords[j], float(gaps[j]))
    ref_coords, ref_gaps = propose_tangent_batch(zj, config.step, raw_r)
    ref_valid = ref_gaps >= NORTH_POLE_GAP
    safe_ref_gaps = np.where(ref_valid, ref_gaps, 1.0)
    xstar = forward_batch(chart, ref_coords, safe_ref_gaps)
    logpis_refs = _log_sphere_rows(chart, target, xstar, safe_ref_gaps, config.parallel_threshold)
    logpis_refs[~ref_valid] = -np.inf
    s = logpis_refs - logpis_c[j]
    return _finish(x, xhat, j, r, s, config.weight, rng, log_w)


def ideal_step(
    target, x: np.ndarray, config: KernelConfig, rng: np.random.Generator
) -> StepResult:
    """One step of the infinite-try limit kernel, with estimated normalizers.

    The weighted candidate law is sampled by importance resampling from
    ideal_inner_m tangent draws, and the two normalizing constants in the
    acceptance ratio are replaced by their inner-sample averages.  When the
    selected point equals the current one the ratio is 1 by construction.
    """
    chart = config.chart
    m = config.ideal_inner_m
    scale = 1.0 if config.weight == "gb" else 0.5
    x = np.asarray(x, dtype=float)
    coords0, gaps0 = inverse_batch(chart, x[None, :])
    z = SpherePoint(coords0[0], float(gaps0[0]))
    logpis_z = float(_log_sphere_rows(chart, target, x[None, :], gaps0, config.parallel_threshold)[0])

    raw = rng.standard_normal((m, chart.d + 1))
    coords, gaps = propose_tangent_batch(z, config.step, raw)
    valid = gaps >= NORTH_POLE_GAP
    safe_gaps = np.where(valid, gaps, 1.0)
    xhat = forward_batch(chart, coords, safe_gaps)
    logpis_c = _log_sphere_rows(chart, target, xhat, safe_gaps, config.parallel_threshold)
    logpis_c[~valid] = -np.inf
    lw = scale * (logpis_c - logpis_z)
    gum = rng.gumbel(0.0, 1.0, m)
    raw2 = rng.standard_normal((m, chart.d + 1))
    if not valid.any():
        rng.random()
        return StepResult(x, False, None, 0.0, 0.0, None, None)
    log_c_z = float(logsumexp(lw)) - np.log(m)
    j = int(np.argmax(lw + gum))

    zj = SpherePoint(coords[j], float(gaps[j]))
    coords2, gaps2 = propose_tangent_batch(zj, config.step, raw2)
    valid2 = gaps2 >= NORTH_POLE_GAP
    safe_gaps2 = np.where(valid2, gaps2, 1.0)
    x2 = forward_batch(chart, coords2, safe_gaps2)
    logpis_2 = _log_sphere_rows(chart, target, x2, safe_gaps2, config.parallel_threshold)
    logpis_2[~valid2] = -np.inf
    log_c_hat = float(logsumexp(scale * (logpis_2 - logpis_c[j]))) - np.log(m)

    if np.array_equal(coords[j], z.coords):
        log_ratio = 0.0
    else:
        log_w_hat_z = scale * (logpis_z - logpis_c[j])
        log_w_z_hat = scale * (logpis_c[j] - logpis_z)
        log_ratio = (logpis_c[j] + log_w_hat_z + log_c_z) - (
            logpis_z + log_w_z_hat + log_c_hat
        )
    alpha = float(np.exp(min(0.0, log_ratio)))
    u = rng.random()
    accepted = u < alpha
    jump = xhat[j] - x
    return StepResult(
        next=xhat[j] if accepted else x,
        accepted=bool(accepted),
        chosen_index=j + 1,
        alpha=alpha,
        candidate_sq_jump=float(jump @ jump),
        selection_prob=None,
        alpha2=None,
    )


def step(target, x: np.ndarray, config: KernelConfig, rng: np.random.Generator) -> StepResult:
    """Dispatch one step of the kernel named in `config`."""
    if config.kernel == "rwm":
        return rwm_step(target, x, config.step, rng)
    if config.kernel == "mtm":
        return mtm_step(target, x, config, rng)
    if config.kernel == "srwm":
        return srwm_step(target, x, config, rng)
    if config.kernel == "smtm":
        return smtm_step(target, x, config, rng)
    return ideal_step(target, x, config, rng)
