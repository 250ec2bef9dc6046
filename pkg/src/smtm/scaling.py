"""High-dimensional scaling limits for multiple-try acceptance rules.

The limiting objects are functions phi1 (probability a fixed candidate is
accepted) and phi2 (probability it is both selected and accepted) of
Gaussian log-ratio vectors.  Under the limit, candidate log-ratios W_i and
reference log-ratios V_i are iid N(mu, sigma^2) with

    mu = (ell^2 / 2) (A - I),   sigma^2 = ell^2 (I - A),   A = 4*lam/(1+lam)^2,

where I is the component Fisher moment and lam the squared-radius ratio.
lam=None selects the flat-space limit A = 0, which recovers the classical
random-walk/multiple-try scaling.  Everything is computed in the log
domain; at N=1 both weightings collapse bitwise to min(0, x1), which the
kernels rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .errors import DimensionMismatch, NegativeVariance, OutOfRange

WEIGHT_KINDS = ("gb", "lb")

_MC_CHUNK_FLOATS = 1 << 21  # ~2M floats per work array per chunk


def _check_weight(weight: str) -> str:
    if weight not in WEIGHT_KINDS:
        raise OutOfRange(f"weight must be one of {WEIGHT_KINDS}, got {weight!r}")
    return weight


def phi_log_parts(j: int, x: np.ndarray, y: np.ndarray, weight: str):
    """Log numerator/denominator of the acceptance functions.

    Args:
        j: 1-based index of the distinguished candidate.
        x: candidate log-ratios, shape (..., n).
        y: reference log-ratios, shape (..., n-1).
        weight: "gb" (density-ratio weights) or "lb" (sqrt weights).

    Returns:
        (xj, log_num, log_den), each of shape (...).
    """
    _check_weight(weight)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    if n < 1:
        raise DimensionMismatch("need at least one candidate")
    if y.shape[-1] != n - 1 or y.shape[:-1] != x.shape[:-1]:
        raise DimensionMismatch(
            f"reference shape {y.shape} does not match candidates {x.shape}"
        )
    if not 1 <= j <= n:
        raise OutOfRange(f"candidate index {j} outside 1..{n}")
    xj = x[..., j - 1]
    if weight == "gb":
        num_terms = x
        tail = xj[..., None] + y
    else:
        num_terms = 0.5 * (x + xj[..., None])
        tail = 0.5 * (xj[..., None] + y)
    log_num = logsumexp(num_terms, axis=-1)
    den_terms = np.concatenate([tail, np.zeros(tail.shape[:-1] + (1,))], axis=-1)
    log_den = logsumexp(den_terms, axis=-1)
    return xj, log_num, log_den


def log_phi1(j: int, x: np.ndarray, y: np.ndarray, weight: str = "gb") -> np.ndarray:
    """log phi1_j = min(0, log_num - log_den); exact min(0, x1) at n=1."""
    _, log_num, log_den = phi_log_parts(j, x, y, weight)
    return np.minimum(0.0, log_num - log_den)


def log_phi2(j: int, x: np.ndarray, y: np.ndarray, weight: str = "gb") -> np.ndarray:
    """log phi2_j = xj - max(log_num, log_den).

    phi2 is the select-and-accept probability; both branches of its min
    share the numerator e^{xj}, hence the single max in the denominator.
    """
    xj, log_num, log_den = phi_log_parts(j, x, y, weight)
    return xj - np.maximum(log_num, log_den)


def phi1(j: int, x: np.ndarray, y: np.ndarray, weight: str = "gb") -> np.ndarray:
    """Acceptance probability of candidate j given it was selected."""
    return np.exp(log_phi1(j, x, y, weight))


def phi2(j: int, x: np.ndarray, y: np.ndarray, weight: str = "gb") -> np.ndarray:
    """Probability candidate j is selected and accepted."""
    return np.exp(np.minimum(log_phi2(j, x, y, weight), 0.0))


@dataclass(frozen=True)
class ScalingParams:
    """Parameters of the diffusion limit.

    Attributes:
        ell: step-scale parameter of the limit (> 0).
        lam: squared-radius ratio; None means the flat-space limit (A = 0).
        n_candidates: number of tries in the limit functional.
        fisher_i: component Fisher moment I (>= A required).
        weight: "gb" or "lb".
        d: ambient dimension; only needed to validate the ell <-> h map.
    """

    ell: float
    lam: float | None = 1.0
    n_candidates: int = 1
    fisher_i: float = 1.0
    weight: str = "gb"
    d: int | None = None

    def __post_init__(self):
        if not self.ell > 0.0:
            raise OutOfRange(f"ell must be positive, got {self.ell!r}")
        if self.lam is not None and not self.lam > 0.0:
            raise OutOfRange(f"lam must be positive or None, got {self.lam!r}")
        if self.n_candidates < 1:
            raise OutOfRange(f"n_candidates must be >= 1, got {self.n_candidates!r}")
        if not self.fisher_i > 0.0:
            raise OutOfRange(f"fisher_i must be positive, got {self.fisher_i!r}")
        _check_weight(self.weight)
        if self.fisher_i < self.big_a:
            raise NegativeVariance(
                f"fisher_i={self.fisher_i!r} below A={self.big_a!r}; "
                "limit variance would be negative"
            )
        if self.d is not None and self.lam is not None:
            # The curvature correction must stay below 1 for the h map.
            if self.ell**2 * self.big_a / (2.0 * self.d) >= 1.0:
                raise OutOfRange(
                    f"ell={self.ell!r} too large for d={self.d}, lam={self.lam!r}"
                )

    @property
    def big_a(self) -> float:
        return big_a(self.lam)


def big_a(lam: float | None) -> float:
    """Curvature factor A = 4*lam/(1+lam)^2; A = 0 in the flat-space limit."""
    if lam is None:
        return 0.0
    if not lam > 0.0:
        raise OutOfRange(f"lam must be positive or None, got {lam!r}")
    return 4.0 * lam / (1.0 + lam) ** 2


@dataclass(frozen=True)
class LimitLaw:
    """N(mu, sigma2) law of the limiting log-ratios; sigma2 == -2*mu."""

    mu: float
    sigma2: float


def limit_gaussian(params: ScalingParams) -> LimitLaw:
    """Mean and variance of the limiting candidate/reference log-ratios."""
    mu = 0.5 * params.ell**2 * (params.big_a - params.fisher_i)
    # Derived, not recomputed, so sigma2 == -2*mu holds exactly.
    return LimitLaw(mu=mu, sigma2=-2.0 * mu)


def ell_to_h(d: int, lam: float, ell: float) -> float:
    """Map the limit parameter ell to the tangent step scale h at dimension d."""
    a = _check_reparam(d, lam)
    if not ell >= 0.0:
        raise OutOfRange(f"ell must be nonnegative, got {ell!r}")
    t = ell * ell * a / (2.0 * d)
    if t >= 1.0:
        raise OutOfRange(f"ell={ell!r} exceeds the chart bound for d={d}, lam={lam!r}")
    c = 1.0 - t
    # 1/c^2 - 1 = t(2 - t)/c^2, formed without cancellation.
    return float(np.sqrt(t * (2.0 - t) / (c * c) / (d - 1)))


def h_to_ell(d: int, lam: float, h: float) -> float:
    """Inverse of ell_to_h."""
    a = _check_reparam(d, lam)
    if not h >= 0.0:
        raise OutOfRange(f"h must be nonnegative, got {h!r}")
    g = h * h * (d - 1)
    root = np.sqrt(1.0 + g)
    # 1 - 1/sqrt(1+g) = g / (sqrt(1+g) (sqrt(1+g) + 1)), cancellation-free.
    t = g / (root * (root + 1.0))
    return float(np.sqrt(2.0 * d * t / a))


def _check_reparam(d: int, lam: float) -> float:
    if d < 2:
        raise OutOfRange(f"reparametrization needs d >= 2, got {d!r}")
    if lam is None or not lam > 0.0:
        raise OutOfRange(f"reparametrization needs lam > 0, got {lam!r}")
    return big_a(lam)


def n1_total_acceptance(params: ScalingParams) -> float:
    """Closed-form total acceptance at one candidate: E[1 ^ e^W] = 2 Phi(-sigma/2).

    Valid because the limit law always satisfies mu = -sigma^2/2.
    """
    law = limit_gaussian(params)
    return float(2.0 * ndtr(-0.5 * np.sqrt(law.sigma2)))


def _mc_chunks(n_samples: int, n: int):
    if n_samples < 1:
        raise OutOfRange(f"n_samples must be >= 1, got {n_samples!r}")
    rows = max(1, _MC_CHUNK_FLOATS // max(n, 1))
    done = 0
    while done < n_samples:
        m = min(rows, n_samples - done)
        done += m
        yield m


def _mc_functional(
    params: ScalingParams, n_samples: int, rng: np.random.Generator, kind: str
) -> tuple[float, float]:
    """Monte Carlo mean and stderr of a per-sample limit statistic.

    kind "acceptance": N * phi2_1(W, V);   kind "esjd": N * ell^2 * phi1_1(W, V).
    """
    law = limit_gaussian(params)
    sig = np.sqrt(law.sigma2)
    n = params.n_candidates
    total = 0.0
    total_sq = 0.0
    for m in _mc_chunks(n_samples, n):
        w = law.mu + sig * rng.standard_normal((m, n))
        v = law.mu + sig * rng.standard_normal((m, n - 1))
        if kind == "acceptance":
            t = n * phi2(1, w, v, params.weight)
        elif kind == "esjd":
            t = n * params.ell**2 * phi1(1, w, v, params.weight)
        else:
            raise OutOfRange(f"unknown functional kind {kind!r}")
        total += float(t.sum())
        total_sq += float((t * t).sum())
    mean = total / n_samples
    var = max(0.0, total_sq / n_samples - mean * mean)
    return mean, float(np.sqrt(var / n_samples))


def mc_limit_total_acceptance(
    params: ScalingParams, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Estimate the limit total acceptance N * E[phi2_1]; returns (mean, stderr)."""
    return _mc_functional(params, n_samples, rng, "acceptance")


def mc_limit_esjd(
    params: ScalingParams, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Estimate the limit expected squared jump N * ell^2 * E[phi1_1]."""
    return _mc_functional(params, n_samples, rng, "esjd")


@dataclass(frozen=True)
class CurveResult:
    """Total acceptance across candidate counts under common random numbers."""

    n_values: tuple[int, ...]
    estimates: np.ndarray
    stderrs: np.ndarray
    # Paired statistics of consecutive differences v(n_{k+1}) - v(n_k).
    diff_estimates: np.ndarray
    diff_stderrs: np.ndarray


def acceptance_curve(
    params: ScalingParams,
    n_values,
    n_samples: int,
    rng: np.random.Generator,
) -> CurveResult:
    """Total-acceptance curve over candidate counts, sharing normals across counts.

    Each sample draws one (max_n + max_n - 1)-vector of normals and every
    count n uses prefixes of it, so consecutive differences are paired and
    their standard errors are far tighter than the marginal ones.
    """
    n_values = tuple(int(n) for n in n_values)
    if len(n_values) < 1 or any(n < 1 for n in n_values):
        raise OutOfRange(f"invalid candidate counts {n_values!r}")
    law = limit_gaussian(params)
    sig = np.sqrt(law.sigma2)
    max_n = max(n_values)
    k = len(n_values)
    sums = np.zeros(k)
    sq_sums = np.zeros(k)
    diff_sums = np.zeros(max(0, k - 1))
    diff_sq_sums = np.zeros(max(0, k - 1))
    for m in _mc_chunks(n_samples, 2 * max_n):
        eps_w = rng.standard_normal((m, max_n))
        eps_v = rng.standard_normal((m, max_n - 1))
        t_prev = None
        for i, n in enumerate(n_values):
            w = law.mu + sig * eps_w[:, :n]
            v = law.mu + sig * eps_v[:, : n - 1]
            t = n * phi2(1, w, v, params.weight)
            sums[i] += t.sum()
            sq_sums[i] += (t * t).sum()
            if i > 0:
                dt = t - t_prev
                diff_sums[i - 1] += dt.sum()
                diff_sq_sums[i - 1] += (dt * dt).sum()
            t_prev = t
    means = sums / n_samples
    variances = np.maximum(0.0, sq_sums / n_samples - means * means)
    diff_means = diff_sums / n_samples
    diff_vars = np.maximum(0.0, diff_sq_sums / n_samples - diff_means * diff_means)
    return CurveResult(
        n_values=n_values,
        estimates=means,
        stderrs=np.sqrt(variances / n_samples),
        diff_estimates=diff_means,
        diff_stderrs=np.sqrt(diff_vars / n_samples),
    )


@dataclass(frozen=True)
class OptimizeResult:
    """Grid optimum of the limit expected squared jump."""

    ell: float
    esjd: float
    esjd_stderr: float
    acceptance: float
    acceptance_stderr: float
    grid: np.ndarray
    esjd_curve: np.ndarray
    esjd_stderrs: np.ndarray
    acceptance_curve: np.ndarray
    acceptance_stderrs: np.ndarray


def optimize_ell(
    grid,
    n_samples: int,
    rng: np.random.Generator,
    *,
    lam: float | None = 1.0,
    n_candidates: int = 1,
    fisher_i: float = 1.0,
    weight: str = "gb",
    d: int | None = None,
) -> OptimizeResult:
    """Maximize the limit expected squared jump over a grid of ell values.

    Common random numbers across the grid: one batch of standard normals is
    rescaled for every ell, so the argmax is not noise-dominated even at
    moderate sample counts.

    Returns:
        OptimizeResult with the arg-max ell, the value there, and the total
        acceptance at that ell (plus the full curves).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise OutOfRange("grid must be a 1-d array with at least two points")
    plist = [
        ScalingParams(
            ell=float(e), lam=lam, n_candidates=n_candidates,
            fisher_i=fisher_i, weight=weight, d=d,
        )
        for e in grid
    ]
    n = n_candidates
    k = grid.size
    esjd_sums = np.zeros(k)
    esjd_sq = np.zeros(k)
    acc_sums = np.zeros(k)
    acc_sq = np.zeros(k)
    for m in _mc_chunks(n_samples, 2 * n):
        eps_w = rng.standard_normal((m, n))
        eps_v = rng.standard_normal((m, n - 1))
        for i, p in enumerate(plist):
            law = limit_gaussian(p)
            sig = np.sqrt(law.sigma2)
            w = law.mu + sig * eps_w
            v = law.mu + sig * eps_v
            xj, log_num, log_den = phi_log_parts(1, w, v, weight)
            t1 = n * p.ell**2 * np.exp(np.minimum(0.0, log_num - log_den))
            t2 = n * np.exp(np.minimum(0.0, xj - np.maximum(log_num, log_den)))
            esjd_sums[i] += t1.sum()
            esjd_sq[i] += (t1 * t1).sum()
            acc_sums[i] += t2.sum()
            acc_sq[i] += (t2 * t2).sum()
    esjd_means = esjd_sums / n_samples
    esjd_vars = np.maximum(0.0, esjd_sq / n_samples - esjd_means**2)
    acc_means = acc_sums / n_samples
    acc_vars = np.maximum(0.0, acc_sq / n_samples - acc_means**2)
    best = int(np.argmax(esjd_means))
    return OptimizeResult(
        ell=float(grid[best]),
        esjd=float(esjd_means[best]),
        esjd_stderr=float(np.sqrt(esjd_vars[best] / n_samples)),
        acceptance=float(acc_means[best]),
        acceptance_stderr=float(np.sqrt(acc_vars[best] / n_samples)),
        grid=grid,
        esjd_curve=esjd_means,
        esjd_stderrs=np.sqrt(esjd_vars / n_samples),
        acceptance_curve=acc_means,
        acceptance_stderrs=np.sqrt(acc_vars / n_samples),
    )
