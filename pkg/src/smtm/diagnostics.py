"""Chain traces and the estimators computed from them.

A `ChainTrace` consumes `StepResult`s one at a time.  Scalar summaries
(acceptance counts, squared jumps) are accumulated streamingly over the
post-burn-in steps; state rows are retained every `thinning` iterations
from step 0, either in full or as (first coordinate, norm) summaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTrace,
    OutOfRange,
    RetentionTooCoarse,
    TooFewSamples,
)

RETENTIONS = ("full", "summary")

# Distances below this are clipped before taking log10 in burn-in curves.
_LOG_DIST_FLOOR = 1e-12


@dataclass
class EsjdAccumulator:
    """Streaming mean of squared jumps; merging two equals pooling their steps."""

    count: int = 0
    total: float = 0.0

    def add(self, sq_jump: float) -> None:
        if sq_jump < 0.0:
            raise OutOfRange(f"squared jump must be nonnegative, got {sq_jump!r}")
        self.count += 1
        self.total += float(sq_jump)

    def merge(self, other: "EsjdAccumulator") -> None:
        self.count += other.count
        self.total += other.total

    def value(self) -> float:
        if self.count == 0:
            raise EmptyTrace("no jumps accumulated")
        return self.total / self.count


class ChainTrace:
    """Retained history and streaming summaries of one chain.

    Args:
        d: state dimension.
        retention: "full" keeps whole states; "summary" keeps first
            coordinate and norm only.
        burn_in: steps excluded from estimators (states are still retained).
        thinning: keep every thinning-th state row, starting at step 0.
    """

    def __init__(self, d: int, retention: str = "summary", burn_in: int = 0, thinning: int = 1):
        if d < 1:
            raise DimensionMismatch(f"dimension must be >= 1, got {d}")
        if retention not in RETENTIONS:
            raise OutOfRange(f"retention must be one of {RETENTIONS}, got {retention!r}")
        if burn_in < 0 or thinning < 1:
            raise OutOfRange(f"bad burn_in={burn_in!r} or thinning={thinning!r}")
        self.d = d
        self.retention = retention
        self.burn_in = burn_in
        self.thinning = thinning
        self._n = 0
        self._accept_post = 0
        self._steps_post = 0
        self._esjd = EsjdAccumulator()
        self._iters: list[int] = []
        self._accepted: list[bool] = []
        self._alphas: list[float] = []
        self._chosen: list[int] = []
        self._x1: list[float] = []
        self._norms: list[float] = []
        self._states: list[np.ndarray] = []

    @property
    def n_steps(self) -> int:
        return self._n

    def append(self, result) -> None:
        """Record one StepResult; `result.next` is the post-step state."""
        x = np.asarray(result.next, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"state shape {x.shape} does not match d={self.d}")
        t = self._n
        if t % self.thinning == 0:
            self._iters.append(t)
            self._accepted.append(bool(result.accepted))
            self._alphas.append(float(result.alpha))
            self._chosen.append(0 if result.chosen_index is None else int(result.chosen_index))
            self._x1.append(float(x[0]))
            self._norms.append(float(np.sqrt(x @ x)))
            if self.retention == "full":
                self._states.append(x.copy())
        if t >= self.burn_in:
            self._steps_post += 1
            self._accept_post += int(bool(result.accepted))
            self._esjd.add(result.candidate_sq_jump if result.accepted else 0.0)
        self._n += 1

    def retained(self) -> dict[str, np.ndarray]:
        """Retained rows as arrays: iter, accepted, alpha, chosen, x1, norm[, states]."""
        out = {
            "iter": np.asarray(self._iters, dtype=int),
            "accepted": np.asarray(self._accepted, dtype=bool),
            "alpha": np.asarray(self._alphas, dtype=float),
            "chosen": np.asarray(self._chosen, dtype=int),
            "x1": np.asarray(self._x1, dtype=float),
            "norm": np.asarray(self._norms, dtype=float),
        }
        if self.retention == "full":
            out["states"] = (
                np.asarray(self._states, dtype=float)
                if self._states
                else np.zeros((0, self.d))
            )
        return out

    def first_coords(self, post_burn_in: bool = True) -> np.ndarray:
        """Retained first coordinates, optionally restricted to post-burn-in."""
        it = np.asarray(self._iters, dtype=int)
        x1 = np.asarray(self._x1, dtype=float)
        return x1[it >= self.burn_in] if post_burn_in else x1

    def states(self, post_burn_in: bool = True) -> np.ndarray:
        if self.retention != "full":
            raise RetentionTooCoarse("full-state retention required")
        rows = np.asarray(self._states, dtype=float) if self._states else np.zeros((0, self.d))
        if not post_burn_in:
            return rows
        it = np.asarray(self._iters, dtype=int)
        return rows[it >= self.burn_in]

    def state_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Consecutive post-burn-in state pairs (X_t, X_{t+1}).

        Needs full retention and thinning 1, otherwise retained neighbors
        are not chain neighbors.
        """
        if self.retention != "full" or self.thinning != 1:
            raise RetentionTooCoarse("state pairs need full retention with thinning=1")
        rows = self.states(post_burn_in=True)
        if rows.shape[0] < 2:
            raise TooFewSamples("need at least two post-burn-in states")
        return rows[:-1], rows[1:]


def esjd(trace: ChainTrace) -> float:
    """Mean realized squared jump over post-burn-in steps (rejections count 0)."""
    return trace._esjd.value()


def esjd_accumulator(trace: ChainTrace) -> EsjdAccumulator:
    """The trace's streaming accumulator (for merging across chains)."""
    return trace._esjd


def acceptance_rate(trace: ChainTrace) -> float:
    """Fraction of post-burn-in steps that were accepted."""
    if trace._steps_post == 0:
        raise EmptyTrace("no post-burn-in steps")
    return trace._accept_post / trace._steps_post


def burnin_curve(
    trace: ChainTrace, reference: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """log10 distance to `reference` at every retained iteration.

    Distances are clipped below at 1e-12 before the log.  With summary
    retention only a zero reference is answerable (distance equals the
    stored norm).
    """
    it = np.asarray(trace._iters, dtype=int)
    if it.size == 0:
        raise EmptyTrace("no retained iterations")
    if reference is None:
        reference = np.zeros(trace.d)
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (trace.d,):
        raise DimensionMismatch(f"reference shape {reference.shape} does not match d={trace.d}")
    if trace.retention == "full":
        diff = trace.states(post_burn_in=False) - reference
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    elif not np.any(reference):
        dist = np.asarray(trace._norms, dtype=float)
    else:
        raise RetentionTooCoarse("nonzero reference needs full-state retention")
    return it, np.log10(np.maximum(dist, _LOG_DIST_FLOOR))


def ks_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov sup distance between samples and a CDF callable."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    if n < 1:
        raise TooFewSamples("need at least one sample")
    f = np.asarray(cdf(s), dtype=float)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))


def reversibility_stat(trace: ChainTrace, g, n_batches: int = 100) -> tuple[float, float]:
    """Mean and batch-means stderr of g(X_t, X_{t+1}) - g(X_{t+1}, X_t).

    Under stationarity and reversibility the mean is zero; a value several
    stderrs away is evidence against one of the two.
    """
    if n_batches < 2:
        raise OutOfRange(f"need at least two batches, got {n_batches!r}")
    xs, ys = trace.state_pairs()
    k = xs.shape[0]
    if k < 10 * n_batches:
        raise TooFewSamples(f"need >= {10 * n_batches} pairs for {n_batches} batches, have {k}")
    diffs = np.asarray(g(xs, ys), dtype=float) - np.asarray(g(ys, xs), dtype=float)
    usable = (k // n_batches) * n_batches
    bm = diffs[:usable].reshape(n_batches, -1).mean(axis=1)
    mean = float(diffs.mean())
    stderr = float(np.std(bm, ddof=1) / np.sqrt(n_batches))
    return mean, stderr
