"""Deterministic random-stream construction.

Every chain owns one `numpy.random.Generator` keyed by (seed, chain_id)
through `SeedSequence`, so runs are reproducible for any execution order
of the chains and adding chains never perturbs existing streams.
"""

from __future__ import annotations

import numpy as np


def chain_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Return the generator that drives chain `chain_id` of run `seed`.

    Args:
        seed: master seed of the run.
        chain_id: index of the chain within the run.

    Returns:
        Independent PCG64 generator; same (seed, chain_id) -> same stream.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chain_id)]))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Generators for chains 0..n-1 of run `seed`."""
    return [chain_rng(seed, i) for i in range(n)]
