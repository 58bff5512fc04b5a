"""Monte Carlo estimates with provenance, and deterministic replica scheduling."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = ["Estimate", "mc_estimate", "spawn_seeds", "run_chunked"]


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo mean with its standard error, sample count and seed."""

    value: float
    se: float
    n: int
    seed: int

    def agrees_with(self, other: float, k: float) -> bool:
        """True iff |value - other| <= k * se (SE-scaled comparison)."""
        return abs(self.value - other) <= k * self.se

    def combined_se(self, other: "Estimate") -> float:
        return float(np.hypot(self.se, other.se))


def mc_estimate(samples: np.ndarray, seed: int) -> Estimate:
    """Mean/SE estimate from i.i.d. replica samples."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return Estimate(float(samples.mean()), se, n, seed)


def spawn_seeds(seed: int, n: int) -> np.ndarray:
    """n uint64 replica seeds derived deterministically from a master seed."""
    return np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)


def run_chunked(worker, nreplicas: int, parallelism: int = 1) -> None:
    """Run ``worker(lo, hi)`` over a partition of range(nreplicas).

    Results must be written by the worker into per-replica slots, so the
    outcome is independent of the parallelism degree.  Workers release the GIL
    inside numba kernels, so plain threads suffice.
    """
    parallelism = max(1, int(parallelism))
    bounds = np.linspace(0, nreplicas, parallelism + 1).astype(int)
    if parallelism == 1:
        worker(0, nreplicas)
        return
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [
            pool.submit(worker, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for f in futures:
            f.result()
